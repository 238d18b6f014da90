//! C ABI over the glia3d pipeline.
//!
//! Objects cross the boundary as opaque pointers created by a `*_load`,
//! `*_from_buffer`, `glia3d_segment` or `glia3d_analyze` call and released
//! with the matching `*_free`. Every fallible function returns a
//! [`Glia3dStatus`]; on failure, [`glia3d_last_error`] describes the error
//! on the calling thread.
//!
//! Absent branch statistics are reported as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use glia3d::config::Threshold;
use glia3d::morphometry::{self, CellMorphology};
use glia3d::pipeline::{self, SegmentParams};
use glia3d::segmentation::{self, Connectivity, LabelVolume};
use glia3d::volume_io::{self, Dims, Spacing, VoxelGrid};
use glia3d::{Error, ErrorKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Glia3dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    InputError = 4,
    ProcessingError = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Intensity volume.
pub struct Glia3dVolume {
    grid: VoxelGrid,
}

/// Cell label volume.
pub struct Glia3dLabels {
    labels: LabelVolume,
}

/// Per-cell feature rows.
pub struct Glia3dTable {
    rows: Vec<CellMorphology>,
    failures: usize,
}

/// Segmentation settings.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Glia3dSegmentParams {
    /// Negative selects Otsu's threshold; otherwise a value in [0, 1].
    pub threshold: f64,
    /// 6, 18 or 26.
    pub connectivity: u32,
    pub min_voxels: usize,
    /// Split components above this volume in µm³; 0 or less disables.
    pub max_volume: f64,
    pub k_max: usize,
    pub seed: u64,
}

/// One feature row. Lengths are NaN when the cell has no branches.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Glia3dCellRow {
    pub cell_id: u32,
    pub centroid_x_um: f64,
    pub centroid_y_um: f64,
    pub centroid_z_um: f64,
    pub cell_volume_um3: f64,
    pub territory_volume_um3: f64,
    pub ramification_index: f64,
    pub n_endpoints: u32,
    pub n_branchpoints: u32,
    pub branch_len_avg_um: f64,
    pub branch_len_max_um: f64,
    pub branch_len_min_um: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: Glia3dStatus, msg: impl Into<String>) -> Glia3dStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> Glia3dStatus {
    let status = match e.kind() {
        ErrorKind::Config => Glia3dStatus::ConfigError,
        ErrorKind::Input => Glia3dStatus::InputError,
        ErrorKind::Processing => Glia3dStatus::ProcessingError,
    };
    fail(status, format!("{}: {e}", e.module()))
}

/// Run `f`, turning panics into [`Glia3dStatus::Panic`].
fn guard(f: impl FnOnce() -> Glia3dStatus) -> Glia3dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == Glia3dStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(Glia3dStatus::Panic, "internal panic"),
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Glia3dStatus> {
    if p.is_null() {
        return Err(fail(Glia3dStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(Glia3dStatus::InvalidArgument, "path is not valid UTF-8"))
}

fn spacing_arg(sx: f64, sy: f64, sz: f64) -> Result<Spacing, Glia3dStatus> {
    let s = Spacing::new(sx, sy, sz);
    if s.is_valid() {
        Ok(s)
    } else {
        Err(fail(
            Glia3dStatus::InvalidArgument,
            "spacing must be positive and finite",
        ))
    }
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(Glia3dStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn glia3d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn glia3d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Load a multi-page TIFF or a directory of slices (raw intensities).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_volume_load(
    path: *const c_char,
    sx: f64,
    sy: f64,
    sz: f64,
    out: *mut *mut Glia3dVolume,
) -> Glia3dStatus {
    guard(|| {
        non_null!(out);
        let path = try_status!(path_arg(path));
        let spacing = try_status!(spacing_arg(sx, sy, sz));
        match volume_io::load_stack(&path, spacing) {
            Ok((grid, _)) => {
                *out = Box::into_raw(Box::new(Glia3dVolume { grid }));
                Glia3dStatus::Ok
            }
            Err(e) => from_error(e.into()),
        }
    })
}

/// Copy `nx * ny * nz` intensities (x fastest, then y, then z).
///
/// # Safety
/// `data` must point to `nx * ny * nz` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_volume_from_buffer(
    data: *const f32,
    nx: usize,
    ny: usize,
    nz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
    out: *mut *mut Glia3dVolume,
) -> Glia3dStatus {
    guard(|| {
        non_null!(data, out);
        let spacing = try_status!(spacing_arg(sx, sy, sz));
        let Some(n) = nx.checked_mul(ny).and_then(|v| v.checked_mul(nz)) else {
            return fail(Glia3dStatus::InvalidArgument, "dimensions overflow");
        };
        let values = std::slice::from_raw_parts(data, n).to_vec();
        match VoxelGrid::new(Dims::new(nx, ny, nz), spacing, values) {
            Ok(grid) => {
                *out = Box::into_raw(Box::new(Glia3dVolume { grid }));
                Glia3dStatus::Ok
            }
            Err(e) => from_error(e.into()),
        }
    })
}

/// # Safety
/// `vol` must come from this library; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_volume_dims(
    vol: *const Glia3dVolume,
    nx: *mut usize,
    ny: *mut usize,
    nz: *mut usize,
) -> Glia3dStatus {
    guard(|| {
        non_null!(vol, nx, ny, nz);
        let d = (&*vol).grid.dims();
        *nx = d.nx;
        *ny = d.ny;
        *nz = d.nz;
        Glia3dStatus::Ok
    })
}

/// Rescale intensities to [0, 1] in place.
///
/// # Safety
/// `vol` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn glia3d_volume_normalize(vol: *mut Glia3dVolume) -> Glia3dStatus {
    guard(|| {
        non_null!(vol);
        (&mut *vol).grid = volume_io::normalize(&(&*vol).grid);
        Glia3dStatus::Ok
    })
}

/// Otsu threshold of a normalized volume.
///
/// # Safety
/// `vol` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_volume_otsu(
    vol: *const Glia3dVolume,
    out: *mut f64,
) -> Glia3dStatus {
    guard(|| {
        non_null!(vol, out);
        match segmentation::otsu_threshold(&(&*vol).grid) {
            Ok(t) => {
                *out = t;
                Glia3dStatus::Ok
            }
            Err(e) => from_error(e.into()),
        }
    })
}

/// # Safety
/// `vol` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn glia3d_volume_free(vol: *mut Glia3dVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

/// Threshold, label, filter and split a normalized volume.
///
/// # Safety
/// `vol` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_segment(
    vol: *const Glia3dVolume,
    params: *const Glia3dSegmentParams,
    out: *mut *mut Glia3dLabels,
) -> Glia3dStatus {
    guard(|| {
        non_null!(vol, params, out);
        let p = &*params;
        let connectivity = match Connectivity::from_count(p.connectivity) {
            Ok(c) => c,
            Err(e) => return fail(Glia3dStatus::InvalidArgument, e.to_string()),
        };
        let sp = SegmentParams {
            threshold: if p.threshold < 0.0 {
                Threshold::Auto
            } else {
                Threshold::Value(p.threshold)
            },
            connectivity,
            min_voxels: p.min_voxels,
            max_volume: (p.max_volume > 0.0).then_some(p.max_volume),
            k_max: p.k_max,
            seed: p.seed,
        };
        match pipeline::segment(&(&*vol).grid, &sp) {
            Ok(seg) => {
                *out = Box::into_raw(Box::new(Glia3dLabels { labels: seg.labels }));
                Glia3dStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `labels` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_labels_count(
    labels: *const Glia3dLabels,
    out: *mut u32,
) -> Glia3dStatus {
    guard(|| {
        non_null!(labels, out);
        *out = (&*labels).labels.count();
        Glia3dStatus::Ok
    })
}

/// # Safety
/// `labels` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn glia3d_labels_free(labels: *mut Glia3dLabels) {
    if !labels.is_null() {
        drop(Box::from_raw(labels));
    }
}

/// Measure every cell. Cells that cannot be measured are counted by
/// [`glia3d_table_failures`] and left out of the rows.
///
/// # Safety
/// `labels` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_analyze(
    labels: *const Glia3dLabels,
    out: *mut *mut Glia3dTable,
) -> Glia3dStatus {
    guard(|| {
        non_null!(labels, out);
        let (rows, failures) = morphometry::analyze_cells(&(&*labels).labels);
        *out = Box::into_raw(Box::new(Glia3dTable {
            rows,
            failures: failures.len(),
        }));
        Glia3dStatus::Ok
    })
}

/// # Safety
/// `table` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_table_len(
    table: *const Glia3dTable,
    out: *mut usize,
) -> Glia3dStatus {
    guard(|| {
        non_null!(table, out);
        *out = (&*table).rows.len();
        Glia3dStatus::Ok
    })
}

/// # Safety
/// `table` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_table_failures(
    table: *const Glia3dTable,
    out: *mut usize,
) -> Glia3dStatus {
    guard(|| {
        non_null!(table, out);
        *out = (&*table).failures;
        Glia3dStatus::Ok
    })
}

/// # Safety
/// `table` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glia3d_table_row(
    table: *const Glia3dTable,
    index: usize,
    out: *mut Glia3dCellRow,
) -> Glia3dStatus {
    guard(|| {
        non_null!(table, out);
        let Some(r) = (&*table).rows.get(index) else {
            return fail(
                Glia3dStatus::OutOfRange,
                format!("row {index} out of range"),
            );
        };
        *out = Glia3dCellRow {
            cell_id: r.cell_id,
            centroid_x_um: r.centroid_x_um,
            centroid_y_um: r.centroid_y_um,
            centroid_z_um: r.centroid_z_um,
            cell_volume_um3: r.cell_volume_um3,
            territory_volume_um3: r.territory_volume_um3,
            ramification_index: r.ramification_index,
            n_endpoints: r.n_endpoints,
            n_branchpoints: r.n_branchpoints,
            branch_len_avg_um: r.branch_len_avg_um.unwrap_or(f64::NAN),
            branch_len_max_um: r.branch_len_max_um.unwrap_or(f64::NAN),
            branch_len_min_um: r.branch_len_min_um.unwrap_or(f64::NAN),
        };
        Glia3dStatus::Ok
    })
}

/// Write the rows as a feature-table CSV, atomically.
///
/// # Safety
/// `table` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn glia3d_table_write_csv(
    table: *const Glia3dTable,
    path: *const c_char,
) -> Glia3dStatus {
    guard(|| {
        non_null!(table);
        let path = try_status!(path_arg(path));
        let mut buf = Vec::new();
        if let Err(e) = morphometry::write_morph_table(&(&*table).rows, &[], &mut buf) {
            return from_error(Error::io(&path, e));
        }
        match pipeline::write_atomic(&path, buf) {
            Ok(_) => Glia3dStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `table` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn glia3d_table_free(table: *mut Glia3dTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}
