//! Z-stack loading and writing.
//!
//! A stack is either a multi-page grayscale TIFF or a directory of
//! single-slice grayscale TIFF/PNG images. Slices in a directory are taken
//! in lexicographic byte order of their file names. Intensities are kept
//! raw on load; [`normalize`] maps them to `[0, 1]`.
//!
//! Voxels are stored x-fastest, then y, then z, so the linear index of
//! `(x, y, z)` is `x + nx * (y + ny * z)`.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("slice {slice} is {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    DimensionMismatch {
        slice: String,
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("unsupported image format: {0}")]
    Format(String),
    #[error("no slices found in {0}")]
    EmptyInput(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

impl VolumeError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        VolumeError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Voxel counts along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.nx;
        let rest = idx / self.nx;
        (x, rest % self.ny, rest / self.ny)
    }

    /// Linear index of the voxel at `(x, y, z) + (dx, dy, dz)`, if it lies
    /// inside the grid.
    #[inline]
    pub fn offset(&self, idx: usize, dx: i64, dy: i64, dz: i64) -> Option<usize> {
        let (x, y, z) = self.coords(idx);
        let x = x as i64 + dx;
        let y = y as i64 + dy;
        let z = z as i64 + dz;
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= self.nx || y >= self.ny || z >= self.nz {
            return None;
        }
        Some(self.index(x, y, z))
    }
}

/// Physical voxel pitch in microns along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing(pub [f64; 3]);

impl Spacing {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Self {
        Spacing([sx, sy, sz])
    }

    pub fn isotropic(s: f64) -> Self {
        Spacing([s, s, s])
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|s| s.is_finite() && *s > 0.0)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.0[0] * self.0[1] * self.0[2]
    }

    pub fn min_pitch(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_pitch(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Micron position of the center of voxel `(x, y, z)`.
    #[inline]
    pub fn center(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            (x as f64 + 0.5) * self.0[0],
            (y as f64 + 0.5) * self.0[1],
            (z as f64 + 0.5) * self.0[2],
        ]
    }
}

/// Scalar intensity volume with physical spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f32>,
}

impl VoxelGrid {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f32>) -> Result<Self, VolumeError> {
        if dims.nx == 0 || dims.ny == 0 || dims.nz == 0 {
            return Err(VolumeError::InvalidGrid(format!(
                "dimensions must be positive, got {}x{}x{}",
                dims.nx, dims.ny, dims.nz
            )));
        }
        if !spacing.is_valid() {
            return Err(VolumeError::InvalidGrid(format!(
                "spacing must be positive, got {:?}",
                spacing.0
            )));
        }
        if data.len() != dims.len() {
            return Err(VolumeError::InvalidGrid(format!(
                "{} intensities for {} voxels",
                data.len(),
                dims.len()
            )));
        }
        Ok(VoxelGrid {
            dims,
            spacing,
            data,
        })
    }

    pub fn zeros(dims: Dims, spacing: Spacing) -> Result<Self, VolumeError> {
        Self::new(dims, spacing, vec![0.0; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f32) {
        let i = self.dims.index(x, y, z);
        self.data[i] = v;
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Borrow slice `z` as a row-major `nx * ny` buffer.
    pub fn slice(&self, z: usize) -> &[f32] {
        let n = self.dims.nx * self.dims.ny;
        &self.data[z * n..(z + 1) * n]
    }
}

/// Provenance of a loaded stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackMeta {
    pub stack_id: String,
    pub slice_count: usize,
    pub bit_depth: u8,
    pub source_path: String,
}

struct RawSlice {
    name: String,
    width: usize,
    height: usize,
    bit_depth: u8,
    pixels: Vec<f32>,
}

/// Load a z-stack from a multi-page TIFF or a directory of slices.
///
/// Raw 8/16-bit intensities are preserved; call [`normalize`] to rescale.
pub fn load_stack(
    path: impl AsRef<Path>,
    spacing: Spacing,
) -> Result<(VoxelGrid, StackMeta), VolumeError> {
    let path = path.as_ref();
    let slices = if path.is_dir() {
        read_directory(path)?
    } else {
        read_multipage_tiff(path)?
    };
    assemble(path, slices, spacing)
}

fn assemble(
    path: &Path,
    slices: Vec<RawSlice>,
    spacing: Spacing,
) -> Result<(VoxelGrid, StackMeta), VolumeError> {
    let first = slices
        .first()
        .ok_or_else(|| VolumeError::EmptyInput(path.display().to_string()))?;
    let (w, h, depth) = (first.width, first.height, first.bit_depth);
    for s in &slices[1..] {
        if s.width != w || s.height != h {
            return Err(VolumeError::DimensionMismatch {
                slice: s.name.clone(),
                expected_w: w,
                expected_h: h,
                found_w: s.width,
                found_h: s.height,
            });
        }
        if s.bit_depth != depth {
            return Err(VolumeError::Format(format!(
                "slice {} is {}-bit but the stack is {}-bit",
                s.name, s.bit_depth, depth
            )));
        }
    }
    let nz = slices.len();
    let mut data = Vec::with_capacity(w * h * nz);
    for s in slices {
        data.extend_from_slice(&s.pixels);
    }
    let grid = VoxelGrid::new(Dims::new(w, h, nz), spacing, data)?;
    let stack_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let meta = StackMeta {
        stack_id,
        slice_count: nz,
        bit_depth: depth,
        source_path: path.display().to_string(),
    };
    Ok((grid, meta))
}

fn is_slice_file(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("tif") | Some("tiff") | Some("png")
    )
}

fn read_directory(dir: &Path) -> Result<Vec<RawSlice>, VolumeError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| VolumeError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_slice_file(p))
        .collect();
    // byte order of the file name, not locale collation
    files.sort_by(|a, b| {
        a.file_name()
            .map(|n| n.as_encoded_bytes().to_vec())
            .cmp(&b.file_name().map(|n| n.as_encoded_bytes().to_vec()))
    });
    if files.is_empty() {
        return Err(VolumeError::EmptyInput(dir.display().to_string()));
    }
    files.iter().map(|f| read_single_slice(f)).collect()
}

fn read_single_slice(path: &Path) -> Result<RawSlice, VolumeError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let img = image::ImageReader::open(path)
        .map_err(|e| VolumeError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| VolumeError::io(path, e))?
        .decode()
        .map_err(|e| VolumeError::Format(format!("{name}: {e}")))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (bit_depth, pixels) = match img {
        image::DynamicImage::ImageLuma8(buf) => {
            (8, buf.into_raw().into_iter().map(f32::from).collect())
        }
        image::DynamicImage::ImageLuma16(buf) => {
            (16, buf.into_raw().into_iter().map(f32::from).collect())
        }
        other => {
            return Err(VolumeError::Format(format!(
                "{name}: expected 8- or 16-bit grayscale, got {:?}",
                other.color()
            )))
        }
    };
    Ok(RawSlice {
        name,
        width,
        height,
        bit_depth,
        pixels,
    })
}

fn tiff_err(path: &Path, e: tiff::TiffError) -> VolumeError {
    match e {
        tiff::TiffError::IoError(io) => VolumeError::io(path, io),
        other => VolumeError::Format(format!("{}: {other}", path.display())),
    }
}

fn read_multipage_tiff(path: &Path) -> Result<Vec<RawSlice>, VolumeError> {
    let file = File::open(path).map_err(|e| VolumeError::io(path, e))?;
    let mut decoder = Decoder::new(BufReader::new(file)).map_err(|e| tiff_err(path, e))?;
    let mut slices = Vec::new();
    loop {
        let page = slices.len();
        let (w, h) = decoder.dimensions().map_err(|e| tiff_err(path, e))?;
        let color = decoder.colortype().map_err(|e| tiff_err(path, e))?;
        let bit_depth = match color {
            tiff::ColorType::Gray(8) => 8,
            tiff::ColorType::Gray(16) => 16,
            other => {
                return Err(VolumeError::Format(format!(
                    "page {page}: expected 8- or 16-bit grayscale, got {other:?}"
                )))
            }
        };
        let pixels: Vec<f32> = match decoder.read_image().map_err(|e| tiff_err(path, e))? {
            DecodingResult::U8(v) => v.into_iter().map(f32::from).collect(),
            DecodingResult::U16(v) => v.into_iter().map(f32::from).collect(),
            _ => {
                return Err(VolumeError::Format(format!(
                    "page {page}: unsupported sample format"
                )))
            }
        };
        slices.push(RawSlice {
            name: format!("page {page}"),
            width: w as usize,
            height: h as usize,
            bit_depth,
            pixels,
        });
        if !decoder.more_images() {
            break;
        }
        decoder.next_image().map_err(|e| tiff_err(path, e))?;
    }
    Ok(slices)
}

/// Linearly rescale intensities so the minimum maps to 0 and the maximum to 1.
///
/// A constant grid maps to all zeros.
pub fn normalize(grid: &VoxelGrid) -> VoxelGrid {
    let (lo, hi) = grid.min_max();
    let range = f64::from(hi) - f64::from(lo);
    let data = if range > 0.0 {
        grid.data
            .iter()
            .map(|&v| ((f64::from(v) - f64::from(lo)) / range) as f32)
            .collect()
    } else {
        vec![0.0; grid.data.len()]
    };
    VoxelGrid {
        dims: grid.dims,
        spacing: grid.spacing,
        data,
    }
}

/// Sample width used when writing a stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f32 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Write raw intensities as a multi-page grayscale TIFF, one page per z slice.
///
/// Values are rounded and clamped to the sample range; integer-valued grids
/// therefore round-trip exactly through [`load_stack`].
pub fn write_stack(
    grid: &VoxelGrid,
    depth: BitDepth,
    out: &mut (impl Write + std::io::Seek),
) -> Result<(), VolumeError> {
    let dims = grid.dims();
    let (w, h) = (dims.nx as u32, dims.ny as u32);
    let path = Path::new("<tiff writer>");
    let mut enc = TiffEncoder::new(out).map_err(|e| tiff_err(path, e))?;
    let max = depth.max_value();
    for z in 0..dims.nz {
        let slice = grid.slice(z);
        match depth {
            BitDepth::Eight => {
                let buf: Vec<u8> = slice
                    .iter()
                    .map(|&v| v.round().clamp(0.0, max) as u8)
                    .collect();
                enc.write_image::<colortype::Gray8>(w, h, &buf)
            }
            BitDepth::Sixteen => {
                let buf: Vec<u16> = slice
                    .iter()
                    .map(|&v| v.round().clamp(0.0, max) as u16)
                    .collect();
                enc.write_image::<colortype::Gray16>(w, h, &buf)
            }
        }
        .map_err(|e| tiff_err(path, e))?;
    }
    Ok(())
}

/// Write a `[0, 1]` grid as a 16-bit stack, scaling by 65535.
pub fn write_normalized_stack(
    grid: &VoxelGrid,
    out: &mut (impl Write + std::io::Seek),
) -> Result<(), VolumeError> {
    let scaled: Vec<f32> = grid
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round())
        .collect();
    let g = VoxelGrid::new(grid.dims(), grid.spacing(), scaled)?;
    write_stack(&g, BitDepth::Sixteen, out)
}
