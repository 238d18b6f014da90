//! Synthetic volumes with known ground truth.
//!
//! Solid phantoms (tubes, Y cells, spheres) have foreground intensity 1.0 on
//! a 0.0 background; blob phantoms carry Gaussian intensity profiles. Noise
//! is only ever added by [`add_noise`], after the shapes are rasterized.
//! Every generator is a deterministic function of its arguments and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume_io::{Dims, Spacing, VoxelGrid};

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("radius {radius} µm is below the voxel pitch {pitch} µm")]
    Resolution { radius: f64, pitch: f64 },
    #[error("invalid phantom argument: {0}")]
    InvalidArgument(String),
    #[error("could not place cell {placed} of {requested} after {attempts} attempts")]
    Capacity {
        placed: usize,
        requested: usize,
        attempts: usize,
    },
}

/// Empty voxels kept around each generated shape.
const MARGIN_VOXELS: usize = 3;
const PLACEMENT_ATTEMPTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Tube,
    Y,
    Blob,
    Sphere,
}

impl std::str::FromStr for CellKind {
    type Err = PhantomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tube" => Ok(CellKind::Tube),
            "y" => Ok(CellKind::Y),
            "blob" => Ok(CellKind::Blob),
            "sphere" => Ok(CellKind::Sphere),
            other => Err(PhantomError::InvalidArgument(format!(
                "unknown cell kind '{other}' (tube|y|blob|sphere)"
            ))),
        }
    }
}

/// Ground truth for one generated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCell {
    pub kind: CellKind,
    /// Linear voxel indices in raster order.
    pub voxels: Vec<usize>,
    /// Mean of the mask's voxel centers, in microns.
    pub centroid_um: [f64; 3],
    pub endpoints: usize,
    pub branch_points: usize,
    /// Expected total skeleton length in microns.
    pub skeleton_length_um: f64,
    /// Expected length of each individual branch in microns.
    pub branch_length_um: f64,
    /// Relative tolerance band on the two lengths.
    pub length_tolerance: f64,
    /// Generating center for blob cells.
    pub source_center_um: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomTruth {
    pub dims: Dims,
    pub spacing: Spacing,
    pub cells: Vec<TruthCell>,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Components a threshold should produce before any splitting.
    pub expected_components: usize,
}

impl PhantomTruth {
    pub fn foreground_count(&self) -> usize {
        self.cells.iter().map(|c| c.voxels.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Primitive {
    /// Flat-ended solid cylinder.
    Cylinder {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
    /// Cylinder with hemispherical caps.
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
    Gaussian {
        center: [f64; 3],
        sigma: f64,
    },
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn add_scaled(a: [f64; 3], d: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]
}

/// Closest distance between segments `p1q1` and `p2q2`.
fn segment_distance(p1: [f64; 3], q1: [f64; 3], p2: [f64; 3], q2: [f64; 3]) -> f64 {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(d1, d1);
    let e = dot(d2, d2);
    let f = dot(d2, r);
    let eps = 1e-12;
    let (s, t);
    if a <= eps && e <= eps {
        return dot(r, r).sqrt();
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = add_scaled(p1, d1, s);
    let c2 = add_scaled(p2, d2, t);
    let d = sub(c1, c2);
    dot(d, d).sqrt()
}

impl Primitive {
    /// Inclusion for solid primitives; Gaussian intensity otherwise.
    fn value(&self, p: [f64; 3]) -> f64 {
        const EPS: f64 = 1e-9;
        match *self {
            Primitive::Cylinder { a, b, radius } => {
                let axis = sub(b, a);
                let len2 = dot(axis, axis);
                let t = dot(sub(p, a), axis) / len2;
                if !(-EPS..=1.0 + EPS).contains(&t) {
                    return 0.0;
                }
                let foot = add_scaled(a, axis, t);
                let d = sub(p, foot);
                if dot(d, d) <= radius * radius + EPS {
                    1.0
                } else {
                    0.0
                }
            }
            Primitive::Capsule { a, b, radius } => {
                if segment_distance(p, p, a, b) <= radius + EPS {
                    1.0
                } else {
                    0.0
                }
            }
            Primitive::Gaussian { center, sigma } => {
                let d = sub(p, center);
                (-dot(d, d) / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// Segment and radius of a capsule enclosing the primitive's support.
    fn hull_capsule(&self) -> ([f64; 3], [f64; 3], f64) {
        match *self {
            Primitive::Cylinder { a, b, radius } | Primitive::Capsule { a, b, radius } => {
                (a, b, radius)
            }
            Primitive::Gaussian { center, sigma } => (center, center, blob_radius(sigma)),
        }
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let (a, b, r) = self.hull_capsule();
        let r = match self {
            // the Gaussian tail decays below 1e-4 here
            Primitive::Gaussian { sigma, .. } => 4.3 * sigma,
            _ => r,
        };
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..3 {
            lo[i] = a[i].min(b[i]) - r;
            hi[i] = a[i].max(b[i]) + r;
        }
        (lo, hi)
    }
}

/// Radius at which a unit Gaussian blob falls to half its peak; this is the
/// extent of a blob's truth mask.
fn blob_radius(sigma: f64) -> f64 {
    sigma * (2.0 * std::f64::consts::LN_2).sqrt()
}

struct Shape {
    kind: CellKind,
    parts: Vec<Primitive>,
    endpoints: usize,
    branch_points: usize,
    skeleton_length_um: f64,
    branch_length_um: f64,
    length_tolerance: f64,
    source_center: Option<[f64; 3]>,
}

impl Shape {
    fn value(&self, p: [f64; 3]) -> f64 {
        self.parts.iter().map(|q| q.value(p)).fold(0.0, f64::max)
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.parts {
            let (l, h) = p.bounds();
            for i in 0..3 {
                lo[i] = lo[i].min(l[i]);
                hi[i] = hi[i].max(h[i]);
            }
        }
        (lo, hi)
    }

    fn gap_to(&self, other: &Shape) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.parts {
            let (a1, b1, r1) = p.hull_capsule();
            for q in &other.parts {
                let (a2, b2, r2) = q.hull_capsule();
                best = best.min(segment_distance(a1, b1, a2, b2) - r1 - r2);
            }
        }
        best
    }

    fn is_gaussian(&self) -> bool {
        matches!(self.parts.first(), Some(Primitive::Gaussian { .. }))
    }
}

fn tube_shape(start: [f64; 3], axis: usize, length: f64, radius: f64) -> Shape {
    let mut end = start;
    end[axis] += length;
    Shape {
        kind: CellKind::Tube,
        parts: vec![Primitive::Cylinder {
            a: start,
            b: end,
            radius,
        }],
        endpoints: 2,
        branch_points: 0,
        skeleton_length_um: length - 2.0 * radius,
        branch_length_um: length - 2.0 * radius,
        length_tolerance: 0.10,
        source_center: None,
    }
}

/// Arm directions of a Y cell lying in the plane spanned by axes `u` and `v`.
fn y_directions(u: usize, v: usize) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, deg) in [0.0f64, 120.0, 240.0].iter().enumerate() {
        let (s, c) = deg.to_radians().sin_cos();
        out[i][u] = c;
        out[i][v] = s;
    }
    out
}

fn y_shape(center: [f64; 3], plane: (usize, usize), arm_length: f64, radius: f64) -> Shape {
    let parts = y_directions(plane.0, plane.1)
        .iter()
        .map(|d| Primitive::Capsule {
            a: center,
            b: add_scaled(center, *d, arm_length),
            radius,
        })
        .collect();
    Shape {
        kind: CellKind::Y,
        parts,
        endpoints: 3,
        branch_points: 1,
        skeleton_length_um: 3.0 * arm_length,
        branch_length_um: arm_length,
        length_tolerance: 0.15,
        source_center: None,
    }
}

fn sphere_shape(center: [f64; 3], radius: f64) -> Shape {
    Shape {
        kind: CellKind::Sphere,
        parts: vec![Primitive::Capsule {
            a: center,
            b: center,
            radius,
        }],
        endpoints: 0,
        branch_points: 0,
        skeleton_length_um: 0.0,
        branch_length_um: 0.0,
        length_tolerance: 0.0,
        source_center: Some(center),
    }
}

fn blob_shape(center: [f64; 3], sigma: f64) -> Shape {
    Shape {
        kind: CellKind::Blob,
        parts: vec![Primitive::Gaussian { center, sigma }],
        endpoints: 0,
        branch_points: 0,
        skeleton_length_um: 0.0,
        branch_length_um: 0.0,
        length_tolerance: 0.0,
        source_center: Some(center),
    }
}

fn check_resolution(radius: f64, spacing: &Spacing) -> Result<(), PhantomError> {
    if !spacing.is_valid() {
        return Err(PhantomError::InvalidArgument(format!(
            "spacing must be positive, got {:?}",
            spacing.0
        )));
    }
    let pitch = spacing.max_pitch();
    if !(radius >= pitch) {
        return Err(PhantomError::Resolution { radius, pitch });
    }
    Ok(())
}

/// Rasterize shapes into a grid. Gaussian shapes add their intensity
/// (clamped to 1) and own the voxels at or above half peak; solid shapes
/// own every voxel they cover.
fn rasterize(
    dims: Dims,
    spacing: Spacing,
    shapes: &[Shape],
    seed: u64,
) -> (VoxelGrid, PhantomTruth) {
    let mut data = vec![0.0f32; dims.len()];
    let mut owner = vec![usize::MAX; dims.len()];
    let mut best_term = vec![0.0f64; dims.len()];
    for (si, shape) in shapes.iter().enumerate() {
        let (lo, hi) = shape.bounds();
        let range = |axis: usize, n: usize| {
            let s = spacing.0[axis];
            let a = ((lo[axis] / s) - 1.0).floor().max(0.0) as usize;
            let b = (((hi[axis] / s) + 1.0).ceil().max(0.0) as usize).min(n);
            a..b
        };
        for z in range(2, dims.nz) {
            for y in range(1, dims.ny) {
                for x in range(0, dims.nx) {
                    let p = spacing.center(x, y, z);
                    let v = shape.value(p);
                    if v <= 0.0 {
                        continue;
                    }
                    let i = dims.index(x, y, z);
                    if shape.is_gaussian() {
                        data[i] = (f64::from(data[i]) + v).min(1.0) as f32;
                        if v >= 0.5 && v > best_term[i] {
                            best_term[i] = v;
                            owner[i] = si;
                        }
                    } else {
                        data[i] = 1.0;
                        if owner[i] == usize::MAX {
                            owner[i] = si;
                        }
                    }
                }
            }
        }
    }
    let mut voxels = vec![Vec::new(); shapes.len()];
    for (i, &o) in owner.iter().enumerate() {
        if o != usize::MAX {
            voxels[o].push(i);
        }
    }
    let cells = shapes
        .iter()
        .zip(voxels)
        .map(|(s, vox)| {
            let mut c = [0.0; 3];
            for &v in &vox {
                let (x, y, z) = dims.coords(v);
                let p = spacing.center(x, y, z);
                for a in 0..3 {
                    c[a] += p[a];
                }
            }
            let n = vox.len().max(1) as f64;
            TruthCell {
                kind: s.kind,
                voxels: vox,
                centroid_um: [c[0] / n, c[1] / n, c[2] / n],
                endpoints: s.endpoints,
                branch_points: s.branch_points,
                skeleton_length_um: s.skeleton_length_um,
                branch_length_um: s.branch_length_um,
                length_tolerance: s.length_tolerance,
                source_center_um: s.source_center,
            }
        })
        .collect::<Vec<_>>();
    let grid = VoxelGrid::new(dims, spacing, data).expect("phantom dims are positive");
    let truth = PhantomTruth {
        dims,
        spacing,
        expected_components: cells.len(),
        cells,
        noise_sigma: 0.0,
        seed,
    };
    (grid, truth)
}

fn voxels_for(extent: f64, pitch: f64) -> usize {
    (extent / pitch - 1e-9).ceil().max(1.0) as usize
}

/// Axis-aligned solid cylinder along x, centered in y and z.
pub fn make_tube(
    length: f64,
    radius: f64,
    spacing: Spacing,
) -> Result<(VoxelGrid, PhantomTruth), PhantomError> {
    check_resolution(radius, &spacing)?;
    if !(length > 2.0 * radius) {
        return Err(PhantomError::InvalidArgument(format!(
            "tube length {length} must exceed twice the radius {radius}"
        )));
    }
    let s = spacing.0;
    let nx = voxels_for(length, s[0]) + 2 * MARGIN_VOXELS;
    let ny = 2 * (voxels_for(radius, s[1]) + MARGIN_VOXELS) + 1;
    let nz = 2 * (voxels_for(radius, s[2]) + MARGIN_VOXELS) + 1;
    let start = [
        MARGIN_VOXELS as f64 * s[0],
        (ny / 2) as f64 * s[1] + 0.5 * s[1],
        (nz / 2) as f64 * s[2] + 0.5 * s[2],
    ];
    let shape = tube_shape(start, 0, length, radius);
    Ok(rasterize(Dims::new(nx, ny, nz), spacing, &[shape], 0))
}

/// Three capsule arms of equal length meeting at one junction, 120° apart
/// in the xy plane.
pub fn make_y_cell(
    arm_length: f64,
    radius: f64,
    spacing: Spacing,
) -> Result<(VoxelGrid, PhantomTruth), PhantomError> {
    check_resolution(radius, &spacing)?;
    if !(arm_length > 2.0 * radius) {
        return Err(PhantomError::InvalidArgument(format!(
            "arm length {arm_length} must exceed twice the radius {radius}"
        )));
    }
    let s = spacing.0;
    let reach = arm_length + radius;
    let n = |pitch: f64| 2 * (voxels_for(reach, pitch) + MARGIN_VOXELS) + 1;
    let (nx, ny) = (n(s[0]), n(s[1]));
    let nz = 2 * (voxels_for(radius, s[2]) + MARGIN_VOXELS) + 1;
    let center = spacing.center(nx / 2, ny / 2, nz / 2);
    let shape = y_shape(center, (0, 1), arm_length, radius);
    Ok(rasterize(Dims::new(nx, ny, nz), spacing, &[shape], 0))
}

/// Solid ball centered on a voxel center.
pub fn make_sphere(
    radius: f64,
    spacing: Spacing,
) -> Result<(VoxelGrid, PhantomTruth), PhantomError> {
    check_resolution(radius, &spacing)?;
    let s = spacing.0;
    let n = |pitch: f64| 2 * (voxels_for(radius, pitch) + MARGIN_VOXELS) + 1;
    let dims = Dims::new(n(s[0]), n(s[1]), n(s[2]));
    let center = spacing.center(dims.nx / 2, dims.ny / 2, dims.nz / 2);
    Ok(rasterize(dims, spacing, &[sphere_shape(center, radius)], 0))
}

/// Two Gaussian intensity blobs along x.
///
/// `merged` states the intended topology: it requires `separation < 3 σ`
/// (one component after thresholding), otherwise `separation ≥ 6 σ` (two
/// components). Blob centers are snapped to voxel centers.
pub fn make_blob_pair(
    separation: f64,
    sigma: f64,
    spacing: Spacing,
    merged: bool,
) -> Result<(VoxelGrid, PhantomTruth), PhantomError> {
    check_resolution(sigma, &spacing)?;
    if !(separation > 0.0) {
        return Err(PhantomError::InvalidArgument(
            "blob separation must be positive".into(),
        ));
    }
    if merged && separation >= 3.0 * sigma {
        return Err(PhantomError::InvalidArgument(format!(
            "merged blobs need separation < 3 sigma ({}), got {separation}",
            3.0 * sigma
        )));
    }
    if !merged && separation < 6.0 * sigma {
        return Err(PhantomError::InvalidArgument(format!(
            "separated blobs need separation >= 6 sigma ({}), got {separation}",
            6.0 * sigma
        )));
    }
    let s = spacing.0;
    let sep_vox = (separation / s[0]).round().max(1.0) as usize;
    let pad = |pitch: f64| voxels_for(4.3 * sigma, pitch) + MARGIN_VOXELS;
    let nx = 2 * pad(s[0]) + sep_vox + 1;
    let ny = 2 * pad(s[1]) + 1;
    let nz = 2 * pad(s[2]) + 1;
    let c1 = spacing.center(pad(s[0]), ny / 2, nz / 2);
    let c2 = spacing.center(pad(s[0]) + sep_vox, ny / 2, nz / 2);
    let shapes = [blob_shape(c1, sigma), blob_shape(c2, sigma)];
    let (grid, mut truth) = rasterize(Dims::new(nx, ny, nz), spacing, &shapes, 0);
    truth.expected_components = if merged { 1 } else { 2 };
    Ok((grid, truth))
}

/// Parameters of a multi-cell scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub k: usize,
    pub min_gap: f64,
    pub kind: CellKind,
    pub seed: u64,
    pub dims: Dims,
    pub spacing: Spacing,
    pub tube_length: f64,
    pub radius: f64,
    pub arm_length: f64,
    pub blob_sigma: f64,
}

impl SceneSpec {
    pub fn new(k: usize, min_gap: f64, kind: CellKind, seed: u64) -> Self {
        SceneSpec {
            k,
            min_gap,
            kind,
            seed,
            dims: Dims::new(128, 128, 128),
            spacing: Spacing::isotropic(0.5),
            tube_length: 20.0,
            radius: 1.0,
            arm_length: 10.0,
            blob_sigma: 2.0,
        }
    }
}

/// `k` non-overlapping cells placed at random with pairwise surface gap at
/// least `min_gap`. Tubes and Y cells are aligned with the grid axes.
pub fn make_scene(spec: &SceneSpec) -> Result<(VoxelGrid, PhantomTruth), PhantomError> {
    let spacing = spec.spacing;
    let dims = spec.dims;
    if dims.is_empty() {
        return Err(PhantomError::InvalidArgument("scene grid is empty".into()));
    }
    if !(spec.min_gap >= 0.0) {
        return Err(PhantomError::InvalidArgument(
            "min_gap must be non-negative".into(),
        ));
    }
    match spec.kind {
        CellKind::Blob => check_resolution(spec.blob_sigma, &spacing)?,
        _ => check_resolution(spec.radius, &spacing)?,
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let extent = [
        dims.nx as f64 * spacing.0[0],
        dims.ny as f64 * spacing.0[1],
        dims.nz as f64 * spacing.0[2],
    ];
    let margin: Vec<f64> = spacing.0.iter().map(|s| 2.0 * s).collect();
    let mut shapes: Vec<Shape> = Vec::with_capacity(spec.k);
    let mut attempts = 0;
    while shapes.len() < spec.k {
        if attempts >= PLACEMENT_ATTEMPTS {
            return Err(PhantomError::Capacity {
                placed: shapes.len(),
                requested: spec.k,
                attempts,
            });
        }
        attempts += 1;
        // snap anchors to voxel centers so solid shapes rasterize symmetrically
        let mut anchor = [0.0; 3];
        for a in 0..3 {
            let n = [dims.nx, dims.ny, dims.nz][a];
            let i = rng.random_range(0..n);
            anchor[a] = (i as f64 + 0.5) * spacing.0[a];
        }
        let shape = match spec.kind {
            CellKind::Tube => {
                let axis = rng.random_range(0..3usize);
                let mut start = anchor;
                // start on a voxel boundary along the axis
                start[axis] -= 0.5 * spacing.0[axis];
                tube_shape(start, axis, spec.tube_length, spec.radius)
            }
            CellKind::Y => {
                let planes = [(0, 1), (1, 2), (0, 2), (1, 0), (2, 1), (2, 0)];
                let plane = planes[rng.random_range(0..planes.len())];
                y_shape(anchor, plane, spec.arm_length, spec.radius)
            }
            CellKind::Sphere => sphere_shape(anchor, spec.radius),
            CellKind::Blob => blob_shape(anchor, spec.blob_sigma),
        };
        let (lo, hi) = match spec.kind {
            // blobs only need their truth mask inside the grid
            CellKind::Blob => {
                let r = blob_radius(spec.blob_sigma);
                (anchor.map(|c| c - r), anchor.map(|c| c + r))
            }
            _ => shape.bounds(),
        };
        let inside = (0..3).all(|a| lo[a] >= margin[a] && hi[a] <= extent[a] - margin[a]);
        if !inside {
            continue;
        }
        if shapes.iter().all(|s| s.gap_to(&shape) >= spec.min_gap) {
            shapes.push(shape);
        }
    }
    Ok(rasterize(dims, spacing, &shapes, spec.seed))
}

/// Add seeded Gaussian noise and clamp to `[0, 1]`.
pub fn add_noise(grid: &VoxelGrid, sigma: f64, seed: u64) -> Result<VoxelGrid, PhantomError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(PhantomError::InvalidArgument(format!(
            "noise sigma must be a non-negative number, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(grid.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = grid
        .data()
        .iter()
        .map(|&v| (f64::from(v) + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32)
        .collect();
    Ok(VoxelGrid::new(grid.dims(), grid.spacing(), data).expect("same geometry"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{binarize, label_components, Connectivity};

    fn components(grid: &VoxelGrid, threshold: f64) -> u32 {
        label_components(&binarize(grid, threshold).unwrap(), Connectivity::TwentySix).count()
    }

    fn assert_partition(grid: &VoxelGrid, truth: &PhantomTruth) {
        let mut seen = vec![false; grid.dims().len()];
        for c in &truth.cells {
            for &v in &c.voxels {
                assert!(!seen[v], "voxel {v} in two cells");
                seen[v] = true;
            }
        }
    }

    #[test]
    fn tube_is_one_component_with_expected_volume() {
        let sp = Spacing::isotropic(0.5);
        let (grid, truth) = make_tube(20.0, 1.0, sp).unwrap();
        assert_eq!(components(&grid, 0.5), 1);
        let cell = &truth.cells[0];
        assert_eq!((cell.endpoints, cell.branch_points), (2, 0));
        let analytic = std::f64::consts::PI * 1.0 * 20.0 / sp.voxel_volume();
        let n = cell.voxels.len() as f64;
        assert!((n - analytic).abs() / analytic < 0.10, "{n} vs {analytic}");
        assert_eq!(
            grid.data().iter().filter(|&&v| v == 1.0).count(),
            cell.voxels.len()
        );
    }

    #[test]
    fn tube_resolution_error() {
        assert!(matches!(
            make_tube(20.0, 0.3, Spacing::isotropic(0.5)),
            Err(PhantomError::Resolution { .. })
        ));
        assert!(make_tube(1.0, 1.0, Spacing::isotropic(0.5)).is_err());
    }

    #[test]
    fn y_cell_topology_and_component() {
        let (grid, truth) = make_y_cell(10.0, 1.0, Spacing::isotropic(0.5)).unwrap();
        assert_eq!(components(&grid, 0.5), 1);
        let c = &truth.cells[0];
        assert_eq!((c.endpoints, c.branch_points), (3, 1));
        assert!((c.skeleton_length_um - 30.0).abs() < 1e-12);
    }

    #[test]
    fn blob_pairs() {
        let sp = Spacing::isotropic(0.5);
        let (apart, truth) = make_blob_pair(16.0, 2.0, sp, false).unwrap();
        assert_eq!(components(&apart, 0.3), 2);
        assert_eq!(truth.expected_components, 2);
        let (merged, truth) = make_blob_pair(4.0, 2.0, sp, true).unwrap();
        assert_eq!(components(&merged, 0.3), 1);
        let centers: Vec<[f64; 3]> = truth
            .cells
            .iter()
            .map(|c| c.source_center_um.unwrap())
            .collect();
        assert_eq!(centers.len(), 2);
        assert!((centers[1][0] - centers[0][0] - 4.0).abs() < 1e-12);
        // each blob peaks at its center voxel
        for c in &centers {
            let ix = (c[0] / 0.5 - 0.5).round() as usize;
            let iy = (c[1] / 0.5 - 0.5).round() as usize;
            let iz = (c[2] / 0.5 - 0.5).round() as usize;
            assert!(merged.get(ix, iy, iz) >= 0.99);
        }
        assert_partition(&merged, &truth);
        assert!(make_blob_pair(8.0, 2.0, sp, true).is_err());
        assert!(make_blob_pair(8.0, 2.0, sp, false).is_err());
    }

    #[test]
    fn scene_places_disjoint_cells_deterministically() {
        let spec = SceneSpec::new(10, 5.0, CellKind::Tube, 3);
        let (g1, t1) = make_scene(&spec).unwrap();
        let (g2, t2) = make_scene(&spec).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(t1, t2);
        assert_eq!(t1.cells.len(), 10);
        assert_partition(&g1, &t1);
        assert_eq!(components(&g1, 0.5), 10);
    }

    #[test]
    fn empty_scene() {
        let (g, t) = make_scene(&SceneSpec::new(0, 5.0, CellKind::Y, 1)).unwrap();
        assert!(t.cells.is_empty());
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overfull_scene_is_capacity_error() {
        let mut spec = SceneSpec::new(50, 5.0, CellKind::Tube, 1);
        spec.dims = Dims::new(48, 48, 48);
        assert!(matches!(
            make_scene(&spec),
            Err(PhantomError::Capacity { .. })
        ));
    }

    #[test]
    fn truth_centroid_is_mask_mean() {
        let (_, t) = make_scene(&SceneSpec::new(4, 5.0, CellKind::Y, 9)).unwrap();
        for c in &t.cells {
            let n = c.voxels.len() as f64;
            let mut m = [0.0; 3];
            for &v in &c.voxels {
                let (x, y, z) = t.dims.coords(v);
                let p = t.spacing.center(x, y, z);
                for a in 0..3 {
                    m[a] += p[a] / n;
                }
            }
            for a in 0..3 {
                assert!((m[a] - c.centroid_um[a]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_properties() {
        let g = VoxelGrid::new(
            Dims::new(100, 100, 100),
            Spacing::isotropic(1.0),
            vec![0.5; 1_000_000],
        )
        .unwrap();
        assert_eq!(add_noise(&g, 0.0, 1).unwrap(), g);
        let sigma = 0.05;
        let a = add_noise(&g, sigma, 17).unwrap();
        assert_eq!(a, add_noise(&g, sigma, 17).unwrap());
        let mean = a.data().iter().map(|&v| f64::from(v) - 0.5).sum::<f64>() / 1e6;
        assert!(mean.abs() < 3.0 * sigma / 1000.0, "noise mean {mean}");
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn segment_distance_cases() {
        let d = segment_distance([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-12);
        let d = segment_distance([0.0; 3], [0.0; 3], [3.0, 4.0, 0.0], [3.0, 4.0, 0.0]);
        assert!((d - 5.0).abs() < 1e-12);
        let d = segment_distance([0.0; 3], [2.0, 0.0, 0.0], [3.0, -1.0, 0.0], [3.0, 1.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-12);
    }
}
