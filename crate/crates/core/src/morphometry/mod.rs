//! Per-cell morphology: centroid, volumes, ramification index and branch
//! statistics, plus the CSV feature table.
//!
//! Voxel centers sit at `(index + 0.5) * spacing`. The ramification index
//! is `territory_volume / cell_volume`, where the territory is the convex
//! hull of the cell's voxel centers.

pub mod hull;
mod table;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmentation::LabelVolume;
use crate::skeleton::{self, Skeleton, SkeletonError, SkeletonGraph};
use crate::volume_io::{Dims, Spacing};

pub use table::{format_sig, write_morph_table, MORPH_HEADER};

#[derive(Debug, Error)]
pub enum MorphError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("cell volume must be positive, got {0}")]
    NonPositiveVolume(f64),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error("cannot write table to {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One row of the feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMorphology {
    pub cell_id: u32,
    pub centroid_x_um: f64,
    pub centroid_y_um: f64,
    pub centroid_z_um: f64,
    pub cell_volume_um3: f64,
    pub territory_volume_um3: f64,
    pub ramification_index: f64,
    pub n_endpoints: u32,
    pub n_branchpoints: u32,
    pub branch_len_avg_um: Option<f64>,
    pub branch_len_max_um: Option<f64>,
    pub branch_len_min_um: Option<f64>,
}

impl CellMorphology {
    pub fn centroid(&self) -> [f64; 3] {
        [self.centroid_x_um, self.centroid_y_um, self.centroid_z_um]
    }
}

/// Mean voxel center of a mask, in microns.
pub fn centroid(mask: &[usize], dims: Dims, spacing: Spacing) -> Result<[f64; 3], MorphError> {
    if mask.is_empty() {
        return Err(MorphError::EmptyMask);
    }
    // sum integer indices exactly, then convert once
    let mut sum = [0u128; 3];
    for &v in mask {
        let (x, y, z) = dims.coords(v);
        sum[0] += x as u128;
        sum[1] += y as u128;
        sum[2] += z as u128;
    }
    let n = mask.len() as f64;
    Ok([
        (sum[0] as f64 / n + 0.5) * spacing.0[0],
        (sum[1] as f64 / n + 0.5) * spacing.0[1],
        (sum[2] as f64 / n + 0.5) * spacing.0[2],
    ])
}

pub fn cell_volume(mask: &[usize], spacing: Spacing) -> Result<f64, MorphError> {
    if mask.is_empty() {
        return Err(MorphError::EmptyMask);
    }
    Ok(mask.len() as f64 * spacing.voxel_volume())
}

/// Convex-hull volume of the mask's voxel centers.
///
/// Only the first and last voxel of every x-row can be hull vertices, so
/// the hull is built from those. Coplanar or collinear masks fall back to
/// [`cell_volume`].
pub fn territory_volume(mask: &[usize], dims: Dims, spacing: Spacing) -> Result<f64, MorphError> {
    let fallback = cell_volume(mask, spacing)?;
    // doubled indices plus one: exact integer coordinates of voxel centers
    let mut rows: std::collections::BTreeMap<(usize, usize), (usize, usize)> = Default::default();
    for &v in mask {
        let (x, y, z) = dims.coords(v);
        rows.entry((z, y))
            .and_modify(|(lo, hi)| {
                *lo = (*lo).min(x);
                *hi = (*hi).max(x);
            })
            .or_insert((x, x));
    }
    let mut points = Vec::with_capacity(rows.len() * 2);
    for (&(z, y), &(lo, hi)) in &rows {
        let c = |x: usize| [(2 * x + 1) as f64, (2 * y + 1) as f64, (2 * z + 1) as f64];
        points.push(c(lo));
        if hi != lo {
            points.push(c(hi));
        }
    }
    match hull::convex_hull_volume(&points) {
        Some(v) => Ok(v * spacing.voxel_volume() / 8.0),
        None => Ok(fallback),
    }
}

pub fn ramification_index(cell_volume: f64, territory_volume: f64) -> Result<f64, MorphError> {
    if !(cell_volume > 0.0) {
        return Err(MorphError::NonPositiveVolume(cell_volume));
    }
    Ok(territory_volume / cell_volume)
}

/// Everything computed for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAnalysis {
    pub morphology: CellMorphology,
    pub skeleton: Skeleton,
    pub graph: SkeletonGraph,
}

pub fn analyze_cell(
    label: u32,
    mask: &[usize],
    dims: Dims,
    spacing: Spacing,
) -> Result<CellAnalysis, MorphError> {
    let c = centroid(mask, dims, spacing)?;
    let volume = cell_volume(mask, spacing)?;
    let territory = territory_volume(mask, dims, spacing)?;
    let ramification = ramification_index(volume, territory)?;
    let skel = skeleton::skeletonize(label, mask, dims, spacing)?;
    let graph = skeleton::build_graph(&skel);
    let stats = skeleton::branch_metrics(&graph);
    Ok(CellAnalysis {
        morphology: CellMorphology {
            cell_id: label,
            centroid_x_um: c[0],
            centroid_y_um: c[1],
            centroid_z_um: c[2],
            cell_volume_um3: volume,
            territory_volume_um3: territory,
            ramification_index: ramification,
            n_endpoints: stats.n_endpoints as u32,
            n_branchpoints: stats.n_branchpoints as u32,
            branch_len_avg_um: stats.avg_length_um,
            branch_len_max_um: stats.max_length_um,
            branch_len_min_um: stats.min_length_um,
        },
        skeleton: skel,
        graph,
    })
}

/// A failed cell, kept alongside the successful rows.
#[derive(Debug)]
pub struct CellFailure {
    pub cell_id: u32,
    pub error: MorphError,
}

/// Analyze every label, in label order. Cells run in parallel; a failing
/// cell does not stop the others.
pub fn analyze_cells_detailed(labels: &LabelVolume) -> Vec<Result<CellAnalysis, CellFailure>> {
    let dims = labels.dims();
    let spacing = labels.spacing();
    labels
        .voxels_by_label()
        .par_iter()
        .enumerate()
        .map(|(i, mask)| {
            let label = i as u32 + 1;
            analyze_cell(label, mask, dims, spacing).map_err(|error| CellFailure {
                cell_id: label,
                error,
            })
        })
        .collect()
}

/// Feature rows ordered by label, with per-cell failures reported separately.
pub fn analyze_cells(labels: &LabelVolume) -> (Vec<CellMorphology>, Vec<CellFailure>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in analyze_cells_detailed(labels) {
        match r {
            Ok(a) => rows.push(a.morphology),
            Err(f) => failures.push(f),
        }
    }
    (rows, failures)
}
