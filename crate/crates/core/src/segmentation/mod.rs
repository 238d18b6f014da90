//! Intensity volume to labeled cell instances.
//!
//! The pipeline is threshold → [`binarize`] → [`label_components`] →
//! [`filter_small`] → [`split_oversized`]. Every step is deterministic;
//! ties are broken by the lowest bin, label or component index.

mod components;
pub mod gmm;
mod otsu;
mod split;

use thiserror::Error;

use crate::volume_io::{Dims, Spacing, VoxelGrid};

pub use components::{label_components, Connectivity};
pub use gmm::{EmConfig, GmmModel};
pub use otsu::{histogram, intensity_bin, otsu_bin, otsu_threshold, HISTOGRAM_BINS};
pub use split::{split_oversized, SplitConfig, SplitOutcome, SplitWarning};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("histogram has a single occupied bin; no threshold separates two classes")]
    DegenerateHistogram,
    #[error("threshold {0} is outside [0, 1]")]
    ThresholdRange(f64),
    #[error("unsupported connectivity {0}; expected 6, 18 or 26")]
    Connectivity(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot fit a {k}-component mixture to {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("label volume is inconsistent: {0}")]
    InvalidLabels(String),
}

/// Per-voxel foreground mask sharing a grid's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryVolume {
    dims: Dims,
    spacing: Spacing,
    mask: Vec<bool>,
}

impl BinaryVolume {
    pub fn new(dims: Dims, spacing: Spacing, mask: Vec<bool>) -> Result<Self, SegmentError> {
        if mask.len() != dims.len() {
            return Err(SegmentError::InvalidParameter(format!(
                "{} mask values for {} voxels",
                mask.len(),
                dims.len()
            )));
        }
        Ok(BinaryVolume {
            dims,
            spacing,
            mask,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Instance labels: 0 is background, cells are `1..=count`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    spacing: Spacing,
    labels: Vec<u32>,
    count: u32,
}

impl LabelVolume {
    /// Build a label volume, checking that the labels used are exactly `1..=K`.
    pub fn new(dims: Dims, spacing: Spacing, labels: Vec<u32>) -> Result<Self, SegmentError> {
        if labels.len() != dims.len() {
            return Err(SegmentError::InvalidLabels(format!(
                "{} labels for {} voxels",
                labels.len(),
                dims.len()
            )));
        }
        let count = labels.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; count as usize + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = (1..=count as usize).find(|&l| !seen[l]) {
            return Err(SegmentError::InvalidLabels(format!(
                "label {missing} is unused but {count} is present"
            )));
        }
        Ok(LabelVolume {
            dims,
            spacing,
            labels,
            count,
        })
    }

    pub(crate) fn from_parts_unchecked(
        dims: Dims,
        spacing: Spacing,
        labels: Vec<u32>,
        count: u32,
    ) -> Self {
        debug_assert_eq!(labels.len(), dims.len());
        LabelVolume {
            dims,
            spacing,
            labels,
            count,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    /// Linear voxel indices of every label, in raster order.
    /// Entry `i` holds label `i + 1`.
    pub fn voxels_by_label(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count as usize];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.count as usize];
        for &l in &self.labels {
            if l > 0 {
                out[l as usize - 1] += 1;
            }
        }
        out
    }

    pub fn foreground(&self) -> BinaryVolume {
        BinaryVolume {
            dims: self.dims,
            spacing: self.spacing,
            mask: self.labels.iter().map(|&l| l > 0).collect(),
        }
    }
}

/// Foreground iff intensity ≥ `threshold`.
///
/// Thresholds above 1 are accepted and yield an empty foreground.
pub fn binarize(grid: &VoxelGrid, threshold: f64) -> Result<BinaryVolume, SegmentError> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(SegmentError::ThresholdRange(threshold));
    }
    Ok(BinaryVolume {
        dims: grid.dims(),
        spacing: grid.spacing(),
        mask: grid
            .data()
            .iter()
            .map(|&v| f64::from(v) >= threshold)
            .collect(),
    })
}

/// Drop components with fewer than `min_voxels` voxels and relabel the
/// survivors `1..=K'` keeping their relative order.
pub fn filter_small(labels: &LabelVolume, min_voxels: usize) -> Result<LabelVolume, SegmentError> {
    if min_voxels == 0 {
        return Err(SegmentError::InvalidParameter(
            "min_voxels must be at least 1".into(),
        ));
    }
    let sizes = labels.sizes();
    let mut remap = vec![0u32; sizes.len() + 1];
    let mut next = 0u32;
    for (i, &n) in sizes.iter().enumerate() {
        if n >= min_voxels {
            next += 1;
            remap[i + 1] = next;
        }
    }
    let out = labels.labels.iter().map(|&l| remap[l as usize]).collect();
    Ok(LabelVolume::from_parts_unchecked(
        labels.dims,
        labels.spacing,
        out,
        next,
    ))
}
