use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::volume_io::VoxelGrid;

use super::gmm::{self, EmConfig, GmmModel};
use super::{LabelVolume, SegmentError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Components with a larger volume (µm³) are candidates for splitting.
    pub max_volume: f64,
    pub k_max: usize,
    pub seed: u64,
    pub em: EmConfig,
}

impl SplitConfig {
    pub fn new(max_volume: f64, k_max: usize, seed: u64) -> Self {
        SplitConfig {
            max_volume,
            k_max,
            seed,
            em: EmConfig::default(),
        }
    }
}

/// A mixture order that was skipped because EM hit its iteration cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitWarning {
    pub label: u32,
    pub k: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub labels: LabelVolume,
    pub warnings: Vec<SplitWarning>,
    /// `(original label, chosen k)` for every component that was examined.
    pub decisions: Vec<(u32, usize)>,
}

fn fit_seed(seed: u64, label: u32, k: usize) -> u64 {
    seed ^ (u64::from(label).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        ^ ((k as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
}

struct ComponentSplit {
    parts: Option<Vec<usize>>,
    k: usize,
    warnings: Vec<SplitWarning>,
}

fn split_component(
    label: u32,
    voxels: &[usize],
    labels: &LabelVolume,
    cfg: &SplitConfig,
) -> Result<ComponentSplit, SegmentError> {
    let dims = labels.dims();
    let spacing = labels.spacing();
    let points: Vec<[f64; 3]> = voxels
        .iter()
        .map(|&v| {
            let (x, y, z) = dims.coords(v);
            spacing.center(x, y, z)
        })
        .collect();

    let mut warnings = Vec::new();
    let mut best: Option<GmmModel> = None;
    for k in 1..=cfg.k_max.min(points.len()) {
        let model = match gmm::fit(&points, k, &cfg.em, fit_seed(cfg.seed, label, k)) {
            Ok(m) => m,
            Err(SegmentError::TooFewPoints { .. }) => break,
            Err(e) => return Err(e),
        };
        if !model.converged {
            let message = format!(
                "EM did not converge within {} iterations; k = {k} not considered",
                cfg.em.max_iter
            );
            log::warn!("label {label}: {message}");
            warnings.push(SplitWarning { label, k, message });
            continue;
        }
        if best.as_ref().is_none_or(|b| model.bic() < b.bic()) {
            best = Some(model);
        }
    }
    match best {
        Some(model) if model.k() > 1 => Ok(ComponentSplit {
            k: model.k(),
            parts: Some(model.assign(&points)),
            warnings,
        }),
        _ => Ok(ComponentSplit {
            parts: None,
            k: 1,
            warnings,
        }),
    }
}

/// Split components larger than `max_volume` by fitting Gaussian mixtures
/// with `k = 1..=k_max` to their voxel-center coordinates and keeping the
/// order with the lowest BIC.
///
/// Each voxel of a split component goes to its maximum-responsibility
/// mixture component. Output labels stay contiguous: original components
/// keep their order and a split component's parts take consecutive labels.
pub fn split_oversized(
    labels: &LabelVolume,
    grid: &VoxelGrid,
    cfg: &SplitConfig,
) -> Result<SplitOutcome, SegmentError> {
    if grid.dims() != labels.dims() {
        return Err(SegmentError::InvalidParameter(
            "label volume and intensity grid differ in size".into(),
        ));
    }
    if !(cfg.max_volume > 0.0) {
        return Err(SegmentError::InvalidParameter(format!(
            "max_volume must be positive, got {}",
            cfg.max_volume
        )));
    }
    if cfg.k_max < 2 {
        return Err(SegmentError::InvalidParameter(format!(
            "k_max must be at least 2, got {}",
            cfg.k_max
        )));
    }
    let voxel_volume = labels.spacing().voxel_volume();
    let by_label = labels.voxels_by_label();

    let results: Vec<Option<ComponentSplit>> = by_label
        .par_iter()
        .enumerate()
        .map(|(i, voxels)| {
            let label = i as u32 + 1;
            if voxels.len() as f64 * voxel_volume > cfg.max_volume {
                split_component(label, voxels, labels, cfg).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_, _>>()?;

    let mut out = vec![0u32; labels.labels().len()];
    let mut next = 0u32;
    let mut warnings = Vec::new();
    let mut decisions = Vec::new();
    for (i, (voxels, result)) in by_label.iter().zip(results).enumerate() {
        let label = i as u32 + 1;
        match result {
            Some(ComponentSplit {
                parts: Some(parts),
                k,
                warnings: w,
            }) => {
                warnings.extend(w);
                decisions.push((label, k));
                let mut remap = vec![0u32; k];
                for &p in &parts {
                    if remap[p] == 0 {
                        remap[p] = u32::MAX;
                    }
                }
                for slot in remap.iter_mut() {
                    if *slot == u32::MAX {
                        next += 1;
                        *slot = next;
                    }
                }
                for (&v, &p) in voxels.iter().zip(&parts) {
                    out[v] = remap[p];
                }
            }
            other => {
                if let Some(ComponentSplit { warnings: w, k, .. }) = other {
                    warnings.extend(w);
                    decisions.push((label, k));
                }
                next += 1;
                for &v in voxels {
                    out[v] = next;
                }
            }
        }
    }
    Ok(SplitOutcome {
        labels: LabelVolume::from_parts_unchecked(labels.dims(), labels.spacing(), out, next),
        warnings,
        decisions,
    })
}
