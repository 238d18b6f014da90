//! Pipeline configuration.
//!
//! A config file is flat TOML, one key per parameter:
//!
//! ```toml
//! input = "stack.tif"
//! spacing = [0.5, 0.5, 1.0]
//! threshold = "auto"      # or a number in [0, 1]
//! connectivity = 26
//! min_voxels = 10
//! max_volume = 800.0      # µm³; omit to disable splitting
//! k_max = 4
//! seed = 0
//! output_dir = "out"
//! ```
//!
//! Command-line flags override file values key by key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compare::ReferenceMode;
use crate::segmentation::Connectivity;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("invalid setting `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

/// `auto` (Otsu) or a fixed value on the normalized intensity scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Auto,
    Value(f64),
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threshold::Auto => s.serialize_str("auto"),
            Threshold::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Threshold::Value(v)),
            Raw::Text(s) if s == "auto" => Ok(Threshold::Auto),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "expected \"auto\" or a number, got \"{s}\""
            ))),
        }
    }
}

impl std::str::FromStr for Threshold {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Threshold::Auto);
        }
        s.parse()
            .map(Threshold::Value)
            .map_err(|_| ConfigError::Invalid {
                key: "threshold",
                message: format!("expected `auto` or a number, got `{s}`"),
            })
    }
}

/// Every setting optional; used for both the file and the flag overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub input: Option<PathBuf>,
    pub spacing: Option<[f64; 3]>,
    pub threshold: Option<Threshold>,
    pub connectivity: Option<u32>,
    pub min_voxels: Option<usize>,
    pub max_volume: Option<f64>,
    pub k_max: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub manual: Option<PathBuf>,
    pub ilastik: Option<PathBuf>,
    pub um_per_px: Option<f64>,
    pub radius: Option<f64>,
    pub reference_mode: Option<ReferenceMode>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        ConfigLayer { $($field: $top.$field.or($base.$field)),* }
    };
}

impl ConfigLayer {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.message().to_string(),
        })
    }

    /// Values from `top` win.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        let base = self;
        overlay!(
            base,
            top,
            input,
            spacing,
            threshold,
            connectivity,
            min_voxels,
            max_volume,
            k_max,
            seed,
            output_dir,
            manual,
            ilastik,
            um_per_px,
            radius,
            reference_mode
        )
    }
}

/// Validated settings for one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub spacing: [f64; 3],
    pub threshold: Threshold,
    pub connectivity: Connectivity,
    pub min_voxels: usize,
    /// Components above this volume (µm³) are split; `None` disables it.
    pub max_volume: Option<f64>,
    pub k_max: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub manual: Option<PathBuf>,
    pub ilastik: Option<PathBuf>,
    pub um_per_px: Option<f64>,
    pub radius: f64,
    pub reference_mode: ReferenceMode,
}

pub const DEFAULT_MIN_VOXELS: usize = 10;
pub const DEFAULT_K_MAX: usize = 4;
pub const DEFAULT_RADIUS_UM: f64 = 10.0;

fn positive(key: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid {
            key,
            message: format!("must be positive, got {v}"),
        })
    }
}

impl TryFrom<ConfigLayer> for PipelineConfig {
    type Error = ConfigError;

    fn try_from(c: ConfigLayer) -> Result<Self, ConfigError> {
        let spacing = c.spacing.ok_or(ConfigError::Missing("spacing"))?;
        for v in spacing {
            positive("spacing", v)?;
        }
        let threshold = c.threshold.unwrap_or(Threshold::Auto);
        if let Threshold::Value(t) = threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(ConfigError::Invalid {
                    key: "threshold",
                    message: format!("must lie in [0, 1], got {t}"),
                });
            }
        }
        let connectivity = Connectivity::from_count(c.connectivity.unwrap_or(26)).map_err(|e| {
            ConfigError::Invalid {
                key: "connectivity",
                message: e.to_string(),
            }
        })?;
        let min_voxels = c.min_voxels.unwrap_or(DEFAULT_MIN_VOXELS);
        if min_voxels == 0 {
            return Err(ConfigError::Invalid {
                key: "min_voxels",
                message: "must be at least 1".into(),
            });
        }
        let k_max = c.k_max.unwrap_or(DEFAULT_K_MAX);
        if k_max < 2 {
            return Err(ConfigError::Invalid {
                key: "k_max",
                message: format!("must be at least 2, got {k_max}"),
            });
        }
        Ok(PipelineConfig {
            input: c.input.ok_or(ConfigError::Missing("input"))?,
            spacing,
            threshold,
            connectivity,
            min_voxels,
            max_volume: c
                .max_volume
                .map(|v| positive("max_volume", v))
                .transpose()?,
            k_max,
            seed: c.seed.unwrap_or(0),
            output_dir: c.output_dir.ok_or(ConfigError::Missing("output_dir"))?,
            manual: c.manual,
            ilastik: c.ilastik,
            um_per_px: c.um_per_px.map(|v| positive("um_per_px", v)).transpose()?,
            radius: positive("radius", c.radius.unwrap_or(DEFAULT_RADIUS_UM))?,
            reference_mode: c.reference_mode.unwrap_or_default(),
        })
    }
}

impl PipelineConfig {
    /// Canonical text of the settings that affect results. The output
    /// directory is left out so runs into different directories agree.
    pub fn canonical(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        v.to_string()
    }
}
