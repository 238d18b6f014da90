//! Crate-wide error type.
//!
//! Every module owns its own error enum; [`Error`] wraps them so callers
//! that drive the whole pipeline (the CLI, the C ABI) can report which
//! stage failed and what to try next.

use thiserror::Error;

use crate::compare::CompareError;
use crate::config::ConfigError;
use crate::morphometry::MorphError;
use crate::phantom::PhantomError;
use crate::segmentation::SegmentError;
use crate::skeleton::SkeletonError;
use crate::volume_io::VolumeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Phantom(#[from] PhantomError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Input,
    Processing,
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Name of the module that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Volume(_) => "volume_io",
            Error::Phantom(_) => "phantom",
            Error::Segment(_) => "segmentation",
            Error::Skeleton(_) => "skeleton",
            Error::Morph(_) => "morphometry",
            Error::Compare(_) => "compare",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Phantom(PhantomError::Resolution { .. })
            | Error::Phantom(PhantomError::InvalidArgument(_)) => ErrorKind::Config,
            Error::Volume(_) | Error::Io { .. } => ErrorKind::Input,
            Error::Compare(CompareError::Schema { .. })
            | Error::Compare(CompareError::Row { .. })
            | Error::Compare(CompareError::Csv { .. })
            | Error::Compare(CompareError::NoInputs) => ErrorKind::Input,
            Error::Compare(CompareError::UnitMismatch { .. }) => ErrorKind::Config,
            _ => ErrorKind::Processing,
        }
    }

    /// One-line suggestion printed next to the error by the CLI.
    pub fn hint(&self) -> &'static str {
        match self {
            Error::Volume(VolumeError::DimensionMismatch { .. }) => {
                "all slices of a stack must share width and height; remove or crop the offending slice"
            }
            Error::Volume(VolumeError::Format(_)) => {
                "convert the stack to 8- or 16-bit single-channel grayscale TIFF/PNG"
            }
            Error::Volume(VolumeError::EmptyInput(_)) => {
                "point --input at a multi-page TIFF or a directory containing .tif/.tiff/.png slices"
            }
            Error::Volume(_) | Error::Io { .. } => "check that the path exists and is readable",
            Error::Phantom(_) => "increase radius or refine spacing so the shape spans several voxels; for scenes enlarge the grid or reduce k / min_gap",
            Error::Segment(SegmentError::DegenerateHistogram) => {
                "the volume has a single intensity level; pass an explicit --threshold value"
            }
            Error::Segment(_) => "check connectivity (6|18|26), min_voxels >= 1, max_volume > 0 and k_max >= 2",
            Error::Skeleton(_) => "skeletonization requires one non-empty 26-connected mask per label",
            Error::Morph(_) => "verify the label volume holds contiguous labels 1..K and the spacing is positive",
            Error::Compare(CompareError::UnitMismatch { .. }) => {
                "pass --um-per-px to convert pixel centroids to microns before matching"
            }
            Error::Compare(CompareError::NoInputs) => {
                "provide at least one of --manual, --ilastik, --morph"
            }
            Error::Compare(_) => "check the CSV header against the documented column names",
            Error::Config(_) => "fix the config file or command-line flag named above",
        }
    }
}
