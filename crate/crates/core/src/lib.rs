//! Volumetric morphometry for 3D microglia z-stacks.
//!
//! The pipeline loads a z-stack ([`volume_io`]), segments it into labelled
//! cells ([`segmentation`]), thins each cell to a curve skeleton
//! ([`skeleton`]) and measures it ([`morphometry`]). [`compare`] reads the
//! tables produced by other tools and sets them against each other.
//! [`phantom`] generates synthetic stacks with known answers.
//!
//! ```no_run
//! use glia3d::config::{ConfigLayer, PipelineConfig};
//!
//! let layer = ConfigLayer::from_file("run.toml".as_ref())?;
//! let cfg = PipelineConfig::try_from(layer)?;
//! let summary = glia3d::pipeline::run(&cfg)?;
//! println!("{} cells", summary.rows.len());
//! # Ok::<(), glia3d::Error>(())
//! ```

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values, and
// per-axis index loops read better than zipped iterators in 3-vector math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod compare;
pub mod config;
mod error;
pub mod morphometry;
pub mod phantom;
pub mod pipeline;
pub mod segmentation;
pub mod skeleton;
pub mod volume_io;

pub use error::{Error, ErrorKind, Result};
