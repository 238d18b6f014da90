//! Cross-method comparison of cell detections.
//!
//! Three tabular inputs are understood: manual path traces (`M_` files),
//! ilastik object tables (`i_` files) and morphology tables (`D_` files, as
//! written by [`crate::morphometry::write_morph_table`]). Their centroids
//! are summarized with [`spread_stats`] and matched against the manual
//! reference with [`match_centroids`].
//!
//! Pixel and micron quantities never mix silently: every point set carries
//! a [`Units`] tag, and matching across tags is an error until the pixel
//! set is converted with an explicit microns-per-pixel factor.

mod parse;
mod report;
mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{
    parse_ilastik, parse_ilastik_reader, parse_manual, parse_manual_reader, parse_morph,
    parse_morph_reader, IlastikObject, ManualPath, MorphRecord,
};
pub use report::{
    summarize, CompareConfig, CompareInputs, ComparisonReport, InputFile, MethodMatch,
    MethodSummary, REPORT_SCHEMA_VERSION,
};
pub use svg::scatter_svg;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("{file}: missing required column `{column}`")]
    Schema { file: String, column: String },
    #[error("{file}: line {line}: {message}")]
    Row {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("no comparison inputs given")]
    NoInputs,
    #[error("cannot match {candidates} candidates against {references} references")]
    UnitMismatch {
        candidates: Units,
        references: Units,
    },
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("report schema: {0}")]
    Report(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Pixels,
    Microns,
}

impl std::fmt::Display for Units {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Units::Pixels => "pixels",
            Units::Microns => "microns",
        })
    }
}

/// Centroids with their unit tag. Planar sets carry `z = 0` and are
/// compared in X and Y only.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub units: Units,
    pub planar: bool,
    pub points: Vec<[f64; 3]>,
}

impl PointSet {
    pub fn microns(points: Vec<[f64; 3]>) -> Self {
        PointSet {
            units: Units::Microns,
            planar: false,
            points,
        }
    }

    pub fn pixels_xy(points: Vec<[f64; 2]>) -> Self {
        PointSet {
            units: Units::Pixels,
            planar: true,
            points: points.into_iter().map(|[x, y]| [x, y, 0.0]).collect(),
        }
    }

    /// Convert a pixel set to microns; micron sets are returned unchanged.
    pub fn to_microns(&self, um_per_px: f64) -> Result<PointSet, CompareError> {
        if !(um_per_px > 0.0 && um_per_px.is_finite()) {
            return Err(CompareError::InvalidParameter(format!(
                "um_per_px must be positive, got {um_per_px}"
            )));
        }
        Ok(match self.units {
            Units::Microns => self.clone(),
            Units::Pixels => PointSet {
                units: Units::Microns,
                planar: self.planar,
                points: self
                    .points
                    .iter()
                    .map(|p| [p[0] * um_per_px, p[1] * um_per_px, p[2] * um_per_px])
                    .collect(),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpread {
    pub axis: Axis,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    /// Sample standard deviation (n - 1 denominator); absent for one point.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    pub n: usize,
    pub units: Units,
    pub axes: Vec<AxisSpread>,
}

impl SpreadStats {
    pub fn axis(&self, axis: Axis) -> Option<&AxisSpread> {
        self.axes.iter().find(|a| a.axis == axis)
    }
}

/// Per-axis min, max, range and sample standard deviation.
pub fn spread_stats(
    points: &[[f64; 3]],
    axes: &[Axis],
    units: Units,
) -> Result<SpreadStats, CompareError> {
    if points.is_empty() {
        return Err(CompareError::EmptyInput("point set"));
    }
    let n = points.len();
    let axes = axes
        .iter()
        .map(|&axis| {
            let a = axis.index();
            let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for p in points {
                min = min.min(p[a]);
                max = max.max(p[a]);
                sum += p[a];
            }
            let std = (n > 1).then(|| {
                let mean = sum / n as f64;
                let ss: f64 = points.iter().map(|p| (p[a] - mean).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt()
            });
            AxisSpread {
                axis,
                min,
                max,
                range: max - min,
                std,
            }
        })
        .collect();
    Ok(SpreadStats { n, units, axes })
}

/// Which point of a traced path stands in for it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    Start,
    #[default]
    Midpoint,
}

impl std::str::FromStr for ReferenceMode {
    type Err = CompareError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "start" => Ok(ReferenceMode::Start),
            "midpoint" => Ok(ReferenceMode::Midpoint),
            other => Err(CompareError::InvalidParameter(format!(
                "reference mode must be start or midpoint, got `{other}`"
            ))),
        }
    }
}

pub fn reference_points(paths: &[ManualPath], mode: ReferenceMode) -> Vec<[f64; 3]> {
    paths
        .iter()
        .map(|p| match mode {
            ReferenceMode::Start => p.start,
            ReferenceMode::Midpoint => [
                (p.start[0] + p.end[0]) / 2.0,
                (p.start[1] + p.end[1]) / 2.0,
                (p.start[2] + p.end[2]) / 2.0,
            ],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    /// Index into the candidate list.
    pub candidate: usize,
    /// Index into the reference list.
    pub reference: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub n_candidates: usize,
    pub n_references: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub radius: f64,
    /// True when distances ignored Z because one side is planar.
    pub planar: bool,
}

/// Greedy one-to-one matching within `radius`.
///
/// All pairs within the radius are sorted by (distance, candidate index,
/// reference index) and accepted while both ends are still free.
pub fn match_centroids(
    candidates: &PointSet,
    references: &PointSet,
    radius: f64,
) -> Result<MatchResult, CompareError> {
    if candidates.units != references.units {
        return Err(CompareError::UnitMismatch {
            candidates: candidates.units,
            references: references.units,
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CompareError::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let planar = candidates.planar || references.planar;
    let dist = |a: &[f64; 3], b: &[f64; 3]| {
        let dz = if planar { 0.0 } else { a[2] - b[2] };
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + dz * dz).sqrt()
    };
    let mut all = Vec::new();
    for (ci, c) in candidates.points.iter().enumerate() {
        for (ri, r) in references.points.iter().enumerate() {
            let d = dist(c, r);
            if d <= radius {
                all.push(MatchPair {
                    candidate: ci,
                    reference: ri,
                    distance: d,
                });
            }
        }
    }
    all.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.candidate.cmp(&b.candidate))
            .then(a.reference.cmp(&b.reference))
    });
    let mut used_c = vec![false; candidates.points.len()];
    let mut used_r = vec![false; references.points.len()];
    let mut pairs = Vec::new();
    for p in all {
        if !used_c[p.candidate] && !used_r[p.reference] {
            used_c[p.candidate] = true;
            used_r[p.reference] = true;
            pairs.push(p);
        }
    }
    let n_candidates = candidates.points.len();
    let n_references = references.points.len();
    let m = pairs.len() as f64;
    Ok(MatchResult {
        precision: (n_candidates > 0).then(|| m / n_candidates as f64),
        recall: (n_references > 0).then(|| m / n_references as f64),
        pairs,
        n_candidates,
        n_references,
        radius,
        planar,
    })
}
