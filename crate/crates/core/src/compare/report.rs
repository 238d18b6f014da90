//! Comparison report assembly and its JSON schema.

use serde::{Deserialize, Serialize};

use super::{
    match_centroids, reference_points, spread_stats, Axis, CompareError, IlastikObject, ManualPath,
    MatchResult, MorphRecord, PointSet, ReferenceMode, SpreadStats, Units,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    /// Microns per pixel; needed to match pixel-unit objects.
    pub um_per_px: Option<f64>,
    /// Matching radius in microns.
    pub radius: f64,
    pub reference_mode: ReferenceMode,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            um_per_px: None,
            radius: 10.0,
            reference_mode: ReferenceMode::Midpoint,
        }
    }
}

/// Parsed inputs, each with the file name it came from.
#[derive(Debug, Clone, Default)]
pub struct CompareInputs {
    pub manual: Option<(String, Vec<ManualPath>)>,
    pub ilastik: Option<(String, Vec<IlastikObject>)>,
    pub morph: Option<(String, Vec<MorphRecord>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub method: String,
    pub file: String,
    pub units: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub units: Units,
    pub count: usize,
    /// Name of the averaged size column.
    pub size_field: String,
    /// Mean over rows where the size is present; absent when none are.
    pub mean_size: Option<f64>,
    pub spread: Option<SpreadStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMatch {
    pub method: String,
    pub reference: String,
    pub result: MatchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub inputs: Vec<InputFile>,
    pub config: CompareConfig,
    pub methods: Vec<MethodSummary>,
    pub matches: Vec<MethodMatch>,
    pub notes: Vec<String>,
    /// Free-form `key value` lines describing how the report was made.
    #[serde(default)]
    pub provenance: Vec<String>,
    /// Centroids per method, in the units of that method's summary.
    #[serde(skip)]
    pub points: Vec<(String, PointSet)>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn summary(
    method: &str,
    set: &PointSet,
    size_field: &str,
    mean_size: Option<f64>,
) -> Result<MethodSummary, CompareError> {
    let axes: &[Axis] = if set.planar {
        &[Axis::X, Axis::Y]
    } else {
        &[Axis::X, Axis::Y, Axis::Z]
    };
    let spread = if set.points.is_empty() {
        None
    } else {
        Some(spread_stats(&set.points, axes, set.units)?)
    };
    Ok(MethodSummary {
        method: method.to_string(),
        units: set.units,
        count: set.points.len(),
        size_field: size_field.to_string(),
        mean_size,
        spread,
    })
}

/// Counts, mean sizes, centroid spread per method, and matching of the
/// ilastik and morphology centroids against the manual reference.
///
/// Ilastik objects are matched only when `um_per_px` is set; otherwise the
/// report notes why the match is missing.
pub fn summarize(
    inputs: &CompareInputs,
    config: &CompareConfig,
) -> Result<ComparisonReport, CompareError> {
    if inputs.manual.is_none() && inputs.ilastik.is_none() && inputs.morph.is_none() {
        return Err(CompareError::NoInputs);
    }
    let mut report = ComparisonReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: Vec::new(),
        config: config.clone(),
        methods: Vec::new(),
        matches: Vec::new(),
        notes: Vec::new(),
        provenance: Vec::new(),
        points: Vec::new(),
    };

    let reference = inputs.manual.as_ref().map(|(file, paths)| {
        let set = PointSet::microns(reference_points(paths, config.reference_mode));
        (file, paths, set)
    });
    if let Some((file, paths, set)) = &reference {
        report.inputs.push(InputFile {
            method: "manual".into(),
            file: (*file).clone(),
            units: Units::Microns,
        });
        let vol = mean(paths.iter().filter_map(|p| p.fitted_volume));
        report
            .methods
            .push(summary("manual", set, "fitted_volume", vol)?);
        report.points.push(("manual".into(), set.clone()));
    }

    if let Some((file, objs)) = &inputs.ilastik {
        report.inputs.push(InputFile {
            method: "ilastik".into(),
            file: file.clone(),
            units: Units::Pixels,
        });
        let set = PointSet::pixels_xy(objs.iter().map(|o| o.centroid).collect());
        let size = mean(objs.iter().map(|o| o.size_px));
        report
            .methods
            .push(summary("ilastik", &set, "size_px", size)?);
        if let Some((_, _, refs)) = &reference {
            match config.um_per_px {
                Some(f) => report.matches.push(MethodMatch {
                    method: "ilastik".into(),
                    reference: "manual".into(),
                    result: match_centroids(&set.to_microns(f)?, refs, config.radius)?,
                }),
                None => report
                    .notes
                    .push("ilastik not matched: pixel centroids need um_per_px".into()),
            }
        }
        report.points.push(("ilastik".into(), set));
    }

    if let Some((file, rows)) = &inputs.morph {
        report.inputs.push(InputFile {
            method: "morph".into(),
            file: file.clone(),
            units: Units::Microns,
        });
        let set = PointSet::microns(rows.iter().map(|r| r.centroid).collect());
        let vol = mean(rows.iter().filter_map(|r| r.cell_volume_um3));
        report
            .methods
            .push(summary("morph", &set, "cell_volume_um3", vol)?);
        if let Some((_, _, refs)) = &reference {
            report.matches.push(MethodMatch {
                method: "morph".into(),
                reference: "manual".into(),
                result: match_centroids(&set, refs, config.radius)?,
            });
        }
        report.points.push(("morph".into(), set));
    }
    Ok(report)
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parse a report and check its internal consistency.
    pub fn from_json(text: &str) -> Result<Self, CompareError> {
        let r: ComparisonReport =
            serde_json::from_str(text).map_err(|e| CompareError::Report(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), CompareError> {
        let bad = |m: String| Err(CompareError::Report(m));
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema version {}",
                self.schema_version
            ));
        }
        for m in &self.methods {
            if let Some(s) = &m.spread {
                if s.n != m.count || s.units != m.units {
                    return bad(format!(
                        "{}: spread disagrees with count or units",
                        m.method
                    ));
                }
                if s.axes
                    .iter()
                    .any(|a| a.range < 0.0 || a.std.is_some_and(|v| v < 0.0))
                {
                    return bad(format!("{}: negative range or std", m.method));
                }
            }
        }
        for mm in &self.matches {
            let r = &mm.result;
            let rate_ok = |v: Option<f64>| v.is_none_or(|v| (0.0..=1.0).contains(&v));
            if !rate_ok(r.precision) || !rate_ok(r.recall) {
                return bad(format!("{}: rate outside [0, 1]", mm.method));
            }
            if r.pairs.iter().any(|p| p.distance > r.radius) {
                return bad(format!("{}: pair beyond radius", mm.method));
            }
            let count = |name: &str| {
                self.methods
                    .iter()
                    .find(|m| m.method == name)
                    .map(|m| m.count)
            };
            if count(&mm.method) != Some(r.n_candidates)
                || count(&mm.reference) != Some(r.n_references)
            {
                return bad(format!(
                    "{}: match counts disagree with method counts",
                    mm.method
                ));
            }
        }
        Ok(())
    }
}
