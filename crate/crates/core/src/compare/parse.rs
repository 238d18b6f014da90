//! Readers for the three comparison input tables.
//!
//! Columns are located by header name, so extra columns and any column
//! order are accepted. Lines starting with `#` are comments. A missing
//! required column is a schema error; a bad value is a row error carrying
//! the 1-based file line.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CompareError;
use crate::morphometry::CellMorphology;

/// One traced path from a manual tracing export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualPath {
    pub path_id: i64,
    pub name: String,
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub path_length: Option<f64>,
    pub swc_type: i32,
    pub parent_id: Option<i64>,
    pub child_ids: Vec<i64>,
    pub fitted_volume: Option<f64>,
}

/// One object from an ilastik object-classification export. Positions and
/// sizes are in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlastikObject {
    pub object_id: i64,
    pub predicted_class: String,
    pub user_class: Option<String>,
    pub centroid: [f64; 2],
    pub bbox_min: [f64; 2],
    pub bbox_max: [f64; 2],
    pub size_px: f64,
    /// `(class, probability)` for every `probability_*` column, in header order.
    pub probabilities: Vec<(String, f64)>,
}

/// One row of a morphology table. Only the id and centroid are required;
/// tables that carry nothing else (for example centroid listings) still
/// parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphRecord {
    pub cell_id: u32,
    pub centroid: [f64; 3],
    pub cell_volume_um3: Option<f64>,
    pub territory_volume_um3: Option<f64>,
    pub ramification_index: Option<f64>,
    pub n_endpoints: Option<u32>,
    pub n_branchpoints: Option<u32>,
    pub branch_len_avg_um: Option<f64>,
    pub branch_len_max_um: Option<f64>,
    pub branch_len_min_um: Option<f64>,
}

impl From<&CellMorphology> for MorphRecord {
    fn from(m: &CellMorphology) -> Self {
        MorphRecord {
            cell_id: m.cell_id,
            centroid: m.centroid(),
            cell_volume_um3: Some(m.cell_volume_um3),
            territory_volume_um3: Some(m.territory_volume_um3),
            ramification_index: Some(m.ramification_index),
            n_endpoints: Some(m.n_endpoints),
            n_branchpoints: Some(m.n_branchpoints),
            branch_len_avg_um: m.branch_len_avg_um,
            branch_len_max_um: m.branch_len_max_um,
            branch_len_min_um: m.branch_len_min_um,
        }
    }
}

/// Header lookup plus per-row field access with error context.
struct Table {
    file: String,
    columns: HashMap<String, usize>,
    headers: Vec<String>,
}

struct Row<'a> {
    table: &'a Table,
    record: &'a csv::StringRecord,
    line: u64,
}

impl Table {
    fn require(&self, name: &str) -> Result<usize, CompareError> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| CompareError::Schema {
                file: self.file.clone(),
                column: name.to_string(),
            })
    }
}

impl Row<'_> {
    fn err(&self, message: impl Into<String>) -> CompareError {
        CompareError::Row {
            file: self.table.file.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn raw(&self, name: &str) -> &str {
        self.table
            .columns
            .get(name)
            .and_then(|&i| self.record.get(i))
            .unwrap_or("")
            .trim()
    }

    fn opt<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, CompareError> {
        let s = self.raw(name);
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| self.err(format!("column `{name}`: cannot parse `{s}`")))
    }

    fn req<T: std::str::FromStr>(&self, name: &str) -> Result<T, CompareError> {
        self.opt(name)?
            .ok_or_else(|| self.err(format!("column `{name}` is empty")))
    }

    fn finite(&self, name: &str) -> Result<f64, CompareError> {
        let v: f64 = self.req(name)?;
        if !v.is_finite() {
            return Err(self.err(format!("column `{name}` is not finite")));
        }
        Ok(v)
    }

    fn nonneg(&self, name: &str) -> Result<Option<f64>, CompareError> {
        match self.opt::<f64>(name)? {
            Some(v) if !(v >= 0.0 && v.is_finite()) => Err(self.err(format!(
                "column `{name}` must be a nonnegative number, got {v}"
            ))),
            v => Ok(v),
        }
    }
}

fn read_table<R: Read>(
    file: &str,
    input: R,
    required: &[&str],
    mut each: impl FnMut(&Row<'_>) -> Result<(), CompareError>,
) -> Result<(), CompareError> {
    let csv_err = |source| CompareError::Csv {
        file: file.to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let columns = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.clone(), i))
        .collect();
    let table = Table {
        file: file.to_string(),
        columns,
        headers,
    };
    for name in required {
        table.require(name)?;
    }
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        each(&Row {
            table: &table,
            record: &record,
            line,
        })?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<(String, std::fs::File), CompareError> {
    let file = path.display().to_string();
    let f = std::fs::File::open(path).map_err(|e| CompareError::Csv {
        file: file.clone(),
        source: e.into(),
    })?;
    Ok((file, f))
}

const MANUAL_REQUIRED: [&str; 12] = [
    "path_id",
    "name",
    "start_x",
    "start_y",
    "start_z",
    "end_x",
    "end_y",
    "end_z",
    "path_length",
    "swc_type",
    "parent_id",
    "child_ids",
];

pub fn parse_manual(path: impl AsRef<Path>) -> Result<Vec<ManualPath>, CompareError> {
    let (file, f) = open(path.as_ref())?;
    parse_manual_reader(&file, f)
}

/// Parse manual paths. `fitted_volume` may be absent or empty; `child_ids`
/// is a `;`-separated list. Parent and child references must name paths in
/// the same file.
pub fn parse_manual_reader<R: Read>(file: &str, input: R) -> Result<Vec<ManualPath>, CompareError> {
    let mut out = Vec::new();
    let mut lines = Vec::new();
    read_table(file, input, &MANUAL_REQUIRED, |row| {
        let children = row.raw("child_ids");
        let child_ids = children
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| row.err(format!("column `child_ids`: cannot parse `{s}`")))
            })
            .collect::<Result<_, _>>()?;
        out.push(ManualPath {
            path_id: row.req("path_id")?,
            name: row.raw("name").to_string(),
            start: [
                row.finite("start_x")?,
                row.finite("start_y")?,
                row.finite("start_z")?,
            ],
            end: [
                row.finite("end_x")?,
                row.finite("end_y")?,
                row.finite("end_z")?,
            ],
            path_length: row.nonneg("path_length")?,
            swc_type: row.req("swc_type")?,
            parent_id: row.opt("parent_id")?,
            child_ids,
            fitted_volume: row.nonneg("fitted_volume")?,
        });
        lines.push(row.line);
        Ok(())
    })?;
    let ids: std::collections::HashSet<i64> = out.iter().map(|p| p.path_id).collect();
    for (p, &line) in out.iter().zip(&lines) {
        let dangling = p
            .parent_id
            .filter(|&id| id >= 0 && !ids.contains(&id))
            .or_else(|| p.child_ids.iter().copied().find(|id| !ids.contains(id)));
        if let Some(id) = dangling {
            return Err(CompareError::Row {
                file: file.to_string(),
                line,
                message: format!("path {} refers to unknown path {id}", p.path_id),
            });
        }
    }
    Ok(out)
}

const ILASTIK_REQUIRED: [&str; 10] = [
    "object_id",
    "predicted_class",
    "user_class",
    "centroid_x",
    "centroid_y",
    "bbox_min_x",
    "bbox_max_x",
    "bbox_min_y",
    "bbox_max_y",
    "size_px",
];

pub fn parse_ilastik(path: impl AsRef<Path>) -> Result<Vec<IlastikObject>, CompareError> {
    let (file, f) = open(path.as_ref())?;
    parse_ilastik_reader(&file, f)
}

/// Parse ilastik objects. Every `probability_<class>` column is collected;
/// when any are present they must lie in [0, 1] and sum to 1 within 1e-6.
pub fn parse_ilastik_reader<R: Read>(
    file: &str,
    input: R,
) -> Result<Vec<IlastikObject>, CompareError> {
    let mut out = Vec::new();
    read_table(file, input, &ILASTIK_REQUIRED, |row| {
        let mut probabilities = Vec::new();
        for h in &row.table.headers {
            if let Some(class) = h.strip_prefix("probability_") {
                if let Some(p) = row.opt::<f64>(h)? {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(
                            row.err(format!("column `{h}`: probability {p} outside [0, 1]"))
                        );
                    }
                    probabilities.push((class.to_string(), p));
                }
            }
        }
        if !probabilities.is_empty() {
            let sum: f64 = probabilities.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(row.err(format!("class probabilities sum to {sum}, expected 1")));
            }
        }
        let centroid = [row.finite("centroid_x")?, row.finite("centroid_y")?];
        let bbox_min = [row.finite("bbox_min_x")?, row.finite("bbox_min_y")?];
        let bbox_max = [row.finite("bbox_max_x")?, row.finite("bbox_max_y")?];
        for a in 0..2 {
            if !(bbox_min[a] <= centroid[a] && centroid[a] <= bbox_max[a]) {
                return Err(row.err("centroid lies outside the bounding box"));
            }
        }
        let user = row.raw("user_class");
        out.push(IlastikObject {
            object_id: row.req("object_id")?,
            predicted_class: row.raw("predicted_class").to_string(),
            user_class: (!user.is_empty()).then(|| user.to_string()),
            centroid,
            bbox_min,
            bbox_max,
            size_px: row
                .nonneg("size_px")?
                .ok_or_else(|| row.err("column `size_px` is empty"))?,
            probabilities,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_morph(path: impl AsRef<Path>) -> Result<Vec<MorphRecord>, CompareError> {
    let (file, f) = open(path.as_ref())?;
    parse_morph_reader(&file, f)
}

/// Parse a morphology table. `cell_id` and the three centroid columns are
/// required; every other column may be missing or empty. Volumes must be
/// positive (cell) or nonnegative (territory, ramification index).
pub fn parse_morph_reader<R: Read>(file: &str, input: R) -> Result<Vec<MorphRecord>, CompareError> {
    let mut out = Vec::new();
    read_table(
        file,
        input,
        &["cell_id", "centroid_x_um", "centroid_y_um", "centroid_z_um"],
        |row| {
            let cell_volume_um3 = row.nonneg("cell_volume_um3")?;
            if cell_volume_um3 == Some(0.0) {
                return Err(row.err("column `cell_volume_um3` must be positive"));
            }
            out.push(MorphRecord {
                cell_id: row.req("cell_id")?,
                centroid: [
                    row.finite("centroid_x_um")?,
                    row.finite("centroid_y_um")?,
                    row.finite("centroid_z_um")?,
                ],
                cell_volume_um3,
                territory_volume_um3: row.nonneg("territory_volume_um3")?,
                ramification_index: row.nonneg("ramification_index")?,
                n_endpoints: row.opt("n_endpoints")?,
                n_branchpoints: row.opt("n_branchpoints")?,
                branch_len_avg_um: row.nonneg("branch_len_avg_um")?,
                branch_len_max_um: row.nonneg("branch_len_max_um")?,
                branch_len_min_um: row.nonneg("branch_len_min_um")?,
            });
            Ok(())
        },
    )?;
    Ok(out)
}
