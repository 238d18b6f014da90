//! End-to-end batch run: stack in, feature table (and optional comparison
//! report) out.
//!
//! All outputs of a run are staged as temporary files in the output
//! directory and renamed into place only once every stage has succeeded,
//! so a failed run leaves nothing behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::compare::{self, CompareConfig, CompareInputs, MorphRecord};
use crate::config::{PipelineConfig, Threshold};
use crate::error::{Error, Result};
use crate::morphometry::{self, CellFailure, CellMorphology};
use crate::segmentation::{self, Connectivity, LabelVolume, SplitConfig, SplitWarning};
use crate::volume_io::{self, BitDepth, Spacing, VoxelGrid};

/// Segmentation settings shared by `run` and the `segment` subcommand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub threshold: Threshold,
    pub connectivity: Connectivity,
    pub min_voxels: usize,
    pub max_volume: Option<f64>,
    pub k_max: usize,
    pub seed: u64,
}

impl From<&PipelineConfig> for SegmentParams {
    fn from(c: &PipelineConfig) -> Self {
        SegmentParams {
            threshold: c.threshold,
            connectivity: c.connectivity,
            min_voxels: c.min_voxels,
            max_volume: c.max_volume,
            k_max: c.k_max,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Segmented {
    pub labels: LabelVolume,
    pub threshold: f64,
    pub warnings: Vec<SplitWarning>,
}

/// Threshold, label, drop small components and split oversized ones.
/// `grid` must already be normalized to `[0, 1]`.
pub fn segment(grid: &VoxelGrid, p: &SegmentParams) -> Result<Segmented> {
    let threshold = match p.threshold {
        Threshold::Auto => segmentation::otsu_threshold(grid)?,
        Threshold::Value(v) => v,
    };
    let binary = segmentation::binarize(grid, threshold)?;
    let labels = segmentation::label_components(&binary, p.connectivity);
    let labels = segmentation::filter_small(&labels, p.min_voxels)?;
    let (labels, warnings) = match p.max_volume {
        Some(max_volume) => {
            let cfg = SplitConfig::new(max_volume, p.k_max, p.seed);
            let out = segmentation::split_oversized(&labels, grid, &cfg)?;
            (out.labels, out.warnings)
        }
        None => (labels, Vec::new()),
    };
    Ok(Segmented {
        labels,
        threshold,
        warnings,
    })
}

/// Write labels as a 16-bit multi-page TIFF.
pub fn write_labels(labels: &LabelVolume, out: &mut (impl Write + std::io::Seek)) -> Result<()> {
    if labels.count() > u32::from(u16::MAX) {
        return Err(segmentation::SegmentError::InvalidLabels(format!(
            "{} labels do not fit a 16-bit TIFF",
            labels.count()
        ))
        .into());
    }
    let data = labels.labels().iter().map(|&l| l as f32).collect();
    let grid = VoxelGrid::new(labels.dims(), labels.spacing(), data)?;
    volume_io::write_stack(&grid, BitDepth::Sixteen, out)?;
    Ok(())
}

/// Read a label TIFF written by [`write_labels`] (or any stack whose
/// values are the contiguous labels `0..=K`).
pub fn load_labels(path: impl AsRef<Path>, spacing: Spacing) -> Result<LabelVolume> {
    let (grid, _) = volume_io::load_stack(path, spacing)?;
    labels_from_grid(&grid)
}

pub fn labels_from_grid(grid: &VoxelGrid) -> Result<LabelVolume> {
    let labels = grid.data().iter().map(|&v| v as u32).collect();
    Ok(LabelVolume::new(grid.dims(), grid.spacing(), labels)?)
}

/// Lines identifying the tool version and the exact settings of a run.
pub fn provenance(config_text: &str, extra: &[(&str, String)]) -> Vec<String> {
    let hash = hex::encode(Sha256::digest(config_text.as_bytes()));
    let mut lines = vec![
        format!("tool glia3d {}", env!("CARGO_PKG_VERSION")),
        format!("config_sha256 {hash}"),
    ];
    lines.extend(extra.iter().map(|(k, v)| format!("{k} {v}")));
    lines
}

/// Files staged for an all-or-nothing commit into one directory.
pub struct StagedOutputs {
    dir: PathBuf,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl StagedOutputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        StagedOutputs {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((self.dir.join(name), bytes));
    }

    /// Write every file to a temporary sibling, then rename all of them.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            let mut tmp =
                tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
            tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
            tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
            staged.push((tmp, path.clone()));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Write one file atomically, creating its directory if needed.
pub fn write_atomic(path: &Path, bytes: Vec<u8>) -> Result<PathBuf> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("not a file path")))?;
    let mut out = StagedOutputs::new(dir);
    out.add(&name.to_string_lossy(), bytes);
    Ok(out.commit()?.remove(0))
}

/// What a finished run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<CellMorphology>,
    pub failures: Vec<CellFailure>,
    pub threshold: f64,
    pub outputs: Vec<PathBuf>,
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// Load, normalize, segment, measure and write the feature table; when
/// manual or ilastik tables are configured, also write a comparison report
/// and an X-Y centroid scatter.
pub fn run(cfg: &PipelineConfig) -> Result<RunSummary> {
    let spacing = Spacing(cfg.spacing);
    let (raw, meta) = volume_io::load_stack(&cfg.input, spacing)?;
    let grid = volume_io::normalize(&raw);
    let seg = segment(&grid, &SegmentParams::from(cfg))?;
    log::info!(
        "threshold {:.6}, {} cells after filtering and splitting",
        seg.threshold,
        seg.labels.count()
    );
    let (rows, failures) = morphometry::analyze_cells(&seg.labels);
    for f in &failures {
        log::warn!("cell {} skipped: {}", f.cell_id, f.error);
    }

    let mut extra = vec![
        ("input", file_name(&cfg.input)),
        ("seed", cfg.seed.to_string()),
        ("threshold", morphometry::format_sig(seg.threshold)),
    ];
    for f in &failures {
        extra.push(("skipped_cell", format!("{} {}", f.cell_id, f.error)));
    }
    let prov = provenance(&cfg.canonical(), &extra);

    let mut out = StagedOutputs::new(&cfg.output_dir);
    let table_name = format!("D_{}.csv", meta.stack_id);
    let mut table = Vec::new();
    morphometry::write_morph_table(&rows, &prov, &mut table)
        .map_err(|e| Error::io(&table_name, e))?;
    out.add(&table_name, table);

    if cfg.manual.is_some() || cfg.ilastik.is_some() {
        let inputs = CompareInputs {
            manual: cfg
                .manual
                .as_ref()
                .map(|p| compare::parse_manual(p).map(|v| (file_name(p), v)))
                .transpose()?,
            ilastik: cfg
                .ilastik
                .as_ref()
                .map(|p| compare::parse_ilastik(p).map(|v| (file_name(p), v)))
                .transpose()?,
            morph: Some((
                table_name.clone(),
                rows.iter().map(MorphRecord::from).collect(),
            )),
        };
        let ccfg = CompareConfig {
            um_per_px: cfg.um_per_px,
            radius: cfg.radius,
            reference_mode: cfg.reference_mode,
        };
        let mut report = compare::summarize(&inputs, &ccfg)?;
        report.provenance = prov.clone();
        out.add(
            &format!("compare_{}.json", meta.stack_id),
            report.to_json().into_bytes(),
        );
        let svg = with_svg_comment(compare::scatter_svg(&report.points, cfg.um_per_px), &prov);
        out.add(
            &format!("centroids_{}.svg", meta.stack_id),
            svg.into_bytes(),
        );
    }

    let outputs = out.commit()?;
    Ok(RunSummary {
        rows,
        failures,
        threshold: seg.threshold,
        outputs,
    })
}

/// Insert provenance as an XML comment right after the opening tag line.
pub fn with_svg_comment(svg: String, prov: &[String]) -> String {
    let Some(pos) = svg.find('\n') else {
        return svg;
    };
    let comment: String = prov
        .iter()
        .map(|l| format!("<!-- {} -->\n", l.replace("--", "- -")))
        .collect();
    format!("{}{}{}", &svg[..=pos], comment, &svg[pos + 1..])
}
