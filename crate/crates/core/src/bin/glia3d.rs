//! `glia3d` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input error,
//! 4 processing error.

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use glia3d::compare::{self, CompareConfig, CompareInputs, ReferenceMode};
use glia3d::config::{ConfigLayer, PipelineConfig, Threshold};
use glia3d::morphometry;
use glia3d::phantom::{self, CellKind, SceneSpec};
use glia3d::pipeline::{self, SegmentParams};
use glia3d::skeleton;
use glia3d::volume_io::{self, Spacing};
use glia3d::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "glia3d",
    version,
    about = "Segment and measure cells in 3D z-stacks"
)]
struct Cli {
    /// Flat TOML settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stack with ground truth.
    Phantom(PhantomArgs),
    /// Threshold and label a stack; writes a 16-bit label TIFF.
    Segment(SegmentArgs),
    /// Skeletonize every label; writes cell_id,x,y,z,kind rows.
    Skeleton(LabelArgs),
    /// Measure every label; writes the feature table.
    Morph(LabelArgs),
    /// Compare manual, ilastik and morphology tables.
    Compare(CompareArgs),
    /// Full pipeline from stack to feature table and report.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Scene,
    Tube,
    Y,
    Sphere,
    Blobs,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(value_enum)]
    shape: Shape,
    /// Output stack (16-bit multi-page TIFF).
    #[arg(long)]
    out: PathBuf,
    /// Ground truth as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Isotropic voxel pitch in µm.
    #[arg(long, default_value_t = 0.5)]
    pitch: f64,
    /// Cells in a scene.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Cell kind in a scene: tube, y, sphere or blob.
    #[arg(long, default_value = "tube")]
    kind: String,
    /// Minimum surface gap between scene cells, µm.
    #[arg(long, default_value_t = 2.0)]
    min_gap: f64,
    /// Tube length in µm, caps included.
    #[arg(long, default_value_t = 20.0)]
    length: f64,
    /// Process radius in µm; for `sphere`, the sphere radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Y-cell arm length in µm.
    #[arg(long, default_value_t = 10.0)]
    arm: f64,
    /// Blob pair center distance in µm.
    #[arg(long, default_value_t = 5.0)]
    separation: f64,
    /// Blob Gaussian width in µm.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Blob pair: separated instead of merged.
    #[arg(long)]
    separated: bool,
    /// Gaussian noise sigma on the [0, 1] scale.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

#[derive(Args)]
struct SegmentFlags {
    /// Voxel spacing in µm: one value or x,y,z.
    #[arg(long, value_parser = parse_spacing)]
    spacing: Option<[f64; 3]>,
    /// `auto` (Otsu) or a value in [0, 1].
    #[arg(long)]
    threshold: Option<String>,
    /// 6, 18 or 26.
    #[arg(long)]
    connectivity: Option<u32>,
    /// Drop components with fewer voxels [default: 10].
    #[arg(long)]
    min_voxels: Option<usize>,
    /// Split components above this volume (µm³).
    #[arg(long)]
    max_volume: Option<f64>,
    /// Largest mixture order tried when splitting [default: 4].
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Multi-page TIFF or directory of slices.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    flags: SegmentFlags,
    /// Label TIFF to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelArgs {
    /// Label TIFF from `segment`.
    #[arg(long)]
    labels: PathBuf,
    /// Voxel spacing in µm: one value or x,y,z.
    #[arg(long, value_parser = parse_spacing)]
    spacing: Option<[f64; 3]>,
    /// CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareFlags {
    /// Manual path table (M_ CSV).
    #[arg(long)]
    manual: Option<PathBuf>,
    /// ilastik object table (i_ CSV).
    #[arg(long)]
    ilastik: Option<PathBuf>,
    /// Microns per pixel, to match pixel-unit centroids.
    #[arg(long)]
    um_per_px: Option<f64>,
    /// Matching radius in µm.
    #[arg(long)]
    radius: Option<f64>,
    /// start or midpoint.
    #[arg(long)]
    reference_mode: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    flags: CompareFlags,
    /// Feature table (D_ CSV).
    #[arg(long)]
    morph: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// X-Y centroid scatter.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Multi-page TIFF or directory of slices.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory for D_<stack>.csv and, with comparison inputs, the report and scatter.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    segment: SegmentFlags,
    #[command(flatten)]
    compare: CompareFlags,
}

fn parse_spacing(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [a] => Ok([a; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err("expected one value or x,y,z".into()),
    }
}

fn config_err(e: impl Into<glia3d::config::ConfigError>) -> Error {
    Error::Config(e.into())
}

impl SegmentFlags {
    fn layer(&self) -> Result<ConfigLayer, Error> {
        Ok(ConfigLayer {
            spacing: self.spacing,
            threshold: self
                .threshold
                .as_deref()
                .map(str::parse::<Threshold>)
                .transpose()
                .map_err(config_err)?,
            connectivity: self.connectivity,
            min_voxels: self.min_voxels,
            max_volume: self.max_volume,
            k_max: self.k_max,
            ..Default::default()
        })
    }
}

impl CompareFlags {
    fn layer(&self) -> Result<ConfigLayer, Error> {
        Ok(ConfigLayer {
            manual: self.manual.clone(),
            ilastik: self.ilastik.clone(),
            um_per_px: self.um_per_px,
            radius: self.radius,
            reference_mode: self
                .reference_mode
                .as_deref()
                .map(str::parse::<ReferenceMode>)
                .transpose()
                .map_err(|e| {
                    config_err(glia3d::config::ConfigError::Invalid {
                        key: "reference_mode",
                        message: e.to_string(),
                    })
                })?,
            ..Default::default()
        })
    }
}

/// File layer under flag layer. Placeholders fill the keys a subcommand
/// does not use so the shared validation can run.
fn resolve(cli: &Cli, flags: ConfigLayer, uses_spacing: bool) -> Result<PipelineConfig, Error> {
    let file = match &cli.config {
        Some(p) => ConfigLayer::from_file(p).map_err(config_err)?,
        None => ConfigLayer::default(),
    };
    let merged = file.overlay(flags).overlay(ConfigLayer {
        seed: cli.seed,
        ..Default::default()
    });
    let with_placeholders = ConfigLayer {
        input: Some(PathBuf::new()),
        output_dir: Some(PathBuf::new()),
        spacing: (!uses_spacing).then_some([1.0; 3]),
        ..Default::default()
    }
    .overlay(merged);
    PipelineConfig::try_from(with_placeholders).map_err(config_err)
}

fn cmd_phantom(cli: &Cli, a: &PhantomArgs) -> Result<(), Error> {
    let seed = cli.seed.unwrap_or(0);
    let spacing = Spacing::isotropic(a.pitch);
    let (grid, mut truth) = match a.shape {
        Shape::Scene => {
            let kind: CellKind = a.kind.parse()?;
            let mut spec = SceneSpec::new(a.k, a.min_gap, kind, seed);
            spec.spacing = spacing;
            spec.tube_length = a.length;
            spec.radius = a.radius;
            spec.arm_length = a.arm;
            spec.blob_sigma = a.sigma;
            phantom::make_scene(&spec)?
        }
        Shape::Tube => phantom::make_tube(a.length, a.radius, spacing)?,
        Shape::Y => phantom::make_y_cell(a.arm, a.radius, spacing)?,
        Shape::Sphere => phantom::make_sphere(a.radius, spacing)?,
        Shape::Blobs => phantom::make_blob_pair(a.separation, a.sigma, spacing, !a.separated)?,
    };
    let grid = phantom::add_noise(&grid, a.noise, seed)?;
    truth.noise_sigma = a.noise;
    truth.seed = seed;
    let mut buf = Cursor::new(Vec::new());
    volume_io::write_normalized_stack(&grid, &mut buf)?;
    pipeline::write_atomic(&a.out, buf.into_inner())?;
    if let Some(t) = &a.truth {
        let json = serde_json::to_string_pretty(&truth).expect("truth serializes");
        pipeline::write_atomic(t, json.into_bytes())?;
    }
    println!("{} cells, {:?} voxels", truth.cells.len(), grid.dims());
    Ok(())
}

fn cmd_segment(cli: &Cli, a: &SegmentArgs) -> Result<(), Error> {
    let mut layer = a.flags.layer()?;
    layer.input = a.input.clone();
    let cfg = resolve(cli, layer, true)?;
    if cfg.input.as_os_str().is_empty() {
        return Err(config_err(glia3d::config::ConfigError::Missing("input")));
    }
    let (raw, _) = volume_io::load_stack(&cfg.input, Spacing(cfg.spacing))?;
    let grid = volume_io::normalize(&raw);
    let seg = pipeline::segment(&grid, &SegmentParams::from(&cfg))?;
    let mut buf = Cursor::new(Vec::new());
    pipeline::write_labels(&seg.labels, &mut buf)?;
    pipeline::write_atomic(&a.out, buf.into_inner())?;
    println!(
        "threshold {:.6}, {} cells",
        seg.threshold,
        seg.labels.count()
    );
    Ok(())
}

fn load_label_args(
    cli: &Cli,
    a: &LabelArgs,
) -> Result<(PipelineConfig, glia3d::segmentation::LabelVolume), Error> {
    let cfg = resolve(
        cli,
        ConfigLayer {
            spacing: a.spacing,
            ..Default::default()
        },
        true,
    )?;
    let labels = pipeline::load_labels(&a.labels, Spacing(cfg.spacing))?;
    Ok((cfg, labels))
}

fn cmd_skeleton(cli: &Cli, a: &LabelArgs) -> Result<(), Error> {
    let (_, labels) = load_label_args(cli, a)?;
    let mut graphs = Vec::new();
    for r in morphometry::analyze_cells_detailed(&labels) {
        match r {
            Ok(c) => graphs.push((c.skeleton, c.graph)),
            Err(f) => log::warn!("cell {} skipped: {}", f.cell_id, f.error),
        }
    }
    let mut buf = Vec::new();
    skeleton::write_skeleton_csv(&graphs, &mut buf).map_err(|e| Error::io(&a.out, e))?;
    pipeline::write_atomic(&a.out, buf)?;
    println!("{} skeletons", graphs.len());
    Ok(())
}

fn cmd_morph(cli: &Cli, a: &LabelArgs) -> Result<(), Error> {
    let (cfg, labels) = load_label_args(cli, a)?;
    let (rows, failures) = morphometry::analyze_cells(&labels);
    let mut extra = vec![("input", a.labels.display().to_string())];
    for f in &failures {
        log::warn!("cell {} skipped: {}", f.cell_id, f.error);
        extra.push(("skipped_cell", format!("{} {}", f.cell_id, f.error)));
    }
    let prov = pipeline::provenance(&cfg.canonical(), &extra);
    let mut buf = Vec::new();
    morphometry::write_morph_table(&rows, &prov, &mut buf).map_err(|e| Error::io(&a.out, e))?;
    pipeline::write_atomic(&a.out, buf)?;
    println!("{} cells", rows.len());
    Ok(())
}

fn name_of(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn cmd_compare(cli: &Cli, a: &CompareArgs) -> Result<(), Error> {
    let cfg = resolve(cli, a.flags.layer()?, false)?;
    let inputs = CompareInputs {
        manual: cfg
            .manual
            .as_ref()
            .map(|p| compare::parse_manual(p).map(|v| (name_of(p), v)))
            .transpose()?,
        ilastik: cfg
            .ilastik
            .as_ref()
            .map(|p| compare::parse_ilastik(p).map(|v| (name_of(p), v)))
            .transpose()?,
        morph: a
            .morph
            .as_ref()
            .map(|p| compare::parse_morph(p).map(|v| (name_of(p), v)))
            .transpose()?,
    };
    let ccfg = CompareConfig {
        um_per_px: cfg.um_per_px,
        radius: cfg.radius,
        reference_mode: cfg.reference_mode,
    };
    let mut report = compare::summarize(&inputs, &ccfg)?;
    let prov = pipeline::provenance(&cfg.canonical(), &[]);
    report.provenance = prov.clone();
    let mut staged = Vec::new();
    staged.push((a.out.clone(), report.to_json().into_bytes()));
    if let Some(svg) = &a.svg {
        let text =
            pipeline::with_svg_comment(compare::scatter_svg(&report.points, cfg.um_per_px), &prov);
        staged.push((svg.clone(), text.into_bytes()));
    }
    for (path, bytes) in staged {
        pipeline::write_atomic(&path, bytes)?;
    }
    for m in &report.methods {
        println!("{}: {} objects ({})", m.method, m.count, m.units);
    }
    for m in &report.matches {
        println!(
            "{} vs {}: {} matches, precision {}, recall {}",
            m.method,
            m.reference,
            m.result.pairs.len(),
            m.result
                .precision
                .map_or("n/a".into(), |v| format!("{v:.3}")),
            m.result.recall.map_or("n/a".into(), |v| format!("{v:.3}")),
        );
    }
    Ok(())
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> Result<(), Error> {
    let file = match &cli.config {
        Some(p) => ConfigLayer::from_file(p).map_err(config_err)?,
        None => ConfigLayer::default(),
    };
    let mut flags = a.segment.layer()?.overlay(a.compare.layer()?);
    flags.input = a.input.clone();
    flags.output_dir = a.output_dir.clone();
    flags.seed = cli.seed;
    let cfg = PipelineConfig::try_from(file.overlay(flags)).map_err(config_err)?;
    let summary = pipeline::run(&cfg)?;
    println!(
        "{} cells ({} skipped), threshold {:.6}",
        summary.rows.len(),
        summary.failures.len(),
        summary.threshold
    );
    for p in &summary.outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Input => 3,
        ErrorKind::Processing => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Phantom(a) => cmd_phantom(&cli, a),
        Command::Segment(a) => cmd_segment(&cli, a),
        Command::Skeleton(a) => cmd_skeleton(&cli, a),
        Command::Morph(a) => cmd_morph(&cli, a),
        Command::Compare(a) => cmd_compare(&cli, a),
        Command::Run(a) => cmd_run(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.module());
            eprintln!("hint: {}", e.hint());
            ExitCode::from(exit_code(&e))
        }
    }
}
