//! `fbhm` command-line front end.
//!
//! Exit codes: 0 success, 2 parse/format error, 3 I/O error, 4 validation error.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{config_err, Error, Result};
use crate::eval::{Metrics, ScoredLabels};
use crate::features::{make_grid_basis, FeatureBasis, Point2};
use crate::fusion::{fuse_maps, write_transcript, Contribution, FilterPolicy};
use crate::ingest::{
    flatten, read_beam_log, read_samples_csv, scans_from_beams, split_scans, synth_environment, write_beam_log,
    write_samples_csv, Layout, ScanRecord,
};
use crate::model::{self, em_update, predict, TrainConfig, WeightPosterior};
use crate::simulate::{
    quadrant_agents, render_model_pgm, run_simulation, Experiment, SimulationPlan, DEFAULT_GAMMA_SCALE,
};

#[derive(Debug, Parser)]
#[command(
    name = "fbhm",
    version,
    about = "Fast Bayesian Hilbert Maps: training, fusion and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a labeled sample CSV
    Train(TrainArgs),
    /// Merge trained models into one global model
    Fuse(FuseArgs),
    /// Run a multi-agent fusion simulation and write a JSON report
    Simulate(SimulateArgs),
    /// Evaluate a model on a labeled test CSV
    Eval(EvalArgs),
    /// Render a model's occupancy probabilities to a PGM image
    Render(RenderArgs),
    /// Generate labeled samples from a synthetic layout
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BasisArgs {
    /// Inducing-point lattice spacing, meters
    #[arg(long, default_value_t = 0.8)]
    pub spacing: f64,
    /// Kernel width (1/m^2); defaults to 6/spacing^2
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Append a constant bias feature
    #[arg(long)]
    pub bias: bool,
    /// Lattice extent "xmin,xmax,ymin,ymax"; defaults to the data bounding box
    #[arg(long, value_parser = parse_extent)]
    pub extent: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 0.0)]
    pub prior_mean: f64,
    #[arg(long, default_value_t = 1e4)]
    pub prior_variance: f64,
    #[arg(long, default_value_t = 3)]
    pub em_iters: u16,
}

impl TrainFlags {
    fn config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            prior_mean: self.prior_mean,
            prior_variance: self.prior_variance,
            em_iterations: self.em_iters,
            ..TrainConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled samples (scan_id,x,y,label)
    #[arg(long, required_unless_present = "beam_log", conflicts_with = "beam_log")]
    pub input: Option<PathBuf>,
    /// Beam log (POSE/BEAM lines) to ray-sample instead of a sample CSV
    #[arg(long)]
    pub beam_log: Option<PathBuf>,
    /// Free-space sample spacing along beams, meters
    #[arg(long, default_value_t = 0.3)]
    pub free_spacing: f64,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Model files to merge
    #[arg(required = true)]
    pub models: Vec<PathBuf>,
    /// Defaults to half the prior variance
    #[arg(long)]
    pub variance_threshold: Option<f64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Synthetic layout JSON; the built-in four-room layout when omitted
    #[arg(long, conflicts_with = "samples")]
    pub layout: Option<PathBuf>,
    /// Replay a labeled sample CSV instead of synthesizing
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub beams: usize,
    #[arg(long, default_value_t = 0.02)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0.3)]
    pub free_spacing: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    #[arg(long, default_value_t = 0.8)]
    pub spacing: f64,
    /// Kernel width as a multiple of 1/spacing^2
    #[arg(long, default_value_t = DEFAULT_GAMMA_SCALE)]
    pub gamma_scale: f64,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1.0")]
    pub fusion_points: Vec<f64>,
    #[arg(long)]
    pub variance_threshold: Option<f64>,
    /// Per-round transmission cap in bytes
    #[arg(long)]
    pub bandwidth_cap: Option<u64>,
    #[arg(long)]
    pub report: PathBuf,
    /// Write the final global model here
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Write a JSON-lines fusion transcript here
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Write one PGM render of the global map per round into this directory
    #[arg(long)]
    pub render_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub render_resolution: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled test samples (scan_id,x,y,label)
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Write metrics JSON here
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Pixel size, meters
    #[arg(long, default_value_t = 0.1)]
    pub resolution: f64,
    /// Raster extent "xmin,xmax,ymin,ymax"; defaults to the basis extent
    #[arg(long, value_parser = parse_extent)]
    pub extent: Option<[f64; 4]>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub beams: usize,
    #[arg(long, default_value_t = 0.02)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0.3)]
    pub free_spacing: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Labeled sample CSV output
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the raw sweeps as a beam log
    #[arg(long)]
    pub beam_log: Option<PathBuf>,
}

fn parse_extent(s: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let arr: [f64; 4] = v
        .try_into()
        .map_err(|_| "extent needs four comma-separated numbers".to_string())?;
    if !(arr[1] > arr[0] && arr[3] > arr[2]) {
        return Err("extent must satisfy xmax > xmin and ymax > ymin".into());
    }
    Ok(arr)
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Format(_) => 2,
        Error::Io(_) => 3,
        _ => 4,
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("fbhm: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one subcommand, returning its one-line summary.
pub fn run(cmd: Command) -> Result<String> {
    match cmd {
        Command::Train(a) => cmd_train(&a),
        Command::Fuse(a) => cmd_fuse(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Render(a) => cmd_render(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn read_scans(path: &Path) -> Result<Vec<ScanRecord>> {
    read_samples_csv(BufReader::new(fs::File::open(path)?))
}

fn read_model(path: &Path) -> Result<(WeightPosterior, FeatureBasis, TrainConfig)> {
    model::deserialize(&fs::read(path)?)
}

fn read_layout(path: Option<&Path>) -> Result<Layout> {
    match path {
        Some(p) => {
            let layout: Layout = serde_json::from_reader(BufReader::new(fs::File::open(p)?))?;
            layout.validate()?;
            Ok(layout)
        }
        None => Ok(Layout::four_rooms()),
    }
}

fn bounding_box(scans: &[ScanRecord]) -> Option<(Point2, Point2)> {
    let mut it = scans.iter().flat_map(|s| s.samples.iter().map(|p| p.point));
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), p| {
        (
            Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
            Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
        )
    }))
}

fn build_basis(a: &BasisArgs, scans: &[ScanRecord]) -> Result<FeatureBasis> {
    let [xmin, xmax, ymin, ymax] = match a.extent {
        Some(e) => e,
        None => {
            let (lo, hi) = bounding_box(scans).ok_or_else(|| config_err("no samples to size the basis from"))?;
            [lo.x, hi.x, lo.y, hi.y]
        }
    };
    let gamma = a.gamma.unwrap_or(DEFAULT_GAMMA_SCALE / (a.spacing * a.spacing));
    make_grid_basis(xmin, xmax, ymin, ymax, a.spacing, gamma, a.bias)
}

pub fn cmd_train(a: &TrainArgs) -> Result<String> {
    let cfg = a.train.config()?;
    let scans = match (&a.input, &a.beam_log) {
        (Some(p), _) => read_scans(p)?,
        (None, Some(p)) => {
            let sweeps = read_beam_log(BufReader::new(fs::File::open(p)?))?;
            scans_from_beams(&sweeps, a.free_spacing)?
        }
        (None, None) => return Err(config_err("train needs --input or --beam-log")),
    };
    let basis = build_basis(&a.basis, &scans)?;
    let mut map = WeightPosterior::new_map(&basis, &cfg);
    for s in &scans {
        map = em_update(&map, &basis, &s.samples, &cfg)?;
    }
    let bytes = model::serialize(&map, &basis, &cfg)?;
    fs::write(&a.output, &bytes)?;
    Ok(format!(
        "trained {} weights on {} scans ({} samples); wrote {} bytes to {}",
        basis.dim(),
        scans.len(),
        scans.iter().map(|s| s.samples.len()).sum::<usize>(),
        bytes.len(),
        a.output.display()
    ))
}

pub fn cmd_fuse(a: &FuseArgs) -> Result<String> {
    let models = a.models.iter().map(|p| read_model(p)).collect::<Result<Vec<_>>>()?;
    let (_, basis, cfg) = &models[0];
    let policy = FilterPolicy {
        variance_threshold: a.variance_threshold.unwrap_or(0.5 * cfg.prior_variance),
    };
    let contributions: Vec<_> = models.iter().map(|(m, _, _)| Contribution::Full(m)).collect();
    let fused = fuse_maps(&contributions, cfg.prior_mean, cfg.prior_variance, &policy)?;
    let bytes = model::serialize(&fused, basis, cfg)?;
    fs::write(&a.output, &bytes)?;
    Ok(format!(
        "fused {} models ({} weights); wrote {} bytes to {}",
        models.len(),
        basis.dim(),
        bytes.len(),
        a.output.display()
    ))
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<String> {
    let cfg = a.train.config()?;
    let mut exp = Experiment {
        layout: read_layout(a.layout.as_deref())?,
        beam_count: a.beams,
        noise_sd: a.noise_sd,
        free_spacing: a.free_spacing,
        seed: a.seed,
        folds: a.folds,
        fold: a.fold,
        spacing: a.spacing,
        gamma_scale: a.gamma_scale,
        train: cfg,
    };
    let data = match &a.samples {
        None => exp.prepare()?,
        Some(path) => {
            let scans = read_scans(path)?;
            let (train, test) = split_scans(&scans, exp.folds, exp.fold)?;
            let extent = bounding_box(&scans).ok_or_else(|| config_err("sample file is empty"))?;
            let center = Point2::new(0.5 * (extent.0.x + extent.1.x), 0.5 * (extent.0.y + extent.1.y));
            exp.layout = Layout::four_rooms();
            crate::simulate::PreparedData {
                train,
                test,
                extent,
                center,
            }
        }
    };
    let basis = exp.basis(data.extent)?;
    let plan = SimulationPlan {
        fusion_points: a.fusion_points.clone(),
        policy: FilterPolicy {
            variance_threshold: a.variance_threshold.unwrap_or(0.5 * cfg.prior_variance),
        },
        bandwidth_cap: a.bandwidth_cap,
    };
    let agents = quadrant_agents(&data.train, data.center, &basis, &cfg);
    let report = run_simulation(agents, &plan, &basis, &cfg, &data.test)?;

    let mut w = BufWriter::new(fs::File::create(&a.report)?);
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let global = report.final_global().expect("at least one round");
    if let Some(path) = &a.model_out {
        fs::write(path, model::serialize(global, &basis, &cfg)?)?;
    }
    if let Some(path) = &a.transcript {
        let records: Vec<_> = report.rounds.iter().map(|r| r.transcript()).collect();
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_transcript(&mut w, &records)?;
        w.flush()?;
    }
    if let Some(dir) = &a.render_dir {
        fs::create_dir_all(dir)?;
        let (lo, hi) = data.extent;
        for (i, g) in report.globals.iter().enumerate() {
            let pgm = render_model_pgm(g, &basis, lo, hi, a.render_resolution)?;
            fs::write(dir.join(format!("round_{:02}.pgm", i + 1)), pgm)?;
        }
    }
    let fmt = |m: Option<Metrics>| m.map_or_else(|| "n/a".to_string(), |m| format!("{:.4}", m.auc));
    Ok(format!(
        "{} agents, {} rounds, {} weights: fused AUC {}, joint AUC {}; report at {}",
        report.agents.len(),
        report.rounds.len(),
        basis.dim(),
        fmt(report.metrics.fused),
        fmt(report.metrics.joint),
        a.report.display()
    ))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let (map, basis, _) = read_model(&a.model)?;
    let scans = read_scans(&a.test)?;
    let samples = flatten(&scans);
    let scores = samples.iter().map(|s| predict(&map, &basis, &s.point)).collect();
    let sl = ScoredLabels::new(scores, samples.iter().map(|s| s.label()).collect())?;
    let metrics = Metrics::compute(&sl, a.threshold)?;
    if let Some(path) = &a.metrics {
        let mut w = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &metrics)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    eprint!("{}", metrics.table());
    Ok(format!(
        "auc {:.4} on {} samples ({} occupied)",
        metrics.auc, metrics.samples, metrics.positives
    ))
}

pub fn cmd_render(a: &RenderArgs) -> Result<String> {
    let (map, basis, _) = read_model(&a.model)?;
    let (lo, hi) = match a.extent {
        Some([x0, x1, y0, y1]) => (Point2::new(x0, y0), Point2::new(x1, y1)),
        None => basis.extent(),
    };
    let pgm = render_model_pgm(&map, &basis, lo, hi, a.resolution)?;
    fs::write(&a.output, &pgm)?;
    Ok(format!("rendered {} bytes to {}", pgm.len(), a.output.display()))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<String> {
    let layout = read_layout(a.layout.as_deref())?;
    let env = synth_environment(&layout, a.beams, a.noise_sd, a.seed)?;
    let scans = scans_from_beams(&env.sweeps, a.free_spacing)?;
    let mut w = BufWriter::new(fs::File::create(&a.output)?);
    write_samples_csv(&mut w, &scans)?;
    w.flush()?;
    if let Some(path) = &a.beam_log {
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_beam_log(&mut w, &env.sweeps)?;
        w.flush()?;
    }
    Ok(format!(
        "synthesized {} scans ({} samples) to {}",
        scans.len(),
        scans.iter().map(|s| s.samples.len()).sum::<usize>(),
        a.output.display()
    ))
}
