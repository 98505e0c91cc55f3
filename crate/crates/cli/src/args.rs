use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sgm_core::losses::Loss;
use sgm_core::model_selection::{grid_lin, grid_log};
use sgm_core::schedules::Preset;
use sgm_core::sgm::Iterate;

#[derive(Debug, Parser)]
#[command(name = "sgm", version, about = "Stochastic gradient methods in reproducing kernel Hilbert spaces")]
#[command(args_override_self = true)]
#[command(after_help = "Every subcommand also accepts --config FILE with key=value lines named after its flags; \
    flags given on the command line win. SGM_JOBS sets the default worker count.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train once and write the trace CSV and the final models.
    Train(TrainArgs),
    /// Test error after every pass, averaged over repetitions.
    SweepPasses(SweepPassesArgs),
    /// Test error after a fixed number of passes for every value of a step-size grid.
    SweepStep(SweepStepArgs),
    /// Hold-out selection of the step size or its decay exponent.
    Cv(CvArgs),
    /// Hold-out selection of the number of iterations.
    EarlyStop(EarlyStopArgs),
    /// The four-method comparison (constant/decaying steps, one pass/early stopping).
    Table(TableArgs),
    /// Excess-risk bounds over a grid of iteration counts and sample sizes.
    Bounds(BoundsArgs),
    /// Consistency verdict for the schedule family eta_t = m^(-q) t^(-theta), t <= m^p.
    CheckSchedule(CheckScheduleArgs),
    /// Validate a LIBSVM file and print its size, dimension and label counts.
    Parse(ParseArgs),
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Training data in LIBSVM format.
    #[arg(long)]
    pub data: PathBuf,
    /// Test data in LIBSVM format.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Rescale every feature to [0, 1] using the training data's range.
    #[arg(long)]
    pub scale: bool,
    /// Map a two-class label set onto -1/+1 (smaller label becomes -1).
    #[arg(long)]
    pub binarize: bool,
    /// Keep a random subset of this many training samples.
    #[arg(long)]
    pub subsample: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "hinge", value_parser = parse_loss)]
    pub loss: Loss,
    /// gaussian:SIGMA, linear, or precomputed:PATH (feature 1 of each sample holds its row id).
    #[arg(long, default_value = "gaussian:1")]
    pub kernel: String,
}

#[derive(Debug, Args, Clone)]
pub struct ScheduleArgs {
    /// Named schedule: smooth-const-es, smooth-decay-es, smooth-const-1p, smooth-decay-1p,
    /// hinge-const-es, hinge-decay-es, hinge-const-1p, hinge-decay-1p.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    /// Step scale: a number, or C/sqrt(m). With --preset it overrides the first step.
    #[arg(long, value_parser = parse_eta)]
    pub eta: Option<EtaSpec>,
    /// Decay exponent in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Source-condition exponent used by presets and bounds.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to SGM_JOBS or the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Which iterate is evaluated and reported.
    #[arg(long, default_value = "last", value_parser = parse_iterate)]
    pub iterate: Iterate,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ProtocolArgs {
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Fraction of the data used for training in each hold-out split.
    #[arg(long, default_value_t = 0.8)]
    pub holdout: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Passes over the data (one pass is m iterations); defaults to 1, or to the preset's
    /// stopping time with --preset.
    #[arg(long, conflicts_with = "iterations")]
    pub passes: Option<u64>,
    /// Total iterations.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Iterations between trace records; defaults to m.
    #[arg(long)]
    pub record_every: Option<u64>,
    /// Check the per-step distance inequality and the norm ceiling while training.
    #[arg(long)]
    pub check_invariants: bool,
    /// Recompute kernel rows instead of caching them.
    #[arg(long)]
    pub no_cache: bool,
    /// Permit smooth-loss steps above 2/(kappa^2 L).
    #[arg(long)]
    pub allow_large_steps: bool,
    /// Model path prefix: writes PREFIX.last.model and PREFIX.avg.model. Defaults to the
    /// --out path without its extension.
    #[arg(long = "model")]
    pub model_path: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepPassesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 100)]
    pub passes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tune {
    Eta,
    Theta,
}

#[derive(Debug, Args)]
pub struct SweepStepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = Tune::Eta)]
    pub tune: Tune,
    /// lo:hi:n:log|lin or a comma list; defaults to 0.001:1:30:log for eta and 0:1:30:lin for theta.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    /// Fixed step scale when tuning theta.
    #[arg(long, default_value_t = 0.25)]
    pub eta: f64,
    #[arg(long, default_value_t = 1)]
    pub passes: u64,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Fraction of the data used for training; the rest validates.
    #[arg(long, default_value_t = 0.8)]
    pub holdout: f64,
    #[arg(long, value_enum, default_value_t = Tune::Eta)]
    pub tune: Tune,
    /// lo:hi:n:log|lin or a comma list; defaults to 0.001:1:30:log for eta and 0:1:30:lin for theta.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    /// Fixed step scale when tuning theta.
    #[arg(long, default_value_t = 0.25)]
    pub eta: f64,
    #[arg(long, default_value_t = 1)]
    pub passes: u64,
}

#[derive(Debug, Args)]
pub struct EarlyStopArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Fraction of the data used for training; the rest validates.
    #[arg(long, default_value_t = 0.8)]
    pub holdout: f64,
    /// Pass budget.
    #[arg(long, default_value_t = 100)]
    pub passes: u64,
    /// Iterations between validation checks; defaults to one pass.
    #[arg(long)]
    pub eval_every: Option<u64>,
    /// Stop after this many checks without improvement.
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Candidates per step-size grid.
    #[arg(long, default_value_t = 30)]
    pub grid_size: usize,
    /// Pass budget of the early-stopped methods.
    #[arg(long, default_value_t = 100)]
    pub passes: u64,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Form {
    Exact,
    Polynomial,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, default_value = "hinge", value_parser = parse_loss)]
    pub loss: Loss,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Kernel bound; computed from --data and --kernel when those are given.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "gaussian:1")]
    pub kernel: String,
    /// Source-condition constant.
    #[arg(long, default_value_t = 1.0)]
    pub c_beta: f64,
    /// Iteration counts (lo:hi:n:log|lin or a comma list); defaults to the preset's stopping time for each m.
    #[arg(long, value_parser = parse_grid)]
    pub t: Option<Grid>,
    /// Sample sizes (lo:hi:n:log|lin or a comma list).
    #[arg(long, value_parser = parse_grid, default_value = "100:10000:3:log")]
    pub m: Grid,
    #[arg(long, value_enum, default_value_t = Form::Exact)]
    pub form: Form,
    /// Iterate whose terms fill the term_* columns.
    #[arg(long, default_value = "last", value_parser = parse_iterate)]
    pub iterate: Iterate,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckScheduleArgs {
    #[arg(long, required_unless_present = "preset")]
    pub theta: Option<f64>,
    #[arg(long, required_unless_present = "preset")]
    pub q: Option<f64>,
    #[arg(long, required_unless_present = "preset")]
    pub p: Option<f64>,
    /// Check a named schedule's family instead.
    #[arg(long, value_parser = parse_preset, conflicts_with_all = ["theta", "q", "p"])]
    pub preset: Option<Preset>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub data: PathBuf,
}

/// A step scale given either directly or relative to the training size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSpec {
    Value(f64),
    InvSqrtM(f64),
}

impl FromStr for EtaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let number = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("invalid step size {s:?}"));
        match s.strip_suffix("/sqrt(m)") {
            Some(scale) => Ok(EtaSpec::InvSqrtM(number(scale)?)),
            None => Ok(EtaSpec::Value(number(s)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if !s.contains(':') {
            return s
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| format!("invalid number {v:?} in list {s:?}")))
                .collect::<Result<Vec<_>, _>>()
                .map(Grid);
        }
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n, kind] = parts.as_slice() else {
            return Err(format!("grid {s:?} must look like lo:hi:n:log or lo:hi:n:lin"));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("invalid number {v:?} in grid {s:?}"));
        let (lo, hi) = (num(lo)?, num(hi)?);
        let n: usize = n.trim().parse().map_err(|_| format!("invalid count {n:?} in grid {s:?}"))?;
        if n == 1 && lo == hi {
            return Ok(Grid(vec![lo]));
        }
        let values = match kind.trim() {
            "log" => grid_log(lo, hi, n),
            "lin" => grid_lin(lo, hi, n),
            other => return Err(format!("grid spacing must be log or lin, found {other:?}")),
        }
        .map_err(|e| e.to_string())?;
        Ok(Grid(values))
    }
}

fn parse_loss(s: &str) -> Result<Loss, String> {
    s.parse().map_err(|e: sgm_core::losses::LossError| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: sgm_core::schedules::ScheduleError| e.to_string())
}

fn parse_iterate(s: &str) -> Result<Iterate, String> {
    s.parse()
}

fn parse_eta(s: &str) -> Result<EtaSpec, String> {
    s.parse()
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    s.parse()
}

pub fn check_holdout(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        bail!("--holdout must lie strictly between 0 and 1, got {fraction}");
    }
    Ok(())
}
