//! Repeated-run protocols: test error against the number of passes, test error against
//! the step-size parameter, and the four-way comparison of tuned one-pass runs with
//! early-stopped multi-pass runs.
//!
//! Every repetition `r` shuffles and splits the data with seed `derive_seed(seed, r)`, and
//! the runs inside it derive further seeds from that. Results are keyed by repetition, so
//! output does not depend on the number of workers.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::data::{format_real, split_holdout, DataError, Dataset};
use crate::kernels::{Kernel, KernelError};
use crate::losses::Loss;
use crate::model_selection::{
    cv_step_size, early_stopping, grid_lin, grid_log, CvOptions, EarlyStopOptions, SelectionError, TuneMode,
};
use crate::parallel::map_indexed;
use crate::rng::{derive_seed, rng_from_seed};
use crate::schedules::{preset_for, Preset, ScheduleError, StepSchedule};
use crate::sgm::{Iterate, SgmError, SgmRun, SgmRunConfig};
use crate::stats::{mean, sample_std};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Sgm(#[from] SgmError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("{0}")]
    Invalid(String),
}

/// How the step-size schedule is chosen once the training size `m` is known.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Explicit(StepSchedule),
    /// `eta_t = scale / sqrt(m)`.
    InvSqrtM { scale: f64 },
    Preset { preset: Preset, beta: f64, eta1: Option<f64> },
}

impl ScheduleSpec {
    pub fn resolve(&self, m: usize, loss: Loss, kappa: f64) -> Result<StepSchedule, ExperimentError> {
        Ok(match self {
            ScheduleSpec::Explicit(s) => *s,
            ScheduleSpec::InvSqrtM { scale } => StepSchedule::constant(scale / (m as f64).sqrt())?,
            ScheduleSpec::Preset { preset, beta, eta1 } => preset_for(*preset, m, *beta, *eta1, loss, kappa)?.schedule,
        })
    }
}

/// Training set, validation set and evaluation set of one repetition.
type Split = (Arc<Dataset>, Arc<Dataset>, Arc<Dataset>);

/// Shared settings of the repeated protocols.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub kernel: Kernel,
    pub loss: Loss,
    pub repetitions: usize,
    pub seed: u64,
    /// Fraction of the (shuffled) data used for training; the rest validates.
    pub holdout: f64,
    pub jobs: usize,
    pub iterate: Iterate,
}

impl Protocol {
    pub fn new(kernel: Kernel, loss: Loss) -> Self {
        Self { kernel, loss, repetitions: 10, seed: 0, holdout: 0.8, jobs: 1, iterate: Iterate::Last }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.repetitions == 0 {
            return Err(ExperimentError::Invalid("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    /// Training part and evaluation set of repetition `r`: the holdout split of `data`,
    /// evaluated on `test` when given, otherwise on the held-out part.
    fn split(&self, data: &Dataset, test: Option<&Arc<Dataset>>, r: usize) -> Result<Split, ExperimentError> {
        let mut rng = rng_from_seed(derive_seed(self.seed, r as u64));
        let (train, val) = split_holdout(data, self.holdout, &mut rng)?;
        let val = Arc::new(val);
        let eval = test.cloned().unwrap_or_else(|| val.clone());
        Ok((Arc::new(train), val, eval))
    }
}

/// Mean and sample standard deviation over repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        Self { mean: mean(values), std: sample_std(values) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Pass index or parameter value.
    pub x: f64,
    pub error: Aggregate,
    pub risk: Aggregate,
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], x_name: &str, mut out: W) -> io::Result<()> {
    writeln!(out, "{x_name},mean_test_error,std_test_error,mean_test_risk,std_test_risk")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_real(r.x),
            format_real(r.error.mean),
            format_real(r.error.std),
            format_real(r.risk.mean),
            format_real(r.risk.std)
        )?;
    }
    Ok(())
}

fn aggregate_columns(x: &[f64], per_rep: &[Vec<(f64, f64)>]) -> Vec<SweepRow> {
    x.iter()
        .enumerate()
        .map(|(i, &x)| {
            let errs: Vec<f64> = per_rep.iter().map(|r| r[i].0).collect();
            let risks: Vec<f64> = per_rep.iter().map(|r| r[i].1).collect();
            SweepRow { x, error: Aggregate::of(&errs), risk: Aggregate::of(&risks) }
        })
        .collect()
}

/// Test error and loss after each pass `1..=max_passes`, aggregated over repetitions.
pub fn sweep_passes(
    data: &Dataset,
    test: Option<Arc<Dataset>>,
    protocol: &Protocol,
    schedule: &ScheduleSpec,
    max_passes: u64,
) -> Result<Vec<SweepRow>, ExperimentError> {
    protocol.validate()?;
    if max_passes == 0 {
        return Err(ExperimentError::Invalid("max_passes must be at least 1".into()));
    }
    let per_rep = map_indexed(protocol.repetitions, protocol.jobs, |r| -> Result<Vec<(f64, f64)>, ExperimentError> {
        let (train, _, eval) = protocol.split(data, test.as_ref(), r)?;
        let m = train.len();
        let kappa = protocol.kernel.kappa(&train)?;
        let sched = schedule.resolve(m, protocol.loss, kappa)?;
        let config = SgmRunConfig::new(sched, max_passes * m as u64, derive_seed(derive_seed(protocol.seed, r as u64), 1))
            .averaging(protocol.iterate == Iterate::Averaged);
        let mut run = SgmRun::new(train, protocol.kernel.clone(), protocol.loss, &config, Some(eval))?;
        let mut out = Vec::with_capacity(max_passes as usize);
        for _ in 0..max_passes {
            for _ in 0..m {
                run.step()?;
            }
            let metrics = run.evaluate_validation(protocol.iterate)?;
            out.push((metrics.error, metrics.risk));
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let passes: Vec<f64> = (1..=max_passes).map(|p| p as f64).collect();
    Ok(aggregate_columns(&passes, &per_rep))
}

/// Test error after `passes` passes for every grid value, aggregated over repetitions.
pub fn sweep_step(
    data: &Dataset,
    test: Option<Arc<Dataset>>,
    protocol: &Protocol,
    mode: TuneMode,
    grid: &[f64],
    passes: u64,
) -> Result<Vec<SweepRow>, ExperimentError> {
    protocol.validate()?;
    if grid.is_empty() {
        return Err(SelectionError::EmptyGrid.into());
    }
    if passes == 0 {
        return Err(ExperimentError::Invalid("passes must be at least 1".into()));
    }
    let splits = (0..protocol.repetitions)
        .map(|r| protocol.split(data, test.as_ref(), r))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs = protocol.repetitions * grid.len();
    let cells = map_indexed(jobs, protocol.jobs, |idx| -> Result<(f64, f64), ExperimentError> {
        let (r, g) = (idx / grid.len(), idx % grid.len());
        let (train, _, eval) = &splits[r];
        let iterations = passes * train.len() as u64;
        let seed = derive_seed(derive_seed(protocol.seed, r as u64), 2 + g as u64);
        let config = SgmRunConfig::new(mode.schedule(grid[g])?, iterations, seed)
            .record_every(iterations)
            .averaging(protocol.iterate == Iterate::Averaged);
        let mut run = SgmRun::new(train.clone(), protocol.kernel.clone(), protocol.loss, &config, None)?;
        while !run.is_done() {
            run.step()?;
        }
        let model = run.snapshot(protocol.iterate);
        Ok((model.misclassification_rate(eval)?, model.empirical_risk(eval, protocol.loss)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let per_rep: Vec<Vec<(f64, f64)>> = cells.chunks(grid.len()).map(|c| c.to_vec()).collect();
    Ok(aggregate_columns(grid, &per_rep))
}

/// Rows of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// One pass, constant step tuned over a log grid.
    SgmConstant,
    /// One pass, `eta = 1/4`, decay exponent tuned over a linear grid.
    SgmDecaying,
    /// Multiple passes, `eta = 1/sqrt(m)`, early stopping.
    SigmConstant,
    /// Multiple passes, `eta = 1/4`, `theta = 1/2`, early stopping.
    SigmDecaying,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SgmConstant, Method::SgmDecaying, Method::SigmConstant, Method::SigmDecaying];

    pub fn label(self) -> &'static str {
        match self {
            Method::SgmConstant => "SGM-C",
            Method::SgmDecaying => "SGM-D",
            Method::SigmConstant => "SIGM-C",
            Method::SigmDecaying => "SIGM-D",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableOptions {
    /// Candidates in each step-size grid.
    pub grid_size: usize,
    pub eta_range: (f64, f64),
    pub theta_range: (f64, f64),
    /// Pass budget of the early-stopped runs.
    pub max_passes: u64,
    pub patience: Option<usize>,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self { grid_size: 30, eta_range: (1e-3, 1.0), theta_range: (0.0, 1.0), max_passes: 100, patience: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: Method,
    pub test_risk: Aggregate,
    pub test_error: Aggregate,
    pub seconds: Aggregate,
}

/// Runs the four methods for every repetition and aggregates test loss, test error and
/// training time (model selection included, data loading excluded).
pub fn table(
    data: &Dataset,
    test: Option<Arc<Dataset>>,
    protocol: &Protocol,
    options: &TableOptions,
) -> Result<Vec<TableRow>, ExperimentError> {
    protocol.validate()?;
    let eta_grid = grid_log(options.eta_range.0, options.eta_range.1, options.grid_size)?;
    let theta_grid = grid_lin(options.theta_range.0, options.theta_range.1, options.grid_size)?;
    let cells = map_indexed(protocol.repetitions * 4, protocol.jobs, |idx| -> Result<(f64, f64, f64), ExperimentError> {
        let (r, method) = (idx / 4, Method::ALL[idx % 4]);
        let (train, val, eval) = protocol.split(data, test.as_ref(), r)?;
        let seed = derive_seed(derive_seed(protocol.seed, r as u64), 100 + (idx % 4) as u64);
        let kernel = &protocol.kernel;
        let loss = protocol.loss;
        let start = Instant::now();
        let report = match method {
            Method::SgmConstant | Method::SgmDecaying => {
                let (mode, grid) = match method {
                    Method::SgmConstant => (TuneMode::Eta, &eta_grid),
                    _ => (TuneMode::Theta { eta: TuneMode::DEFAULT_THETA_ETA }, &theta_grid),
                };
                let opts = CvOptions { passes: 1, iterate: protocol.iterate, seed, jobs: 1, use_cache: true };
                cv_step_size(train, val, kernel, loss, mode, grid, &opts)?
            }
            Method::SigmConstant | Method::SigmDecaying => {
                let schedule = match method {
                    Method::SigmConstant => StepSchedule::constant(1.0 / (train.len() as f64).sqrt())?,
                    _ => StepSchedule::new(0.25, 0.5)?,
                };
                let mut opts = EarlyStopOptions::per_pass(options.max_passes, train.len(), seed);
                opts.patience = options.patience;
                opts.iterate = protocol.iterate;
                early_stopping(train, val, kernel, loss, schedule, &opts)?
            }
        };
        let seconds = start.elapsed().as_secs_f64();
        let model = &report.chosen_model;
        Ok((model.empirical_risk(&eval, loss)?, model.misclassification_rate(&eval)?, seconds))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(Method::ALL
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let col: Vec<&(f64, f64, f64)> = cells.iter().skip(k).step_by(4).collect();
            let pick = |f: fn(&(f64, f64, f64)) -> f64| Aggregate::of(&col.iter().map(|c| f(c)).collect::<Vec<_>>());
            TableRow { method, test_risk: pick(|c| c.0), test_error: pick(|c| c.1), seconds: pick(|c| c.2) }
        })
        .collect())
}

/// Table CSV. A trailing `LIBSVM` row is left blank: that baseline is external.
pub fn write_table_csv<W: Write>(rows: &[TableRow], mut out: W) -> io::Result<()> {
    writeln!(out, "method,test_loss_mean,test_loss_std,class_error_mean,class_error_std,train_seconds_mean,train_seconds_std")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method.label(),
            format_real(r.test_risk.mean),
            format_real(r.test_risk.std),
            format_real(r.test_error.mean),
            format_real(r.test_error.std),
            format_real(r.seconds.mean),
            format_real(r.seconds.std)
        )?;
    }
    writeln!(out, "LIBSVM,,,,,,")
}
