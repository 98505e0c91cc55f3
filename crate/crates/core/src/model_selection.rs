//! Hold-out model selection: a grid search over the step size for one-pass runs and
//! early stopping for multi-pass runs.
//!
//! Ties in validation risk go to the more regularized choice: the smallest `eta`, the
//! largest `theta`, the earliest stopping iteration.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::data::{format_real, Dataset};
use crate::kernels::Kernel;
use crate::losses::Loss;
use crate::parallel::map_indexed;
use crate::rng::derive_seed;
use crate::schedules::{ScheduleError, StepSchedule};
use crate::sgm::{AveragedModel, Iterate, KernelModel, SgmError, SgmRun, SgmRunConfig};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("empty candidate grid")]
    EmptyGrid,
    #[error("{name} must be at least 1")]
    ZeroParameter { name: &'static str },
    #[error("candidate {value}: {source}")]
    Candidate {
        value: f64,
        #[source]
        source: SgmError,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Sgm(#[from] SgmError),
}

/// `n` geometrically spaced values from `lo` to `hi` inclusive.
pub fn grid_log(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, SelectionError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(SelectionError::InvalidGrid(format!("log grid needs 0 < lo < hi and n >= 2; got {lo}:{hi}:{n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / last).exp(),
        })
        .collect())
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn grid_lin(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, SelectionError> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || n < 2 {
        return Err(SelectionError::InvalidGrid(format!("linear grid needs lo < hi and n >= 2; got {lo}:{hi}:{n}")));
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / last })
        .collect())
}

/// Which step-size parameter the grid ranges over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuneMode {
    /// Constant steps `eta_t = eta`.
    Eta,
    /// Decaying steps `eta_t = eta t^(-theta)` with a fixed `eta`.
    Theta { eta: f64 },
}

impl TuneMode {
    pub const DEFAULT_THETA_ETA: f64 = 0.25;

    pub fn schedule(&self, value: f64) -> Result<StepSchedule, ScheduleError> {
        match *self {
            TuneMode::Eta => StepSchedule::new(value, 0.0),
            TuneMode::Theta { eta } => StepSchedule::new(eta, value),
        }
    }

    /// `true` when candidate `a` is more regularized than `b`.
    fn prefers(&self, a: f64, b: f64) -> bool {
        match self {
            TuneMode::Eta => a < b,
            TuneMode::Theta { .. } => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub value: f64,
    pub val_risk: f64,
    pub val_err: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub candidates: Vec<Candidate>,
    pub chosen_index: usize,
    pub chosen: f64,
    /// Model at the chosen candidate (the evaluated iterate).
    pub chosen_model: KernelModel,
    pub chosen_averaged: Option<AveragedModel>,
}

impl CvReport {
    pub fn chosen_candidate(&self) -> &Candidate {
        &self.candidates[self.chosen_index]
    }

    /// Sum of per-candidate training times.
    pub fn total_seconds(&self) -> f64 {
        self.candidates.iter().map(|c| c.seconds).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "candidate,val_risk,val_err,seconds")?;
        for c in &self.candidates {
            writeln!(out, "{},{},{},{}", format_real(c.value), format_real(c.val_risk), format_real(c.val_err), format_real(c.seconds))?;
        }
        writeln!(out, "chosen={}", format_real(self.chosen))
    }
}

#[derive(Debug, Clone)]
pub struct CvOptions {
    /// Passes over the training set per candidate.
    pub passes: u64,
    pub iterate: Iterate,
    pub seed: u64,
    pub jobs: usize,
    pub use_cache: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { passes: 1, iterate: Iterate::Last, seed: 0, jobs: 1, use_cache: true }
    }
}

/// Trains one run per grid value for `passes * |train|` iterations (candidate `i` uses
/// seed `derive_seed(seed, i)`) and picks the lowest validation risk.
pub fn cv_step_size(
    train: Arc<Dataset>,
    validation: Arc<Dataset>,
    kernel: &Kernel,
    loss: Loss,
    mode: TuneMode,
    grid: &[f64],
    options: &CvOptions,
) -> Result<CvReport, SelectionError> {
    if grid.is_empty() {
        return Err(SelectionError::EmptyGrid);
    }
    if options.passes == 0 {
        return Err(SelectionError::ZeroParameter { name: "passes" });
    }
    if validation.is_empty() || train.is_empty() {
        return Err(SgmError::EmptyDataset.into());
    }
    let iterations = options.passes * train.len() as u64;
    let results = map_indexed(grid.len(), options.jobs, |i| -> Result<_, SelectionError> {
        let value = grid[i];
        let schedule = mode.schedule(value)?;
        let config = SgmRunConfig::new(schedule, iterations, derive_seed(options.seed, i as u64))
            .averaging(options.iterate == Iterate::Averaged)
            .use_cache(options.use_cache);
        let annotate = |source| SelectionError::Candidate { value, source };
        let start = Instant::now();
        let mut run = SgmRun::new(train.clone(), kernel.clone(), loss, &config, None).map_err(annotate)?;
        while !run.is_done() {
            run.step().map_err(annotate)?;
        }
        let seconds = start.elapsed().as_secs_f64();
        let model = run.snapshot(options.iterate);
        let val_risk = model.empirical_risk(&validation, loss).map_err(annotate)?;
        let val_err = model.misclassification_rate(&validation).map_err(annotate)?;
        Ok((Candidate { value, val_risk, val_err, seconds }, model, run.averaged_model()))
    });

    let mut candidates = Vec::with_capacity(grid.len());
    let mut models = Vec::with_capacity(grid.len());
    for r in results {
        let (c, model, avg) = r?;
        candidates.push(c);
        models.push((model, avg));
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        if c.val_risk < b.val_risk || (c.val_risk == b.val_risk && mode.prefers(c.value, b.value)) {
            best = i;
        }
    }
    let (chosen_model, chosen_averaged) = models.swap_remove(best);
    Ok(CvReport { chosen: candidates[best].value, chosen_index: best, candidates, chosen_model, chosen_averaged })
}

#[derive(Debug, Clone)]
pub struct EarlyStopOptions {
    pub max_passes: u64,
    /// Iterations between validation evaluations.
    pub eval_every: u64,
    /// Stop after this many consecutive evaluations without improvement; `None` runs to
    /// the end.
    pub patience: Option<usize>,
    pub iterate: Iterate,
    pub seed: u64,
    pub use_cache: bool,
}

impl EarlyStopOptions {
    /// Evaluation once per pass, no patience.
    pub fn per_pass(max_passes: u64, m: usize, seed: u64) -> Self {
        Self { max_passes, eval_every: m.max(1) as u64, patience: None, iterate: Iterate::Last, seed, use_cache: true }
    }
}

/// Trains once for up to `max_passes * |train|` iterations and keeps the iterate with the
/// lowest validation risk. Candidate values in the report are iteration counts; their
/// `seconds` are cumulative training times.
pub fn early_stopping(
    train: Arc<Dataset>,
    validation: Arc<Dataset>,
    kernel: &Kernel,
    loss: Loss,
    schedule: StepSchedule,
    options: &EarlyStopOptions,
) -> Result<CvReport, SelectionError> {
    if options.max_passes == 0 {
        return Err(SelectionError::ZeroParameter { name: "max_passes" });
    }
    if options.eval_every == 0 {
        return Err(SelectionError::ZeroParameter { name: "eval_every" });
    }
    if validation.is_empty() {
        return Err(SgmError::EmptyDataset.into());
    }
    let total = options.max_passes * train.len() as u64;
    let mut config = SgmRunConfig::new(schedule, total, options.seed)
        .averaging(options.iterate == Iterate::Averaged)
        .use_cache(options.use_cache);
    // Evaluation happens here; the run itself never needs to record.
    config.record_every = Some(u64::MAX);
    let mut run = SgmRun::new(train, kernel.clone(), loss, &config, Some(validation))?;

    let mut candidates = Vec::new();
    let mut best: Option<(usize, KernelModel, Option<AveragedModel>)> = None;
    let mut since_best = 0usize;
    let mut elapsed = 0.0;
    while !run.is_done() {
        let start = Instant::now();
        for _ in 0..options.eval_every {
            if run.is_done() {
                break;
            }
            run.step()?;
        }
        elapsed += start.elapsed().as_secs_f64();
        let metrics = run.evaluate_validation(options.iterate)?;
        let index = candidates.len();
        candidates.push(Candidate {
            value: run.iteration() as f64,
            val_risk: metrics.risk,
            val_err: metrics.error,
            seconds: elapsed,
        });
        let improved = match &best {
            None => true,
            Some((b, _, _)) => metrics.risk < candidates[*b].val_risk,
        };
        if improved {
            best = Some((index, run.snapshot(options.iterate), run.averaged_model()));
            since_best = 0;
        } else {
            since_best += 1;
            if options.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    let (chosen_index, chosen_model, chosen_averaged) = best.expect("at least one evaluation");
    Ok(CvReport { chosen: candidates[chosen_index].value, chosen_index, candidates, chosen_model, chosen_averaged })
}
