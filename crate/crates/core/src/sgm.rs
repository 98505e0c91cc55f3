//! The training loop in kernel coefficient form.
//!
//! The iterate `w_t = sum_i c_i Phi(x_i)` starts at zero. Step `t` draws `j` uniformly with
//! replacement from the `m` training points, computes the margin `f(x_j) = sum_i c_i K(x_i, x_j)`
//! and sets `c_j <- c_j - eta_t V'_-(y_j, f(x_j))`. One pass is `m` steps.
//!
//! Alongside the last iterate the loop keeps the weighted average
//! `wbar_t = sum_{k<=t} eta_k w_k / a_t` with `a_t = sum_{k<=t} eta_k`, where `w_k` is the
//! iterate *before* update `k` (so `wbar_1 = w_1 = 0`). After `T` steps the outputs are
//! `w_{T+1}` and `wbar_T`.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use rand::Rng;
use thiserror::Error;

use crate::data::{format_real, Dataset, SparseVector};
use crate::kernels::{GramCache, Kernel, KernelError, KernelPoints};
use crate::losses::{Label, Loss, LossConstants};
use crate::rng::{derive_seed, rng_from_seed, IndexSampler, SgmRng};
use crate::schedules::StepSchedule;
use crate::stats::CompensatedSum;

/// Absolute slack for the norm and per-step inequality checks.
pub const INVARIANT_SLACK: f64 = 1e-9;

/// Validation cross-Gram matrices up to this many entries are precomputed.
const CROSS_GRAM_LIMIT: usize = 1 << 22;

#[derive(Debug, Error)]
pub enum SgmError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {value} at sample {index} is not -1 or +1")]
    InvalidLabel { index: usize, value: f64 },
    #[error("total iterations must be at least 1")]
    ZeroIterations,
    #[error("record cadence must be at least 1")]
    ZeroCadence,
    #[error("non-finite value at iteration {iteration}")]
    NonFinite { iteration: u64 },
    #[error("step {eta} exceeds the smooth-loss ceiling 2/(kappa^2 L) = {max}")]
    StepTooLarge { eta: f64, max: f64 },
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("no validation set attached")]
    NoValidation,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Which output of the run to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Iterate {
    #[default]
    Last,
    Averaged,
}

impl fmt::Display for Iterate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Iterate::Last => "last",
            Iterate::Averaged => "avg",
        })
    }
}

impl FromStr for Iterate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "last" => Ok(Iterate::Last),
            "avg" | "averaged" => Ok(Iterate::Averaged),
            other => Err(format!("unknown iterate {other:?} (expected last or avg)")),
        }
    }
}

fn labels_of(dataset: &Dataset) -> Result<Vec<Label>, SgmError> {
    dataset
        .samples()
        .iter()
        .enumerate()
        .map(|(index, s)| Label::try_from(s.label).map_err(|_| SgmError::InvalidLabel { index, value: s.label }))
        .collect()
}

fn risk_from_margins(loss: Loss, labels: &[Label], margins: &[f64]) -> f64 {
    let mut sum = CompensatedSum::default();
    for (&y, &a) in labels.iter().zip(margins) {
        sum.add(loss.value(y, a));
    }
    sum.value() / labels.len() as f64
}

fn error_from_margins(labels: &[Label], margins: &[f64]) -> f64 {
    let wrong = labels.iter().zip(margins).filter(|(&y, &a)| Label::from_margin(a) != y).count();
    wrong as f64 / labels.len() as f64
}

/// `w = sum_i c_i Phi(x_i)` over a retained training set.
#[derive(Debug, Clone)]
pub struct KernelModel {
    coeffs: Vec<f64>,
    points: KernelPoints,
}

impl KernelModel {
    pub fn zeros(points: KernelPoints) -> Self {
        Self { coeffs: vec![0.0; points.len()], points }
    }

    pub fn from_coeffs(points: KernelPoints, coeffs: Vec<f64>) -> Result<Self, SgmError> {
        if coeffs.len() != points.len() {
            return Err(SgmError::LengthMismatch { got: coeffs.len(), expected: points.len() });
        }
        Ok(Self { coeffs, points })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn points(&self) -> &KernelPoints {
        &self.points
    }

    pub fn kernel(&self) -> &Kernel {
        self.points.kernel()
    }

    pub fn train_set(&self) -> &Arc<Dataset> {
        self.points.points()
    }

    /// `f(x) = sum_i c_i K(x_i, x)`.
    pub fn predict(&self, x: &SparseVector) -> Result<f64, SgmError> {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                acc += c * self.points.against(i, x)?;
            }
        }
        Ok(acc)
    }

    /// `sign(f(x))` with `sign(0) = +1`.
    pub fn predict_label(&self, x: &SparseVector) -> Result<Label, SgmError> {
        Ok(Label::from_margin(self.predict(x)?))
    }

    pub fn margins(&self, dataset: &Dataset) -> Result<Vec<f64>, SgmError> {
        dataset.samples().iter().map(|s| self.predict(&s.features)).collect()
    }

    /// Mean loss over `dataset`.
    pub fn empirical_risk(&self, dataset: &Dataset, loss: Loss) -> Result<f64, SgmError> {
        if dataset.is_empty() {
            return Err(SgmError::EmptyDataset);
        }
        let labels = labels_of(dataset)?;
        Ok(risk_from_margins(loss, &labels, &self.margins(dataset)?))
    }

    /// Fraction of samples whose predicted label differs from the true one.
    pub fn misclassification_rate(&self, dataset: &Dataset) -> Result<f64, SgmError> {
        if dataset.is_empty() {
            return Err(SgmError::EmptyDataset);
        }
        let labels = labels_of(dataset)?;
        Ok(error_from_margins(&labels, &self.margins(dataset)?))
    }

    /// `sqrt(c^T K c)`, clamped at 0.
    pub fn rkhs_norm(&self) -> f64 {
        let support: Vec<usize> = (0..self.coeffs.len()).filter(|&i| self.coeffs[i] != 0.0).collect();
        let mut q = 0.0;
        for &i in &support {
            let mut inner = 0.0;
            for &j in &support {
                inner += self.coeffs[j] * self.points.between(i, j);
            }
            q += self.coeffs[i] * inner;
        }
        q.max(0.0).sqrt()
    }

    /// Explicit weights `w = sum_i c_i x_i` for the linear kernel.
    pub fn primal_weights(&self) -> Option<Vec<f64>> {
        if !matches!(self.kernel(), Kernel::Linear) {
            return None;
        }
        let data = self.train_set();
        let mut w = vec![0.0; data.dim()];
        for (s, &c) in data.samples().iter().zip(&self.coeffs) {
            for (k, v) in s.features.iter() {
                w[k] += c * v;
            }
        }
        Some(w)
    }
}

/// The weighted average `wbar_t` with its normalizer `a_t`.
#[derive(Debug, Clone)]
pub struct AveragedModel {
    pub model: KernelModel,
    pub a_t: f64,
}

impl AveragedModel {
    pub fn coeffs(&self) -> &[f64] {
        self.model.coeffs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub pass: u64,
    pub eta: f64,
    pub emp_risk_last: f64,
    pub emp_risk_avg: Option<f64>,
    pub val_risk_last: Option<f64>,
    pub val_risk_avg: Option<f64>,
    /// Misclassification on the validation set when present, else on the training set.
    pub err_last: f64,
    pub err_avg: Option<f64>,
    /// `||w_{t+1}||`.
    pub norm: f64,
    /// `sqrt((a0 kappa)^2 sum eta_k^2 + 2 |V|_0 sum eta_k)`.
    pub norm_bound: f64,
}

pub const TRACE_HEADER: &str = "t,pass,eta,emp_risk_last,emp_risk_avg,val_risk_last,val_risk_avg,err_last,err_avg,norm,norm_bound";

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

pub fn write_trace<W: Write>(trace: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.pass,
            format_real(r.eta),
            format_real(r.emp_risk_last),
            opt(r.emp_risk_avg),
            opt(r.val_risk_last),
            opt(r.val_risk_avg),
            format_real(r.err_last),
            opt(r.err_avg),
            format_real(r.norm),
            format_real(r.norm_bound)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SgmRunConfig {
    pub schedule: StepSchedule,
    /// Total iterations `T`.
    pub iterations: u64,
    pub seed: u64,
    /// Iterations between trace records; `None` records at every pass boundary. The final
    /// iteration is always recorded.
    pub record_every: Option<u64>,
    /// Check the per-step distance inequality against probe vectors and the norm ceiling.
    pub check_invariants: bool,
    /// Random probes drawn when `check_invariants` is on and `probes` is empty.
    pub probe_count: usize,
    /// Explicit probe coefficient vectors (length `m`).
    pub probes: Vec<Vec<f64>>,
    /// Maintain the weighted average (costs O(support) per step).
    pub averaging: bool,
    pub use_cache: bool,
    pub cache_rows: Option<usize>,
    /// Proceed (with a warning) when a smooth loss gets a step above `2/(kappa^2 L)`.
    pub allow_large_steps: bool,
}

impl SgmRunConfig {
    pub fn new(schedule: StepSchedule, iterations: u64, seed: u64) -> Self {
        Self {
            schedule,
            iterations,
            seed,
            record_every: None,
            check_invariants: false,
            probe_count: 3,
            probes: Vec::new(),
            averaging: true,
            use_cache: true,
            cache_rows: None,
            allow_large_steps: false,
        }
    }

    pub fn record_every(mut self, cadence: u64) -> Self {
        self.record_every = Some(cadence);
        self
    }

    pub fn check_invariants(mut self, on: bool) -> Self {
        self.check_invariants = on;
        self
    }

    pub fn averaging(mut self, on: bool) -> Self {
        self.averaging = on;
        self
    }

    pub fn use_cache(mut self, on: bool) -> Self {
        self.use_cache = on;
        self
    }
}

/// Counts from the invariant checks of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantReport {
    pub step_checks: u64,
    pub step_violations: u64,
    /// Largest `lhs - rhs` seen in the per-step inequality (negative when it always held).
    pub step_max_excess: f64,
    pub norm_checks: u64,
    pub norm_violations: u64,
    pub norm_max_excess: f64,
}

impl InvariantReport {
    pub fn violations(&self) -> u64 {
        self.step_violations + self.norm_violations
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// `w_{T+1}`
    pub last: KernelModel,
    /// `wbar_T`, when averaging was on.
    pub averaged: Option<AveragedModel>,
    pub trace: Vec<TraceRecord>,
    pub invariants: Option<InvariantReport>,
}

impl TrainOutput {
    pub fn model(&self, iterate: Iterate) -> &KernelModel {
        match (iterate, &self.averaged) {
            (Iterate::Averaged, Some(a)) => &a.model,
            _ => &self.last,
        }
    }
}

/// State passed to an observer before each update.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub t: u64,
    pub eta: f64,
    pub index: usize,
    pub margin: f64,
    /// `c_t`, before the update.
    pub coeffs: &'a [f64],
}

/// Validation and test-set metrics of one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub risk: f64,
    pub error: f64,
}

struct Probe {
    /// `(K p)_j`
    kp: Vec<f64>,
    /// `K (c - p)`
    v: Vec<f64>,
    /// `||w - p||^2`
    dist_sq: f64,
}

struct Validation {
    data: Arc<Dataset>,
    labels: Vec<Label>,
    /// `K(x_j, v)` stored at `[v * m + j]`.
    cross: Option<Vec<f64>>,
}

/// `K c` on the training points, summed over the coefficient support.
fn train_margins(
    cache: &mut Option<GramCache>,
    points: &KernelPoints,
    support: &[usize],
    coeffs: &[f64],
) -> Vec<f64> {
    let m = points.len();
    let mut out = vec![0.0; m];
    for &j in support {
        let c = coeffs[j];
        if c == 0.0 {
            continue;
        }
        match cache {
            Some(cache) => {
                let row = cache.row(j).expect("support index in range");
                for (o, r) in out.iter_mut().zip(row) {
                    *o += c * r;
                }
            }
            None => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += c * points.between(j, i);
                }
            }
        }
    }
    out
}

fn validation_margins(
    val: &Validation,
    points: &KernelPoints,
    support: &[usize],
    coeffs: &[f64],
) -> Result<Vec<f64>, SgmError> {
    let m = points.len();
    let mut out = Vec::with_capacity(val.data.len());
    for (v, s) in val.data.samples().iter().enumerate() {
        let mut acc = 0.0;
        match &val.cross {
            Some(cross) => {
                let row = &cross[v * m..(v + 1) * m];
                for &j in support {
                    acc += coeffs[j] * row[j];
                }
            }
            None => {
                for &j in support {
                    if coeffs[j] != 0.0 {
                        acc += coeffs[j] * points.against(j, &s.features)?;
                    }
                }
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// A training run that can be advanced step by step.
pub struct SgmRun {
    loss: Loss,
    constants: LossConstants,
    kappa: f64,
    schedule: StepSchedule,
    total: u64,
    record_every: u64,
    check_invariants: bool,
    points: KernelPoints,
    labels: Vec<Label>,
    cache: Option<GramCache>,
    scratch: Vec<f64>,
    sampler: IndexSampler,
    rng: SgmRng,
    t: u64,
    coeffs: Vec<f64>,
    /// Indices ever updated, kept sorted so margins sum in index order.
    support: Vec<usize>,
    touched: Vec<bool>,
    avg: Option<Vec<f64>>,
    sum_eta: CompensatedSum,
    sum_eta_sq: CompensatedSum,
    probes: Vec<Probe>,
    report: InvariantReport,
    validation: Option<Validation>,
    trace: Vec<TraceRecord>,
}

impl SgmRun {
    pub fn new(
        train: Arc<Dataset>,
        kernel: Kernel,
        loss: Loss,
        config: &SgmRunConfig,
        validation: Option<Arc<Dataset>>,
    ) -> Result<Self, SgmError> {
        if train.is_empty() {
            return Err(SgmError::EmptyDataset);
        }
        if config.iterations == 0 {
            return Err(SgmError::ZeroIterations);
        }
        if config.record_every == Some(0) {
            return Err(SgmError::ZeroCadence);
        }
        let labels = labels_of(&train)?;
        let m = train.len();
        let kappa = kernel.kappa(&train)?;
        if let Some(max) = loss.max_smooth_step(kappa) {
            let eta = config.schedule.eta();
            if eta > max * (1.0 + 1e-12) {
                if config.allow_large_steps {
                    warn!("step {eta} exceeds the smooth-loss ceiling {max}; proceeding as requested");
                } else {
                    return Err(SgmError::StepTooLarge { eta, max });
                }
            }
        }
        let points = KernelPoints::new(kernel, train)?;
        let cache = config.use_cache.then(|| match config.cache_rows {
            Some(rows) => GramCache::with_capacity(points.clone(), rows),
            None => GramCache::new(points.clone()),
        });

        let validation = match validation {
            Some(data) if !data.is_empty() => {
                let vlabels = labels_of(&data)?;
                let cross = if data.len().saturating_mul(m) <= CROSS_GRAM_LIMIT {
                    let mut cross = Vec::with_capacity(data.len() * m);
                    for s in data.samples() {
                        for j in 0..m {
                            cross.push(points.against(j, &s.features)?);
                        }
                    }
                    Some(cross)
                } else {
                    None
                };
                Some(Validation { data, labels: vlabels, cross })
            }
            _ => None,
        };

        let mut probes = Vec::new();
        if config.check_invariants {
            let vectors = if config.probes.is_empty() {
                let mut prng = rng_from_seed(derive_seed(config.seed, u64::MAX));
                (0..config.probe_count)
                    .map(|_| (0..m).map(|_| prng.random_range(-1.0..1.0)).collect::<Vec<f64>>())
                    .collect()
            } else {
                config.probes.clone()
            };
            for p in vectors {
                if p.len() != m {
                    return Err(SgmError::LengthMismatch { got: p.len(), expected: m });
                }
                let kp: Vec<f64> = (0..m).map(|i| (0..m).map(|j| points.between(i, j) * p[j]).sum()).collect();
                let dist_sq = p.iter().zip(&kp).map(|(a, b)| a * b).sum::<f64>().max(0.0);
                let v = kp.iter().map(|x| -x).collect();
                probes.push(Probe { kp, v, dist_sq });
            }
        }

        Ok(Self {
            loss,
            constants: loss.constants(),
            kappa,
            schedule: config.schedule,
            total: config.iterations,
            record_every: config.record_every.unwrap_or(m as u64),
            check_invariants: config.check_invariants,
            labels,
            cache,
            scratch: vec![0.0; m],
            sampler: IndexSampler::new(m),
            rng: rng_from_seed(config.seed),
            t: 0,
            coeffs: vec![0.0; m],
            support: Vec::new(),
            touched: vec![false; m],
            avg: config.averaging.then(|| vec![0.0; m]),
            sum_eta: CompensatedSum::default(),
            sum_eta_sq: CompensatedSum::default(),
            probes,
            report: InvariantReport { step_max_excess: f64::NEG_INFINITY, norm_max_excess: f64::NEG_INFINITY, ..Default::default() },
            validation,
            trace: Vec::new(),
            points,
        })
    }

    /// Completed steps.
    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn total_iterations(&self) -> u64 {
        self.total
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.total
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn averaged_coeffs(&self) -> Option<&[f64]> {
        self.avg.as_deref()
    }

    /// `sum_{k<=t} eta_k`.
    pub fn a_t(&self) -> f64 {
        self.sum_eta.value()
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// `sqrt((a0 kappa)^2 sum eta_k^2 + 2 |V|_0 sum eta_k)` at the current iteration.
    pub fn norm_bound(&self) -> f64 {
        let ak = self.constants.a0 * self.kappa;
        (ak * ak * self.sum_eta_sq.value() + 2.0 * self.constants.v0 * self.sum_eta.value()).sqrt()
    }

    fn margin_at(&mut self, j: usize) -> f64 {
        let m = self.coeffs.len();
        let mut acc = 0.0;
        match &mut self.cache {
            Some(cache) if self.support.len() * 4 >= m => {
                let row = cache.row(j).expect("sampled index in range");
                for (c, r) in self.coeffs.iter().zip(row) {
                    acc += c * r;
                }
            }
            _ => {
                for &i in &self.support {
                    acc += self.coeffs[i] * self.points.between(j, i);
                }
            }
        }
        acc
    }

    /// One update; the observer sees the state before it.
    pub fn step_with(&mut self, observer: &mut dyn FnMut(StepView<'_>)) -> Result<(), SgmError> {
        let t = self.t + 1;
        let eta = self.schedule.at(t);
        let j = self.sampler.sample(&mut self.rng);
        let margin = self.margin_at(j);
        if !margin.is_finite() {
            return Err(SgmError::NonFinite { iteration: t });
        }
        observer(StepView { t, eta, index: j, margin, coeffs: &self.coeffs });

        let y = self.labels[j];
        let delta = -eta * self.loss.left_derivative(y, margin);

        // wbar_t = (a_{t-1} wbar_{t-1} + eta_t w_t) / a_t with the pre-update w_t. Entries
        // outside the support stay exactly 0, so only the support is visited.
        let a_prev = self.sum_eta.value();
        self.sum_eta.add(eta);
        self.sum_eta_sq.add(eta * eta);
        let a_now = self.sum_eta.value();
        if let Some(avg) = &mut self.avg {
            for &i in &self.support {
                avg[i] = (a_prev * avg[i] + eta * self.coeffs[i]) / a_now;
            }
        }

        if !self.probes.is_empty() {
            self.check_step(j, y, eta, delta, margin);
        }

        if delta != 0.0 {
            self.coeffs[j] += delta;
            if !self.coeffs[j].is_finite() {
                return Err(SgmError::NonFinite { iteration: t });
            }
            if !self.touched[j] {
                self.touched[j] = true;
                let pos = self.support.binary_search(&j).unwrap_or_else(|p| p);
                self.support.insert(pos, j);
            }
        }
        self.t = t;
        Ok(())
    }

    /// `||w_{k+1} - p||^2 <= ||w_k - p||^2 + (a0 kappa)^2 eta^2 + 2 eta (V(y, <p, Phi(x_j)>) - V(y, <w_k, Phi(x_j)>))`
    fn check_step(&mut self, j: usize, y: Label, eta: f64, delta: f64, margin: f64) {
        let row: &[f64] = match &mut self.cache {
            Some(cache) => cache.row(j).expect("sampled index in range"),
            None => {
                self.points.fill_row(j, &mut self.scratch);
                &self.scratch
            }
        };
        let ak = self.constants.a0 * self.kappa;
        let kjj = row[j];
        for probe in &mut self.probes {
            let after = (probe.dist_sq + 2.0 * delta * probe.v[j] + delta * delta * kjj).max(0.0);
            let rhs = probe.dist_sq
                + ak * ak * eta * eta
                + 2.0 * eta * (self.loss.value(y, probe.kp[j]) - self.loss.value(y, margin));
            let excess = after - rhs;
            self.report.step_checks += 1;
            self.report.step_max_excess = self.report.step_max_excess.max(excess);
            if excess > INVARIANT_SLACK {
                self.report.step_violations += 1;
            }
            if delta != 0.0 {
                for (v, r) in probe.v.iter_mut().zip(row) {
                    *v += delta * r;
                }
                probe.dist_sq = after;
            }
        }
    }

    pub fn step(&mut self) -> Result<(), SgmError> {
        self.step_with(&mut |_| {})
    }

    fn is_record_point(&self) -> bool {
        self.t.is_multiple_of(self.record_every) || self.t == self.total
    }

    /// Runs up to `n` more steps (never past `T`), recording at the cadence.
    pub fn advance_with(&mut self, n: u64, observer: &mut dyn FnMut(StepView<'_>)) -> Result<(), SgmError> {
        let target = self.t.saturating_add(n).min(self.total);
        while self.t < target {
            self.step_with(observer)?;
            if self.is_record_point() {
                let record = self.record()?;
                self.trace.push(record);
            }
        }
        Ok(())
    }

    pub fn advance(&mut self, n: u64) -> Result<(), SgmError> {
        self.advance_with(n, &mut |_| {})
    }

    fn iterate_coeffs(&self, iterate: Iterate) -> &[f64] {
        match (iterate, &self.avg) {
            (Iterate::Averaged, Some(avg)) => avg,
            _ => &self.coeffs,
        }
    }

    /// Validation loss and misclassification of the chosen iterate.
    pub fn evaluate_validation(&self, iterate: Iterate) -> Result<Metrics, SgmError> {
        let val = self.validation.as_ref().ok_or(SgmError::NoValidation)?;
        let margins = validation_margins(val, &self.points, &self.support, self.iterate_coeffs(iterate))?;
        Ok(Metrics {
            risk: risk_from_margins(self.loss, &val.labels, &margins),
            error: error_from_margins(&val.labels, &margins),
        })
    }

    /// Evaluates both iterates at the current iteration and checks the norm ceiling.
    pub fn record(&mut self) -> Result<TraceRecord, SgmError> {
        let m = self.coeffs.len() as u64;
        let margins_last = train_margins(&mut self.cache, &self.points, &self.support, &self.coeffs);
        let norm = self.coeffs.iter().zip(&margins_last).map(|(c, k)| c * k).sum::<f64>().max(0.0).sqrt();
        let norm_bound = self.norm_bound();
        if self.check_invariants {
            let excess = norm - norm_bound;
            self.report.norm_checks += 1;
            self.report.norm_max_excess = self.report.norm_max_excess.max(excess);
            if excess > INVARIANT_SLACK {
                self.report.norm_violations += 1;
            }
        }
        let emp_risk_last = risk_from_margins(self.loss, &self.labels, &margins_last);
        let margins_avg = self
            .avg
            .as_ref()
            .map(|avg| train_margins(&mut self.cache, &self.points, &self.support, avg));
        let emp_risk_avg = margins_avg.as_ref().map(|mv| risk_from_margins(self.loss, &self.labels, mv));

        let (val_last, val_avg) = match &self.validation {
            Some(_) => {
                let last = self.evaluate_validation(Iterate::Last)?;
                let avg = match self.avg {
                    Some(_) => Some(self.evaluate_validation(Iterate::Averaged)?),
                    None => None,
                };
                (Some(last), avg)
            }
            None => (None, None),
        };
        let (err_last, err_avg) = match &val_last {
            Some(last) => (last.error, val_avg.map(|a| a.error)),
            None => (
                error_from_margins(&self.labels, &margins_last),
                margins_avg.as_ref().map(|mv| error_from_margins(&self.labels, mv)),
            ),
        };
        Ok(TraceRecord {
            t: self.t,
            pass: self.t.div_ceil(m),
            eta: self.schedule.at(self.t.max(1)),
            emp_risk_last,
            emp_risk_avg,
            val_risk_last: val_last.map(|v| v.risk),
            val_risk_avg: val_avg.map(|v| v.risk),
            err_last,
            err_avg,
            norm,
            norm_bound,
        })
    }

    pub fn last_model(&self) -> KernelModel {
        KernelModel { coeffs: self.coeffs.clone(), points: self.points.clone() }
    }

    pub fn averaged_model(&self) -> Option<AveragedModel> {
        self.avg.as_ref().map(|avg| AveragedModel {
            model: KernelModel { coeffs: avg.clone(), points: self.points.clone() },
            a_t: self.sum_eta.value(),
        })
    }

    pub fn snapshot(&self, iterate: Iterate) -> KernelModel {
        KernelModel { coeffs: self.iterate_coeffs(iterate).to_vec(), points: self.points.clone() }
    }

    pub fn invariants(&self) -> Option<InvariantReport> {
        self.check_invariants.then_some(self.report)
    }

    pub fn finish(self) -> TrainOutput {
        let invariants = self.invariants();
        let averaged = self.averaged_model();
        TrainOutput {
            last: KernelModel { coeffs: self.coeffs, points: self.points },
            averaged,
            trace: self.trace,
            invariants,
        }
    }
}

/// Runs `config.iterations` steps of the method.
pub fn train(
    train: Arc<Dataset>,
    kernel: Kernel,
    loss: Loss,
    config: &SgmRunConfig,
    validation: Option<Arc<Dataset>>,
) -> Result<TrainOutput, SgmError> {
    train_with_observer(train, kernel, loss, config, validation, |_| {})
}

/// [`train`] with a callback invoked before every update.
pub fn train_with_observer<F>(
    train: Arc<Dataset>,
    kernel: Kernel,
    loss: Loss,
    config: &SgmRunConfig,
    validation: Option<Arc<Dataset>>,
    mut observer: F,
) -> Result<TrainOutput, SgmError>
where
    F: FnMut(StepView<'_>),
{
    let mut run = SgmRun::new(train, kernel, loss, config, validation)?;
    run.advance_with(config.iterations, &mut observer)?;
    Ok(run.finish())
}

/// Coefficient file: `key=value` header lines followed by `index:coeff` lines (1-based,
/// nonzero coefficients only).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub kernel: String,
    pub loss: String,
    pub iterate: Iterate,
    pub a_t: Option<f64>,
    pub coeffs: Vec<f64>,
}

impl ModelFile {
    pub fn new(model: &KernelModel, loss: Loss, iterate: Iterate, a_t: Option<f64>) -> Self {
        Self {
            kernel: model.kernel().to_string(),
            loss: loss.name().to_owned(),
            iterate,
            a_t,
            coeffs: model.coeffs().to_vec(),
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "kernel={}", self.kernel)?;
        writeln!(out, "loss={}", self.loss)?;
        writeln!(out, "iterate={}", self.iterate)?;
        writeln!(out, "m={}", self.coeffs.len())?;
        if let Some(a) = self.a_t {
            writeln!(out, "a_t={}", format_real(a))?;
        }
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                writeln!(out, "{}:{}", i + 1, format_real(c))?;
            }
        }
        Ok(())
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, SgmError> {
        let mut kernel = None;
        let mut loss = String::new();
        let mut iterate = Iterate::Last;
        let mut m = None;
        let mut a_t = None;
        let mut entries = Vec::new();
        for (no, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let bad = |message: String| SgmError::ModelFormat { line: no + 1, message };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                match key.trim() {
                    "kernel" => kernel = Some(value.trim().to_owned()),
                    "loss" => loss = value.trim().to_owned(),
                    "iterate" => iterate = value.parse().map_err(bad)?,
                    "m" => m = Some(value.trim().parse::<usize>().map_err(|e| bad(e.to_string()))?),
                    "a_t" => a_t = Some(value.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
                    other => return Err(bad(format!("unknown header key {other:?}"))),
                }
            } else if let Some((idx, val)) = line.split_once(':') {
                let idx: usize = idx.trim().parse().map_err(|_| bad(format!("invalid index {idx:?}")))?;
                let val: f64 = val.trim().parse().map_err(|_| bad(format!("invalid coefficient {val:?}")))?;
                if idx == 0 {
                    return Err(bad("indices are 1-based".into()));
                }
                entries.push((no + 1, idx - 1, val));
            } else {
                return Err(bad(format!("unrecognized line {line:?}")));
            }
        }
        let m = m.ok_or(SgmError::ModelFormat { line: 0, message: "missing m= header".into() })?;
        let mut coeffs = vec![0.0; m];
        for (line, i, v) in entries {
            if i >= m {
                return Err(SgmError::ModelFormat { line, message: format!("index {} exceeds m={m}", i + 1) });
            }
            coeffs[i] = v;
        }
        Ok(Self {
            kernel: kernel.ok_or(SgmError::ModelFormat { line: 0, message: "missing kernel= header".into() })?,
            loss,
            iterate,
            a_t,
            coeffs,
        })
    }
}
