//! Polynomial step sizes `eta_t = eta * t^(-theta)`, the stopping-rule presets for each
//! regime, and a closed-form consistency check for schedule families
//! `eta_k = eta0 * m^(-q) * k^(-theta)` stopped at `t*(m) = ceil(m^p)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::losses::Loss;
use crate::stats::CompensatedSum;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("base step must be positive and finite, got {0}")]
    InvalidEta(f64),
    #[error("decay exponent must lie in [0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("iteration index must be at least 1")]
    ZeroIteration,
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("beta must lie in (0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("kappa must be positive and finite, got {0}")]
    InvalidKappa(f64),
    #[error("step {eta} exceeds the smooth-loss ceiling 2/(kappa^2 L) = {max}")]
    StepTooLarge { eta: f64, max: f64 },
    #[error("preset {preset} needs a smooth loss, got {loss}")]
    LossMismatch { preset: &'static str, loss: Loss },
    #[error("family parameters out of domain: {0}")]
    InvalidFamily(String),
}

/// `eta_t = eta * t^(-theta)`, non-increasing in `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    eta: f64,
    theta: f64,
}

impl StepSchedule {
    /// `theta` may be 1 so a linear grid over `[0, 1]` can be searched; the consistency
    /// check itself is restricted to `theta < 1`.
    pub fn new(eta: f64, theta: f64) -> Result<Self, ScheduleError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(ScheduleError::InvalidEta(eta));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(ScheduleError::InvalidTheta(theta));
        }
        Ok(Self { eta, theta })
    }

    pub fn constant(eta: f64) -> Result<Self, ScheduleError> {
        Self::new(eta, 0.0)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn step_size(&self, t: u64) -> Result<f64, ScheduleError> {
        if t == 0 {
            return Err(ScheduleError::ZeroIteration);
        }
        Ok(self.at(t))
    }

    /// Unchecked form of [`step_size`](Self::step_size) for `t >= 1`.
    #[inline]
    pub fn at(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        if self.theta == 0.0 {
            self.eta
        } else {
            self.eta * (t as f64).powf(-self.theta)
        }
    }

    /// `(sum_{k<=t} eta_k, sum_{k<=t} eta_k^2)`.
    pub fn partial_sums(&self, t: u64) -> (f64, f64) {
        let mut s1 = CompensatedSum::default();
        let mut s2 = CompensatedSum::default();
        for k in 1..=t {
            let e = self.at(k);
            s1.add(e);
            s2.add(e * e);
        }
        (s1.value(), s2.value())
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "eta={} theta={}", self.eta, self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Smooth,
    Nonsmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    EarlyStop,
    OnePass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    SmoothConstEs,
    SmoothDecayEs,
    SmoothConst1p,
    SmoothDecay1p,
    HingeConstEs,
    HingeDecayEs,
    HingeConst1p,
    HingeDecay1p,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::SmoothConstEs,
        Preset::SmoothDecayEs,
        Preset::SmoothConst1p,
        Preset::SmoothDecay1p,
        Preset::HingeConstEs,
        Preset::HingeDecayEs,
        Preset::HingeConst1p,
        Preset::HingeDecay1p,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SmoothConstEs => "smooth-const-es",
            Preset::SmoothDecayEs => "smooth-decay-es",
            Preset::SmoothConst1p => "smooth-const-1p",
            Preset::SmoothDecay1p => "smooth-decay-1p",
            Preset::HingeConstEs => "hinge-const-es",
            Preset::HingeDecayEs => "hinge-decay-es",
            Preset::HingeConst1p => "hinge-const-1p",
            Preset::HingeDecay1p => "hinge-decay-1p",
        }
    }

    pub fn regime(self) -> Regime {
        match self {
            Preset::SmoothConstEs | Preset::SmoothDecayEs | Preset::SmoothConst1p | Preset::SmoothDecay1p => {
                Regime::Smooth
            }
            _ => Regime::Nonsmooth,
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Preset::SmoothConst1p | Preset::SmoothDecay1p | Preset::HingeConst1p | Preset::HingeDecay1p => {
                Strategy::OnePass
            }
            _ => Strategy::EarlyStop,
        }
    }

    /// `(theta, q, p)` of the family `eta_k = eta1 m^(-q) k^(-theta)`, `t* = ceil(m^p)`.
    pub fn family(self, beta: f64) -> (f64, f64, f64) {
        let b = beta;
        match self {
            Preset::SmoothConstEs => (0.0, 0.5, (b + 3.0) / (2.0 * (b + 1.0))),
            Preset::SmoothDecayEs => (0.5, 0.0, 2.0 / (b + 1.0)),
            Preset::SmoothConst1p => (0.0, b / (b + 1.0), 1.0),
            Preset::SmoothDecay1p => (b / (b + 1.0), 0.0, 1.0),
            Preset::HingeConstEs => (0.0, 0.5, (2.0 * b + 3.0) / (4.0 * b + 2.0)),
            Preset::HingeDecayEs => (0.5, 0.0, 2.0 / (2.0 * b + 1.0)),
            Preset::HingeConst1p => (0.0, 2.0 * b / (2.0 * b + 1.0), 1.0),
            Preset::HingeDecay1p => (2.0 * b / (2.0 * b + 1.0), 0.0, 1.0),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| ScheduleError::UnknownPreset(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetResult {
    pub preset: Preset,
    pub schedule: StepSchedule,
    pub t_star: u64,
    pub regime: Regime,
    pub strategy: Strategy,
}

/// `ceil(x)`, snapping values within rounding noise of an integer to that integer.
fn stable_ceil(x: f64) -> u64 {
    let r = x.round();
    let v = if (x - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { x.ceil() };
    v.max(1.0) as u64
}

/// Default `eta1`: 1 for the nonsmooth presets, `2/(kappa^2 L)` for the smooth ones.
pub fn default_eta1(preset: Preset, loss: Loss, kappa: f64) -> f64 {
    match preset.regime() {
        Regime::Nonsmooth => 1.0,
        Regime::Smooth => loss.max_smooth_step(kappa).unwrap_or(1.0),
    }
}

pub fn preset(
    name: &str,
    m: usize,
    beta: f64,
    eta1: Option<f64>,
    loss: Loss,
    kappa: f64,
) -> Result<PresetResult, ScheduleError> {
    let preset: Preset = name.parse()?;
    preset_for(preset, m, beta, eta1, loss, kappa)
}

pub fn preset_for(
    preset: Preset,
    m: usize,
    beta: f64,
    eta1: Option<f64>,
    loss: Loss,
    kappa: f64,
) -> Result<PresetResult, ScheduleError> {
    if m == 0 {
        return Err(ScheduleError::EmptySample);
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ScheduleError::InvalidBeta(beta));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(ScheduleError::InvalidKappa(kappa));
    }
    if preset.regime() == Regime::Smooth && !loss.is_smooth() {
        return Err(ScheduleError::LossMismatch { preset: preset.name(), loss });
    }
    let eta1 = eta1.unwrap_or_else(|| default_eta1(preset, loss, kappa));
    if let Some(max) = loss.max_smooth_step(kappa) {
        if preset.regime() == Regime::Smooth && eta1 > max * (1.0 + 1e-12) {
            return Err(ScheduleError::StepTooLarge { eta: eta1, max });
        }
    }
    let (theta, q, p) = preset.family(beta);
    let mf = m as f64;
    let schedule = StepSchedule::new(eta1 * mf.powf(-q), theta)?;
    let t_star = match preset.strategy() {
        Strategy::OnePass => m as u64,
        Strategy::EarlyStop => stable_ceil(mf.powf(p)),
    };
    Ok(PresetResult { preset, schedule, t_star, regime: preset.regime(), strategy: preset.strategy() })
}

/// Verdict on one schedule family, with the exponents of `m` governing each limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub theta: f64,
    pub q: f64,
    pub p: f64,
    /// Exponent of `m` in `sum eta_k / m`; (A) needs it strictly negative.
    pub exponent_a: f64,
    /// Largest exponent of `m` among the parts of `(1 + sum eta_k^2) / sum eta_k`.
    pub exponent_b: f64,
    pub condition_a: bool,
    pub condition_b: bool,
}

impl ConsistencyReport {
    pub fn consistent(&self) -> bool {
        self.condition_a && self.condition_b
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.condition_a, self.condition_b) {
            (true, true) => f.write_str("consistent"),
            (false, true) => f.write_str("not consistent: condition (A) fails"),
            (true, false) => f.write_str("not consistent: condition (B) fails"),
            (false, false) => f.write_str("not consistent: condition (A) fails, condition (B) fails"),
        }
    }
}

/// Closed-form limits for `eta_k = eta0 m^(-q) k^(-theta)` and `t* = ceil(m^p)`.
///
/// With `sum_{k<=t} k^(-theta) ~ t^(1-theta)`:
/// (A) `sum eta_k / m -> 0` iff `p(1-theta) - q < 1`;
/// (B) `(1 + sum eta_k^2) / sum eta_k -> 0` iff `p(1-theta) > q`, and additionally
/// `q + p theta > 0` when `theta < 1/2`. Log factors never flip a strict inequality, and a
/// zero exponent (a nonvanishing constant) counts as failure.
pub fn check_consistency(theta: f64, q: f64, p: f64) -> Result<ConsistencyReport, ScheduleError> {
    if !(0.0..1.0).contains(&theta) || !(q >= 0.0 && q.is_finite()) || !(p > 0.0 && p.is_finite()) {
        return Err(ScheduleError::InvalidFamily(format!(
            "need theta in [0,1), q >= 0, p > 0; got theta={theta}, q={q}, p={p}"
        )));
    }
    let growth = p * (1.0 - theta) - q;
    let exponent_a = growth - 1.0;
    // 1/sum eta_k decays like m^(-growth); sum eta_k^2 / sum eta_k like m^(-q - p theta)
    // below theta = 1/2 and like m^(-q - p(1-theta)) (up to logs) from 1/2 on.
    let ratio = if theta < 0.5 { -q - p * theta } else { -q - p * (1.0 - theta) };
    let exponent_b = (-growth).max(ratio);
    Ok(ConsistencyReport {
        theta,
        q,
        p,
        exponent_a,
        exponent_b,
        condition_a: exponent_a < 0.0,
        condition_b: exponent_b < 0.0,
    })
}
