//! Explicit finite-sample excess-risk bounds for the weighted average and the last
//! iterate, the summation estimates behind their polynomial simplifications, and the
//! source-condition constant of a problem with an attained minimizer.
//!
//! With `A = sum_{k<=t} eta_k`, `B = sum_{k<=t} eta_k^2`,
//! `S1 = sum_{k<t} eta_k / (eta_t (t-k))` and `S2 = sum_{k<t} eta_k^2 / (eta_t (t-k))`:
//!
//! | bound | sample | computational | approximation |
//! |---|---|---|---|
//! | smooth, average | `2 (a0 k)^2 A/m` | `(a0 k)^2/2 B/A` | `c A^-beta` |
//! | smooth, last | `6 (a0 k)^2 (A/m) S1` | `(a0 k)^2/2 (S2 + eta_t)` | `c A^(1-beta) / (eta_t t)` |
//! | nonsmooth, average | `2 a0 k R sqrt(A/m)` | as smooth | as smooth |
//! | nonsmooth, last | `6 a0 k R sqrt(A/m) S1` | as smooth | as smooth |
//!
//! where `R = sqrt((a0 k)^2 eta_1 + 2 |V|_0)`. Empty sums (at `t = 1`) are 0.

use log::warn;
use thiserror::Error;

use crate::losses::Loss;
use crate::schedules::StepSchedule;
use crate::stats::CompensatedSum;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("smooth bounds need the smoothness constant L")]
    MissingSmoothness,
    #[error("invalid bound parameter: {0}")]
    InvalidParams(String),
    #[error("iteration and sample counts must be at least 1")]
    ZeroCount,
    #[error("summation estimates need t >= 3, got {0}")]
    TooFewTerms(u64),
    #[error("exponent must be finite and nonnegative, got {0}")]
    InvalidExponent(f64),
    #[error("polynomial forms need theta < 1, got {0}")]
    ThetaOutOfRange(f64),
}

/// Constants entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    /// Bound on `|V'_-|`.
    pub a0: f64,
    pub kappa: f64,
    /// Lipschitz constant of `V'` (smooth losses only).
    pub smoothness: Option<f64>,
    /// `sup_y V(y, 0)`.
    pub v0: f64,
    pub c_beta: f64,
    pub beta: f64,
}

impl BoundParams {
    pub fn new(a0: f64, kappa: f64, smoothness: Option<f64>, v0: f64, c_beta: f64, beta: f64) -> Result<Self, BoundError> {
        let p = Self { a0, kappa, smoothness, v0, c_beta, beta };
        p.validate()?;
        Ok(p)
    }

    /// Takes `a0`, `|V|_0` and `L` from the loss.
    pub fn for_loss(loss: Loss, kappa: f64, c_beta: f64, beta: f64) -> Result<Self, BoundError> {
        let c = loss.constants();
        Self::new(c.a0, kappa, c.smoothness, c.v0, c_beta, beta)
    }

    fn validate(&self) -> Result<(), BoundError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(BoundError::InvalidParams(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("a0", self.a0)?;
        positive("kappa", self.kappa)?;
        positive("v0", self.v0)?;
        positive("c_beta", self.c_beta)?;
        if let Some(l) = self.smoothness {
            positive("L", l)?;
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(BoundError::InvalidParams(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    fn a0_kappa(&self) -> f64 {
        self.a0 * self.kappa
    }
}

/// A bound split into its three error sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub sample: f64,
    pub computational: f64,
    pub approximation: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.sample + self.computational + self.approximation
    }
}

/// Step-size sums at iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSums {
    /// `sum_{k<=t} eta_k`
    pub a: f64,
    /// `sum_{k<=t} eta_k^2`
    pub b: f64,
    /// `sum_{k<t} eta_k / (eta_t (t-k))`
    pub s1: f64,
    /// `sum_{k<t} eta_k^2 / (eta_t (t-k))`
    pub s2: f64,
    pub eta_t: f64,
}

impl StepSums {
    pub fn new(schedule: &StepSchedule, t: u64) -> Self {
        let eta_t = schedule.at(t.max(1));
        let (mut a, mut b, mut s1, mut s2) =
            (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
        for k in 1..=t {
            let e = schedule.at(k);
            a.add(e);
            b.add(e * e);
            if k < t {
                let w = eta_t * (t - k) as f64;
                s1.add(e / w);
                s2.add(e * e / w);
            }
        }
        Self { a: a.value(), b: b.value(), s1: s1.value(), s2: s2.value(), eta_t }
    }
}

fn check_counts(t: u64, m: u64) -> Result<(), BoundError> {
    if t == 0 || m == 0 {
        Err(BoundError::ZeroCount)
    } else {
        Ok(())
    }
}

fn avg_terms(p: &BoundParams, s: &StepSums, sample: f64) -> BoundTerms {
    let ak2 = p.a0_kappa().powi(2);
    BoundTerms {
        sample,
        computational: ak2 / 2.0 * s.b / s.a,
        approximation: p.c_beta * s.a.powf(-p.beta),
    }
}

fn last_terms(p: &BoundParams, s: &StepSums, t: u64, sample: f64) -> BoundTerms {
    let ak2 = p.a0_kappa().powi(2);
    BoundTerms {
        sample,
        computational: ak2 / 2.0 * s.s2 + ak2 / 2.0 * s.eta_t,
        approximation: p.c_beta * s.a.powf(1.0 - p.beta) / (s.eta_t * t as f64),
    }
}

fn require_smooth(p: &BoundParams) -> Result<(), BoundError> {
    p.validate()?;
    p.smoothness.map(|_| ()).ok_or(BoundError::MissingSmoothness)
}

/// Weighted-average bound for smooth losses.
pub fn bound_smooth_avg(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<BoundTerms, BoundError> {
    require_smooth(p)?;
    check_counts(t, m)?;
    let s = StepSums::new(schedule, t);
    Ok(avg_terms(p, &s, 2.0 * p.a0_kappa().powi(2) * s.a / m as f64))
}

/// Last-iterate bound for smooth losses.
pub fn bound_smooth_last(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<BoundTerms, BoundError> {
    require_smooth(p)?;
    check_counts(t, m)?;
    let s = StepSums::new(schedule, t);
    Ok(last_terms(p, &s, t, 6.0 * p.a0_kappa().powi(2) * s.a / m as f64 * s.s1))
}

fn radius(p: &BoundParams, schedule: &StepSchedule) -> f64 {
    (p.a0_kappa().powi(2) * schedule.at(1) + 2.0 * p.v0).sqrt()
}

/// Weighted-average bound for Lipschitz (possibly nonsmooth) losses.
pub fn bound_nonsmooth_avg(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<BoundTerms, BoundError> {
    p.validate()?;
    check_counts(t, m)?;
    let s = StepSums::new(schedule, t);
    let sample = 2.0 * p.a0_kappa() * radius(p, schedule) * (s.a / m as f64).sqrt();
    Ok(avg_terms(p, &s, sample))
}

/// Last-iterate bound for Lipschitz (possibly nonsmooth) losses.
pub fn bound_nonsmooth_last(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<BoundTerms, BoundError> {
    p.validate()?;
    check_counts(t, m)?;
    let s = StepSums::new(schedule, t);
    let sample = 6.0 * p.a0_kappa() * radius(p, schedule) * (s.a / m as f64).sqrt() * s.s1;
    Ok(last_terms(p, &s, t, sample))
}

/// Closed-form simplifications for `eta_t = eta t^(-theta)`, `theta < 1`. They dominate
/// the exact-sum bounds for `t >= 3` (the nonsmooth ones additionally need `eta <= 1`).
pub mod polynomial {
    use super::*;

    fn setup(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<(f64, f64, f64, f64), BoundError> {
        p.validate()?;
        check_counts(t, m)?;
        let theta = schedule.theta();
        if theta >= 1.0 {
            return Err(BoundError::ThetaOutOfRange(theta));
        }
        let tf = t as f64;
        // eta t^(1-theta), log t, t^(-min(theta, 1-theta))
        let growth = schedule.eta() * tf.powf(1.0 - theta);
        Ok((theta, growth, tf.ln(), tf.powf(-theta.min(1.0 - theta))))
    }

    fn shared_avg(p: &BoundParams, schedule: &StepSchedule, theta: f64, growth: f64, log_t: f64, decay: f64) -> (f64, f64) {
        let ak2 = p.a0_kappa().powi(2);
        let ratio = (1.0 - theta) / (1.0 - 4f64.powf(theta - 1.0));
        (
            ak2 * ratio * schedule.eta() * decay * log_t,
            p.c_beta * ratio.powf(p.beta) * growth.powf(-p.beta),
        )
    }

    fn shared_last(p: &BoundParams, schedule: &StepSchedule, theta: f64, growth: f64, log_t: f64, decay: f64) -> (f64, f64) {
        let ak2 = p.a0_kappa().powi(2);
        (
            3.0 * ak2 * schedule.eta() * decay * log_t,
            p.c_beta / (1.0 - theta) * growth.powf(-p.beta),
        )
    }

    pub fn smooth_avg(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<BoundTerms, BoundError> {
        require_smooth(p)?;
        let (theta, growth, log_t, decay) = setup(p, schedule, t, m)?;
        let (computational, approximation) = shared_avg(p, schedule, theta, growth, log_t, decay);
        let sample = 2.0 * p.a0_kappa().powi(2) / (1.0 - theta) * growth / m as f64;
        Ok(BoundTerms { sample, computational, approximation })
    }

    pub fn smooth_last(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<BoundTerms, BoundError> {
        require_smooth(p)?;
        let (theta, growth, log_t, decay) = setup(p, schedule, t, m)?;
        let (computational, approximation) = shared_last(p, schedule, theta, growth, log_t, decay);
        let sample = 18.0 * p.a0_kappa().powi(2) / (1.0 - theta) * growth * log_t / m as f64;
        Ok(BoundTerms { sample, computational, approximation })
    }

    fn radius_poly(p: &BoundParams, theta: f64) -> f64 {
        ((p.a0_kappa().powi(2) + 2.0 * p.v0) / (1.0 - theta)).sqrt()
    }

    pub fn nonsmooth_avg(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<BoundTerms, BoundError> {
        let (theta, growth, log_t, decay) = setup(p, schedule, t, m)?;
        let (computational, approximation) = shared_avg(p, schedule, theta, growth, log_t, decay);
        let sample = 2.0 * p.a0_kappa() * radius_poly(p, theta) * (growth / m as f64).sqrt();
        Ok(BoundTerms { sample, computational, approximation })
    }

    pub fn nonsmooth_last(p: &BoundParams, schedule: &StepSchedule, t: u64, m: u64) -> Result<BoundTerms, BoundError> {
        let (theta, growth, log_t, decay) = setup(p, schedule, t, m)?;
        let (computational, approximation) = shared_last(p, schedule, theta, growth, log_t, decay);
        let sample = 18.0 * p.a0_kappa() * radius_poly(p, theta) * (growth / m as f64).sqrt() * log_t;
        Ok(BoundTerms { sample, computational, approximation })
    }
}

/// `sum_{k=1}^t k^(-s)`.
pub fn power_sum(s: f64, t: u64) -> f64 {
    let mut acc = CompensatedSum::default();
    for k in 1..=t {
        acc.add((k as f64).powf(-s));
    }
    acc.value()
}

/// `sum_{k=1}^{t-1} k^(-q) / (t - k)`.
pub fn convolution_sum(q: f64, t: u64) -> f64 {
    let mut acc = CompensatedSum::default();
    for k in 1..t {
        acc.add((k as f64).powf(-q) / (t - k) as f64);
    }
    acc.value()
}

/// Which summation estimate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumEstimateKind {
    /// `sum k^(-theta)` against its polynomial envelope.
    Power,
    /// `sum k^(-q) / (t-k)` against its three-case envelope.
    Convolution,
    /// `sum k^(-theta) <= 2 t^max(1-theta, 0) log t`.
    PowerLog,
    /// `sum k^(-q) / (t-k) <= 4 t^(-min(q, 1)) log t`.
    ConvolutionLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumEstimate {
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
}

impl SumEstimate {
    pub fn holds(&self) -> bool {
        self.lower <= self.exact && self.exact <= self.upper
    }
}

/// Exact sum next to its closed-form lower and upper estimates, for `t >= 3`.
///
/// Where no closed-form lower estimate exists (convolution sums, and power sums with
/// exponent above 1), the lower value is the first term of the sum.
pub fn sum_estimate_check(kind: SumEstimateKind, exponent: f64, t: u64) -> Result<SumEstimate, BoundError> {
    if t < 3 {
        return Err(BoundError::TooFewTerms(t));
    }
    if !(exponent >= 0.0 && exponent.is_finite()) {
        return Err(BoundError::InvalidExponent(exponent));
    }
    let tf = t as f64;
    let e = exponent;
    let power_lower = || {
        if e < 1.0 {
            (1.0 - 4f64.powf(e - 1.0)) / (1.0 - e) * tf.powf(1.0 - e)
        } else if e == 1.0 {
            tf.ln()
        } else {
            1.0
        }
    };
    let convolution_lower = 1.0 / (tf - 1.0);
    let est = match kind {
        SumEstimateKind::Power => SumEstimate {
            exact: power_sum(e, t),
            lower: power_lower(),
            upper: if e < 1.0 {
                tf.powf(1.0 - e) / (1.0 - e)
            } else if e == 1.0 {
                tf.ln() + 1.0
            } else {
                e / (e - 1.0)
            },
        },
        SumEstimateKind::PowerLog => SumEstimate {
            exact: power_sum(e, t),
            lower: power_lower(),
            upper: tf.powf((1.0 - e).max(0.0)) * 2.0 * tf.ln(),
        },
        SumEstimateKind::Convolution => SumEstimate {
            exact: convolution_sum(e, t),
            lower: convolution_lower,
            upper: if e < 1.0 {
                2f64.powf(e) * (2.0 + 1.0 / (1.0 - e)) * tf.powf(-e) * tf.ln()
            } else if e == 1.0 {
                8.0 * tf.ln() / tf
            } else {
                (2f64.powf(e) + 2.0 * e) / (e - 1.0) / tf
            },
        },
        SumEstimateKind::ConvolutionLog => SumEstimate {
            exact: convolution_sum(e, t),
            lower: convolution_lower,
            upper: 4.0 * tf.powf(-e.min(1.0)) * tf.ln(),
        },
    };
    Ok(est)
}

/// Source-condition constant for a problem whose risk minimizer `w*` is attained:
/// `D(lambda) <= lambda ||w*||^2 / 2`, i.e. `c_beta = ||w*||^2 / 2` with `beta = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCondition {
    pub c_beta: f64,
    pub beta: f64,
    /// Set when `||w*|| = 0` forced the smallest positive constant.
    pub clamped: bool,
}

pub fn c_beta_from_minimizer(w_star_norm: f64) -> Result<SourceCondition, BoundError> {
    if !(w_star_norm >= 0.0 && w_star_norm.is_finite()) {
        return Err(BoundError::InvalidParams(format!("minimizer norm must be finite and nonnegative, got {w_star_norm}")));
    }
    let c = w_star_norm * w_star_norm / 2.0;
    if c > 0.0 {
        Ok(SourceCondition { c_beta: c, beta: 1.0, clamped: false })
    } else {
        warn!("minimizer norm is 0; using the smallest positive c_beta");
        Ok(SourceCondition { c_beta: f64::MIN_POSITIVE, beta: 1.0, clamped: true })
    }
}
