//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use sgm_core::data::{sigmoid, Dataset};
use sgm_core::losses::{Label, Loss};
use sgm_core::rng::{rng_from_seed, IndexSampler};
use sgm_core::schedules::StepSchedule;

/// The update run directly on explicit weights in R^d (linear kernel), drawing indices
/// from the same seeded stream. Returns the weights after `iterations` steps.
pub fn primal_sgm(data: &Dataset, loss: Loss, schedule: &StepSchedule, iterations: u64, seed: u64) -> Vec<f64> {
    let dense: Vec<Vec<f64>> = data.samples().iter().map(|s| s.features.to_dense(data.dim())).collect();
    let labels: Vec<Label> = data.labels().map(|y| Label::try_from(y).unwrap()).collect();
    let mut w = vec![0.0; data.dim()];
    let mut rng = rng_from_seed(seed);
    let sampler = IndexSampler::new(data.len());
    for t in 1..=iterations {
        let j = sampler.sample(&mut rng);
        let x = &dense[j];
        let margin: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        let g = loss.left_derivative(labels[j], margin);
        let eta = schedule.step_size(t).unwrap();
        for (wi, xi) in w.iter_mut().zip(x) {
            *wi -= eta * g * xi;
        }
    }
    w
}

/// Midpoint grid on [-1, 1]^2 with `n * n` cells.
pub struct Quadrature {
    points: Vec<[f64; 2]>,
}

impl Quadrature {
    pub fn new(n: usize) -> Self {
        let h = 2.0 / n as f64;
        let mut points = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                points.push([-1.0 + h * (i as f64 + 0.5), -1.0 + h * (j as f64 + 0.5)]);
            }
        }
        Self { points }
    }

    /// Expected logistic risk of the linear predictor `w` when `x` is uniform on the square
    /// and `P(y = +1 | x) = sigmoid(<w_star, x>)`.
    pub fn logistic_risk(&self, w: &[f64], w_star: &[f64]) -> f64 {
        let mut acc = 0.0;
        for x in &self.points {
            let a = w[0] * x[0] + w[1] * x[1];
            let p = sigmoid(w_star[0] * x[0] + w_star[1] * x[1]);
            acc += p * Loss::Logistic.value(Label::Positive, a) + (1.0 - p) * Loss::Logistic.value(Label::Negative, a);
        }
        acc / self.points.len() as f64
    }

    pub fn excess(&self, w: &[f64], w_star: &[f64]) -> f64 {
        self.logistic_risk(w, w_star) - self.logistic_risk(w_star, w_star)
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// `ln sum_{k=1}^t k^(-s)` for astronomically large `t`, given `ln t`: exact terms below
/// `N`, then the integral plus the endpoint correction.
pub fn ln_power_sum(s: f64, ln_t: f64) -> f64 {
    const N: u32 = 1000;
    let ln_n = f64::from(N).ln();
    assert!(ln_t > ln_n);
    let head: f64 = (1..N).map(|k| f64::from(k).powf(-s)).sum::<f64>() + 0.5 * f64::from(N).powf(-s);
    let span = ln_t - ln_n;
    let ln_integral = if s == 1.0 {
        span.ln()
    } else if s < 1.0 {
        let x = (1.0 - s) * span;
        (1.0 - s) * ln_n + (-(-x).exp_m1()).ln() + x - (1.0 - s).ln()
    } else {
        let x = (s - 1.0) * span;
        (1.0 - s) * ln_n + (-(-x).exp_m1()).ln() - (s - 1.0).ln()
    };
    log_add(ln_integral, head.ln())
}

/// Numeric verdicts of conditions (A) and (B) for `eta_k = m^(-q) k^(-theta)` and
/// `t = m^p`, evaluated at `m = exp(ln_m)` against `threshold`.
pub fn numeric_conditions(theta: f64, q: f64, p: f64, ln_m: f64, threshold: f64) -> (bool, bool) {
    let ln_t = p * ln_m;
    let ln_sum = -q * ln_m + ln_power_sum(theta, ln_t);
    let ln_sum_sq = -2.0 * q * ln_m + ln_power_sum(2.0 * theta, ln_t);
    let ln_a = ln_sum - ln_m;
    let ln_b = log_add(0.0, ln_sum_sq) - ln_sum;
    (ln_a < threshold.ln(), ln_b < threshold.ln())
}
