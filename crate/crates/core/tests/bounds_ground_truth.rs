//! Bound behavior against independently computed ground truth.

mod common;

use sgm_core::bounds::{bound_smooth_avg, c_beta_from_minimizer, BoundParams};
use sgm_core::losses::Loss;
use sgm_core::schedules::{preset_for, Preset};
use sgm_core::stats::log_log_slope;

const W_STAR: [f64; 2] = [1.5, -1.0];

/// Minimizes `f` over a square by repeated grid refinement around the incumbent.
fn grid_minimize(f: impl Fn(&[f64]) -> f64, center: [f64; 2], mut radius: f64) -> f64 {
    let mut best = (f(&center), center);
    for _ in 0..6 {
        let c = best.1;
        for i in -10..=10 {
            for j in -10..=10 {
                let w = [c[0] + radius * i as f64 / 10.0, c[1] + radius * j as f64 / 10.0];
                let v = f(&w);
                if v < best.0 {
                    best = (v, w);
                }
            }
        }
        radius /= 4.0;
    }
    best.0
}

#[test]
fn approximation_error_within_source_constant() {
    let quad = common::Quadrature::new(80);
    let lambda = 0.1;
    let base = quad.logistic_risk(&W_STAR, &W_STAR);
    let d = grid_minimize(|w| quad.logistic_risk(w, &W_STAR) + lambda / 2.0 * (w[0] * w[0] + w[1] * w[1]), [0.0, 0.0], 2.0) - base;
    let norm = (W_STAR[0] * W_STAR[0] + W_STAR[1] * W_STAR[1]).sqrt();
    let source = c_beta_from_minimizer(norm).unwrap();
    assert!(d > 0.0, "D(lambda) = {d}");
    assert!(d <= source.c_beta * lambda, "D(0.1) = {d} exceeds c_beta * lambda = {}", source.c_beta * lambda);
}

#[test]
fn early_stopping_bound_scales_at_the_predicted_rate() {
    for beta in [0.5, 1.0] {
        let params = BoundParams::new(1.0, 1.0, Some(0.25), 2f64.ln(), 1.0, beta).unwrap();
        let ms = [100.0, 1_000.0, 10_000.0];
        let values: Vec<f64> = ms
            .iter()
            .map(|&m| {
                let p = preset_for(Preset::SmoothConstEs, m as usize, beta, None, Loss::Logistic, 1.0).unwrap();
                bound_smooth_avg(&params, &p.schedule, p.t_star, m as u64).unwrap().total()
            })
            .collect();
        let slope = log_log_slope(&ms, &values);
        let target = -beta / (beta + 1.0);
        assert!((slope - target).abs() <= 0.1, "beta {beta}: slope {slope}, target {target}, values {values:?}");
    }
}
