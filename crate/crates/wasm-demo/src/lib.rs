//! Browser demo over synthetic data. Each operation has a plain Rust form, used by the
//! native tests, and a `wasm_bindgen` export that returns a flat `Float64Array`.

use std::sync::Arc;

use sgm_core::bounds::{bound_nonsmooth_avg, bound_nonsmooth_last, bound_smooth_avg, bound_smooth_last, BoundParams};
use sgm_core::data::{make_synthetic, Dataset};
use sgm_core::kernels::Kernel;
use sgm_core::losses::Loss;
use sgm_core::model_selection::grid_log;
use sgm_core::rng::derive_seed;
use sgm_core::schedules::{preset_for, Preset, Regime, StepSchedule};
use sgm_core::sgm::{train, Iterate, SgmRun, SgmRunConfig};
use wasm_bindgen::prelude::*;

/// Settings shared by the curves that train on synthetic data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub m: usize,
    pub dim: usize,
    /// Label flip probability.
    pub noise: f64,
    /// Gaussian kernel width.
    pub sigma: f64,
    pub seed: u64,
}

impl Problem {
    fn datasets(&self) -> Result<(Arc<Dataset>, Arc<Dataset>), String> {
        if self.m == 0 || self.dim == 0 {
            return Err("m and dim must be positive".into());
        }
        let target: Vec<f64> = (0..self.dim).map(|i| if i % 2 == 0 { 1.0 } else { -0.7 }).collect();
        let make = |n, s| make_synthetic(n, self.dim, self.noise, &target, s).map(|(d, _)| Arc::new(d)).map_err(|e| e.to_string());
        Ok((make(self.m, derive_seed(self.seed, 0))?, make(self.m, derive_seed(self.seed, 1))?))
    }

    fn kernel(&self) -> Result<Kernel, String> {
        Kernel::gaussian(self.sigma).map_err(|e| e.to_string())
    }
}

/// Test and training error of the last iterate after each pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PassCurve {
    pub test_error: Vec<f64>,
    pub train_error: Vec<f64>,
}

pub fn pass_curve(problem: &Problem, eta: f64, theta: f64, passes: u32) -> Result<PassCurve, String> {
    if passes == 0 {
        return Err("passes must be at least 1".into());
    }
    let (train_set, test_set) = problem.datasets()?;
    let schedule = StepSchedule::new(eta, theta).map_err(|e| e.to_string())?;
    let m = problem.m as u64;
    let config = SgmRunConfig::new(schedule, m * passes as u64, derive_seed(problem.seed, 2)).averaging(false);
    let mut run = SgmRun::new(train_set.clone(), problem.kernel()?, Loss::Hinge, &config, Some(test_set)).map_err(|e| e.to_string())?;
    let mut curve = PassCurve { test_error: Vec::new(), train_error: Vec::new() };
    for _ in 0..passes {
        for _ in 0..m {
            run.step().map_err(|e| e.to_string())?;
        }
        let test = run.evaluate_validation(Iterate::Last).map_err(|e| e.to_string())?;
        curve.test_error.push(test.error);
        curve.train_error.push(run.last_model().misclassification_rate(&train_set).map_err(|e| e.to_string())?);
    }
    Ok(curve)
}

/// Test error after one pass with a constant step, for a log grid of step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCurve {
    pub eta: Vec<f64>,
    pub test_error: Vec<f64>,
}

pub fn step_curve(problem: &Problem, lo: f64, hi: f64, points: usize) -> Result<StepCurve, String> {
    let (train_set, test_set) = problem.datasets()?;
    let kernel = problem.kernel()?;
    let eta = grid_log(lo, hi, points).map_err(|e| e.to_string())?;
    let test_error = eta
        .iter()
        .map(|&e| {
            let schedule = StepSchedule::constant(e).map_err(|e| e.to_string())?;
            let config = SgmRunConfig::new(schedule, problem.m as u64, derive_seed(problem.seed, 2)).averaging(false);
            let out = train(train_set.clone(), kernel.clone(), Loss::Hinge, &config, None).map_err(|e| e.to_string())?;
            out.last.misclassification_rate(&test_set).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(StepCurve { eta, test_error })
}

/// Bounds at the preset's stopping time over a log grid of sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub m: Vec<f64>,
    pub t: Vec<f64>,
    pub bound_avg: Vec<f64>,
    pub bound_last: Vec<f64>,
}

pub fn bound_curve(preset: &str, beta: f64, c_beta: f64, kappa: f64, m_lo: f64, m_hi: f64, points: usize) -> Result<BoundCurve, String> {
    let preset: Preset = preset.parse().map_err(|e: sgm_core::schedules::ScheduleError| e.to_string())?;
    let loss = match preset.regime() {
        Regime::Smooth => Loss::Logistic,
        Regime::Nonsmooth => Loss::Hinge,
    };
    let params = BoundParams::for_loss(loss, kappa, c_beta, beta).map_err(|e| e.to_string())?;
    let grid = grid_log(m_lo, m_hi, points).map_err(|e| e.to_string())?;
    let mut curve = BoundCurve { m: Vec::new(), t: Vec::new(), bound_avg: Vec::new(), bound_last: Vec::new() };
    for mv in grid {
        let m = mv.round().max(1.0) as u64;
        let p = preset_for(preset, m as usize, beta, None, loss, kappa).map_err(|e| e.to_string())?;
        let (avg, last) = match preset.regime() {
            Regime::Smooth => (bound_smooth_avg(&params, &p.schedule, p.t_star, m), bound_smooth_last(&params, &p.schedule, p.t_star, m)),
            Regime::Nonsmooth => (bound_nonsmooth_avg(&params, &p.schedule, p.t_star, m), bound_nonsmooth_last(&params, &p.schedule, p.t_star, m)),
        };
        curve.m.push(m as f64);
        curve.t.push(p.t_star as f64);
        curve.bound_avg.push(avg.map_err(|e| e.to_string())?.total());
        curve.bound_last.push(last.map_err(|e| e.to_string())?.total());
    }
    Ok(curve)
}

fn js(err: String) -> JsError {
    JsError::new(&err)
}

/// `[test_error; passes] ++ [train_error; passes]`.
#[wasm_bindgen(js_name = passCurve)]
#[allow(clippy::too_many_arguments)]
pub fn pass_curve_js(m: usize, dim: usize, noise: f64, sigma: f64, eta: f64, theta: f64, passes: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    let c = pass_curve(&Problem { m, dim, noise, sigma, seed: seed as u64 }, eta, theta, passes).map_err(js)?;
    Ok([c.test_error, c.train_error].concat())
}

/// `[eta; points] ++ [test_error; points]`.
#[wasm_bindgen(js_name = stepCurve)]
#[allow(clippy::too_many_arguments)]
pub fn step_curve_js(m: usize, dim: usize, noise: f64, sigma: f64, lo: f64, hi: f64, points: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    let c = step_curve(&Problem { m, dim, noise, sigma, seed: seed as u64 }, lo, hi, points).map_err(js)?;
    Ok([c.eta, c.test_error].concat())
}

/// `[m; points] ++ [t; points] ++ [bound_avg; points] ++ [bound_last; points]`.
#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve_js(preset: &str, beta: f64, c_beta: f64, kappa: f64, m_lo: f64, m_hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let c = bound_curve(preset, beta, c_beta, kappa, m_lo, m_hi, points).map_err(js)?;
    Ok([c.m, c.t, c.bound_avg, c.bound_last].concat())
}
