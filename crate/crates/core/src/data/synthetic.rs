//! Generators with a known target, used for ground-truth checks.

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use super::{DataError, Dataset, Sample, SparseVector};
use crate::rng::{rng_from_seed, SgmRng};

fn uniform_point(rng: &mut SgmRng, cube: &Uniform<f64>, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| cube.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Features uniform on `[-1, 1]^dim`; label `sign(<target, x>)` (with `sign(0) = +1`),
/// flipped independently with probability `margin_noise`. Returns the dataset and
/// `||target||`.
pub fn make_synthetic(
    m: usize,
    dim: usize,
    margin_noise: f64,
    target: &[f64],
    seed: u64,
) -> Result<(Dataset, f64), DataError> {
    if dim == 0 {
        return Err(DataError::InvalidArgument("synthetic dimension must be at least 1".into()));
    }
    if target.len() != dim {
        return Err(DataError::InvalidArgument(format!(
            "target has {} coefficients for dimension {dim}",
            target.len()
        )));
    }
    if !(0.0..=1.0).contains(&margin_noise) {
        return Err(DataError::InvalidArgument(format!("label noise {margin_noise} outside [0, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let cube = Uniform::new_inclusive(-1.0, 1.0).expect("valid interval");
    let samples = (0..m)
        .map(|_| {
            let x = uniform_point(&mut rng, &cube, dim);
            let clean = if dot(target, &x) >= 0.0 { 1.0 } else { -1.0 };
            let flip = rng.random::<f64>() < margin_noise;
            Sample::new(if flip { -clean } else { clean }, SparseVector::from_dense(&x))
        })
        .collect();
    let norm = target.iter().map(|t| t * t).sum::<f64>().sqrt();
    Ok((Dataset::new(samples, dim)?, norm))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Well-specified logistic model: features uniform on `[-1, 1]^dim` and
/// `P(y = +1 | x) = sigmoid(<w_star, x>)`. The linear predictor `w_star` minimizes the
/// expected logistic risk, which makes it a ground truth for excess-risk checks.
pub fn make_logistic_model(m: usize, w_star: &[f64], seed: u64) -> Result<Dataset, DataError> {
    let dim = w_star.len();
    if dim == 0 {
        return Err(DataError::InvalidArgument("logistic model needs at least one coefficient".into()));
    }
    let mut rng = rng_from_seed(seed);
    let cube = Uniform::new_inclusive(-1.0, 1.0).expect("valid interval");
    let samples = (0..m)
        .map(|_| {
            let x = uniform_point(&mut rng, &cube, dim);
            let p = sigmoid(dot(w_star, &x));
            let y = if rng.random::<f64>() < p { 1.0 } else { -1.0 };
            Sample::new(y, SparseVector::from_dense(&x))
        })
        .collect();
    Dataset::new(samples, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_labels_follow_target() {
        let target = [1.0, -0.5, 0.25];
        let (d, norm) = make_synthetic(500, 3, 0.0, &target, 4).unwrap();
        assert!((norm - (1.0f64 + 0.25 + 0.0625).sqrt()).abs() < 1e-15);
        for s in d.samples() {
            let score = s.features.dot_dense(&target);
            assert_eq!(s.label, if score >= 0.0 { 1.0 } else { -1.0 });
            assert!(s.features.values().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn negative_side_of_first_axis() {
        // target e_1: any point with negative first coordinate is labeled -1
        let (d, _) = make_synthetic(200, 2, 0.0, &[1.0, 0.0], 2).unwrap();
        for s in d.samples() {
            if s.features.get(0) < 0.0 {
                assert_eq!(s.label, -1.0);
            }
        }
    }

    #[test]
    fn flip_rate_matches_noise() {
        let target = [0.3, 0.7];
        let (noisy, _) = make_synthetic(100_000, 2, 0.1, &target, 77).unwrap();
        let flips = noisy
            .samples()
            .iter()
            .filter(|s| {
                let clean = if s.features.dot_dense(&target) >= 0.0 { 1.0 } else { -1.0 };
                s.label != clean
            })
            .count();
        let rate = flips as f64 / 1e5;
        assert!((rate - 0.1).abs() < 0.01, "flip rate {rate}");
    }

    #[test]
    fn argument_validation() {
        assert!(make_synthetic(10, 2, 0.0, &[1.0], 0).is_err());
        assert!(make_synthetic(10, 0, 0.0, &[], 0).is_err());
        assert!(make_synthetic(10, 1, 1.5, &[1.0], 0).is_err());
    }

    #[test]
    fn logistic_model_label_frequency() {
        let w = [2.0, 0.0];
        let d = make_logistic_model(40_000, &w, 3).unwrap();
        // P(y=1 | x1 > 0.5) = E[sigmoid(2 x1) | x1 in (0.5, 1]]
        let (hits, total) = d
            .samples()
            .iter()
            .filter(|s| s.features.get(0) > 0.5)
            .fold((0usize, 0usize), |(h, t), s| (h + usize::from(s.label > 0.0), t + 1));
        let expected = ((1.0 + 2f64.exp()).ln() - (1.0 + 1f64.exp()).ln()) / (2.0 * 0.5);
        let freq = hits as f64 / total as f64;
        assert!((freq - expected).abs() < 0.02, "{freq} vs {expected}");
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
