use rand::seq::SliceRandom;

use super::{DataError, Dataset, Sample, SparseVector};
use crate::rng::SgmRng;

/// Splits into `(train, validation)` with `round(fraction * m)` training samples.
/// Slots are assigned by a Fisher-Yates permutation drawn from `rng`.
pub fn split_holdout(dataset: &Dataset, fraction: f64, rng: &mut SgmRng) -> Result<(Dataset, Dataset), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    let m = dataset.len();
    let n_train = (fraction * m as f64).round() as usize;
    if m < 2 || n_train == 0 || n_train >= m {
        return Err(DataError::DegenerateSplit {
            train: n_train.min(m),
            validation: m.saturating_sub(n_train),
        });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let (train, validation) = order.split_at(n_train);
    Ok((dataset.select(train), dataset.select(validation)))
}

pub fn shuffle(dataset: &Dataset, rng: &mut SgmRng) -> Dataset {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);
    dataset.select(&order)
}

/// `n` samples drawn without replacement, in random order.
pub fn subsample(dataset: &Dataset, n: usize, rng: &mut SgmRng) -> Result<Dataset, DataError> {
    let m = dataset.len();
    if n > m {
        return Err(DataError::SubsampleTooLarge { requested: n, available: m });
    }
    if n == 0 {
        return Err(DataError::InvalidArgument("subsample size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let (chosen, _) = order.partial_shuffle(rng, n);
    Ok(dataset.select(chosen))
}

/// Maps a two-class labelling onto -1/+1: the smaller label becomes -1. Datasets already
/// labelled -1/+1 (or with a single class among them) pass through unchanged.
pub fn binarize_labels(dataset: &Dataset) -> Result<Dataset, DataError> {
    let hist = dataset.label_histogram();
    if hist.iter().all(|(l, _)| *l == 1.0 || *l == -1.0) {
        return Ok(dataset.clone());
    }
    if hist.len() != 2 {
        return Err(DataError::InvalidArgument(format!("expected two classes, found {}", hist.len())));
    }
    let low = hist[0].0;
    let samples = dataset
        .samples()
        .iter()
        .map(|s| Sample::new(if s.label == low { -1.0 } else { 1.0 }, s.features.clone()))
        .collect();
    Dataset::new(samples, dataset.dim())
}

/// Per-feature affine map onto `[0, 1]`, fitted on one dataset and applied to others.
///
/// Implicit zeros count toward each feature's range. Constant features map to 0.
/// Nothing in the crate applies this implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(dataset: &Dataset) -> Self {
        let dim = dataset.dim();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        let mut stored = vec![0usize; dim];
        for s in dataset.samples() {
            for (i, v) in s.features.iter() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
                stored[i] += 1;
            }
        }
        for i in 0..dim {
            if stored[i] < dataset.len() {
                min[i] = min[i].min(0.0);
                max[i] = max[i].max(0.0);
            }
        }
        Self { min, max }
    }

    pub fn transform(&self, dataset: &Dataset) -> Dataset {
        let dim = self.min.len().max(dataset.dim());
        let samples = dataset
            .samples()
            .iter()
            .map(|s| {
                let dense = s.features.to_dense(dim);
                let scaled: Vec<f64> = dense
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| match (self.min.get(i), self.max.get(i)) {
                        (Some(&lo), Some(&hi)) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
                        (Some(_), Some(_)) => 0.0,
                        _ => v,
                    })
                    .collect();
                Sample::new(s.label, SparseVector::from_dense(&scaled))
            })
            .collect();
        Dataset::new(samples, dim).expect("scaled samples stay within the fitted dimension")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn numbered(m: usize) -> Dataset {
        Dataset::from_samples(
            (0..m)
                .map(|i| Sample::new(if i % 2 == 0 { 1.0 } else { -1.0 }, SparseVector::from_dense(&[i as f64 + 1.0])))
                .collect(),
        )
    }

    fn ids(d: &Dataset) -> Vec<usize> {
        d.samples().iter().map(|s| s.features.get(0) as usize - 1).collect()
    }

    #[test]
    fn binarize() {
        let d = Dataset::from_samples(vec![
            Sample::new(4.0, SparseVector::from_dense(&[1.0])),
            Sample::new(2.0, SparseVector::from_dense(&[2.0])),
        ]);
        let b = binarize_labels(&d).unwrap();
        assert_eq!(b.labels().collect::<Vec<_>>(), vec![1.0, -1.0]);
        assert_eq!(binarize_labels(&b).unwrap(), b);
        let three = d.concat(&Dataset::from_samples(vec![Sample::new(7.0, SparseVector::from_dense(&[1.0]))]));
        assert!(binarize_labels(&three).is_err());
    }

    #[test]
    fn split_sizes() {
        let mut rng = rng_from_seed(3);
        let (tr, va) = split_holdout(&numbered(10), 0.8, &mut rng).unwrap();
        assert_eq!((tr.len(), va.len()), (8, 2));
        let (tr, va) = split_holdout(&numbered(569), 0.8, &mut rng).unwrap();
        assert_eq!((tr.len(), va.len()), (455, 114));
    }

    #[test]
    fn split_is_a_partition() {
        let mut rng = rng_from_seed(11);
        let (tr, va) = split_holdout(&numbered(37), 0.7, &mut rng).unwrap();
        let mut all: Vec<usize> = ids(&tr).into_iter().chain(ids(&va)).collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_split_rejected() {
        let mut rng = rng_from_seed(0);
        assert!(matches!(
            split_holdout(&numbered(2), 0.999, &mut rng),
            Err(DataError::DegenerateSplit { .. })
        ));
        assert!(matches!(split_holdout(&numbered(1), 0.5, &mut rng), Err(DataError::DegenerateSplit { .. })));
        assert!(matches!(split_holdout(&numbered(10), 1.0, &mut rng), Err(DataError::InvalidFraction(_))));
    }

    #[test]
    fn shuffle_is_deterministic_permutation() {
        let d = numbered(100);
        let a = shuffle(&d, &mut rng_from_seed(5));
        let b = shuffle(&d, &mut rng_from_seed(5));
        assert_eq!(a, b);
        let mut got = ids(&a);
        got.sort_unstable();
        assert_eq!(got, (0..100).collect::<Vec<_>>());
        assert_eq!(shuffle(&numbered(1), &mut rng_from_seed(9)), numbered(1));
    }

    #[test]
    fn subsample_without_replacement() {
        let d = numbered(50);
        let mut rng = rng_from_seed(8);
        let s = subsample(&d, 20, &mut rng).unwrap();
        let mut got = ids(&s);
        got.sort_unstable();
        got.dedup();
        assert_eq!(got.len(), 20);
        assert_eq!(subsample(&d, 1, &mut rng).unwrap().len(), 1);
        let full = subsample(&d, 50, &mut rng).unwrap();
        let mut all = ids(&full);
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert!(matches!(subsample(&d, 51, &mut rng), Err(DataError::SubsampleTooLarge { .. })));
    }

    #[test]
    fn scaler_maps_to_unit_interval() {
        let d = Dataset::from_samples(vec![
            Sample::new(1.0, SparseVector::from_dense(&[2.0, 5.0])),
            Sample::new(-1.0, SparseVector::from_dense(&[4.0, 0.0])),
        ]);
        let scaled = MinMaxScaler::fit(&d).transform(&d);
        assert_eq!(scaled.samples()[0].features.to_dense(2), vec![0.0, 1.0]);
        assert_eq!(scaled.samples()[1].features.to_dense(2), vec![1.0, 0.0]);
    }
}
