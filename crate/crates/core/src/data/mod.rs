//! Labeled sparse datasets.
//!
//! Feature indices are 1-based on disk and 0-based in memory. Stored entries are always
//! nonzero and strictly increasing in index, so two equal datasets have equal
//! representations and parse/serialize round trips are exact.

mod libsvm;
mod ops;
mod synthetic;

pub use libsvm::{format_real, parse_libsvm, parse_libsvm_str, read_libsvm_file, serialize_libsvm, write_libsvm};
pub use ops::{binarize_labels, shuffle, split_holdout, subsample, MinMaxScaler};
pub use synthetic::{make_logistic_model, make_synthetic, sigmoid};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("degenerate split: {train} training and {validation} validation samples")]
    DegenerateSplit { train: usize, validation: usize },
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("cannot draw {requested} samples from a dataset of {available}")]
    SubsampleTooLarge { requested: usize, available: usize },
    #[error("feature index {index} exceeds dataset dimension {dim}")]
    FeatureOutOfRange { index: usize, dim: usize },
    #[error("invalid sparse vector: {0}")]
    InvalidSparse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    InvalidLabel(String),
    MissingColon(String),
    InvalidIndex(String),
    NonPositiveIndex(String),
    NonIncreasingIndex { previous: u64, index: u64 },
    InvalidValue(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidLabel(tok) => write!(f, "invalid label {tok:?}"),
            Self::MissingColon(tok) => write!(f, "expected index:value, got {tok:?}"),
            Self::InvalidIndex(tok) => write!(f, "invalid feature index {tok:?}"),
            Self::NonPositiveIndex(tok) => write!(f, "feature index must be positive, got {tok:?}"),
            Self::NonIncreasingIndex { previous, index } => {
                write!(f, "non-increasing feature index {index} after {previous}")
            }
            Self::InvalidValue(tok) => write!(f, "invalid feature value {tok:?}"),
        }
    }
}

/// Sparse real vector with 0-based, strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
    sq_norm: f64,
}

impl SparseVector {
    /// Builds a vector from parallel index/value arrays. Zero values are dropped.
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self, DataError> {
        if indices.len() != values.len() {
            return Err(DataError::InvalidSparse(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(DataError::InvalidSparse(format!(
                "indices not strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(DataError::InvalidSparse(format!("non-finite value {v}")));
        }
        Ok(Self::from_sorted_unchecked(indices, values))
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let (indices, values): (Vec<u32>, Vec<f64>) = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        Self::from_sorted_unchecked(indices, values)
    }

    /// Caller guarantees strictly increasing indices and finite values.
    pub(crate) fn from_sorted_unchecked(mut indices: Vec<u32>, mut values: Vec<f64>) -> Self {
        if values.contains(&0.0) {
            let mut keep = 0;
            for i in 0..values.len() {
                if values[i] != 0.0 {
                    indices[keep] = indices[i];
                    values[keep] = values[i];
                    keep += 1;
                }
            }
            indices.truncate(keep);
            values.truncate(keep);
        }
        let sq_norm = values.iter().map(|v| v * v).sum();
        Self { indices, values, sq_norm }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    /// Squared Euclidean norm, summed in index order.
    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    pub fn norm(&self) -> f64 {
        self.sq_norm.sqrt()
    }

    /// Dimension needed to hold this vector (largest index + 1), 0 if empty.
    pub fn required_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    /// Inner product by a single merge pass. Products are accumulated in increasing index
    /// order, so `a.dot(b)` and `b.dot(a)` are bit-identical and `a.dot(a) == a.sq_norm()`.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (ai, av) = (&self.indices, &self.values);
        let (bi, bv) = (&other.indices, &other.values);
        let (mut p, mut q) = (0, 0);
        let mut acc = 0.0;
        while p < ai.len() && q < bi.len() {
            match ai[p].cmp(&bi[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    acc += av[p] * bv[q];
                    p += 1;
                    q += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense.get(i).copied().unwrap_or(0.0)).sum()
    }

    /// `||a - b||^2` as `||a||^2 + ||b||^2 - 2<a, b>`, clamped at zero.
    pub fn sq_distance(&self, other: &SparseVector) -> f64 {
        let d = (self.sq_norm + other.sq_norm) - 2.0 * self.dot(other);
        d.max(0.0)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim.max(self.required_dim())];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: f64,
    pub features: SparseVector,
}

impl Sample {
    pub fn new(label: f64, features: SparseVector) -> Self {
        Self { label, features }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
}

impl Dataset {
    /// Dataset with an explicit dimension; every sample must fit inside it.
    pub fn new(samples: Vec<Sample>, dim: usize) -> Result<Self, DataError> {
        for s in &samples {
            let need = s.features.required_dim();
            if need > dim {
                return Err(DataError::FeatureOutOfRange { index: need, dim });
            }
        }
        Ok(Self { samples, dim })
    }

    /// Dataset whose dimension is the largest feature index present.
    pub fn from_samples(samples: Vec<Sample>) -> Self {
        let dim = samples.iter().map(|s| s.features.required_dim()).max().unwrap_or(0);
        Self { samples, dim }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> Option<&Sample> {
        self.samples.get(i)
    }

    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.label)
    }

    /// Distinct labels with their counts, sorted by label.
    pub fn label_histogram(&self) -> Vec<(f64, usize)> {
        let mut labels: Vec<f64> = self.labels().collect();
        labels.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, usize)> = Vec::new();
        for l in labels {
            match out.last_mut() {
                Some((last, n)) if *last == l => *n += 1,
                _ => out.push((l, 1)),
            }
        }
        out
    }

    /// New dataset holding the given sample slots, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            dim: self.dim,
        }
    }

    /// Appends the samples of `other`, widening the dimension if needed.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Dataset { samples, dim: self.dim.max(other.dim) }
    }
}
