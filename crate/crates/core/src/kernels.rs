//! Kernels `K(x, x')`, the feature-map bound `kappa = sup_x sqrt(K(x, x))`, and a Gram row
//! cache for the training loop.
//!
//! The Gaussian kernel uses the width convention `exp(-||x - x'||^2 / (2 sigma^2))`.
//! Squared distances are computed as `||x||^2 + ||x'||^2 - 2<x, x'>` with the norms cached
//! on each vector, which keeps every evaluation exactly symmetric in its arguments.
//!
//! A precomputed kernel is a symmetric table. Points refer to it through their first
//! feature, which holds a 1-based row number (`label 1:<row>` on disk).

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::data::{Dataset, SparseVector};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("gaussian width must be positive and finite, got {0}")]
    InvalidWidth(f64),
    #[error("point refers to row {id} of a precomputed table with {size} rows")]
    OutOfTable { id: f64, size: usize },
    #[error("precomputed matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("precomputed matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("precomputed matrix line {line}: invalid entry {token:?}")]
    Parse { line: usize, token: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("row index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown kernel {0:?} (expected gaussian:<sigma>, linear or precomputed)")]
    UnknownKernel(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense symmetric kernel table.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl PrecomputedMatrix {
    /// Validates squareness and symmetry (relative tolerance 1e-12), then stores the
    /// exactly symmetrized table.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, KernelError> {
        let n = rows.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(KernelError::NotSquare { row: r, len: row.len(), expected: n });
            }
        }
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                let scale = a.abs().max(b.abs());
                if (a - b).abs() > 1e-12 * scale {
                    return Err(KernelError::NotSymmetric { i, j, a, b });
                }
                let v = if a == b { a } else { 0.5 * (a + b) };
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Ok(Self { n, entries })
    }

    /// Whitespace-separated rows, one per line; blank lines and `#` comments skipped.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, KernelError> {
        let mut rows = Vec::new();
        for (no, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let row = content
                .split_ascii_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| KernelError::Parse { line: no + 1, token: tok.to_owned() })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KernelError> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// 0-based table row a point refers to.
    pub fn row_of(&self, x: &SparseVector) -> Result<usize, KernelError> {
        let id = x.get(0);
        if id.fract() == 0.0 && id >= 1.0 && id <= self.n as f64 {
            Ok(id as usize - 1)
        } else {
            Err(KernelError::OutOfTable { id, size: self.n })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Gaussian { sigma: f64 },
    Linear,
    Precomputed(Arc<PrecomputedMatrix>),
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self, KernelError> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Kernel::Gaussian { sigma })
        } else {
            Err(KernelError::InvalidWidth(sigma))
        }
    }

    pub fn precomputed(matrix: PrecomputedMatrix) -> Self {
        Kernel::Precomputed(Arc::new(matrix))
    }

    /// Parses `gaussian:<sigma>` or `linear`. Precomputed kernels are built from a
    /// loaded [`PrecomputedMatrix`] instead.
    pub fn parse_spec(spec: &str) -> Result<Self, KernelError> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("linear") {
            return Ok(Kernel::Linear);
        }
        if let Some(width) = spec.strip_prefix("gaussian:") {
            let sigma = width
                .trim()
                .parse::<f64>()
                .map_err(|_| KernelError::UnknownKernel(spec.to_owned()))?;
            return Kernel::gaussian(sigma);
        }
        Err(KernelError::UnknownKernel(spec.to_owned()))
    }

    pub fn eval(&self, x: &SparseVector, y: &SparseVector) -> Result<f64, KernelError> {
        match self {
            Kernel::Precomputed(table) => Ok(table.get(table.row_of(x)?, table.row_of(y)?)),
            _ => Ok(self.eval_vectors(x, y)),
        }
    }

    /// Evaluation for the vector kernels. Panics on a precomputed kernel.
    #[inline]
    fn eval_vectors(&self, x: &SparseVector, y: &SparseVector) -> f64 {
        match self {
            Kernel::Gaussian { sigma } => (-x.sq_distance(y) / (2.0 * sigma * sigma)).exp(),
            Kernel::Linear => x.dot(y),
            Kernel::Precomputed(_) => unreachable!("precomputed kernels are evaluated by table row"),
        }
    }

    /// `kappa = sup sqrt(K(x, x))`: 1 for the Gaussian kernel, the largest norm in `dataset`
    /// for the linear kernel (an empirical stand-in for the supremum over the input space),
    /// and the largest diagonal entry of a precomputed table.
    pub fn kappa(&self, dataset: &Dataset) -> Result<f64, KernelError> {
        match self {
            Kernel::Gaussian { .. } => Ok(1.0),
            Kernel::Linear => {
                if dataset.is_empty() {
                    return Err(KernelError::EmptyDataset);
                }
                Ok(dataset.samples().iter().map(|s| s.features.norm()).fold(0.0, f64::max))
            }
            Kernel::Precomputed(table) => {
                Ok((0..table.size()).map(|i| table.get(i, i)).fold(0.0, f64::max).max(0.0).sqrt())
            }
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            Kernel::Linear => f.write_str("linear"),
            Kernel::Precomputed(t) => write!(f, "precomputed:{}", t.size()),
        }
    }
}

/// Kernel evaluations among a fixed set of training points, addressed by index.
#[derive(Debug, Clone)]
pub struct KernelPoints {
    kernel: Kernel,
    points: Arc<Dataset>,
    table_rows: Option<Vec<usize>>,
}

impl KernelPoints {
    pub fn new(kernel: Kernel, points: Arc<Dataset>) -> Result<Self, KernelError> {
        let table_rows = match &kernel {
            Kernel::Precomputed(table) => Some(
                points
                    .samples()
                    .iter()
                    .map(|s| table.row_of(&s.features))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => None,
        };
        Ok(Self { kernel, points, table_rows })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn points(&self) -> &Arc<Dataset> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn between(&self, i: usize, j: usize) -> f64 {
        match (&self.kernel, &self.table_rows) {
            (Kernel::Precomputed(table), Some(rows)) => table.get(rows[i], rows[j]),
            _ => {
                let s = self.points.samples();
                self.kernel.eval_vectors(&s[i].features, &s[j].features)
            }
        }
    }

    /// `K(x_i, x)` for a training point `i` and an arbitrary point `x`.
    pub fn against(&self, i: usize, x: &SparseVector) -> Result<f64, KernelError> {
        match (&self.kernel, &self.table_rows) {
            (Kernel::Precomputed(table), Some(rows)) => Ok(table.get(rows[i], table.row_of(x)?)),
            _ => Ok(self.kernel.eval_vectors(&self.points.samples()[i].features, x)),
        }
    }

    pub fn fill_row(&self, i: usize, row: &mut [f64]) {
        for (j, r) in row.iter_mut().enumerate() {
            *r = self.between(i, j);
        }
    }
}

struct CachedRow {
    values: Vec<f64>,
    last_used: u64,
}

/// Gram rows `r[j] = K(x_i, x_j)` keyed by `i`, with least-recently-used eviction.
/// Cached values are exactly the values [`KernelPoints::between`] returns.
pub struct GramCache {
    points: KernelPoints,
    capacity: usize,
    rows: HashMap<usize, CachedRow>,
    clock: u64,
    hits: u64,
    misses: u64,
}

impl GramCache {
    pub const DEFAULT_MAX_ROWS: usize = 4096;

    /// Cache holding up to `min(m, 4096)` rows.
    pub fn new(points: KernelPoints) -> Self {
        let capacity = points.len().min(Self::DEFAULT_MAX_ROWS);
        Self::with_capacity(points, capacity)
    }

    pub fn with_capacity(points: KernelPoints, capacity: usize) -> Self {
        Self {
            points,
            capacity: capacity.max(1),
            rows: HashMap::new(),
            clock: 0,
            hits: 0,
            misses: 0,
        }
    }

    pub fn points(&self) -> &KernelPoints {
        &self.points
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn cached_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_cached(&self, i: usize) -> bool {
        self.rows.contains_key(&i)
    }

    /// (hits, misses)
    pub fn stats(&self) -> (u64, u64) {
        (self.hits, self.misses)
    }

    pub fn row(&mut self, i: usize) -> Result<&[f64], KernelError> {
        let m = self.points.len();
        if i >= m {
            return Err(KernelError::IndexOutOfRange { index: i, len: m });
        }
        self.clock += 1;
        let now = self.clock;
        if self.rows.contains_key(&i) {
            self.hits += 1;
        } else {
            self.misses += 1;
            let mut values = if self.rows.len() >= self.capacity {
                let victim = self
                    .rows
                    .iter()
                    .min_by_key(|(_, r)| r.last_used)
                    .map(|(k, _)| *k)
                    .expect("full cache has a victim");
                self.rows.remove(&victim).map(|r| r.values).unwrap_or_default()
            } else {
                Vec::new()
            };
            values.resize(m, 0.0);
            self.points.fill_row(i, &mut values);
            self.rows.insert(i, CachedRow { values, last_used: now });
        }
        let entry = self.rows.get_mut(&i).expect("row present");
        entry.last_used = now;
        Ok(&entry.values)
    }
}
