//! Multiple-pass stochastic gradient method (SGM) for kernel classifiers.
//!
//! The crate trains `w_{t+1} = w_t - eta_t V'_-(y_j, <w_t, Phi(x_j)>) Phi(x_j)` in kernel
//! coefficient form, where regularization comes only from the step-size schedule and the
//! number of passes. Around the training loop it provides:
//!
//! - [`data`]: LIBSVM sparse datasets, splits, shuffles and synthetic generators;
//! - [`kernels`]: Gaussian, linear and precomputed kernels plus a Gram row cache;
//! - [`losses`]: hinge and logistic losses with their left derivatives and constants;
//! - [`sgm`]: the training loop, last and weighted-average iterates, traces;
//! - [`schedules`]: polynomial step sizes, stopping-rule presets and a consistency checker;
//! - [`model_selection`]: hold-out step-size search and early stopping;
//! - [`bounds`]: explicit finite-sample excess-risk bounds and summation estimates;
//! - [`experiments`]: repeated-run protocols (pass sweeps, step sweeps, comparison table).

pub mod bounds;
pub mod data;
pub mod experiments;
pub mod kernels;
pub mod losses;
pub mod model_selection;
pub mod parallel;
pub mod rng;
pub mod schedules;
pub mod sgm;
pub mod stats;

pub use data::{Dataset, Sample, SparseVector};
pub use kernels::{GramCache, Kernel};
pub use losses::{Label, Loss};
pub use schedules::StepSchedule;
pub use sgm::{AveragedModel, KernelModel, SgmRunConfig, TraceRecord, TrainOutput};
