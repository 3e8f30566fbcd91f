//! Channel characterization for multi-antenna IoT uplinks.
//!
//! The crate computes channel-gain statistics (normalization, hardening),
//! pairwise and joint orthogonality metrics (correlation coefficient,
//! inverse condition number), correlation-matrix eigenstructure and
//! chordal distances between dominant eigenspaces. Every metric runs on
//! measured channel tensors loaded from disk or on seeded synthetic
//! channels, and the [`experiments`] module wraps them into Monte Carlo
//! curves that reproduce the i.i.d. Rayleigh baselines.
//!
//! Module map:
//!
//! - [`tensor`]: complex channel tensors, antenna subsets, time windows
//! - [`linalg`]: small dense complex matrices and a Hermitian Jacobi solver
//! - [`metrics`]: the channel metrics themselves
//! - [`synth`]: seeded channel models and pilot-based estimation
//! - [`ingest`]: array geometry and the on-disk dataset container
//! - [`experiments`]: Monte Carlo harness and curve recipes
//! - [`scheduler`]: eigenspace-based node grouping

pub mod experiments;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod scheduler;
pub mod synth;
pub mod tensor;

pub use num_complex::Complex64;

pub use ingest::{ArrayGeometry, ArrayKind, Dataset, DatasetManifest};
pub use linalg::{CMatrix, EigenSpectrum, HermitianMatrix};
pub use metrics::{GainSeries, NormalizedTensor};
pub use synth::{ChannelModel, ModelKind, RngSeed};
pub use tensor::{ChannelTensor, TimeWindow};
