//! Randomized Kaczmarz solvers for overdetermined linear systems with
//! sparse adversarial corruptions.
//!
//! The crate bundles four row-action solvers (plain RK, QuantileRK, its
//! sub-sampled variant, and a constant-sample-size variant), synthetic
//! corrupted-system generation, and the convergence-rate machinery needed to
//! evaluate and verify the solvers' linear-rate guarantees.
//!
//! Modules:
//! - [`linalg`]: dense primitives, row sampling, singular-value estimation.
//! - [`quantile`]: order-statistic quantiles and threshold sets.
//! - [`problem`]: corrupted-system generation and serialization.
//! - [`solvers`]: the iteration rules with per-iteration tracing.
//! - [`theory`]: rate constants, hypothesis checks, sigma estimators.
//! - [`oracle`]: reference SVD used to validate the estimators in tests.

pub mod error;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod quantile;
pub mod rng;
pub mod solvers;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, IndexSet, RowNormalizedMatrix};
pub use problem::{CorruptedSystem, GenSpec, XStarPolicy};
pub use quantile::{QuantileSpec, ThresholdMode};
pub use rng::SeedRng;
pub use solvers::{IterateTrace, SolverConfig, Variant, X0Policy};
pub use theory::{RateParams, RateReport};
