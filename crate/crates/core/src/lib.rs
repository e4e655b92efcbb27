//! Penalized linear regression with distributional-robustness guarantees.
//!
//! Estimators minimize `E_Pn[|Y - X'b|^r]^(1/r) + delta * rho(b)`. The crate
//! provides solvers for that family, the explicit worst-case distribution
//! over a max-sliced Wasserstein ball, empirical sliced distances, radius
//! recommendations, an estimator-ranking test, and a simulation harness.

pub mod cli;
pub mod dataset;
pub mod dro;
pub mod error;
pub mod numeric;
pub mod penalty;
pub mod problem;
pub mod ranking;
pub mod rng;
pub mod sims;
pub mod solver;
pub mod svg;
pub mod transport;
pub mod tuning;

pub use dataset::{load_dataset, residual_rnorm, Dataset};
pub use error::{Error, Result};
pub use numeric::BaseNorm;
pub use penalty::{EmbeddingConstant, PenaltySpec, SubgradientCertificate};
pub use problem::{CoefficientVector, RobustProblem};
pub use rng::Rng;
