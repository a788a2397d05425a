//! Simulation and inference for the empirical correlation of two
//! correlated Ornstein-Uhlenbeck paths (Yule's nonsense correlation).
//!
//! The crate is split along the pipeline:
//!
//! * [`sde`] exact simulation of single and correlated OU paths, and of the
//!   Fourier-mode ensemble of the stochastic heat equation on the circle;
//! * [`estimators`] path functionals `Y_ij(T)`, the correlation `rho(T)` and
//!   the drift estimator;
//! * [`hypothesis`] independence tests, confidence intervals and type-II
//!   error bounds;
//! * [`theory`] closed-form constants (variances, cumulants, kernel norms);
//! * [`mc`] the parallel, deterministic Monte Carlo harness.

pub mod error;
pub mod estimators;
pub mod hypothesis;
pub mod mc;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod theory;

pub use error::{Result, YuleError};
pub use estimators::{ThetaHatSource, YuleStatistics};
pub use hypothesis::{ConfidenceInterval, MultiModeOutcome, TestOutcome, TestVariant, ThetaMode};
pub use sde::{CorrelatedPairConfig, DtPolicy, OuPair, SamplePath, SpdeModeEnsemble};
