//! Identification of linear dynamical systems `X_{t+1} = A X_t + B u_t + eta_t`
//! from a single trajectory by ordinary least squares.
//!
//! Besides the estimator itself the crate packages the quantities that govern
//! its finite-sample behaviour: controllability Gramians, block-length
//! selection, explicit-constant error bounds, minimax lower-bound thresholds,
//! and Monte Carlo verifiers for the small-ball and martingale tail
//! inequalities used to derive them.
//!
//! Modules, bottom-up:
//!
//! * [`numerics`] dense matrices, a Jacobi symmetric eigensolver, the matrix
//!   exponential and a counter-based Gaussian sampler.
//! * [`lds`] systems, simulation, Gramians, block-length selectors.
//! * [`estimator`] OLS fits and the fixed-design error floor.
//! * [`bounds`] upper bounds, sample complexities, lower-bound thresholds.
//! * [`smallball`] empirical and exact checks of the small-ball machinery.
//! * [`packing`] packings of the orthogonal group and trajectory KL divergences.
//! * [`experiments`] the Monte Carlo sweep harness.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod lds;
pub mod numerics;
pub mod packing;
pub mod smallball;

pub use bounds::{BoundReport, Regime, SmallBallCert};
pub use error::{Error, Result};
pub use estimator::{EstimateReport, Regression};
pub use experiments::{SweepConfig, SweepResult, SystemSpec};
pub use lds::{GramianSeries, LinearSystem, Trajectory};
pub use numerics::{Matrix, RngStream, SymEigen};
pub use packing::{BallPacking, PackingSet};
pub use smallball::{BmsbSpec, TailCheckResult};
