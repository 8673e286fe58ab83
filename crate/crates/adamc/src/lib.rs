//! Adaptive Monte Carlo integration.
//!
//! Importance sampling from an exponential family makes the estimator's
//! per-sample variance a convex function of the natural parameter. This
//! crate exploits that: each iteration draws one sample from the current
//! member of the family, adds its unbiased reweighted contribution to the
//! running estimate, and moves the parameter by a projected stochastic
//! gradient step on the variance. The sampling distribution improves while
//! the estimate accumulates, and the per-sample variance approaches the best
//! achievable over the family.
//!
//! The crate ships two families (mean-shifted Gaussians and Gaussians in
//! natural `(m, S)` coordinates), three reference problems (polygon area
//! under a uniform nominal, an arithmetic Asian call option, and a
//! constant-integrand problem with closed forms), a quadrature oracle for
//! ground truth at low dimension, and the projections needed for feasible
//! sets built from coordinate boxes and eigenvalue bounds.
//!
//! Core numerics are generic over the scalar type via the [`Real`] trait;
//! `*64` aliases fix the common `f64` instantiation.
//!
//! ```
//! use adamc::engine::{run, AdamcConfig};
//! use adamc::problems::PolytopeProblem;
//!
//! let problem = PolytopeProblem::<f64>::default();
//! let family = problem.recommended_family();
//! let set = problem.default_feasible_set();
//! let config = AdamcConfig {
//!     step_scale: 0.5,
//!     theta1: problem.default_initial_parameter(),
//!     n_iters: 20_000,
//!     seed: 1,
//!     snapshot_every: 5_000,
//! };
//! let report = run(&problem, &family, &set, &config).unwrap();
//! assert!((report.estimate - 0.16).abs() < 6.0 * report.std_error);
//! ```

pub mod engine;
pub mod error;
pub mod exp_family;
pub mod linalg;
pub mod oracle;
pub mod param;
pub mod problems;
pub mod projection;
pub mod real;

pub use error::{Error, Result};
pub use real::Real;

/// Double-precision aliases for the main types.
pub type NaturalParameter64 = param::NaturalParameter<f64>;
pub type ParamShape64 = param::ParamShape;
pub type FeasibleSet64 = projection::FeasibleSet<f64>;
pub type AdamcConfig64 = engine::AdamcConfig<f64>;
pub type RunReport64 = engine::RunReport<f64>;
pub type QuadratureGrid64 = oracle::QuadratureGrid<f64>;
pub type PolytopeProblem64 = problems::PolytopeProblem<f64>;
pub type AsianOption64 = problems::AsianOption<f64>;
pub type AsianParams64 = problems::AsianParams<f64>;
