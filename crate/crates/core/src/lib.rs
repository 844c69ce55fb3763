//! American put pricing under the Heston stochastic-volatility model.
//!
//! Two independent pricing routes are provided: a penalized finite-difference
//! solver on log-price/variance coordinates ([`pde`]) and Monte Carlo with
//! least-squares regression ([`mc`]). On top of them, [`boundary`] extracts
//! the early-exercise boundary and [`analysis`] measures the structural
//! properties of the price function (monotonicity, convexity, smooth fit,
//! put-call symmetry, the early-exercise premium identity).

pub mod analysis;
pub mod boundary;
pub mod error;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod pde;

pub use error::{Error, Result};
pub use model::{
    feller_satisfied, generator_coeffs, payoff_put, symmetry_dual, DualData, GeneratorCoeffs,
    HestonParams, ParameterSet, PutSpec,
};
pub use analysis::{run_suite, ReportEntry, Status, SuiteConfig, VerificationReport};
pub use boundary::{extract_boundary, ExerciseBoundary};
pub use mc::{european_mc_price, lsmc_price, McConfig, McEstimate};
pub use pde::{
    solve_american, solve_european, GridSpec, PenaltyFamily, PriceSurface, SolverOptions,
    SurfaceKind,
};
