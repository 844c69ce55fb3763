//! Monte Carlo for the Heston system and its smoothed approximations.
//!
//! Every path owns a ChaCha8 stream selected by its stream id under a
//! master seed, and each Euler step draws the variance normal first and
//! the independent asset normal second. Batches, estimators and their
//! reductions are therefore identical for any thread count.

pub mod lsmc;
pub mod paths;
pub mod smoothing;

pub use lsmc::{
    append_results_log, european_estimate, european_mc_price, lsmc_estimate, lsmc_price,
    McConfig, McEstimate, McRecord, Payoff,
};
pub use paths::{
    simulate_cir, simulate_heston, simulate_smoothed, uniform_times, PathBatch, PathScheme,
    SimulationSpec,
};
pub use smoothing::SmoothingFamily;
