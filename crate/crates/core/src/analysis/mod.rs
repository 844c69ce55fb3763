//! Verification of the theoretical properties of the American put price and
//! its exercise boundary against computed surfaces and simulations.
//!
//! Each check returns a [`ReportEntry`] carrying the measured quantity, its
//! threshold and the inputs it was computed from. Thresholds are relative
//! to the strike.

pub mod checks;
pub mod crosscheck;
pub mod eep;
pub mod refinement;
pub mod report;
pub mod suite;

pub use checks::*;
pub use crosscheck::{
    check_smoothed_convergence, check_symmetry, SmoothedConvergence, SymmetryComparison,
    SMOOTHING_INDICES,
};
pub use eep::{boundary_at_maturity, check_eep, eep_premium, PremiumEstimate};
pub use refinement::{refinement_study, RefinementRow, RefinementTable};
pub use report::{ReportEntry, Status, VerificationReport};
pub use suite::{run_suite, SuiteConfig, ENTRY_ORDER};
