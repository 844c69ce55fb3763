//! Finite-difference pricing on the degenerate `(t, x, y)` domain.

pub mod lattice;
pub mod operator;
pub mod penalty;
pub mod solver;
pub mod sparse;
pub mod surface;

pub use lattice::{build_lattice, GridSpec, Lattice, LatticeConfig, YGrading};
pub use operator::{assemble_operator, DiscreteGenerator, RowKind};
pub use penalty::{apply_penalty, PenaltyFamily};
pub use solver::{solve_american, solve_european, SolverOptions};
pub use surface::{PriceSurface, SolverDiagnostics, SurfaceKind, TimeScheme};
