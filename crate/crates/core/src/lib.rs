//! Spectral min-max solver for a Dirac operator coupled to a Coulomb self-interaction
//! on a periodic box, plus numerical checks of the supporting inequalities.

// Negated comparisons are used so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coulomb;
pub mod dirac;
pub mod energy;
pub mod error;
pub mod grid;
pub mod solver;
pub mod trial;
pub mod verify;

pub use coulomb::CoulombKernel;
pub use dirac::{DiracMultipliers, Sign};
pub use energy::{EnergyBreakdown, EnergyModel, Evaluation, InnerCriticalAudit, SplitState};
pub use error::{Error, Result};
pub use grid::{build_grid, Direction, FourierGrid, ScalarField, Space, SpinorField};
pub use solver::{inner_maximize, initial_w, outer_minimize, sweep_e, SolveReport, SolverConfig};
pub use verify::{check_appendix_lemma, check_coulomb_positivity, check_kato, check_solution_bounds, IneqResult};
