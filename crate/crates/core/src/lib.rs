//! Numerical design of BCLM experiments bounding how epistemic an
//! ontological model of quantum theory can be.
//!
//! The search minimizes the certifiable bound `k₀ ≤ A/B` over mixed states
//! and three-outcome POVMs by alternating convex search: measurements are
//! optimized by per-pair SDPs, states by Dinkelbach iterations on a
//! convex-concave fractional program.

pub mod acs;
pub mod analysis;
pub mod dinkelbach;
pub mod error;
pub mod matcore;
pub mod quantum;
pub mod sdp;
pub mod subsolvers;

pub use acs::{acs_solve, warm_solve, SolveConfig, SolveResult};
pub use error::{Error, Result};
pub use quantum::{evaluate, DensityMatrix, Ensemble, ObjectiveBreakdown, PovmTriple};
