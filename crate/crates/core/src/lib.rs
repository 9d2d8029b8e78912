//! One-dimensional linearized quasicontinuum models on a periodic chain.
//!
//! The crate assembles the fully atomistic (next-nearest-neighbour) operator,
//! the three-point continuum operator, and the energy-based (QCE) and
//! quasi-nonlocal (QNL) coupled operators, solves the singular periodic
//! equilibrium systems on the mean-zero subspace, and measures interface
//! residuals, explicit interface errors and convergence rates against the
//! closed-form continuum solution.
//!
//! ```
//! use quasicontinuum::prelude::*;
//!
//! let lattice = LatticeConfig::new(64, 16, 1.0).unwrap();
//! let coeffs = linearize(&PotentialSpec::LennardJones, lattice.f).unwrap();
//! let load = LoadSpec::sine(1, 1.0);
//! let report = solve_model(Model::Qnl, &lattice, &coeffs, &load).unwrap();
//! assert!(report.residual_norm < 1e-8);
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod lattice;
pub mod load;
pub mod operators;
pub mod potential;
pub mod solver;

pub use error::{QcError, Result};

pub mod prelude {
    pub use crate::analysis::{
        convergence_sweep, error_report, explicit_interface_error, residual_split,
        stability_probe, ConvergenceReport, ErrorReport, InterfaceSolution, KRule,
        ResidualSplit,
    };
    pub use crate::error::{QcError, Result};
    pub use crate::lattice::{
        apply_involution, backward_difference, norm_lp, project_mean_zero, LatticeConfig,
        NormKind, Parity, PeriodicField,
    };
    pub use crate::load::{exact_solution, sample_load, ExactSolution, LoadSpec};
    pub use crate::operators::{assemble, energy, ghost_vector, GhostVector, Model, PeriodicOperator};
    pub use crate::potential::{
        check_assumptions, decay_root, linearize, LinearizedCoeffs, PotentialSpec,
    };
    pub use crate::solver::{solve_mean_zero, solve_model, SolveReport};
}
