//! Residual splitting, closed-form interface errors, error norms,
//! convergence sweeps and coercivity probes.

mod convergence;
mod interface;
mod report;
mod residual;
mod stability;

pub use convergence::{
    convergence_sweep, fit_rate, ConvergenceReport, KRule, RateFit, SweepRow, METRICS,
};
pub use interface::{
    explicit_interface_error, gamma, interface_error_from_split, reduced_matrix, reduced_system,
    InterfaceSolution, QnlSourceColumn, ReducedSystem, CONDITION_LIMIT,
};
pub use report::{error_report, ErrorComponents, ErrorReport, NormSet};
pub use residual::{
    delta_rho_closed_form, interface_residual_table, interface_rows, residual_split, ResidualSplit,
};
pub use stability::{
    energy_ratio, solve_bound_probe, stability_probe, stability_probe_seeded, SolveBoundReport,
    StabilityReport, DEFAULT_SEED,
};
