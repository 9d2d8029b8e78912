use crate::error::Result;
use crate::lattice::{backward_difference, norm_lp, project_mean_zero, LatticeConfig, NormKind, PeriodicField};
use crate::load::{exact_solution, sample_load, LoadSpec};
use crate::operators::{assemble, Model};
use crate::potential::LinearizedCoeffs;
use crate::solver::{solve_factored, solve_operator, MeanZeroFactor};

use super::residual::residual_split;

/// `||e||_inf` and `||D e||_{l^p}` for `p = 1, 2, inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSet {
    pub e_linf: f64,
    pub de_l1: f64,
    pub de_l2: f64,
    pub de_linf: f64,
}

impl NormSet {
    pub fn of(e: &PeriodicField, lattice: &LatticeConfig) -> Result<NormSet> {
        let de = backward_difference(e, lattice)?;
        Ok(NormSet {
            e_linf: e.max_abs(),
            de_l1: norm_lp(&de, NormKind::L1, lattice.h)?,
            de_l2: norm_lp(&de, NormKind::L2, lattice.h)?,
            de_linf: de.max_abs(),
        })
    }

    pub fn de_lp(&self, p: NormKind) -> Option<f64> {
        match p {
            NormKind::Max => Some(self.de_linf),
            NormKind::Lp(q) if q == 1.0 => Some(self.de_l1),
            NormKind::Lp(q) if q == 2.0 => Some(self.de_l2),
            NormKind::Lp(_) => None,
        }
    }

    pub fn nan() -> NormSet {
        NormSet {
            e_linf: f64::NAN,
            de_l1: f64::NAN,
            de_l2: f64::NAN,
            de_linf: f64::NAN,
        }
    }
}

/// Coupling and bulk parts of the error, `e = e_rho + e_sigma`.
#[derive(Debug, Clone)]
pub struct ErrorComponents {
    pub e_rho: PeriodicField,
    pub e_sigma: PeriodicField,
    pub rho_norms: NormSet,
    pub sigma_norms: NormSet,
}

#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub error: PeriodicField,
    pub norms: NormSet,
    pub components: Option<ErrorComponents>,
}

impl ErrorReport {
    /// Error `reference - approx`, both projected to mean zero.
    pub fn from_fields(
        reference: &PeriodicField,
        approx: &PeriodicField,
        lattice: &LatticeConfig,
    ) -> Result<ErrorReport> {
        let e = project_mean_zero(reference).axpy(-1.0, &project_mean_zero(approx))?;
        Ok(ErrorReport {
            norms: NormSet::of(&e, lattice)?,
            error: e,
            components: None,
        })
    }

    pub fn e_linf(&self) -> f64 {
        self.norms.e_linf
    }

    pub fn de_lp(&self, p: NormKind) -> Option<f64> {
        self.norms.de_lp(p)
    }
}

/// Error of `model` against the exact continuum solution. Coupled models also
/// get the split `L e_rho = rho`, `L e_sigma = sigma`.
pub fn error_report(
    model: Model,
    lattice: &LatticeConfig,
    coeffs: &LinearizedCoeffs,
    load: &LoadSpec,
) -> Result<ErrorReport> {
    let op = assemble(model, lattice, coeffs)?;
    let exact = exact_solution(load, coeffs)?;
    let f = sample_load(load, lattice)?;
    let u = solve_operator(&op, &f)?.solution;
    let mut report = ErrorReport::from_fields(&exact.sample(lattice), &u, lattice)?;
    if model.has_interface() {
        let split = residual_split(&op, &exact, &f)?;
        let factor = MeanZeroFactor::new(&op)?;
        let e_rho = solve_factored(&op, &factor, &split.rho)?.solution;
        let e_sigma = solve_factored(&op, &factor, &split.sigma)?.solution;
        report.components = Some(ErrorComponents {
            rho_norms: NormSet::of(&e_rho, lattice)?,
            sigma_norms: NormSet::of(&e_sigma, lattice)?,
            e_rho,
            e_sigma,
        });
    }
    Ok(report)
}
