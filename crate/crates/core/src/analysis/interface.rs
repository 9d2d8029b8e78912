//! Closed-form coupling error `e_rho`, the odd solution of `L e = rho`.
//!
//! On `0..=K` the error is `m1 h j + beta gamma_j` with
//! `gamma_j = (lambda^j - lambda^-j) / lambda^K`; in the continuum it is the
//! affine `m2 (h j - 1)`, and QCE carries one extra perturbation `e_hat` at
//! `K + 1`. Summing the interface rows fixes `m1 - m2 = h delta_rho / c`,
//! which leaves a reduced system in `(m2, e_hat, beta)` (QCE) or `(m2, beta)`
//! (QNL) built from the rows `{K-1, K+1, K+2}` or `{K-1, K}`.

use nalgebra::{DMatrix, DVector};

use super::residual::{residual_split, ResidualSplit};
use crate::error::{QcError, Result};
use crate::lattice::{LatticeConfig, Parity, PeriodicField};
use crate::load::{sample_load, ExactSolution, LoadSpec};
use crate::operators::{apply, assemble, Model, PeriodicOperator};
use crate::potential::LinearizedCoeffs;

/// Reduced systems with a larger 2-norm condition number are solved by
/// least squares and flagged.
pub const CONDITION_LIMIT: f64 = 1e8;

/// Source column of the QNL reduced right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QnlSourceColumn {
    /// `- h^2 (delta_rho / c_cont) (K+1) [b, a + 2b]`, from substituting the
    /// interface-sum relation into rows `K-1` and `K`.
    #[default]
    Consistent,
    /// `+ h^2 delta_rho / (a + b) (K+1) [b, a + b]`. Kept for comparison; it
    /// does not reproduce `L e = rho`.
    Tabulated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSolution {
    pub model: Model,
    pub k: usize,
    pub h: f64,
    pub lambda: f64,
    pub m1: f64,
    pub m2: f64,
    /// `e_{K+1}` perturbation (QCE only).
    pub e_hat: Option<f64>,
    pub beta: f64,
    pub delta_rho: f64,
    /// 2-norm condition number of the reduced matrix.
    pub condition: f64,
    pub near_singular: bool,
    /// `|(L e - rho)_j| / ||rho||_inf` on the interface row left out of the
    /// reduced system (`K` for QCE, `K + 1` for QNL).
    pub omitted_row_residual: f64,
    /// `||L e - rho||_inf / ||rho||_inf` over all rows.
    pub operator_residual: f64,
}

/// `gamma_j = lambda^(j-K) - lambda^(-j-K)`, evaluated without overflow.
pub fn gamma(lambda: f64, k: usize, j: i64) -> f64 {
    let ln = lambda.ln();
    let k = k as f64;
    let j = j as f64;
    ((j - k) * ln).exp() - ((-j - k) * ln).exp()
}

impl InterfaceSolution {
    pub fn gamma(&self, j: i64) -> f64 {
        gamma(self.lambda, self.k, j)
    }

    /// `e_j` for `0 <= j <= N`.
    fn right_value(&self, j: i64) -> f64 {
        let k = self.k as i64;
        let hj = self.h * j as f64;
        if j <= k {
            self.m1 * hj + self.beta * self.gamma(j)
        } else if j == k + 1 {
            self.m2 * hj - self.m2 + self.e_hat.unwrap_or(0.0)
        } else {
            self.m2 * hj - self.m2
        }
    }

    /// Odd periodic field of the closed-form error.
    pub fn field(&self, n: usize) -> PeriodicField {
        let mut e = PeriodicField::zeros(n);
        let n = n as i64;
        for j in 1..n {
            let v = self.right_value(j);
            e.set(j, v);
            e.set(-j, -v);
        }
        e.with_parity(Parity::Odd)
    }
}

/// Reduced interface matrix `A_K + h B` and the row weights of the
/// `h^2 delta_rho / c` source in its right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub matrix: DMatrix<f64>,
    pub source: DVector<f64>,
}

/// Reduced matrix without the `h B` correction; depends on `K` and the
/// coefficients only.
pub fn reduced_matrix(model: Model, k: usize, coeffs: &LinearizedCoeffs) -> Result<DMatrix<f64>> {
    Ok(reduced_system(model, k, 0.0, coeffs)?.matrix)
}

pub fn reduced_system(model: Model, k: usize, h: f64, coeffs: &LinearizedCoeffs) -> Result<ReducedSystem> {
    let lambda = coeffs.lambda()?;
    let a = coeffs.phi2_f;
    let b = coeffs.phi2_2f;
    let g = |j: usize| gamma(lambda, k, j as i64);
    let kf = k as f64;
    match model {
        Model::Qce => {
            if k < 2 {
                return Err(QcError::Config(format!("interface index K = {k} is below 2")));
            }
            #[rustfmt::skip]
            let matrix = DMatrix::from_row_slice(3, 3, &[
                0.5 * b + h * b, -0.5 * b, b * g(k + 1) - 0.5 * b * g(k - 1),
                -a - 2.5 * b - h * b, 2.0 * a + 6.5 * b, -a * g(k) - 2.0 * b * g(k) - 0.5 * b * g(k - 1),
                -0.5 * b + h * b, -a - 4.0 * b, -0.5 * b * g(k),
            ]);
            let source = DVector::from_vec(vec![
                (0.5 * kf + 1.5) * b,
                -kf * a - (2.5 * kf - 0.5) * b,
                -0.5 * kf * b,
            ]);
            Ok(ReducedSystem { matrix, source })
        }
        Model::Qnl => {
            if k < 2 {
                return Err(QcError::Config(format!("interface index K = {k} is below 2")));
            }
            #[rustfmt::skip]
            let matrix = DMatrix::from_row_slice(2, 2, &[
                b, b * g(k + 1),
                a + 2.0 * b, a * g(k + 1) + b * g(k + 2) + b * g(k),
            ]);
            let source = DVector::from_vec(vec![(kf + 1.0) * b, (kf + 1.0) * (a + 2.0 * b)]);
            Ok(ReducedSystem { matrix, source })
        }
        other => Err(QcError::Config(format!("{other} model has no coupling interface"))),
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Builds `e_rho` from the closed form for a given residual split.
pub fn interface_error_from_split(
    op: &PeriodicOperator,
    split: &ResidualSplit,
    column: QnlSourceColumn,
) -> Result<(InterfaceSolution, PeriodicField)> {
    let lattice = &op.lattice;
    let coeffs = &op.coeffs;
    let model = op.model;
    if model == Model::Qce && lattice.k + 3 > lattice.n {
        return Err(QcError::Interface(format!(
            "QCE interface at K = {} overlaps its mirror image across the period (need K <= N - 3)",
            lattice.k
        )));
    }
    lattice.validate_interface()?;
    let k = lattice.k as i64;
    let h = lattice.h;
    let h2 = h * h;
    let c = coeffs.c_cont;
    let a = coeffs.phi2_f;
    let b = coeffs.phi2_2f;
    let lambda = coeffs.lambda()?;
    let dr = split.delta_rho;
    let sys = reduced_system(model, lattice.k, h, coeffs)?;

    let rows: Vec<i64> = match model {
        Model::Qce => vec![k - 1, k + 1, k + 2],
        _ => vec![k - 1, k],
    };
    let mut rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&j| h2 * split.rho.get(j)));
    match (model, column) {
        (Model::Qnl, QnlSourceColumn::Tabulated) => {
            let kp = (k + 1) as f64;
            rhs[0] += h2 * dr / (a + b) * kp * b;
            rhs[1] += h2 * dr / (a + b) * kp * (a + b);
        }
        _ => rhs -= &sys.source * (h2 * dr / c),
    }

    let condition = condition_number(&sys.matrix);
    let near_singular = !(condition <= CONDITION_LIMIT);
    let x = if near_singular {
        sys.matrix
            .clone()
            .svd(true, true)
            .solve(&rhs, f64::EPSILON * sys.matrix.norm())
            .map_err(|e| QcError::Interface(e.to_string()))?
    } else {
        sys.matrix
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| QcError::Interface("reduced interface matrix is singular".into()))?
    };

    let m2 = x[0];
    let (e_hat, beta) = match model {
        Model::Qce => (Some(x[1]), x[2]),
        _ => (None, x[1]),
    };
    let mut sol = InterfaceSolution {
        model,
        k: lattice.k,
        h,
        lambda,
        m1: m2 + h * dr / c,
        m2,
        e_hat,
        beta,
        delta_rho: dr,
        condition,
        near_singular,
        omitted_row_residual: 0.0,
        operator_residual: 0.0,
    };
    let e = sol.field(lattice.n);
    let defect = apply(op, &e)?.axpy(-1.0, &split.rho)?;
    let scale = split.rho.max_abs();
    let rel = |v: f64| if scale > 0.0 { v / scale } else { v };
    let omitted = if model == Model::Qce { k } else { k + 1 };
    sol.omitted_row_residual = rel(defect.get(omitted).abs());
    sol.operator_residual = rel(defect.max_abs());
    Ok((sol, e))
}

/// Closed-form coupling error of `model` for the load behind `exact`.
pub fn explicit_interface_error(
    model: Model,
    exact: &ExactSolution,
    lattice: &LatticeConfig,
    coeffs: &LinearizedCoeffs,
) -> Result<(InterfaceSolution, PeriodicField)> {
    let op = assemble(model, lattice, coeffs)?;
    let load = LoadSpec {
        modes: exact.modes.clone(),
    };
    let f = sample_load(&load, lattice)?;
    let split = residual_split(&op, exact, &f)?;
    interface_error_from_split(&op, &split, QnlSourceColumn::Consistent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::load::exact_solution;
    use crate::potential::{linearize, PotentialSpec};

    fn lj() -> LinearizedCoeffs {
        linearize(&PotentialSpec::LennardJones, 1.0).unwrap()
    }

    #[test]
    fn gamma_is_odd_and_normalized() {
        let l = 3.7;
        assert_eq!(gamma(l, 5, 0), 0.0);
        assert!((gamma(l, 5, 5) - (1.0 - l.powi(-10))).abs() < 1e-15);
        assert_eq!(gamma(l, 5, -3), -gamma(l, 5, 3));
        assert!(gamma(224.0, 300, 301).is_finite());
    }

    #[test]
    fn zero_residual_gives_zero_error() {
        let c = LinearizedCoeffs::new(0.0, 1.0, 0.0, -0.1);
        let lattice = LatticeConfig::new(32, 8, 1.0).unwrap();
        let exact = exact_solution(&LoadSpec::zero(), &c).unwrap();
        for model in [Model::Qce, Model::Qnl] {
            let (s, e) = explicit_interface_error(model, &exact, &lattice, &c).unwrap();
            assert_eq!((s.m1, s.m2, s.beta), (0.0, 0.0, 0.0));
            assert_eq!(e.max_abs(), 0.0);
        }
    }

    #[test]
    fn closed_form_satisfies_operator_equation() {
        let lattice = LatticeConfig::new(64, 16, 1.0).unwrap();
        for coeffs in [lj(), LinearizedCoeffs::new(0.0, 1.0, 0.05, -0.1)] {
            let exact = exact_solution(&LoadSpec::sine(1, 1.0), &coeffs).unwrap();
            for model in [Model::Qce, Model::Qnl] {
                let (s, _) = explicit_interface_error(model, &exact, &lattice, &coeffs).unwrap();
                assert!(s.operator_residual < 1e-8, "{model}: {}", s.operator_residual);
                assert!(s.omitted_row_residual < 1e-8);
                assert!(!s.near_singular);
            }
        }
    }

    #[test]
    fn tabulated_qnl_column_fails_the_check() {
        let coeffs = lj();
        let lattice = LatticeConfig::new(64, 16, 1.0).unwrap();
        let exact = exact_solution(&LoadSpec::sine(1, 1.0), &coeffs).unwrap();
        let op = assemble(Model::Qnl, &lattice, &coeffs).unwrap();
        let f = sample_load(&LoadSpec::sine(1, 1.0), &lattice).unwrap();
        let split = residual_split(&op, &exact, &f).unwrap();
        let (s, _) = interface_error_from_split(&op, &split, QnlSourceColumn::Tabulated).unwrap();
        assert!(s.operator_residual > 1e-3);
    }

    #[test]
    fn qce_rejects_interface_touching_its_image() {
        let coeffs = lj();
        let lattice = LatticeConfig::new(16, 14, 1.0).unwrap();
        let exact = exact_solution(&LoadSpec::sine(1, 1.0), &coeffs).unwrap();
        assert!(matches!(
            explicit_interface_error(Model::Qce, &exact, &lattice, &coeffs),
            Err(QcError::Interface(_))
        ));
        assert!(explicit_interface_error(Model::Qnl, &exact, &lattice, &coeffs).is_ok());
    }
}
