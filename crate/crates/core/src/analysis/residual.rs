use crate::error::{QcError, Result};
use crate::lattice::{compensated_sum, Parity, PeriodicField};
use crate::load::ExactSolution;
use crate::operators::{apply, ghost_vector, Model, PeriodicOperator};

/// Interface part `rho` and bulk part `sigma` of the consistency residual
/// `r = L u_e - g - f` (QCE) or `r = L u_e - f` (QNL).
#[derive(Debug, Clone)]
pub struct ResidualSplit {
    pub model: Model,
    pub total: PeriodicField,
    pub rho: PeriodicField,
    pub sigma: PeriodicField,
    /// Sum of `rho` over the right interface rows.
    pub delta_rho: f64,
}

/// Right-interface rows carrying `rho`.
pub fn interface_rows(model: Model, k: usize) -> Result<Vec<i64>> {
    let k = k as i64;
    match model {
        Model::Qce => Ok(vec![k - 1, k, k + 1, k + 2]),
        Model::Qnl => Ok(vec![k, k + 1]),
        other => Err(QcError::Config(format!(
            "{other} model has no coupling interface"
        ))),
    }
}

/// Leading interface residual from the Taylor expansion of `u_e` about
/// `x_{K+1/2}`, on the right interface rows (the left rows are the odd image).
pub fn interface_residual_table(op: &PeriodicOperator, exact: &ExactSolution) -> Result<Vec<(i64, f64)>> {
    let lattice = &op.lattice;
    let c = &op.coeffs;
    let h = lattice.h;
    let xh = lattice.x_half();
    let (u1, u2, u3) = (
        exact.derivative(1, xh),
        exact.derivative(2, xh),
        exact.derivative(3, xh),
    );
    let p = c.phi2_2f;
    let rows = interface_rows(op.model, lattice.k)?;
    let vals = match op.model {
        Model::Qce => {
            let jump = (0.5 * c.phi1_2f + p * u1) / h;
            vec![
                jump - 0.5 * p * u2 + 7.0 / 24.0 * p * u3 * h,
                -jump + 0.5 * p * u2 + 5.0 / 24.0 * p * u3 * h,
                -jump - 0.5 * p * u2 + 5.0 / 24.0 * p * u3 * h,
                jump + 0.5 * p * u2 + 7.0 / 24.0 * p * u3 * h,
            ]
        }
        _ => vec![p * u2 + 0.5 * p * u3 * h, -p * u2 + 0.5 * p * u3 * h],
    };
    Ok(rows.into_iter().zip(vals).collect())
}

/// Closed form of the interface sum: `h phi''_2F u_e'''(x_{K+1/2})` for both
/// coupled models.
pub fn delta_rho_closed_form(op: &PeriodicOperator, exact: &ExactSolution) -> Result<f64> {
    interface_rows(op.model, op.lattice.k)?;
    Ok(op.lattice.h * op.coeffs.phi2_2f * exact.derivative(3, op.lattice.x_half()))
}

/// Splits the residual of the sampled exact solution into `rho` (closed-form
/// interface table) and `sigma = r - rho`.
pub fn residual_split(
    op: &PeriodicOperator,
    exact: &ExactSolution,
    f: &PeriodicField,
) -> Result<ResidualSplit> {
    f.ensure_lattice(&op.lattice)?;
    let table = interface_residual_table(op, exact)?;
    let ue = exact.sample(&op.lattice);
    let mut total = apply(op, &ue)?.axpy(-1.0, f)?;
    if op.model == Model::Qce {
        let g = ghost_vector(&op.lattice, &op.coeffs)?;
        total = total.axpy(-1.0, &g.g)?;
    }
    let mut rho = PeriodicField::zeros(op.lattice.n);
    for &(j, v) in &table {
        rho.add(j, v);
        rho.add(-j, -v);
    }
    let sigma = total.axpy(-1.0, &rho)?.with_parity(Parity::Odd);
    Ok(ResidualSplit {
        model: op.model,
        total: total.with_parity(Parity::Odd),
        rho: rho.with_parity(Parity::Odd),
        sigma,
        delta_rho: compensated_sum(table.iter().map(|&(_, v)| v)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{norm_lp, LatticeConfig, NormKind};
    use crate::load::{exact_solution, sample_load, LoadSpec};
    use crate::operators::assemble;
    use crate::potential::{linearize, PotentialSpec};

    fn split(model: Model, n: usize, load: &LoadSpec) -> (ResidualSplit, PeriodicOperator, ExactSolution) {
        let coeffs = linearize(&PotentialSpec::LennardJones, 1.0).unwrap();
        let lattice = LatticeConfig::new(n, n / 4, 1.0).unwrap();
        let op = assemble(model, &lattice, &coeffs).unwrap();
        let exact = exact_solution(load, &coeffs).unwrap();
        let f = sample_load(load, &lattice).unwrap();
        (residual_split(&op, &exact, &f).unwrap(), op, exact)
    }

    #[test]
    fn zero_load_split() {
        let (s, _, _) = split(Model::Qnl, 32, &LoadSpec::zero());
        assert_eq!(s.rho.max_abs(), 0.0);
        assert_eq!(s.sigma.max_abs(), 0.0);

        let (s, op, _) = split(Model::Qce, 32, &LoadSpec::zero());
        let half = 0.5 * op.coeffs.phi1_2f / op.lattice.h;
        assert_eq!(s.rho.get(8), -half);
        assert_eq!(s.rho.get(7), half);
        assert_eq!(s.rho.get(-7), -half);
        assert_eq!(s.rho.values().iter().filter(|v| **v != 0.0).count(), 8);
        assert!(s.sigma.max_abs() <= 1e-12 * half);
    }

    #[test]
    fn interface_sum_matches_closed_form() {
        for model in [Model::Qce, Model::Qnl] {
            let (s, op, exact) = split(model, 64, &LoadSpec::sine(1, 1.0));
            let closed = delta_rho_closed_form(&op, &exact).unwrap();
            assert!((s.delta_rho - closed).abs() <= 1e-9 * closed.abs(), "{model}");
        }
    }

    #[test]
    fn bulk_residual_is_second_order() {
        for model in [Model::Qce, Model::Qnl] {
            let ratios: Vec<f64> = [64usize, 128, 256]
                .iter()
                .map(|&n| {
                    let (s, op, exact) = split(model, n, &LoadSpec::sine(1, 1.0));
                    let h = op.lattice.h;
                    norm_lp(&s.sigma, NormKind::L2, h).unwrap() / (h * h * exact.fourth_derivative_l2())
                })
                .collect();
            let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(spread < 1.25, "{model}: {ratios:?}");
        }
    }

    #[test]
    fn rho_support_and_parity() {
        let (s, _, _) = split(Model::Qce, 32, &LoadSpec::sine(1, 1.0));
        for (j, v) in s.rho.iter() {
            if v != 0.0 {
                assert!((7..=10).contains(&j.abs()), "j = {j}");
            }
            assert_eq!(v, -s.rho.get(-j));
        }
        s.sigma.check_flags(1e-9).unwrap();
    }
}
