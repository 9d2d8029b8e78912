use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QcError, Result};
use crate::lattice::{backward_difference, norm_lp, project_mean_zero, NormKind, PeriodicField};
use crate::load::sin_pi;
use crate::operators::{apply, PeriodicOperator};
use crate::solver::{solve_factored, MeanZeroFactor};

pub const DEFAULT_SEED: u64 = 0x5eed_0001;

/// Slack on the coercivity and solve-bound comparisons, relative to the bound.
const ROUNDING_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub nu: f64,
    /// `min (h v.Lv) / ||Dv||^2_{l^2}` over the probe set.
    pub min_ratio: f64,
    /// `min_ratio - nu`.
    pub margin: f64,
    pub trials: usize,
    pub violations: usize,
}

/// Rayleigh quotient `h v.Lv / ||Dv||^2_{l^2}`.
pub fn energy_ratio(op: &PeriodicOperator, v: &PeriodicField) -> Result<f64> {
    let lv = apply(op, v)?;
    let num = v.dot(&lv, op.lattice.h)?;
    let dv = backward_difference(v, &op.lattice)?;
    let den = norm_lp(&dv, NormKind::L2, op.lattice.h)?.powi(2);
    Ok(num / den)
}

/// Structured probes: the zigzag mode, interface-localised bumps on both
/// sides and a few smooth modes.
fn structured(op: &PeriodicOperator) -> Vec<PeriodicField> {
    let n = op.lattice.n;
    let k = op.lattice.k as i64;
    let mut out = vec![PeriodicField::from_fn(n, |j| if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 })];
    for centre in [k, k + 1, -k, -k - 1] {
        for width in [1i64, 2] {
            out.push(PeriodicField::from_fn(n, |j| {
                let d = (j - centre).abs();
                if d <= width {
                    (width + 1 - d) as f64
                } else {
                    0.0
                }
            }));
        }
        out.push(PeriodicField::from_fn(n, |j| if j == centre { 1.0 } else { 0.0 }));
    }
    for m in [1u32, 2, 7] {
        out.push(PeriodicField::from_fn(n, |j| sin_pi(m as f64 * op.lattice.x(j))));
    }
    out.into_iter()
        .map(|v| project_mean_zero(&v))
        .filter(|v| v.max_abs() > 0.0)
        .collect()
}

fn random_mean_zero(rng: &mut ChaCha8Rng, n: usize) -> PeriodicField {
    project_mean_zero(&PeriodicField::from_fn(n, |_| rng.gen_range(-1.0..1.0)))
}

/// Coercivity probe with the default seed.
pub fn stability_probe(op: &PeriodicOperator, nu: f64, trials: usize) -> Result<StabilityReport> {
    stability_probe_seeded(op, nu, trials, DEFAULT_SEED)
}

/// Checks `h v.Lv >= nu ||Dv||^2_{l^2}` on `trials` random mean-zero vectors
/// plus a fixed set of structured ones.
pub fn stability_probe_seeded(
    op: &PeriodicOperator,
    nu: f64,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if trials == 0 {
        return Err(QcError::Config("stability probe needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut count = 0;
    let mut violations = 0;
    let probes = (0..trials)
        .map(|_| random_mean_zero(&mut rng, op.lattice.n))
        .chain(structured(op));
    for v in probes {
        let r = energy_ratio(op, &v)?;
        if r < nu - ROUNDING_SLACK * nu.abs().max(1.0) {
            violations += 1;
        }
        min_ratio = min_ratio.min(r);
        count += 1;
    }
    Ok(StabilityReport {
        nu,
        min_ratio,
        margin: min_ratio - nu,
        trials: count,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveBoundReport {
    pub nu: f64,
    /// `max 2 nu ||Du||_{l^2} / ||b||_{l^2}`; the bound holds when `<= 1`.
    pub max_ratio: f64,
    pub trials: usize,
    pub violations: usize,
}

/// Checks `||Du||_{l^2} <= ||b||_{l^2} / (2 nu)` for `L u = b` on random
/// compatible `b`.
pub fn solve_bound_probe(
    op: &PeriodicOperator,
    nu: f64,
    trials: usize,
    seed: u64,
) -> Result<SolveBoundReport> {
    if trials == 0 {
        return Err(QcError::Config("solve-bound probe needs at least one trial".into()));
    }
    let factor = MeanZeroFactor::new(op)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = op.lattice.h;
    let mut max_ratio = 0.0_f64;
    let mut violations = 0;
    for _ in 0..trials {
        let b = random_mean_zero(&mut rng, op.lattice.n);
        let u = solve_factored(op, &factor, &b)?.solution;
        let du = norm_lp(&backward_difference(&u, &op.lattice)?, NormKind::L2, h)?;
        let nb = norm_lp(&b, NormKind::L2, h)?;
        let ratio = 2.0 * nu * du / nb;
        if ratio > 1.0 + ROUNDING_SLACK {
            violations += 1;
        }
        max_ratio = max_ratio.max(ratio);
    }
    Ok(SolveBoundReport {
        nu,
        max_ratio,
        trials,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeConfig;
    use crate::operators::{assemble, Model};
    use crate::potential::{linearize, PotentialSpec};

    #[test]
    fn continuum_ratio_is_the_modulus() {
        let c = linearize(&PotentialSpec::LennardJones, 1.0).unwrap();
        let lattice = LatticeConfig::new(32, 8, 1.0).unwrap();
        let op = assemble(Model::Continuum, &lattice, &c).unwrap();
        let r = stability_probe(&op, c.c_cont, 50).unwrap();
        assert!(r.min_ratio >= c.c_cont - 1e-10);
        assert!((r.min_ratio - c.c_cont).abs() < 1e-9 * c.c_cont);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn coupled_models_are_coercive() {
        let c = linearize(&PotentialSpec::LennardJones, 1.0).unwrap();
        let lattice = LatticeConfig::new(64, 16, 1.0).unwrap();
        for (model, nu) in [(Model::Qce, c.nu_qce), (Model::Qnl, c.nu_qnl)] {
            let op = assemble(model, &lattice, &c).unwrap();
            let r = stability_probe(&op, nu, 200).unwrap();
            assert_eq!(r.violations, 0, "{model}");
            assert!(r.margin >= 0.0);
            let s = solve_bound_probe(&op, nu, 20, 3).unwrap();
            assert_eq!(s.violations, 0);
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let c = linearize(&PotentialSpec::LennardJones, 1.0).unwrap();
        let lattice = LatticeConfig::new(16, 4, 1.0).unwrap();
        let op = assemble(Model::Qnl, &lattice, &c).unwrap();
        assert!(stability_probe(&op, c.nu_qnl, 0).is_err());
    }
}
