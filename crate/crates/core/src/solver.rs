//! Mean-zero solves of the singular periodic systems `L u = b`.
//!
//! The constraint `sum u_j = 0` is imposed with one Lagrange multiplier, giving
//! the saddle system `[[L, 1], [1^T, 0]]`. The ring is folded (slots
//! `0, 2N-1, 1, 2N-2, ...` become neighbours) so that the wraparound bands
//! turn into an ordinary band of half-width four, and the multiplier row is
//! carried as a dense border through a banded `LDL^T` elimination.

use crate::error::{QcError, Result};
use crate::lattice::{apply_involution, norm_lp, project_mean_zero, LatticeConfig, NormKind, PeriodicField};
use crate::load::{sample_load, LoadSpec};
use crate::operators::{apply, assemble, ghost_vector, Model, PeriodicOperator};
use crate::potential::LinearizedCoeffs;

const HALF_BAND: usize = 4;

/// Relative size of `|sum b_j|` (against `sum |b_j|`) above which a
/// right-hand side is rejected instead of projected.
pub const COMPATIBILITY_TOL: f64 = 1e-6;

/// Bound factor in `||L u - b|| <= RESIDUAL_TOL (||L||_inf ||u||_inf + ||b||_inf)`.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Oddness tolerance of model solutions, relative to `||u||_inf`.
pub const ODDNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: PeriodicField,
    /// `l^2` norm of `L u - b` (with `b` projected to mean zero).
    pub residual_norm: f64,
    /// `|sum_j b_j|` before projection.
    pub compatibility_defect: f64,
}

/// Folded position of storage slot `i` on a ring of length `len`.
#[inline]
fn fold(i: usize, len: usize) -> usize {
    if i < len / 2 {
        2 * i
    } else {
        2 * (len - 1 - i) + 1
    }
}

/// Banded `LDL^T` factors of the bordered saddle matrix.
#[derive(Debug, Clone)]
pub struct MeanZeroFactor {
    len: usize,
    perm: Vec<usize>,
    /// `lower[k][o - 1] = L[k + o][k]` for `o = 1..=4`.
    lower: Vec<[f64; HALF_BAND]>,
    /// Multiplier row of `L`.
    border: Vec<f64>,
    diag: Vec<f64>,
    /// Trailing 2x2 Schur complement `[[a, c], [c, s]]`.
    tail: [f64; 3],
}

impl MeanZeroFactor {
    pub fn new(op: &PeriodicOperator) -> Result<Self> {
        let n = op.lattice.n as i64;
        let len = 2 * op.lattice.n;
        let perm: Vec<usize> = (0..len).map(|i| fold(i, len)).collect();

        // band[p][o] = M[p + o][p], o = 0..=4, in folded order.
        let mut band = vec![[0.0_f64; HALF_BAND + 1]; len];
        for i in 0..len {
            let j = i as i64 - n + 1;
            for d in -2..=2 {
                let s = (j + d + n - 1).rem_euclid(2 * n) as usize;
                let (pi, ps) = (perm[i], perm[s]);
                if ps >= pi {
                    band[pi][ps - pi] += op.band(j, d);
                }
            }
        }

        let scale = op.max_abs().max(f64::MIN_POSITIVE);
        let pivot_floor = 1e-13 * scale;
        let mut border = vec![1.0_f64; len];
        let mut corner = 0.0_f64;
        let mut lower = vec![[0.0_f64; HALF_BAND]; len];
        let mut diag = vec![0.0_f64; len];

        for k in 0..len.saturating_sub(1) {
            let d = band[k][0];
            if !d.is_finite() || d.abs() <= pivot_floor {
                return Err(QcError::Singular { index: k, pivot: d });
            }
            diag[k] = d;
            let reach = HALF_BAND.min(len - 1 - k);
            let mut col = [0.0_f64; HALF_BAND];
            for o in 1..=reach {
                col[o - 1] = band[k][o] / d;
            }
            let lk = border[k] / d;
            for o in 1..=reach {
                let lik = col[o - 1];
                if lik != 0.0 {
                    for q in o..=reach {
                        band[k + o][q - o] -= col[q - 1] * d * lik;
                    }
                }
                border[k + o] -= lk * d * lik;
            }
            corner -= lk * lk * d;
            lower[k] = col;
            border[k] = lk;
        }

        let last = len - 1;
        let tail = [band[last][0], border[last], corner];
        let det = tail[0] * tail[2] - tail[1] * tail[1];
        if !det.is_finite() || det.abs() <= f64::EPSILON * tail[1] * tail[1] {
            return Err(QcError::Singular { index: last, pivot: det });
        }
        Ok(MeanZeroFactor {
            len,
            perm,
            lower,
            border,
            diag,
            tail,
        })
    }

    /// Solves `L u = b`, `sum u = 0` for a compatible `b` given in storage order.
    pub fn solve_slots(&self, b: &[f64]) -> Vec<f64> {
        let len = self.len;
        let last = len - 1;
        let mut z = vec![0.0_f64; len];
        for (i, &v) in b.iter().enumerate() {
            z[self.perm[i]] = v;
        }
        let mut zb = 0.0_f64;

        for k in 0..last {
            let yk = z[k];
            let reach = HALF_BAND.min(last - k);
            for o in 1..=reach {
                z[k + o] -= self.lower[k][o - 1] * yk;
            }
            zb -= self.border[k] * yk;
        }
        for k in 0..last {
            z[k] /= self.diag[k];
        }
        let [a, c, s] = self.tail;
        let det = a * s - c * c;
        let (y0, y1) = (z[last], zb);
        z[last] = (s * y0 - c * y1) / det;
        zb = (a * y1 - c * y0) / det;
        for k in (0..last).rev() {
            let reach = HALF_BAND.min(last - k);
            let mut acc = z[k] - self.border[k] * zb;
            for o in 1..=reach {
                acc -= self.lower[k][o - 1] * z[k + o];
            }
            z[k] = acc;
        }

        (0..len).map(|i| z[self.perm[i]]).collect()
    }
}

fn check_compatibility(b: &PeriodicField) -> Result<f64> {
    let defect = b.sum().abs();
    let tol = COMPATIBILITY_TOL * b.values().iter().map(|v| v.abs()).sum::<f64>();
    if defect > tol {
        return Err(QcError::IncompatibleRhs { defect, tol });
    }
    Ok(defect)
}

/// Solves with an existing factorization; `op` must be the factored operator.
pub fn solve_factored(
    op: &PeriodicOperator,
    factor: &MeanZeroFactor,
    b: &PeriodicField,
) -> Result<SolveReport> {
    b.ensure_lattice(&op.lattice)?;
    let compatibility_defect = check_compatibility(b)?;
    let rhs = project_mean_zero(b);
    let u = PeriodicField::from_values(op.lattice.n, factor.solve_slots(rhs.values()))?;
    let mut solution = project_mean_zero(&u);
    solution.parity = b.parity;

    let lu = apply(op, &solution)?;
    let r = lu.axpy(-1.0, &rhs)?;
    let residual_norm = norm_lp(&r, NormKind::L2, op.lattice.h)?;
    let bound = RESIDUAL_TOL * (op.inf_norm() * solution.max_abs() + rhs.max_abs());
    if !(residual_norm <= bound) {
        return Err(QcError::ResidualTooLarge {
            residual: residual_norm,
            bound,
        });
    }
    Ok(SolveReport {
        solution,
        residual_norm,
        compatibility_defect,
    })
}

/// Unique mean-zero solution of `L u = b`; the mean of `b` is projected out
/// and reported.
pub fn solve_mean_zero(op: &PeriodicOperator, b: &PeriodicField) -> Result<SolveReport> {
    b.ensure_lattice(&op.lattice)?;
    check_compatibility(b)?;
    let factor = MeanZeroFactor::new(op)?;
    solve_factored(op, &factor, b)
}

/// Equilibrium of `model` under `load`: `L u = f + g` for QCE, `L u = f`
/// otherwise. The returned solution is checked to be odd.
pub fn solve_model(
    model: Model,
    lattice: &LatticeConfig,
    coeffs: &LinearizedCoeffs,
    load: &LoadSpec,
) -> Result<SolveReport> {
    let op = assemble(model, lattice, coeffs)?;
    let f = sample_load(load, lattice)?;
    solve_operator(&op, &f)
}

/// [`solve_model`] with an already assembled operator and sampled load.
pub fn solve_operator(op: &PeriodicOperator, f: &PeriodicField) -> Result<SolveReport> {
    let rhs = if op.model == Model::Qce {
        let g = ghost_vector(&op.lattice, &op.coeffs)?;
        let mut r = f.axpy(1.0, &g.g)?;
        r.parity = f.parity;
        r
    } else {
        f.clone()
    };
    let report = solve_mean_zero(op, &rhs)?;
    let u = &report.solution;
    let defect = u.axpy(-1.0, &apply_involution(u))?.max_abs();
    if defect > ODDNESS_TOL * u.max_abs() {
        return Err(QcError::Symmetry { defect });
    }
    Ok(report)
}
