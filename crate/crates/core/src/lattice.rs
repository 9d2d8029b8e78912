//! Periodic lattice bookkeeping: configuration, fields indexed by lattice
//! site, the backward difference and the discrete `l^p` norms.
//!
//! A field over one period stores the sites `j = -N+1, ..., N` in slots
//! `i = j + N - 1`. Every public accessor speaks lattice index `j` and wraps
//! with period `2N`.

use crate::error::{QcError, Result};

/// Reference lattice with `2N` sites per period, spacing `h = 1/N`,
/// atomistic half-width `K` and uniform strain `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    pub n: usize,
    pub h: f64,
    pub k: usize,
    pub f: f64,
}

impl LatticeConfig {
    /// Builds a lattice with a coupling interface at `K`. Requires
    /// `2 <= K <= N - 2`.
    pub fn new(n: usize, k: usize, f: f64) -> Result<Self> {
        let lattice = Self::periodic(n, f)?;
        let lattice = LatticeConfig { k, ..lattice };
        lattice.validate_interface()?;
        Ok(lattice)
    }

    /// Lattice without a meaningful interface (`K = 0`). Enough for the
    /// atomistic and continuum models and for plain field operations.
    pub fn periodic(n: usize, f: f64) -> Result<Self> {
        if n == 0 {
            return Err(QcError::Config("N must be positive".into()));
        }
        if !(f.is_finite() && f > 0.0) {
            return Err(QcError::Config(format!("F must be positive, got {f}")));
        }
        Ok(LatticeConfig {
            n,
            h: 1.0 / n as f64,
            k: 0,
            f,
        })
    }

    pub fn validate_interface(&self) -> Result<()> {
        if self.k < 2 || self.k + 2 > self.n {
            return Err(QcError::Config(format!(
                "interface index K = {} must satisfy 2 <= K <= N - 2 (N = {})",
                self.k, self.n
            )));
        }
        Ok(())
    }

    /// Number of sites per period, `2N`.
    #[inline]
    pub fn len(&self) -> usize {
        2 * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Reference position `x_j = j h`.
    #[inline]
    pub fn x(&self, j: i64) -> f64 {
        j as f64 * self.h
    }

    /// Deformed uniform spacing `a = F h`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.f * self.h
    }

    /// Midpoint of the element to the right of the interface atom, `(K + 1/2) h`.
    #[inline]
    pub fn x_half(&self) -> f64 {
        (self.k as f64 + 0.5) * self.h
    }

    /// Lattice indices of one period in storage order.
    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let n = self.n as i64;
        (-n + 1)..=n
    }

    #[inline]
    pub fn slot(&self, j: i64) -> usize {
        slot(self.n, j)
    }
}

#[inline]
pub(crate) fn slot(n: usize, j: i64) -> usize {
    let period = 2 * n as i64;
    (j + n as i64 - 1).rem_euclid(period) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    None,
    Odd,
}

/// Periodic real field `u_j`, `u_{j+2N} = u_j`.
///
/// `parity` and `mean_zero` are advisory flags; [`PeriodicField::check_flags`]
/// validates them on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    n: usize,
    values: Vec<f64>,
    pub parity: Parity,
    pub mean_zero: bool,
}

impl PeriodicField {
    pub fn zeros(n: usize) -> Self {
        PeriodicField {
            n,
            values: vec![0.0; 2 * n],
            parity: Parity::None,
            mean_zero: false,
        }
    }

    /// Builds `u_j = f(j)` over one period.
    pub fn from_fn(n: usize, mut f: impl FnMut(i64) -> f64) -> Self {
        let n_i = n as i64;
        let values = ((-n_i + 1)..=n_i).map(&mut f).collect();
        PeriodicField {
            n,
            values,
            parity: Parity::None,
            mean_zero: false,
        }
    }

    /// Wraps storage-ordered values (`values[0]` is `u_{-N+1}`).
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * n {
            return Err(QcError::LengthMismatch {
                expected: 2 * n,
                actual: values.len(),
            });
        }
        Ok(PeriodicField {
            n,
            values,
            parity: Parity::None,
            mean_zero: false,
        })
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `u_j` for any integer `j`.
    #[inline]
    pub fn get(&self, j: i64) -> f64 {
        self.values[slot(self.n, j)]
    }

    #[inline]
    pub fn set(&mut self, j: i64, value: f64) {
        let i = slot(self.n, j);
        self.values[i] = value;
    }

    #[inline]
    pub fn add(&mut self, j: i64, value: f64) {
        let i = slot(self.n, j);
        self.values[i] += value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `(j, u_j)` pairs over one period.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let start = -(self.n as i64) + 1;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (start + i as i64, v))
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `h * sum_j u_j v_j` over one period.
    pub fn dot(&self, other: &PeriodicField, h: f64) -> Result<f64> {
        self.ensure_same(other)?;
        Ok(h * compensated_sum(
            self.values.iter().zip(&other.values).map(|(a, b)| a * b),
        ))
    }

    pub fn axpy(&self, alpha: f64, other: &PeriodicField) -> Result<PeriodicField> {
        self.ensure_same(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(PeriodicField {
            n: self.n,
            values,
            parity: Parity::None,
            mean_zero: false,
        })
    }

    pub fn scaled(&self, alpha: f64) -> PeriodicField {
        PeriodicField {
            n: self.n,
            values: self.values.iter().map(|v| alpha * v).collect(),
            parity: self.parity,
            mean_zero: self.mean_zero,
        }
    }

    pub(crate) fn ensure_same(&self, other: &PeriodicField) -> Result<()> {
        if self.n != other.n {
            return Err(QcError::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_lattice(&self, lattice: &LatticeConfig) -> Result<()> {
        if self.n != lattice.n {
            return Err(QcError::LengthMismatch {
                expected: lattice.len(),
                actual: self.len(),
            });
        }
        Ok(())
    }

    /// Validates the advisory flags: oddness to `tol * max|u|` and zero mean
    /// to `2N * eps * max|u|`.
    pub fn check_flags(&self, tol: f64) -> Result<()> {
        let scale = self.max_abs();
        if self.parity == Parity::Odd {
            let defect = self
                .iter()
                .map(|(j, v)| (v + self.get(-j)).abs())
                .fold(0.0_f64, f64::max);
            if defect > tol * scale {
                return Err(QcError::Symmetry { defect });
            }
        }
        if self.mean_zero {
            let sum = self.sum().abs();
            let bound = self.len() as f64 * f64::EPSILON * scale;
            if sum > bound.max(tol * scale) {
                return Err(QcError::Config(format!(
                    "field flagged mean-zero has sum {sum:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Selector for the discrete norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `(h sum |u_j|^p)^(1/p)`, `p >= 1`.
    Lp(f64),
    /// `max |u_j|`.
    Max,
}

impl NormKind {
    pub const L1: NormKind = NormKind::Lp(1.0);
    pub const L2: NormKind = NormKind::Lp(2.0);
}

/// `(Du)_j = (u_j - u_{j-1}) / h`.
pub fn backward_difference(u: &PeriodicField, lattice: &LatticeConfig) -> Result<PeriodicField> {
    u.ensure_lattice(lattice)?;
    let inv_h = 1.0 / lattice.h;
    Ok(PeriodicField::from_fn(u.n, |j| (u.get(j) - u.get(j - 1)) * inv_h))
}

/// Discrete norm over one period.
pub fn norm_lp(u: &PeriodicField, p: NormKind, h: f64) -> Result<f64> {
    match p {
        NormKind::Max => Ok(u.max_abs()),
        NormKind::Lp(p) if p.is_nan() || p < 1.0 => Err(QcError::NormDomain(p)),
        NormKind::Lp(p) if p.is_infinite() => Ok(u.max_abs()),
        NormKind::Lp(p) => {
            let s = if p == 1.0 {
                compensated_sum(u.values.iter().map(|v| v.abs()))
            } else if p == 2.0 {
                compensated_sum(u.values.iter().map(|v| v * v))
            } else {
                compensated_sum(u.values.iter().map(|v| v.abs().powf(p)))
            };
            let s = h * s;
            Ok(if p == 1.0 {
                s
            } else if p == 2.0 {
                s.sqrt()
            } else {
                s.powf(1.0 / p)
            })
        }
    }
}

/// `(Su)_j = -u_{-j}`.
pub fn apply_involution(u: &PeriodicField) -> PeriodicField {
    let mut out = PeriodicField::from_fn(u.n, |j| -u.get(-j));
    out.parity = u.parity;
    out.mean_zero = u.mean_zero;
    out
}

/// `u - mean(u)`.
pub fn project_mean_zero(u: &PeriodicField) -> PeriodicField {
    let mean = u.mean();
    PeriodicField {
        n: u.n,
        values: u.values.iter().map(|v| v - mean).collect(),
        parity: u.parity,
        mean_zero: true,
    }
}
