//! Odd periodic dead loads built from sine modes and the closed-form
//! solution of the continuum problem `-c u'' = f` they induce.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{QcError, Result};
use crate::lattice::{LatticeConfig, Parity, PeriodicField};
use crate::potential::LinearizedCoeffs;

/// `sin(pi x)` with exact zeros at the integers, exact `+-1` at the
/// half-integers and exact oddness.
pub fn sin_pi(x: f64) -> f64 {
    let mut r = x - 2.0 * (0.5 * x).round();
    if r > 0.5 {
        r = 1.0 - r;
    } else if r < -0.5 {
        r = -1.0 - r;
    }
    (PI * r).sin()
}

/// `cos(pi x)`.
pub fn cos_pi(x: f64) -> f64 {
    let r = (x - 2.0 * (0.5 * x).round()).abs();
    if r <= 0.5 {
        sin_pi(0.5 - r)
    } else {
        -sin_pi(r - 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineMode {
    pub m: u32,
    pub amplitude: f64,
}

/// `f(x) = sum_k A_k sin(m_k pi x)`; the empty sum is the zero load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadSpec {
    pub modes: Vec<SineMode>,
}

impl LoadSpec {
    pub fn zero() -> Self {
        LoadSpec { modes: Vec::new() }
    }

    pub fn sine(m: u32, amplitude: f64) -> Self {
        LoadSpec {
            modes: vec![SineMode { m, amplitude }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.amplitude == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.modes
            .iter()
            .map(|s| s.amplitude * sin_pi(s.m as f64 * x))
            .sum()
    }
}

impl FromStr for LoadSpec {
    type Err = QcError;

    /// `"zero"` or `"sin:m,A[;m,A...]"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("zero") {
            return Ok(LoadSpec::zero());
        }
        let Some(rest) = s.strip_prefix("sin:") else {
            return Err(QcError::Config(format!("unknown load '{s}'")));
        };
        let mut modes = Vec::new();
        for term in rest.split(';') {
            let (m, a) = term
                .split_once(',')
                .ok_or_else(|| QcError::Config(format!("load term '{term}' is not 'm,A'")))?;
            let m: u32 = m
                .trim()
                .parse()
                .map_err(|e| QcError::Config(format!("load mode '{m}': {e}")))?;
            let amplitude: f64 = a
                .trim()
                .parse()
                .map_err(|e| QcError::Config(format!("load amplitude '{a}': {e}")))?;
            if m == 0 || !amplitude.is_finite() {
                return Err(QcError::Config(format!(
                    "load term '{term}' needs m >= 1 and finite A"
                )));
            }
            modes.push(SineMode { m, amplitude });
        }
        Ok(LoadSpec { modes })
    }
}

impl fmt::Display for LoadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.modes.is_empty() {
            return write!(f, "zero");
        }
        write!(f, "sin:")?;
        for (i, s) in self.modes.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{},{}", s.m, s.amplitude)?;
        }
        Ok(())
    }
}

/// Samples `f_j = f(x_j)` and checks the zero-resultant condition.
pub fn sample_load(spec: &LoadSpec, lattice: &LatticeConfig) -> Result<PeriodicField> {
    let f = PeriodicField::from_fn(lattice.n, |j| spec.eval(lattice.x(j))).with_parity(Parity::Odd);
    let sum = f.sum();
    let tol = f.len() as f64 * f64::EPSILON * f.max_abs();
    if sum.abs() > tol {
        return Err(QcError::Load { sum, tol });
    }
    Ok(f)
}

/// Odd 2-periodic solution of `-c_cont u'' = f` and its derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub modes: Vec<SineMode>,
    pub c_cont: f64,
}

pub fn exact_solution(spec: &LoadSpec, coeffs: &LinearizedCoeffs) -> Result<ExactSolution> {
    if !(coeffs.c_cont > 0.0) {
        return Err(QcError::Ellipticity(coeffs.c_cont));
    }
    Ok(ExactSolution {
        modes: spec.modes.clone(),
        c_cont: coeffs.c_cont,
    })
}

impl ExactSolution {
    /// `d^order u_e / dx^order` at `x`, for `order <= 4`.
    pub fn derivative(&self, order: u32, x: f64) -> f64 {
        assert!(order <= 4, "derivatives above fourth order are not tabulated");
        self.modes
            .iter()
            .map(|s| {
                let w = s.m as f64 * PI;
                // u_e = A sin(w x) / (c w^2); each derivative multiplies by w
                // and advances the phase by a quarter turn.
                let scale = s.amplitude * w.powi(order as i32 - 2) / self.c_cont;
                let arg = s.m as f64 * x;
                scale
                    * match order % 4 {
                        0 => sin_pi(arg),
                        1 => cos_pi(arg),
                        2 => -sin_pi(arg),
                        _ => -cos_pi(arg),
                    }
            })
            .sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// `u_e(x_j)` on the lattice, flagged odd.
    pub fn sample(&self, lattice: &LatticeConfig) -> PeriodicField {
        PeriodicField::from_fn(lattice.n, |j| self.value(lattice.x(j))).with_parity(Parity::Odd)
    }

    /// `||u_e''''||_{L^2(-1,1)}` from mode orthogonality.
    pub fn fourth_derivative_l2(&self) -> f64 {
        let mut by_mode: BTreeMap<u32, f64> = BTreeMap::new();
        for s in &self.modes {
            let w = s.m as f64 * PI;
            *by_mode.entry(s.m).or_default() += s.amplitude * w * w / self.c_cont;
        }
        by_mode.values().map(|c| c * c).sum::<f64>().sqrt()
    }
}
