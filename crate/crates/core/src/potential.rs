//! Pair potentials, their linearization about a uniform strain, and the
//! sign conditions the linearized models rely on.

use std::fmt;
use std::str::FromStr;

use crate::error::{QcError, Result};

/// Two-body interatomic potential `phi(r)` with its first two derivatives.
pub trait PairPotential {
    fn energy(&self, r: f64) -> f64;
    fn force_derivative(&self, r: f64) -> f64;
    fn stiffness(&self, r: f64) -> f64;
}

/// Lennard-Jones potential normalized to `phi(r) = r^-12 - 2 r^-6`
/// (minimum `-1` at `r = 1`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LennardJones;

impl PairPotential for LennardJones {
    fn energy(&self, r: f64) -> f64 {
        let s6 = r.powi(-6);
        s6 * s6 - 2.0 * s6
    }

    fn force_derivative(&self, r: f64) -> f64 {
        -12.0 * r.powi(-13) + 12.0 * r.powi(-7)
    }

    fn stiffness(&self, r: f64) -> f64 {
        156.0 * r.powi(-14) - 84.0 * r.powi(-8)
    }
}

/// Potential selection: an evaluated potential, or the four linearization
/// constants supplied directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    LennardJones,
    Explicit {
        phi1_f: f64,
        phi2_f: f64,
        phi1_2f: f64,
        phi2_2f: f64,
    },
}

impl FromStr for PotentialSpec {
    type Err = QcError;

    /// `"lj"` or `"explicit:phi'_F,phi''_F,phi'_2F,phi''_2F"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("lj") {
            return Ok(PotentialSpec::LennardJones);
        }
        let Some(rest) = s.strip_prefix("explicit:") else {
            return Err(QcError::Config(format!("unknown potential '{s}'")));
        };
        let values = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| QcError::Config(format!("potential coefficients '{rest}': {e}")))?;
        match values[..] {
            [phi1_f, phi2_f, phi1_2f, phi2_2f] if values.iter().all(|v| v.is_finite()) => {
                Ok(PotentialSpec::Explicit {
                    phi1_f,
                    phi2_f,
                    phi1_2f,
                    phi2_2f,
                })
            }
            _ => Err(QcError::Config(format!(
                "explicit potential needs four finite coefficients, got '{rest}'"
            ))),
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::LennardJones => write!(f, "lj"),
            PotentialSpec::Explicit {
                phi1_f,
                phi2_f,
                phi1_2f,
                phi2_2f,
            } => write!(f, "explicit:{phi1_f},{phi2_f},{phi1_2f},{phi2_2f}"),
        }
    }
}

/// Linearization constants at strain `F` and the quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedCoeffs {
    /// `phi'(F)`
    pub phi1_f: f64,
    /// `phi''(F)`
    pub phi2_f: f64,
    /// `phi'(2F)`
    pub phi1_2f: f64,
    /// `phi''(2F)`
    pub phi2_2f: f64,
    /// QCE coercivity constant `phi''_F - 5 |phi''_2F|`.
    pub nu_qce: f64,
    /// QNL coercivity constant `phi''_F - 4 |phi''_2F|`.
    pub nu_qnl: f64,
    /// Continuum modulus `phi''_F + 4 phi''_2F`.
    pub c_cont: f64,
    /// Decay root of the atomistic recurrence, when it exists.
    pub lambda: Option<f64>,
}

impl LinearizedCoeffs {
    pub fn new(phi1_f: f64, phi2_f: f64, phi1_2f: f64, phi2_2f: f64) -> Self {
        let mut coeffs = LinearizedCoeffs {
            phi1_f,
            phi2_f,
            phi1_2f,
            phi2_2f,
            nu_qce: phi2_f - 5.0 * phi2_2f.abs(),
            nu_qnl: phi2_f - 4.0 * phi2_2f.abs(),
            c_cont: phi2_f + 4.0 * phi2_2f,
            lambda: None,
        };
        coeffs.lambda = decay_root(&coeffs).ok();
        coeffs
    }

    /// Coefficient of the linear term of the continuum density `W`.
    #[inline]
    pub fn w_linear(&self) -> f64 {
        self.phi1_f + 2.0 * self.phi1_2f
    }

    /// `W(eps) = (phi'_F + 2 phi'_2F) eps + c/2 eps^2`.
    #[inline]
    pub fn w(&self, eps: f64) -> f64 {
        self.w_linear() * eps + 0.5 * self.c_cont * eps * eps
    }

    /// Decay root, or the error explaining why it is unavailable.
    pub fn lambda(&self) -> Result<f64> {
        match self.lambda {
            Some(l) => Ok(l),
            None => decay_root(self),
        }
    }
}

/// Evaluates `phi'` and `phi''` at `F` and `2F`.
pub fn linearize(potential: &PotentialSpec, f: f64) -> Result<LinearizedCoeffs> {
    match *potential {
        PotentialSpec::Explicit {
            phi1_f,
            phi2_f,
            phi1_2f,
            phi2_2f,
        } => Ok(LinearizedCoeffs::new(phi1_f, phi2_f, phi1_2f, phi2_2f)),
        PotentialSpec::LennardJones => linearize_pair(&LennardJones, f),
    }
}

pub fn linearize_pair<P: PairPotential>(potential: &P, f: f64) -> Result<LinearizedCoeffs> {
    if !(f.is_finite() && f > 0.0) {
        return Err(QcError::PotentialDomain(f));
    }
    let eval = |r: f64| -> Result<(f64, f64)> {
        let d1 = potential.force_derivative(r);
        let d2 = potential.stiffness(r);
        if d1.is_finite() && d2.is_finite() {
            Ok((d1, d2))
        } else {
            Err(QcError::PotentialDomain(r))
        }
    };
    let (phi1_f, phi2_f) = eval(f)?;
    let (phi1_2f, phi2_2f) = eval(2.0 * f)?;
    Ok(LinearizedCoeffs::new(phi1_f, phi2_f, phi1_2f, phi2_2f))
}

/// Largest mismatch between the analytic derivatives of `potential` at `r`
/// and central differences of step `step`, relative to `max(|value|, 1)`.
pub fn derivative_mismatch<P: PairPotential>(potential: &P, r: f64, step: f64) -> f64 {
    let fd1 = (potential.energy(r + step) - potential.energy(r - step)) / (2.0 * step);
    let fd2 = (potential.force_derivative(r + step) - potential.force_derivative(r - step))
        / (2.0 * step);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    rel(fd1, potential.force_derivative(r)).max(rel(fd2, potential.stiffness(r)))
}

/// Which coercivity conditions to include in an [`AssumptionReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSelector {
    None,
    Qce,
    Qnl,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    /// Signed margin; the check passes when it is strictly positive.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    /// `phi''_2F >= 0`: the atomistic recurrence has no real decaying root,
    /// so interface errors oscillate instead of decaying.
    pub oscillatory_risk: bool,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Reports, without rejecting, the sign conditions on the linearization.
pub fn check_assumptions(coeffs: &LinearizedCoeffs, which: ModelSelector) -> AssumptionReport {
    let mut checks = Vec::with_capacity(5);
    let mut push = |name, margin: f64| {
        checks.push(AssumptionCheck {
            name,
            margin,
            passed: margin > 0.0,
        })
    };
    push("c_cont > 0", coeffs.c_cont);
    push("phi''_F > 0", coeffs.phi2_f);
    push("phi''_2F < 0", -coeffs.phi2_2f);
    if matches!(which, ModelSelector::Qce | ModelSelector::Both) {
        push("nu_qce > 0", coeffs.nu_qce);
    }
    if matches!(which, ModelSelector::Qnl | ModelSelector::Both) {
        push("nu_qnl > 0", coeffs.nu_qnl);
    }
    AssumptionReport {
        checks,
        oscillatory_risk: coeffs.phi2_2f >= 0.0,
    }
}

/// Discriminants in `[-DISCRIMINANT_FLOOR, 0)` are treated as zero.
pub const DISCRIMINANT_FLOOR: f64 = 1e-14;

/// The root `lambda > 1` of
/// `-b L^2 - a L + 2(a + b) - a / L - b / L^2 = 0` with `a = phi''_F`,
/// `b = phi''_2F`; the remaining roots are `1, 1, 1/lambda`.
pub fn decay_root(coeffs: &LinearizedCoeffs) -> Result<f64> {
    let a = coeffs.phi2_f;
    let b = coeffs.phi2_2f;
    if b == 0.0 {
        return Err(QcError::DegenerateRoot(
            "phi''_2F = 0 leaves a second-order recurrence".into(),
        ));
    }
    if b > 0.0 {
        return Err(QcError::DegenerateRoot(format!(
            "phi''_2F = {b} > 0 gives a negative (oscillatory) root"
        )));
    }
    let mut disc = a * a + 4.0 * a * b;
    if disc < 0.0 {
        if disc >= -DISCRIMINANT_FLOOR {
            disc = 0.0;
        } else {
            return Err(QcError::ComplexRoot(disc));
        }
    }
    let lambda = ((a + 2.0 * b) + disc.sqrt()) / (-2.0 * b);
    if lambda > 1.0 {
        Ok(lambda)
    } else {
        Err(QcError::DegenerateRoot(format!(
            "root {lambda} does not exceed one"
        )))
    }
}

/// Characteristic polynomial of the homogeneous atomistic recurrence,
/// scaled by `1/max(|a|, |b|)` so that residuals are relative.
pub fn characteristic_residual(coeffs: &LinearizedCoeffs, root: f64) -> f64 {
    let a = coeffs.phi2_f;
    let b = coeffs.phi2_2f;
    let inv = 1.0 / root;
    let terms = [
        -b * root * root,
        -a * root,
        2.0 * (a + b),
        -a * inv,
        -b * inv * inv,
    ];
    let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    crate::lattice::compensated_sum(terms) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lennard_jones_at_unit_strain() {
        let c = linearize(&PotentialSpec::LennardJones, 1.0).unwrap();
        assert_eq!(c.phi1_f, 0.0);
        assert_eq!(c.phi2_f, 72.0);
        // 156 * 2^-14 - 84 * 2^-8 and -12 * 2^-13 + 12 * 2^-7, exact in binary.
        assert_eq!(c.phi2_2f, 156.0 / 16384.0 - 84.0 / 256.0);
        assert_eq!(c.phi1_2f, -12.0 / 8192.0 + 12.0 / 128.0);
        assert_relative_eq!(c.phi2_2f, -0.318603515625, max_relative = 1e-15);
        assert_relative_eq!(c.phi1_2f, 0.0922851562, max_relative = 1e-9);
        assert_relative_eq!(c.nu_qce, 72.0 - 5.0 * 0.318603515625, max_relative = 1e-15);
        assert!((c.nu_qce - 70.407).abs() < 1e-3);
    }

    #[test]
    fn explicit_coefficients_pass_through() {
        let spec: PotentialSpec = "explicit:0,1,0.05,-0.1".parse().unwrap();
        let c = linearize(&spec, 123.0).unwrap();
        assert_eq!((c.phi1_f, c.phi2_f, c.phi1_2f, c.phi2_2f), (0.0, 1.0, 0.05, -0.1));
        assert_relative_eq!(c.nu_qce, 0.5, max_relative = 1e-15);
        assert_relative_eq!(c.nu_qnl, 0.6, max_relative = 1e-15);
        assert_relative_eq!(c.c_cont, 0.6, max_relative = 1e-15);
    }

    #[test]
    fn potential_strings() {
        assert_eq!("lj".parse::<PotentialSpec>().unwrap(), PotentialSpec::LennardJones);
        assert!("morse".parse::<PotentialSpec>().is_err());
        assert!("explicit:1,2,3".parse::<PotentialSpec>().is_err());
        assert!("explicit:1,2,3,x".parse::<PotentialSpec>().is_err());
        let s = PotentialSpec::Explicit { phi1_f: 0.0, phi2_f: 1.0, phi1_2f: 0.05, phi2_2f: -0.1 };
        assert_eq!(s.to_string().parse::<PotentialSpec>().unwrap(), s);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            linearize(&PotentialSpec::LennardJones, 0.0),
            Err(QcError::PotentialDomain(_))
        ));
        assert!(linearize(&PotentialSpec::LennardJones, -1.0).is_err());
    }

    #[test]
    fn zero_second_neighbour_is_degenerate() {
        let c = LinearizedCoeffs::new(0.0, 1.0, 0.0, 0.0);
        assert!(c.lambda.is_none());
        assert!(matches!(decay_root(&c), Err(QcError::DegenerateRoot(_))));
    }

    #[test]
    fn decay_root_reference_value() {
        let c = LinearizedCoeffs::new(0.0, 1.0, 0.0, -0.1);
        let l = decay_root(&c).unwrap();
        assert_relative_eq!(l, (0.8 + 0.6f64.sqrt()) / 0.2, max_relative = 1e-15);
        assert!((l - 7.872983).abs() < 1e-6);
        assert!(characteristic_residual(&c, l).abs() < 1e-12);
        assert!(characteristic_residual(&c, 1.0 / l).abs() < 1e-12);
        assert!(characteristic_residual(&c, 1.0).abs() < 1e-15);
    }

    #[test]
    fn decay_root_error_paths() {
        // a^2 + 4ab < 0 requires a + 4b < 0.
        let c = LinearizedCoeffs::new(0.0, 1.0, 0.0, -0.3);
        assert!(matches!(decay_root(&c), Err(QcError::ComplexRoot(_))));
        let c = LinearizedCoeffs::new(0.0, 1.0, 0.0, 0.1);
        assert!(decay_root(&c).is_err());
    }

    #[test]
    fn assumption_report_boundaries() {
        let lj = linearize(&PotentialSpec::LennardJones, 1.0).unwrap();
        let r = check_assumptions(&lj, ModelSelector::Both);
        assert!(r.all_passed());
        assert!(!r.oscillatory_risk);

        let c = LinearizedCoeffs::new(0.0, 0.4, 0.0, -0.1);
        let r = check_assumptions(&c, ModelSelector::Both);
        let qce = r.get("nu_qce > 0").unwrap();
        assert!(!qce.passed);
        assert_relative_eq!(qce.margin, -0.1, max_relative = 1e-12);
        let qnl = r.get("nu_qnl > 0").unwrap();
        assert!(!qnl.passed);
        assert!(qnl.margin.abs() < 1e-15);

        let c = LinearizedCoeffs::new(0.0, 1.0, 0.0, 0.1);
        let r = check_assumptions(&c, ModelSelector::None);
        assert!(!r.get("phi''_2F < 0").unwrap().passed);
        assert!(r.oscillatory_risk);
        assert!(r.get("nu_qce > 0").is_none());
    }

    #[test]
    fn lennard_jones_matches_finite_differences() {
        for r in [0.9, 1.0, 1.3, 2.0, 2.6] {
            assert!(derivative_mismatch(&LennardJones, r, 1e-6) < 1e-6, "r = {r}");
        }
    }
}
