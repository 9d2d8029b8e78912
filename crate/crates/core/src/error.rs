use thiserror::Error;

/// Errors produced by the quasicontinuum library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("field of length {actual} does not match lattice with 2N = {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("norm exponent p = {0} is outside [1, inf]")]
    NormDomain(f64),

    #[error("potential cannot be evaluated at r = {0}")]
    PotentialDomain(f64),

    #[error("characteristic equation has complex roots (discriminant {0:e})")]
    ComplexRoot(f64),

    #[error("decay root is degenerate: {0}")]
    DegenerateRoot(String),

    #[error("load violates zero resultant: sum f_j = {sum:e} exceeds tolerance {tol:e}")]
    Load { sum: f64, tol: f64 },

    #[error("continuum problem is not elliptic: phi''_F + 4 phi''_2F = {0}")]
    Ellipticity(f64),

    #[error("right-hand side is incompatible: |sum b_j| = {defect:e} exceeds {tol:e}")]
    IncompatibleRhs { defect: f64, tol: f64 },

    #[error("factorization broke down at pivot {index} (value {pivot:e})")]
    Singular { index: usize, pivot: f64 },

    #[error("solve residual {residual:e} exceeds bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("solution lost odd symmetry: |u + Su| = {defect:e}")]
    Symmetry { defect: f64 },

    #[error("operator assembly inconsistency: {0}")]
    Assembly(String),

    #[error("interface construction failed: {0}")]
    Interface(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QcError {
    fn from(e: std::io::Error) -> Self {
        QcError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QcError>;
