//! Model operators, the QCE ghost-force vector and the energy functionals.
//!
//! Every operator couples a site to at most its second neighbours, so it is
//! stored as five periodic bands (offsets `-2..=2`). QCE and QNL rows are a
//! bulk stencil chosen by region plus interface corrections; the corrections
//! at the right interface are written out for rows `K-1..=K+2` and copied to
//! the left interface through `L_{i,j} = L_{-i,-j}`. When the two interfaces
//! touch across the period seam (`K = N - 2`) both copies land on row `N`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{QcError, Result};
use crate::lattice::{compensated_sum, slot, LatticeConfig, Parity, PeriodicField};
use crate::potential::{check_assumptions, AssumptionReport, LinearizedCoeffs, ModelSelector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    Atomistic,
    Continuum,
    Qce,
    Qnl,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Atomistic, Model::Continuum, Model::Qce, Model::Qnl];

    pub fn name(self) -> &'static str {
        match self {
            Model::Atomistic => "atomistic",
            Model::Continuum => "continuum",
            Model::Qce => "qce",
            Model::Qnl => "qnl",
        }
    }

    pub fn has_interface(self) -> bool {
        matches!(self, Model::Qce | Model::Qnl)
    }

    fn selector(self) -> ModelSelector {
        match self {
            Model::Qce => ModelSelector::Qce,
            Model::Qnl => ModelSelector::Qnl,
            _ => ModelSelector::None,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = QcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "atomistic" | "a" => Ok(Model::Atomistic),
            "continuum" | "c" => Ok(Model::Continuum),
            "qce" => Ok(Model::Qce),
            "qnl" => Ok(Model::Qnl),
            other => Err(QcError::Config(format!("unknown model '{other}'"))),
        }
    }
}

const BAND: usize = 5;

/// Symmetric periodic operator with bandwidth two.
#[derive(Debug, Clone)]
pub struct PeriodicOperator {
    pub model: Model,
    pub lattice: LatticeConfig,
    pub coeffs: LinearizedCoeffs,
    /// Sign conditions at assembly time; failures are recorded, not fatal.
    pub assumptions: AssumptionReport,
    bands: Vec<[f64; BAND]>,
}

struct BandBuilder {
    n: usize,
    bands: Vec<[f64; BAND]>,
}

impl BandBuilder {
    fn new(n: usize) -> Self {
        BandBuilder {
            n,
            bands: vec![[0.0; BAND]; 2 * n],
        }
    }

    #[inline]
    fn add(&mut self, row: i64, offset: i64, value: f64) {
        debug_assert!(offset.abs() <= 2);
        self.bands[slot(self.n, row)][(offset + 2) as usize] += value;
    }

    /// Adds the entry at `(row, row + offset)` to the right interface, or its
    /// image `(-row, -row - offset)` on the left.
    #[inline]
    fn add_sided(&mut self, mirrored: bool, row: i64, offset: i64, value: f64) {
        if mirrored {
            self.add(-row, -offset, value);
        } else {
            self.add(row, offset, value);
        }
    }

    /// `s (-u_{j+1} + 2 u_j - u_{j-1}) / h^2`
    fn nearest(&mut self, row: i64, s: f64) {
        self.add(row, -1, -s);
        self.add(row, 0, 2.0 * s);
        self.add(row, 1, -s);
    }

    /// `s (-u_{j+2} + 2 u_j - u_{j-2}) / (4 h^2)`, with `s` already divided by 4.
    fn second(&mut self, row: i64, s: f64) {
        self.add(row, -2, -s);
        self.add(row, 0, 2.0 * s);
        self.add(row, 2, -s);
    }
}

/// Assembles the operator of `model`.
pub fn assemble(
    model: Model,
    lattice: &LatticeConfig,
    coeffs: &LinearizedCoeffs,
) -> Result<PeriodicOperator> {
    if model.has_interface() {
        lattice.validate_interface()?;
    }
    let n = lattice.n as i64;
    let k = lattice.k as i64;
    let ih2 = 1.0 / (lattice.h * lattice.h);
    let a = coeffs.phi2_f * ih2;
    let b = coeffs.phi2_2f * ih2;
    let mut bb = BandBuilder::new(lattice.n);

    for j in (-n + 1)..=n {
        match model {
            Model::Atomistic => {
                bb.nearest(j, a);
                bb.second(j, b);
            }
            Model::Continuum => bb.nearest(j, coeffs.c_cont * ih2),
            Model::Qce | Model::Qnl => {
                bb.nearest(j, a);
                if j.abs() <= k {
                    bb.second(j, b);
                } else {
                    bb.nearest(j, 4.0 * b);
                }
            }
        }
    }

    for mirrored in [false, true] {
        match model {
            Model::Qce => {
                // j = K - 1: + (b/h) (u_{j+2} - u_j) / (2h)
                bb.add_sided(mirrored, k - 1, 2, 0.5 * b);
                bb.add_sided(mirrored, k - 1, 0, -0.5 * b);
                // j = K: - (2b/h) (u_{j+1} - u_j)/h + (b/h) (u_{j+2} - u_j)/(2h)
                bb.add_sided(mirrored, k, 1, -2.0 * b);
                bb.add_sided(mirrored, k, 0, 2.0 * b);
                bb.add_sided(mirrored, k, 2, 0.5 * b);
                bb.add_sided(mirrored, k, 0, -0.5 * b);
                // j = K + 1: - (2b/h) (u_j - u_{j-1})/h + (b/h) (u_j - u_{j-2})/(2h)
                bb.add_sided(mirrored, k + 1, 0, -2.0 * b);
                bb.add_sided(mirrored, k + 1, -1, 2.0 * b);
                bb.add_sided(mirrored, k + 1, 0, 0.5 * b);
                bb.add_sided(mirrored, k + 1, -2, -0.5 * b);
                // j = K + 2: + (b/h) (u_j - u_{j-2})/(2h)
                bb.add_sided(mirrored, k + 2, 0, 0.5 * b);
                bb.add_sided(mirrored, k + 2, -2, -0.5 * b);
            }
            Model::Qnl => {
                // j = K: - b (-u_{j+2} + 2 u_{j+1} - u_j) / h^2
                bb.add_sided(mirrored, k, 2, b);
                bb.add_sided(mirrored, k, 1, -2.0 * b);
                bb.add_sided(mirrored, k, 0, b);
                // j = K + 1: + b (-u_j + 2 u_{j-1} - u_{j-2}) / h^2
                bb.add_sided(mirrored, k + 1, 0, -b);
                bb.add_sided(mirrored, k + 1, -1, 2.0 * b);
                bb.add_sided(mirrored, k + 1, -2, -b);
            }
            Model::Atomistic | Model::Continuum => {}
        }
    }

    let op = PeriodicOperator {
        model,
        lattice: *lattice,
        coeffs: *coeffs,
        assumptions: check_assumptions(coeffs, model.selector()),
        bands: bb.bands,
    };
    op.verify_structure()?;
    Ok(op)
}

impl PeriodicOperator {
    #[inline]
    pub fn n(&self) -> usize {
        self.lattice.n
    }

    /// Band coefficient at `(row, row + offset)` for `offset` in `-2..=2`.
    #[inline]
    pub fn band(&self, row: i64, offset: i64) -> f64 {
        self.bands[slot(self.lattice.n, row)][(offset + 2) as usize]
    }

    /// Matrix entry `L_{row,col}` in lattice indices (periodic).
    pub fn entry(&self, row: i64, col: i64) -> f64 {
        let period = 2 * self.lattice.n as i64;
        (-2..=2)
            .filter(|d| (row + d - col).rem_euclid(period) == 0)
            .map(|d| self.band(row, d))
            .sum()
    }

    /// Largest absolute entry over all rows (`||L||_inf` up to the band count).
    pub fn max_abs(&self) -> f64 {
        self.bands
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.bands
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    }

    /// Symmetry (to rounding), exact `L_{i,j} = L_{-i,-j}`, and zero row sums.
    pub fn verify_structure(&self) -> Result<()> {
        let n = self.lattice.n as i64;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for j in (-n + 1)..=n {
            for d in -2..=2 {
                let v = self.entry(j, j + d);
                let t = self.entry(j + d, j);
                if (v - t).abs() > 1e-13 * scale {
                    return Err(QcError::Assembly(format!(
                        "{} operator not symmetric at ({j}, {}): {v} vs {t}",
                        self.model,
                        j + d
                    )));
                }
                let m = self.entry(-j, -j - d);
                if v.to_bits() != m.to_bits() && !(v == 0.0 && m == 0.0) {
                    return Err(QcError::Assembly(format!(
                        "{} operator breaks the mirror rule at ({j}, {}): {v} vs {m}",
                        self.model,
                        j + d
                    )));
                }
            }
            let row_sum: f64 = self.bands[slot(self.lattice.n, j)].iter().sum();
            if row_sum.abs() > 1e-12 * scale {
                return Err(QcError::Assembly(format!(
                    "{} operator row {j} sums to {row_sum:e}",
                    self.model
                )));
            }
        }
        Ok(())
    }

    /// Dense copy in storage order (slot `i` holds lattice index `i - N + 1`).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let len = 2 * self.lattice.n;
        let mut m = DMatrix::zeros(len, len);
        for (i, row) in self.bands.iter().enumerate() {
            let j = i as i64 - self.lattice.n as i64 + 1;
            for (c, &v) in row.iter().enumerate() {
                let col = slot(self.lattice.n, j + c as i64 - 2);
                m[(i, col)] += v;
            }
        }
        m
    }

    /// Plain-text triplets `i j value` in lattice indices, one nonzero per
    /// line, rows then columns ascending.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.lattice.n as i64;
        for row in (-n + 1)..=n {
            let mut cols: Vec<i64> = (-2..=2)
                .map(|d| (row + d + n - 1).rem_euclid(2 * n) - n + 1)
                .collect();
            cols.sort_unstable();
            cols.dedup();
            for col in cols {
                let v = self.entry(row, col);
                if v != 0.0 {
                    writeln!(out, "{row} {col} {v:.16e}")?;
                }
            }
        }
        Ok(())
    }
}

/// `L u` in lattice indexing.
pub fn apply(op: &PeriodicOperator, u: &PeriodicField) -> Result<PeriodicField> {
    u.ensure_lattice(&op.lattice)?;
    Ok(PeriodicField::from_fn(op.lattice.n, |j| {
        let row = &op.bands[slot(op.lattice.n, j)];
        row[0] * u.get(j - 2)
            + row[1] * u.get(j - 1)
            + row[2] * u.get(j)
            + row[3] * u.get(j + 1)
            + row[4] * u.get(j + 2)
    }))
}

/// Spurious QCE interface forcing `g`, odd and supported on `+-{K-1..K+2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostVector {
    pub g: PeriodicField,
}

pub fn ghost_vector(lattice: &LatticeConfig, coeffs: &LinearizedCoeffs) -> Result<GhostVector> {
    lattice.validate_interface()?;
    let k = lattice.k as i64;
    let s = coeffs.phi1_2f / (2.0 * lattice.h);
    let mut g = PeriodicField::zeros(lattice.n);
    for (j, v) in [(k - 1, -s), (k, s), (k + 1, s), (k + 2, -s)] {
        g.add(j, v);
        g.add(-j, -v);
    }
    g.parity = Parity::Odd;
    Ok(GhostVector { g })
}

/// Which terms of the energy to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyTerms {
    /// Linear and quadratic terms.
    Full,
    /// Quadratic terms only.
    Quadratic,
}

struct Densities<'a> {
    c: &'a LinearizedCoeffs,
    h: f64,
    terms: EnergyTerms,
}

impl Densities<'_> {
    #[inline]
    fn pair(&self, lin: f64, quad: f64, eps: f64) -> f64 {
        match self.terms {
            EnergyTerms::Full => lin * eps + 0.5 * quad * eps * eps,
            EnergyTerms::Quadratic => 0.5 * quad * eps * eps,
        }
    }
    #[inline]
    fn nearest(&self, eps: f64) -> f64 {
        self.pair(self.c.phi1_f, self.c.phi2_f, eps)
    }
    #[inline]
    fn second(&self, eps: f64) -> f64 {
        self.pair(self.c.phi1_2f, self.c.phi2_2f, eps)
    }
    #[inline]
    fn w(&self, eps: f64) -> f64 {
        self.pair(self.c.w_linear(), self.c.c_cont, eps)
    }

    /// `h W(D u_l)` for the element `(x_{l-1}, x_l)`.
    fn element<U: Fn(i64) -> f64>(&self, u: &U, l: i64) -> f64 {
        self.h * self.w((u(l) - u(l - 1)) / self.h)
    }

    /// Atomistic energy of site `j` with each bond split evenly.
    fn atom<U: Fn(i64) -> f64>(&self, u: &U, j: i64) -> f64 {
        let h = self.h;
        0.5 * h
            * (self.nearest((u(j + 1) - u(j)) / h) + self.second((u(j + 2) - u(j)) / h))
            + 0.5 * h
                * (self.nearest((u(j) - u(j - 1)) / h) + self.second((u(j) - u(j - 2)) / h))
    }

    /// Quasi-nonlocal site `K`: continuum to the right, atomistic to the left.
    fn qnl_k<U: Fn(i64) -> f64>(&self, u: &U, k: i64) -> f64 {
        let h = self.h;
        0.5 * h * self.w((u(k + 1) - u(k)) / h)
            + 0.5 * h
                * (self.nearest((u(k) - u(k - 1)) / h) + self.second((u(k) - u(k - 2)) / h))
    }

    /// Quasi-nonlocal site `K + 1`.
    fn qnl_k1<U: Fn(i64) -> f64>(&self, u: &U, k: i64) -> f64 {
        let h = self.h;
        0.5 * h * self.w((u(k + 2) - u(k + 1)) / h)
            + 0.5 * h
                * (self.nearest((u(k + 1) - u(k)) / h)
                    + self.second((u(k + 1) - u(k - 1)) / h))
    }
}

/// Total elastic energy per period of `model` (without the external load).
pub fn energy(
    model: Model,
    u: &PeriodicField,
    lattice: &LatticeConfig,
    coeffs: &LinearizedCoeffs,
) -> Result<f64> {
    energy_with(model, u, lattice, coeffs, EnergyTerms::Full)
}

pub fn energy_with(
    model: Model,
    u: &PeriodicField,
    lattice: &LatticeConfig,
    coeffs: &LinearizedCoeffs,
    terms: EnergyTerms,
) -> Result<f64> {
    u.ensure_lattice(lattice)?;
    if model.has_interface() {
        lattice.validate_interface()?;
    }
    let e = Densities {
        c: coeffs,
        h: lattice.h,
        terms,
    };
    let h = lattice.h;
    let n = lattice.n as i64;
    let k = lattice.k as i64;
    let uf = |j: i64| u.get(j);
    let su = |j: i64| -u.get(-j);
    let mut parts: Vec<f64> = Vec::with_capacity(2 * lattice.n + 8);

    match model {
        Model::Atomistic => {
            for j in (-n + 1)..=n {
                parts.push(
                    h * (e.nearest((u.get(j) - u.get(j - 1)) / h)
                        + e.second((u.get(j) - u.get(j - 2)) / h)),
                );
            }
        }
        Model::Continuum => {
            for l in (-n + 1)..=n {
                parts.push(e.element(&uf, l));
            }
        }
        Model::Qce => {
            for l in (-n + 1)..=(-k - 1) {
                parts.push(e.element(&uf, l));
            }
            parts.push(0.5 * e.element(&uf, -k));
            for j in -k..=k {
                parts.push(e.atom(&uf, j));
            }
            parts.push(0.5 * e.element(&uf, k + 1));
            for l in (k + 2)..=n {
                parts.push(e.element(&uf, l));
            }
        }
        Model::Qnl => {
            for l in (-n + 1)..=(-k - 2) {
                parts.push(e.element(&uf, l));
            }
            parts.push(0.5 * e.element(&uf, -k - 1));
            // Sites -K-1 and -K are the images of K+1 and K under u -> Su.
            parts.push(e.qnl_k1(&su, k));
            parts.push(e.qnl_k(&su, k));
            for j in (-k + 1)..=(k - 1) {
                parts.push(e.atom(&uf, j));
            }
            parts.push(e.qnl_k(&uf, k));
            parts.push(e.qnl_k1(&uf, k));
            parts.push(0.5 * e.element(&uf, k + 2));
            for l in (k + 3)..=n {
                parts.push(e.element(&uf, l));
            }
        }
    }
    Ok(compensated_sum(parts))
}

/// `h sum_j f_j u_j`.
pub fn external_work(f: &PeriodicField, u: &PeriodicField, h: f64) -> Result<f64> {
    f.dot(u, h)
}
