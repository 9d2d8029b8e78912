#![allow(dead_code)]

use nalgebra::DMatrix;
use quasicontinuum::operators::{energy_with, EnergyTerms};
use quasicontinuum::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn lj() -> LinearizedCoeffs {
    linearize(&PotentialSpec::LennardJones, 1.0).unwrap()
}

pub fn random_field(n: usize, amplitude: f64, seed: u64) -> PeriodicField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PeriodicField::from_fn(n, |_| amplitude * rng.gen_range(-1.0..1.0))
}

fn bumped(u: &PeriodicField, moves: &[(usize, f64)]) -> PeriodicField {
    let mut v = u.clone();
    for &(i, d) in moves {
        v.values_mut()[i] += d;
    }
    v
}

/// Four-point central second differences of the energy, in storage order.
pub fn fd_hessian(
    model: Model,
    lattice: &LatticeConfig,
    coeffs: &LinearizedCoeffs,
    u: &PeriodicField,
    step: f64,
) -> DMatrix<f64> {
    let len = lattice.len();
    let e = |v: &PeriodicField| energy_with(model, v, lattice, coeffs, EnergyTerms::Full).unwrap();
    let mut hess = DMatrix::zeros(len, len);
    for i in 0..len {
        for k in 0..len {
            let pp = e(&bumped(u, &[(i, step), (k, step)]));
            let pm = e(&bumped(u, &[(i, step), (k, -step)]));
            let mp = e(&bumped(u, &[(i, -step), (k, step)]));
            let mm = e(&bumped(u, &[(i, -step), (k, -step)]));
            hess[(i, k)] = (pp - pm - mp + mm) / (4.0 * step * step);
        }
    }
    hess
}

/// Central-difference gradient of the energy, in storage order.
pub fn fd_gradient(
    model: Model,
    lattice: &LatticeConfig,
    coeffs: &LinearizedCoeffs,
    u: &PeriodicField,
    step: f64,
) -> Vec<f64> {
    let e = |v: &PeriodicField| energy(model, v, lattice, coeffs).unwrap();
    (0..lattice.len())
        .map(|i| (e(&bumped(u, &[(i, step)])) - e(&bumped(u, &[(i, -step)]))) / (2.0 * step))
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}
