mod common;

use common::{lj, random_field};
use nalgebra::DVector;
use quasicontinuum::analysis::{convergence_sweep, KRule};
use quasicontinuum::lattice::{apply_involution, project_mean_zero};
use quasicontinuum::load::{sin_pi, SineMode};
use quasicontinuum::operators::apply;
use quasicontinuum::solver::{solve_factored, MeanZeroFactor, RESIDUAL_TOL};
use quasicontinuum::prelude::*;

#[test]
fn continuum_solution_is_the_discrete_sine_mode() {
    let coeffs = lj();
    for n in [16usize, 64, 256] {
        let lattice = LatticeConfig::periodic(n, 1.0).unwrap();
        for (m, amp) in [(1u32, 1.0), (3, -0.4), (7, 2.5)] {
            let u = solve_model(Model::Continuum, &lattice, &coeffs, &LoadSpec::sine(m, amp))
                .unwrap()
                .solution;
            let theta = m as f64 * std::f64::consts::PI * lattice.h;
            let symbol = coeffs.c_cont * (2.0 - 2.0 * theta.cos()) / (lattice.h * lattice.h);
            for (j, v) in u.iter() {
                let want = amp * sin_pi(m as f64 * lattice.x(j)) / symbol;
                assert!((v - want).abs() <= 1e-10 * (amp / symbol).abs(), "N={n} m={m} j={j}");
            }
        }
    }
}

#[test]
fn atomistic_solution_matches_pseudo_inverse() {
    let lattice = LatticeConfig::periodic(8, 1.0).unwrap();
    let op = assemble(Model::Atomistic, &lattice, &lj()).unwrap();
    let eig = op.to_dense().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let inv = DVector::from_iterator(
        16,
        eig.eigenvalues.iter().map(|&l| if l.abs() > 1e-10 * top { 1.0 / l } else { 0.0 }),
    );
    let pinv = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    for seed in 0..5 {
        let b = project_mean_zero(&random_field(8, 1.0, seed));
        let want = &pinv * DVector::from_column_slice(b.values());
        let got = solve_mean_zero(&op, &b).unwrap().solution;
        for (g, w) in got.values().iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-12 * want.amax());
        }
    }
}

#[test]
fn solutions_are_odd_for_every_model() {
    let load = LoadSpec {
        modes: vec![
            SineMode { m: 1, amplitude: 1.0 },
            SineMode { m: 3, amplitude: 0.4 },
        ],
    };
    let lattice = LatticeConfig::new(64, 16, 1.0).unwrap();
    for coeffs in [lj(), linearize(&PotentialSpec::LennardJones, 1.05).unwrap()] {
        for model in Model::ALL {
            let u = solve_model(model, &lattice, &coeffs, &load).unwrap().solution;
            let defect = u.axpy(-1.0, &apply_involution(&u)).unwrap().max_abs();
            assert!(defect <= 1e-12 * u.max_abs(), "{model}: {defect}");
        }
    }
}

#[test]
fn residuals_meet_the_backward_error_bound() {
    let coeffs = lj();
    let lattice = LatticeConfig::new(128, 32, 1.0).unwrap();
    for model in Model::ALL {
        let op = assemble(model, &lattice, &coeffs).unwrap();
        let factor = MeanZeroFactor::new(&op).unwrap();
        for seed in 0..50 {
            let b = project_mean_zero(&random_field(128, 1.0, 1000 + seed));
            let u = solve_factored(&op, &factor, &b).unwrap().solution;
            assert!(u.mean().abs() <= 1e-14 * u.max_abs());
            let r = apply(&op, &u).unwrap().axpy(-1.0, &b).unwrap().max_abs();
            let bound = RESIDUAL_TOL * (op.inf_norm() * u.max_abs() + b.max_abs());
            assert!(r <= bound, "{model} seed {seed}: {r} > {bound}");
        }
    }
}

#[test]
fn incompatible_load_is_rejected() {
    let lattice = LatticeConfig::periodic(16, 1.0).unwrap();
    let op = assemble(Model::Atomistic, &lattice, &lj()).unwrap();
    let b = PeriodicField::from_fn(16, |_| 1.0);
    assert!(solve_mean_zero(&op, &b).is_err());
}

#[test]
fn atomistic_model_is_second_order() {
    let r = convergence_sweep(
        Model::Atomistic,
        &PotentialSpec::LennardJones,
        1.0,
        &LoadSpec::sine(1, 1.0),
        &[32, 64, 128, 256, 512],
        KRule::Fraction(0.25),
    )
    .unwrap();
    for metric in ["e_linf", "de_l2", "de_linf"] {
        let rate = r.rate(metric).unwrap();
        assert!((1.9..=2.1).contains(&rate), "{metric}: {rate}");
    }
}
