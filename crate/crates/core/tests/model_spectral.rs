use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use nfl_core::fock::{ModeGrid, OneBosonFunction};
use nfl_core::model::{
    assemble_hamiltonian, assemble_transformed, BosonDispersion, FockSpace, FormFactor, ModelSpec, ParticleDispersion,
};
use nfl_core::spectral::{sign_pattern_check, FiberSolver, SolverOptions};

fn spec(coupling: f64, alpha: f64, p: f64, mu: f64) -> ModelSpec {
    ModelSpec {
        dispersion: ParticleDispersion::nonrelativistic(1.0),
        boson: BosonDispersion { mu },
        form_factor: FormFactor {
            coupling,
            alpha,
            cutoff: 4.0,
        },
        momentum: vec![p],
    }
}

fn lowest_dense(h: &nfl_core::linalg::CsrMatrix<f64>) -> f64 {
    let n = h.nrows();
    let m = DMatrix::from_fn(n, n, |r, c| h.get(r, c));
    m.symmetric_eigen().eigenvalues.min()
}

#[test]
fn two_mode_closed_form() {
    // modes at k = ±1 and one boson at most: the even sector is 2x2
    let grid = ModeGrid::build(1, 2.0, 2).unwrap();
    let space = FockSpace::new(grid, 1, 16).unwrap();
    for (lambda, mu) in [(0.5, 0.1), (1.3, 0.4), (0.05, 0.0)] {
        let s = spec(lambda, 0.25, 0.0, mu);
        let h = assemble_hamiltonian(&space, &s).unwrap();
        let diag = s.dispersion.theta(&[1.0]) + s.boson.omega(&[1.0]);
        let g = 2.0 * s.form_factor.value(&[1.0]);
        let closed = diag / 2.0 - (diag * diag / 4.0 + g * g).sqrt();
        assert!((lowest_dense(&h) - closed).abs() <= 1e-12, "lambda {lambda}");
    }
}

#[test]
fn free_fiber_has_vacuum_ground_state() {
    let grid = ModeGrid::build(1, 4.0, 8).unwrap();
    let space = Arc::new(FockSpace::new(grid, 3, 10_000).unwrap());
    for p in [0.0, 0.3, -0.45] {
        let s = spec(0.0, 0.25, p, 0.1);
        let solver = FiberSolver::new(space.clone(), s.clone(), SolverOptions::default()).unwrap();
        let rec = solver.ground_state(&[p], 0.1);
        assert!((rec.energy - p * p / 2.0).abs() <= 1e-12);
        assert!((rec.psi[0].abs() - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn lanczos_agrees_with_dense_and_sign_pattern_holds() {
    let grid = ModeGrid::build(1, 4.0, 6).unwrap();
    let space = Arc::new(FockSpace::new(grid, 3, 10_000).unwrap());
    let s = spec(0.5, 0.25, 0.3, 0.1);
    let solver = FiberSolver::new(space.clone(), s.clone(), SolverOptions::default()).unwrap();
    let rec = solver.ground_state(&[0.3], 0.1);
    let dense = lowest_dense(&solver.hamiltonian(&[0.3], 0.1));
    assert!((rec.energy - dense).abs() <= 1e-10);
    assert!((solver.energy(&[0.3], 0.1) - dense).abs() <= 1e-10);
    let sp = sign_pattern_check(&space, &rec, &s.form_factor);
    assert!(sp.holds, "{sp:?}");
}

#[test]
fn transformed_spectrum_converges_to_the_hamiltonian() {
    // T(P, f) and H(P) are unitarily equivalent before truncation, so the gap
    // between their lowest truncated eigenvalues must shrink with N
    let grid = ModeGrid::build(1, 2.0, 4).unwrap();
    let s = spec(0.3, 0.25, 0.2, 0.2);
    let f = grid.function(|k: &[f64]| 0.05 * k[0].cos());
    let gaps: Vec<f64> = (3..=6)
        .map(|n| {
            let space = FockSpace::new(grid.clone(), n, 10_000).unwrap().with_extension(100_000).unwrap();
            let t = assemble_transformed(&space, &s, &f).unwrap().to_csr();
            let h = assemble_hamiltonian(&space, &s).unwrap();
            (lowest_dense(&t) - lowest_dense(&h)).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] <= 1e-5, "{gaps:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn transformed_at_zero_is_the_hamiltonian(
        lambda in 0.0f64..1.5,
        p in -0.8f64..0.8,
        mu in 0.0f64..0.5,
    ) {
        let grid = ModeGrid::build(1, 3.0, 4).unwrap();
        let space = FockSpace::new(grid, 3, 10_000).unwrap().with_extension(100_000).unwrap();
        let s = spec(lambda, 0.25, p, mu);
        let zero = OneBosonFunction::zeros(4);
        let t = assemble_transformed(&space, &s, &zero).unwrap().to_csr();
        let h = assemble_hamiltonian(&space, &s).unwrap();
        prop_assert!(t.max_abs_diff(&h) <= 1e-12);
    }
}
