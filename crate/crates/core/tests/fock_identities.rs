use proptest::prelude::*;

use nfl_core::fock::{
    basis_size, ccr_residual, dgamma_additivity, dgamma_creation, number_identity, number_expectation, weyl_dgamma_law,
    weyl_field_law, FockBasis, ModeGrid, OneBosonFunction,
};

fn small_grid(m: usize) -> ModeGrid<f64> {
    ModeGrid::build(1, 2.0, m).unwrap()
}

fn function(values: &[f64], m: usize) -> OneBosonFunction<f64> {
    OneBosonFunction(values[..m].to_vec())
}

#[test]
fn basis_count_is_binomial() {
    // C(m + N, N) for m = 16, N = 4
    assert_eq!(basis_size(16, 4), Some(4845));
    let b = FockBasis::enumerate(16, 4).unwrap();
    assert_eq!(b.len(), 4845);
    for n in 0..=4 {
        assert_eq!(b.prefix_len(n as isize), basis_size(16, n).unwrap());
    }
}

#[test]
fn ccr_in_both_precisions() {
    let b = FockBasis::enumerate(4, 5).unwrap();
    assert!(ccr_residual::<f64>(&b).unwrap().residual <= 1e-12);
    assert!(ccr_residual::<f32>(&b).unwrap().residual <= 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dgamma_is_additive(
        f in prop::collection::vec(-2.0f64..2.0, 6),
        g in prop::collection::vec(-2.0f64..2.0, 6),
        n in 1usize..5,
    ) {
        let b = FockBasis::enumerate(6, n).unwrap();
        let r = dgamma_additivity(&b, &function(&f, 6), &function(&g, 6));
        prop_assert!(r.residual <= 1e-12);
    }

    #[test]
    fn dgamma_creation_commutator(
        h in prop::collection::vec(-2.0f64..2.0, 4),
        f in prop::collection::vec(-1.0f64..1.0, 4),
        n in 2usize..6,
    ) {
        let b = FockBasis::enumerate(4, n).unwrap();
        let r = dgamma_creation(&b, &small_grid(4), &function(&h, 4), &function(&f, 4));
        prop_assert!(r.residual <= 1e-10);
    }

    #[test]
    fn number_operator_matches_slices(psi in prop::collection::vec(-1.0f64..1.0, 35)) {
        // 4 modes, N = 3 has 35 states
        let b = FockBasis::enumerate(4, 3).unwrap();
        let r = number_identity(&b, &small_grid(4), &psi);
        let scale = psi.iter().map(|x| x * x).sum::<f64>().max(1.0);
        prop_assert!(r.residual <= 1e-12 * scale);
        prop_assert!(number_expectation(&b, &psi) >= 0.0);
    }

    #[test]
    fn weyl_laws_on_guard(
        f in prop::collection::vec(-0.3f64..0.3, 4),
        g in prop::collection::vec(-1.0f64..1.0, 4),
        n in 2usize..6,
    ) {
        let b = FockBasis::enumerate(4, n).unwrap();
        let grid = small_grid(4);
        let field = weyl_field_law(&b, &grid, &function(&f, 4), &function(&g, 4));
        prop_assert!(field.residual <= 1e-9, "field law {}", field.residual);
        let dg = weyl_dgamma_law(&b, &grid, &function(&f, 4), &function(&g, 4));
        prop_assert!(dg.residual <= 1e-9, "dGamma law {}", dg.residual);
    }
}
