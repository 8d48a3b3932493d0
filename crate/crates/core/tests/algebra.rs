mod common;

use common::{elementary_divisors, expected_homology, scrambled_complex as build, Elementary, Piece};
use geomorse::complex::{
    compute_homology, rank_int, rank_mod2, smith_invariants, to_big, Coefficients, MorseComplexData,
};
use geomorse::Error;
use proptest::prelude::*;

fn matrix(max: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-6i64..=6, c), r))
}

/// Sparse matrices with a common factor, so torsion actually shows up.
fn structured(max: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (matrix(max), 1i64..=4, 0.0f64..0.7).prop_map(|(m, f, density)| {
        m.iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .map(|(j, v)| if ((i * 31 + j * 17) % 10) as f64 / 10.0 < density { 0 } else { v * f })
                    .collect()
            })
            .collect()
    })
}

#[test]
fn oracle_agrees_on_known_forms() {
    assert_eq!(elementary_divisors(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]), vec![2, 6, 12]);
    assert_eq!(elementary_divisors(&[vec![2, 0], vec![0, 3]]), vec![1, 6]);
    assert!(elementary_divisors(&[vec![0, 0, 0]]).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn snf_matches_determinantal_divisors(m in prop_oneof![matrix(8), structured(8)]) {
        let got: Vec<i128> = smith_invariants(&to_big(&m)).iter().map(|d| d.to_string().parse().unwrap()).collect();
        let want = elementary_divisors(&m);
        prop_assert_eq!(&got, &want);
        prop_assert_eq!(rank_int(&m), want.len());
        // over GF(2) only the odd invariants survive
        prop_assert_eq!(rank_mod2(&m), want.iter().filter(|d| *d % 2 != 0).count());
    }
}

fn piece() -> impl Strategy<Value = Piece> {
    prop_oneof![
        (0i64..=3).prop_map(Piece::Free),
        (1i64..=3, prop_oneof![Just(1i64), Just(-1), 2i64..=6]).prop_map(|(d, m)| Piece::Pair(d, m)),
    ]
}

fn elementary() -> impl Strategy<Value = Elementary> {
    (0usize..8, 0usize..8, -2i64..=2, any::<bool>()).prop_map(|(i, j, k, negate)| Elementary { i, j, k, negate })
}

fn homology_of(c: &MorseComplexData) -> Vec<(usize, Vec<i64>)> {
    compute_homology(c)
        .degrees
        .iter()
        .map(|d| (d.betti, d.torsion.iter().map(|t| t.parse().unwrap()).collect()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn scrambled_complexes_have_known_homology(
        pieces in prop::collection::vec(piece(), 1..8),
        ops in prop::collection::vec(elementary(), 0..12),
    ) {
        let top = pieces.iter().map(|p| match p { Piece::Free(d) | Piece::Pair(d, _) => *d }).max().unwrap();
        let z = build(&pieces, &ops, Coefficients::Integer);
        prop_assert!(z.check_square_zero().is_ok());
        prop_assert_eq!(homology_of(&z), expected_homology(&pieces, top, false));
        let z2 = build(&pieces, &ops, Coefficients::Mod2);
        prop_assert!(z2.check_square_zero().is_ok());
        prop_assert_eq!(homology_of(&z2), expected_homology(&pieces, top, true));
        prop_assert_eq!(z.mod2().boundary, z2.boundary);
    }
}

#[test]
fn corrupted_boundary_is_rejected() {
    let pieces = [Piece::Pair(2, 1), Piece::Pair(1, 1), Piece::Free(1)];
    let mut c = build(&pieces, &[], Coefficients::Integer);
    assert!(c.check_square_zero().is_ok());
    // ∂₂ lands on the cycle b; redirect it onto a, which ∂₁ does not kill
    let d2 = c.boundary.iter_mut().find(|b| b.degree == 2).unwrap();
    d2.entries.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 1));
    assert!(matches!(c.check_square_zero(), Err(Error::Integrity { degree: 2, .. })));
}
