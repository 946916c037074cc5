//! Field arithmetic checked against an independent wide-integer oracle:
//! reduction paths on boundary and random inputs, the full operation set,
//! batch-inversion results and operation counts, and algebraic laws under
//! proptest.

mod common;

use common::{fe, oracle_add, oracle_inv, oracle_mul, oracle_pow};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zktracer::field::{FieldElement, FieldOps, FieldParams, fast_mod_red};

const P: u32 = FieldParams::P;

#[test]
fn fast_reduction_on_boundary_bands_and_random_words() {
    // Exhaustive over the bottom band, the band around P and 2P, and the
    // top of the u32 range; these cross every conditional-subtraction path.
    let bands = [
        0u32..=0xffff,
        (P - 0x8000)..=(P + 0x8000),
        (2 * P - 0x8000)..=(2 * P + 0x8000),
        (u32::MAX - 0xffff)..=u32::MAX,
    ];
    for band in bands {
        for x in band {
            assert_eq!(fast_mod_red(x).value(), x % P, "x = {x:#x}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..1_000_000 {
        let x: u32 = rng.gen();
        assert_eq!(fast_mod_red(x).value(), x % P);
    }
}

#[test]
fn products_match_the_wide_oracle() {
    let mut ops = FieldOps::new();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..1_000_000 {
        let a = rng.gen_range(0..P);
        let b = rng.gen_range(0..P);
        assert_eq!(ops.mod_mul(fe(a), fe(b)).value(), oracle_mul(a, b));
    }
    // Boundary operands through the same path.
    for a in [0, 1, 2, P - 2, P - 1] {
        for b in [0, 1, 2, P - 2, P - 1] {
            assert_eq!(ops.mod_mul(fe(a), fe(b)).value(), oracle_mul(a, b));
        }
    }
}

#[test]
fn sums_match_the_wide_oracle() {
    let mut ops = FieldOps::new();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..1_000_000 {
        let a = rng.gen_range(0..P);
        let b = rng.gen_range(0..P);
        assert_eq!(ops.mod_add(fe(a), fe(b)).value(), oracle_add(a, b));
    }
    assert_eq!(ops.mod_add(fe(P - 1), fe(1)).value(), 0);
    assert_eq!(ops.mod_add(fe(P - 1), fe(P - 1)).value(), P - 2);
}

#[test]
fn exponentiation_matches_the_wide_oracle() {
    let mut ops = FieldOps::new();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..2_000 {
        let base = rng.gen_range(0..P);
        let exp: u64 = rng.gen();
        assert_eq!(
            ops.mod_exp(fe(base), exp).value(),
            oracle_pow(base, exp),
            "base {base}, exp {exp}"
        );
    }
    for (base, exp, expected) in [(0, 0, 1), (0, 5, 0), (7, 0, 1), (1, u64::MAX, 1)] {
        assert_eq!(ops.mod_exp(fe(base), exp).value(), expected);
    }
}

#[test]
fn inversion_matches_fermat_and_round_trips() {
    let mut ops = FieldOps::new();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..10_000 {
        let a = rng.gen_range(1..P);
        let inv = ops.mod_inv(fe(a)).unwrap();
        assert_eq!(inv.value(), oracle_inv(a));
        assert_eq!(ops.mod_mul(fe(a), inv), FieldElement::ONE);
    }
    assert!(ops.mod_inv(FieldElement::ZERO).is_err());
}

#[test]
fn batch_inversion_counts_one_inversion_and_three_n_minus_one_products() {
    // The whole claimed budget, for every length up to 1024: exactly one
    // real inversion and 3(N−1) multiplications, with every output equal to
    // the independently computed inverse.
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for n in 1..=1024usize {
        let values: Vec<FieldElement> = (0..n).map(|_| fe(rng.gen_range(1..P))).collect();
        let mut ops = FieldOps::new();
        let inverses = ops.batch_inv(&values).unwrap();
        let counters = ops.counters();
        assert_eq!(counters.mod_inv_count, 1, "N = {n}");
        assert_eq!(counters.mod_mul_count, 3 * (n as u64 - 1), "N = {n}");
        assert_eq!(counters.mod_add_count, 0, "N = {n}");
        // Spot-check all outputs against the oracle for small N, a sample
        // for large N.
        let stride = if n <= 32 { 1 } else { n / 16 };
        for i in (0..n).step_by(stride) {
            assert_eq!(inverses[i].value(), oracle_inv(values[i].value()));
        }
    }
}

#[test]
fn batch_inversion_of_empty_input_is_empty_and_free() {
    let mut ops = FieldOps::new();
    assert_eq!(ops.batch_inv(&[]).unwrap(), Vec::new());
    assert_eq!(ops.counters().mod_inv_count, 0);
    assert_eq!(ops.counters().mod_mul_count, 0);
}

#[test]
fn batch_inversion_reports_the_zero_position_without_counting() {
    let mut ops = FieldOps::new();
    let values = [fe(5), fe(0), fe(9)];
    let err = ops.batch_inv(&values).unwrap_err();
    assert_eq!(
        format!("{err}"),
        "zero element at index 1 in batch inversion input"
    );
    assert_eq!(ops.counters().mod_mul_count, 0);
    assert_eq!(ops.counters().mod_inv_count, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn addition_commutes_and_associates(a in 0..P, b in 0..P, c in 0..P) {
        let mut ops = FieldOps::new();
        let (a, b, c) = (fe(a), fe(b), fe(c));
        prop_assert_eq!(ops.mod_add(a, b), ops.mod_add(b, a));
        let left = { let t = ops.mod_add(a, b); ops.mod_add(t, c) };
        let right = { let t = ops.mod_add(b, c); ops.mod_add(a, t) };
        prop_assert_eq!(left, right);
        prop_assert_eq!(ops.mod_add(a, FieldElement::ZERO), a);
    }

    #[test]
    fn multiplication_commutes_associates_and_distributes(a in 0..P, b in 0..P, c in 0..P) {
        let mut ops = FieldOps::new();
        let (a, b, c) = (fe(a), fe(b), fe(c));
        prop_assert_eq!(ops.mod_mul(a, b), ops.mod_mul(b, a));
        let left = { let t = ops.mod_mul(a, b); ops.mod_mul(t, c) };
        let right = { let t = ops.mod_mul(b, c); ops.mod_mul(a, t) };
        prop_assert_eq!(left, right);
        let dist_left = { let t = ops.mod_add(b, c); ops.mod_mul(a, t) };
        let dist_right = { let ab = ops.mod_mul(a, b); let ac = ops.mod_mul(a, c); ops.mod_add(ab, ac) };
        prop_assert_eq!(dist_left, dist_right);
        prop_assert_eq!(ops.mod_mul(a, FieldElement::ONE), a);
    }

    #[test]
    fn fermat_little_theorem(a in 1..P) {
        let mut ops = FieldOps::new();
        prop_assert_eq!(ops.mod_exp(fe(a), (P - 1) as u64), FieldElement::ONE);
    }

    #[test]
    fn inverse_is_an_involution(a in 1..P) {
        let mut ops = FieldOps::new();
        let inv = ops.mod_inv(fe(a)).unwrap();
        let back = ops.mod_inv(inv).unwrap();
        prop_assert_eq!(back, fe(a));
    }

    #[test]
    fn exponent_addition_law(a in 1..P, x in 0u64..1 << 20, y in 0u64..1 << 20) {
        let mut ops = FieldOps::new();
        let left = ops.mod_exp(fe(a), x + y);
        let right = {
            let ax = ops.mod_exp(fe(a), x);
            let ay = ops.mod_exp(fe(a), y);
            ops.mod_mul(ax, ay)
        };
        prop_assert_eq!(left, right);
    }
}
