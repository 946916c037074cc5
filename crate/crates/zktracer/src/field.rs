//! Exact arithmetic in the BabyBear prime field.
//!
//! Every trace value, challenge, fingerprint and accumulator in this crate is
//! a canonical residue modulo P = 15·2^27 + 1 = 0x7800_0001. The module keeps
//! a single canonical representation (no Montgomery domain, which would not
//! suit a streaming multiply-accumulate datapath): multiplication reduces its
//! 62-bit products with a Barrett reciprocal, and raw 32-bit machine words
//! enter the field through [`fast_mod_red`].
//!
//! [`FieldOps`] wraps the arithmetic with per-operation counters so callers
//! can assert how much work an algorithm performed — for example that batch
//! inversion of N values costs exactly one true inversion plus 3(N−1)
//! multiplications, or that weight precomputation cost is independent of row
//! count.

use thiserror::Error;

/// Modulus and reduction constants for the BabyBear field.
pub struct FieldParams;

impl FieldParams {
    /// The BabyBear prime, 15·2^27 + 1.
    pub const P: u32 = 0x7800_0001;

    /// Barrett quotient estimates divide by 2^BARRETT_SHIFT.
    pub const BARRETT_SHIFT: u32 = 64;

    /// floor(2^64 / P), the Barrett reciprocal. With a 64-bit shift the
    /// quotient estimate is off by at most one for any input below 2^62,
    /// so a single conditional subtraction completes the reduction.
    pub const BARRETT_MU: u64 = ((1u128 << Self::BARRETT_SHIFT) / (Self::P as u128)) as u64;
}

const P: u32 = FieldParams::P;

const _: () = assert!(P == 15 * (1 << 27) + 1);
const _: () = assert!(P == 2_013_265_921);

/// A canonical BabyBear residue: `0 <= value < P` always holds.
///
/// The inner value is private; elements are created through
/// [`FieldElement::new`] (which rejects non-canonical words) or
/// [`fast_mod_red`] (which reduces arbitrary 32-bit words), so no lazy or
/// out-of-range representation can escape this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FieldElement(u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    /// Wraps an already-canonical residue; `None` if `value >= P`.
    #[inline]
    pub const fn new(value: u32) -> Option<FieldElement> {
        if value < P {
            Some(FieldElement(value))
        } else {
            None
        }
    }

    /// The canonical residue, in `[0, P)`.
    #[inline]
    pub const fn value(self) -> u32 {
        self.0
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl core::fmt::Display for FieldElement {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Errors raised by field operations with restricted domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FieldError {
    /// Zero has no multiplicative inverse.
    #[error("attempted to invert zero")]
    ZeroInversion,
    /// A batch inversion input contained a zero element.
    #[error("zero element at index {index} in batch inversion input")]
    ZeroElement { index: usize },
}

/// Reduces an arbitrary 32-bit word to its canonical residue.
///
/// Since 2P < 2^32 < 3P, two conditional subtractions always suffice; the
/// result equals `x mod P` for every 32-bit input. This is the sole entry
/// point for raw architectural values (register words, addresses, memory
/// data) into the field.
#[inline]
pub fn fast_mod_red(x: u32) -> FieldElement {
    let mut r = x;
    if r >= P {
        r -= P;
    }
    if r >= P {
        r -= P;
    }
    FieldElement(r)
}

/// Barrett reduction of a product below 2^62 to its canonical residue.
///
/// `q = (x·mu) >> 64` underestimates `x / P` by at most one, so `x − q·P`
/// lands in `[0, 2P)` and one conditional subtraction finishes the job.
#[inline]
fn barrett_reduce(x: u64) -> u32 {
    debug_assert!(x < 1 << 62);
    let q = ((x as u128 * FieldParams::BARRETT_MU as u128) >> FieldParams::BARRETT_SHIFT) as u64;
    let mut r = x - q * P as u64;
    if r >= P as u64 {
        r -= P as u64;
    }
    debug_assert!(r < P as u64);
    r as u32
}

/// Per-operation work counters.
///
/// Counters are observational only — they never change arithmetic results —
/// and belong to a single counting scope (one [`FieldOps`] value). They are
/// monotone non-decreasing until explicitly reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounters {
    pub mod_mul_count: u64,
    pub mod_add_count: u64,
    pub mod_inv_count: u64,
    pub mod_exp_count: u64,
}

/// BabyBear arithmetic with an attached counting scope.
///
/// All methods are pure functions of their arguments; the only state is the
/// [`OpCounters`] bookkeeping. Create one `FieldOps` per logical unit of work
/// whose operation counts you want to observe.
#[derive(Debug, Default)]
pub struct FieldOps {
    counters: OpCounters,
}

impl FieldOps {
    pub fn new() -> FieldOps {
        FieldOps::default()
    }

    /// Snapshot of the counters accumulated so far.
    pub fn counters(&self) -> OpCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = OpCounters::default();
    }

    /// `(a + b) mod P`.
    #[inline]
    pub fn mod_add(&mut self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.counters.mod_add_count += 1;
        // Both inputs are canonical, so the u32 sum cannot overflow
        // (2(P−1) < 2^32) and lies below 2P.
        let mut s = a.0 + b.0;
        if s >= P {
            s -= P;
        }
        FieldElement(s)
    }

    /// `(a · b) mod P` via Barrett reduction of the 62-bit product.
    #[inline]
    pub fn mod_mul(&mut self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.counters.mod_mul_count += 1;
        FieldElement(barrett_reduce(a.0 as u64 * b.0 as u64))
    }

    /// `base^e mod P` by right-to-left square-and-multiply.
    ///
    /// `0^0` is defined as 1 (the empty-product convention, which the weight
    /// table relies on for its β^0 entry). Each squaring and each multiply is
    /// routed through [`FieldOps::mod_mul`] and therefore counted.
    pub fn mod_exp(&mut self, base: FieldElement, e: u64) -> FieldElement {
        self.counters.mod_exp_count += 1;
        let mut result = FieldElement::ONE;
        let mut acc = base;
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = self.mod_mul(result, acc);
            }
            e >>= 1;
            if e > 0 {
                acc = self.mod_mul(acc, acc);
            }
        }
        result
    }

    /// The multiplicative inverse of `a`, by the extended Euclidean
    /// algorithm.
    ///
    /// # Errors
    /// [`FieldError::ZeroInversion`] if `a` is zero — upstream this signals a
    /// vanishing fingerprint denominator.
    pub fn mod_inv(&mut self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::ZeroInversion);
        }
        self.counters.mod_inv_count += 1;
        // Invariant: r0 = t0·a (mod P) and r1 = t1·a (mod P); on exit
        // r0 = gcd(a, P) = 1, so t0 is the inverse of a.
        let mut r0: i64 = P as i64;
        let mut r1: i64 = a.0 as i64;
        let mut t0: i64 = 0;
        let mut t1: i64 = 1;
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1, "P is prime, so any nonzero residue is a unit");
        Ok(FieldElement(t0.rem_euclid(P as i64) as u32))
    }

    /// Element-wise inverses of a sequence of nonzero elements, using the
    /// batched trick: one prefix-product pass, a single true inversion of the
    /// running total, and an unwinding pass — exactly `1` call to
    /// [`FieldOps::mod_inv`] and `3(N−1)` calls to [`FieldOps::mod_mul`] for
    /// N input elements.
    ///
    /// An empty input yields an empty output at zero cost.
    ///
    /// # Errors
    /// [`FieldError::ZeroElement`] naming the first zero input, checked up
    /// front so the counters are untouched on failure.
    pub fn batch_inv(&mut self, values: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
        if let Some(index) = values.iter().position(|v| v.is_zero()) {
            return Err(FieldError::ZeroElement { index });
        }
        let n = values.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        // prefix[i] = v[0]·v[1]·…·v[i]  — (N−1) multiplications.
        let mut prefix = Vec::with_capacity(n);
        prefix.push(values[0]);
        for &v in &values[1..] {
            let last = *prefix.last().unwrap();
            prefix.push(self.mod_mul(last, v));
        }
        // One true inversion of the total product.
        let mut inv_running = self.mod_inv(prefix[n - 1])?;
        // Unwind: inv_running holds (v[0]·…·v[i])^{-1} entering iteration i;
        // peeling off v[i] costs two multiplications per element.
        let mut out = vec![FieldElement::ZERO; n];
        for i in (1..n).rev() {
            out[i] = self.mod_mul(inv_running, prefix[i - 1]);
            inv_running = self.mod_mul(inv_running, values[i]);
        }
        out[0] = inv_running;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(v: u32) -> FieldElement {
        FieldElement::new(v).unwrap()
    }

    #[test]
    fn constants() {
        assert_eq!(P, 2_013_265_921);
        assert_eq!(FieldParams::BARRETT_MU, u64::MAX / P as u64);
        assert_eq!(FieldElement::ZERO.value(), 0);
        assert_eq!(FieldElement::ONE.value(), 1);
    }

    #[test]
    fn new_rejects_non_canonical() {
        assert_eq!(FieldElement::new(P), None);
        assert_eq!(FieldElement::new(u32::MAX), None);
        assert_eq!(FieldElement::new(P - 1).map(FieldElement::value), Some(P - 1));
    }

    #[test]
    fn fast_mod_red_zero() {
        assert_eq!(fast_mod_red(0), FieldElement::ZERO);
    }

    #[test]
    fn fast_mod_red_modulus_maps_to_zero() {
        assert_eq!(fast_mod_red(P), FieldElement::ZERO);
    }

    #[test]
    fn fast_mod_red_max_word() {
        // (2^32 − 1) mod P = 268435453, frozen from an independent
        // wide-integer computation.
        assert_eq!(fast_mod_red(u32::MAX).value(), 268_435_453);
    }

    #[test]
    fn mod_add_identity_and_wraparound() {
        let mut ops = FieldOps::new();
        let x = fe(123_456_789);
        assert_eq!(ops.mod_add(FieldElement::ZERO, x), x);
        assert_eq!(ops.mod_add(fe(P - 1), FieldElement::ONE), FieldElement::ZERO);
        assert_eq!(ops.counters().mod_add_count, 2);
    }

    #[test]
    fn mod_mul_small_cases() {
        let mut ops = FieldOps::new();
        let x = fe(987_654_321);
        assert_eq!(ops.mod_mul(FieldElement::ONE, x), x);
        assert_eq!(ops.mod_mul(fe(2), fe(3)), fe(6));
        // (−1)² = 1
        assert_eq!(ops.mod_mul(fe(P - 1), fe(P - 1)), FieldElement::ONE);
        assert_eq!(ops.counters().mod_mul_count, 3);
    }

    #[test]
    fn mod_exp_edge_exponents() {
        let mut ops = FieldOps::new();
        let beta = fe(77_777);
        assert_eq!(ops.mod_exp(beta, 0), FieldElement::ONE);
        assert_eq!(ops.mod_exp(beta, 1), beta);
        assert_eq!(ops.mod_exp(FieldElement::ZERO, 0), FieldElement::ONE);
        assert_eq!(ops.mod_exp(FieldElement::ZERO, 5), FieldElement::ZERO);
        assert_eq!(ops.counters().mod_exp_count, 4);
    }

    #[test]
    fn mod_exp_fermat() {
        let mut ops = FieldOps::new();
        for g in [2u32, 3, 31, 1_000_003, P - 1] {
            assert_eq!(ops.mod_exp(fe(g), (P - 1) as u64), FieldElement::ONE);
        }
    }

    #[test]
    fn mod_exp_matches_repeated_multiplication() {
        let mut ops = FieldOps::new();
        let base = fe(321_321);
        let mut by_hand = FieldElement::ONE;
        for e in 0..48u64 {
            assert_eq!(ops.mod_exp(base, e), by_hand);
            by_hand = ops.mod_mul(by_hand, base);
        }
    }

    #[test]
    fn mod_inv_identity() {
        let mut ops = FieldOps::new();
        assert_eq!(ops.mod_inv(FieldElement::ONE).unwrap(), FieldElement::ONE);
    }

    #[test]
    fn mod_inv_two_is_half() {
        // (P + 1) / 2 = 1006632961, frozen from an independent computation;
        // 2 · 1006632961 = P + 1 ≡ 1.
        let mut ops = FieldOps::new();
        assert_eq!(ops.mod_inv(fe(2)).unwrap().value(), 1_006_632_961);
    }

    #[test]
    fn mod_inv_zero_is_an_error() {
        let mut ops = FieldOps::new();
        assert_eq!(ops.mod_inv(FieldElement::ZERO), Err(FieldError::ZeroInversion));
        assert_eq!(ops.counters().mod_inv_count, 0);
    }

    #[test]
    fn mod_inv_satisfies_postcondition() {
        let mut ops = FieldOps::new();
        for v in [1u32, 2, 3, 7, 65_537, 1_234_567, P - 2, P - 1] {
            let a = fe(v);
            let inv = ops.mod_inv(a).unwrap();
            assert_eq!(ops.mod_mul(a, inv), FieldElement::ONE, "a = {v}");
        }
    }

    #[test]
    fn batch_inv_singleton() {
        let mut ops = FieldOps::new();
        let a = fe(424_242);
        let out = ops.batch_inv(&[a]).unwrap();
        let expected = FieldOps::new().mod_inv(a).unwrap();
        assert_eq!(out, vec![expected]);
        assert_eq!(ops.counters().mod_inv_count, 1);
        assert_eq!(ops.counters().mod_mul_count, 0);
    }

    #[test]
    fn batch_inv_ones_and_counter_contract() {
        let mut ops = FieldOps::new();
        let ones = [FieldElement::ONE; 4];
        let out = ops.batch_inv(&ones).unwrap();
        assert_eq!(out, ones.to_vec());
        // N = 4: one inversion and 3(N−1) = 9 multiplications.
        assert_eq!(ops.counters().mod_inv_count, 1);
        assert_eq!(ops.counters().mod_mul_count, 9);
    }

    #[test]
    fn batch_inv_empty_input() {
        let mut ops = FieldOps::new();
        assert_eq!(ops.batch_inv(&[]).unwrap(), Vec::new());
        assert_eq!(ops.counters(), OpCounters::default());
    }

    #[test]
    fn batch_inv_reports_first_zero_index() {
        let mut ops = FieldOps::new();
        let input = [fe(5), FieldElement::ZERO, fe(7), FieldElement::ZERO];
        assert_eq!(ops.batch_inv(&input), Err(FieldError::ZeroElement { index: 1 }));
        // Failed calls leave the counters untouched.
        assert_eq!(ops.counters(), OpCounters::default());
    }
}
