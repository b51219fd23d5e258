//! Multi-index bookkeeping.
//!
//! A multi-index `ν ∈ ℕ₀^k` labels a mixed moment `E X^ν`, a cumulant, or a
//! monomial `t^ν = Π t_i^{ν_i}`. Orders stay tiny in this crate (at most 12, in
//! practice ≤ 6), so everything is plain integer arithmetic with explicit
//! overflow guards.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest total order for which factorials are supported.
pub const MAX_ORDER: u32 = 12;

const FACT: [u64; 13] = [
    1, 1, 2, 6, 24, 120, 720, 5040, 40320, 362880, 3628800, 39916800, 479001600,
];

/// Exponent vector with nonnegative entries.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn new(entries: &[u8]) -> Self {
        MultiIndex(entries.to_vec())
    }

    /// The zero index of dimension `k` (labels the constant monomial).
    pub fn zero(k: usize) -> Self {
        MultiIndex(vec![0; k])
    }

    /// The unit index `e_i`.
    pub fn unit(k: usize, i: usize) -> Self {
        let mut v = vec![0; k];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u8] {
        &self.0
    }

    /// Total order `|ν| = Σ ν_i`.
    pub fn order(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    /// `ν! = Π ν_i!`, with an explicit error beyond the supported range.
    pub fn factorial(&self) -> Result<u64> {
        let order = self.order();
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge(order));
        }
        let mut f: u64 = 1;
        for &e in &self.0 {
            f = f
                .checked_mul(FACT[e as usize])
                .ok_or(Error::OrderTooLarge(order))?;
        }
        Ok(f)
    }

    /// Componentwise binomial coefficient `C(ν, β) = Π C(ν_i, β_i)`.
    ///
    /// Requires `β ≤ ν` componentwise.
    pub fn binomial(&self, beta: &MultiIndex) -> Result<u64> {
        debug_assert!(beta.leq(self));
        let order = self.order();
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge(order));
        }
        let mut b: u64 = 1;
        for (&n, &k) in self.0.iter().zip(&beta.0) {
            b = b
                .checked_mul(FACT[n as usize] / (FACT[k as usize] * FACT[(n - k) as usize]))
                .ok_or(Error::OrderTooLarge(order))?;
        }
        Ok(b)
    }

    /// Componentwise `β ≤ ν`.
    pub fn leq(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise sum.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference, `None` unless `other ≤ self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.leq(self) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Monomial value `t^ν` with the convention `0^0 = 1`.
    pub fn power(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.dim());
        self.0
            .iter()
            .zip(t)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }

    /// Complex monomial value `z^ν` with the convention `0^0 = 1`.
    pub fn power_complex(&self, z: &[Complex64]) -> Complex64 {
        debug_assert_eq!(z.len(), self.dim());
        let mut acc = Complex64::new(1.0, 0.0);
        for (&e, &w) in self.0.iter().zip(z) {
            for _ in 0..e {
                acc *= w;
            }
        }
        acc
    }

    /// All indices of dimension `k` and total order exactly `r`, in graded
    /// lexicographic order: for `k = 2, r = 2` the sequence is
    /// `(2,0), (1,1), (0,2)`.
    pub fn enumerate_order(k: usize, r: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u8; k];
        fill(&mut out, &mut cur, 0, r);
        out
    }

    /// All indices of dimension `k` with `|ν| ≤ s`, grouped by order, each
    /// group in graded lexicographic order.
    pub fn enumerate_up_to(k: usize, s: u32) -> Vec<MultiIndex> {
        (0..=s).flat_map(|r| Self::enumerate_order(k, r)).collect()
    }
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut Vec<u8>, pos: usize, rem: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = rem as u8;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for e in (0..=rem).rev() {
        cur[pos] = e as u8;
        fill(out, cur, pos + 1, rem - e);
    }
    cur[pos] = 0;
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        // Graded lexicographic: lower total order first, then the enumeration
        // order used by `enumerate_order` (larger leading entries first).
        self.order()
            .cmp(&other.order())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for e in &self.0 {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ν({self})")
    }
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn small_pair() -> impl Strategy<Value = (MultiIndex, MultiIndex)> {
        (1usize..=3).prop_flat_map(|k| {
            let entry = 0u8..=2;
            (
                proptest::collection::vec(entry.clone(), k),
                proptest::collection::vec(entry, k),
            )
                .prop_map(|(a, b)| (MultiIndex::new(&a), MultiIndex::new(&b)))
        })
    }

    proptest! {
        #[test]
        fn add_then_sub_roundtrips((a, b) in small_pair()) {
            let sum = a.add(&b);
            prop_assert!(a.leq(&sum) && b.leq(&sum));
            prop_assert_eq!(sum.checked_sub(&b), Some(a.clone()));
            prop_assert_eq!(sum.checked_sub(&a), Some(b));
        }

        #[test]
        fn checked_sub_agrees_with_leq((a, b) in small_pair()) {
            prop_assert_eq!(b.checked_sub(&a).is_some(), a.leq(&b));
        }

        #[test]
        fn binomial_is_symmetric_and_factors((a, b) in small_pair()) {
            let sum = a.add(&b);
            let left = sum.binomial(&a).unwrap();
            let right = sum.binomial(&b).unwrap();
            prop_assert_eq!(left, right);
            // C(ν, β) β! (ν−β)! = ν!
            prop_assert_eq!(
                left * a.factorial().unwrap() * b.factorial().unwrap(),
                sum.factorial().unwrap()
            );
        }

        #[test]
        fn enumeration_counts_match_stars_and_bars(k in 1usize..=3, s in 0u32..=6) {
            // C(s + k - 1, k - 1) compositions of order exactly s.
            let count = MultiIndex::enumerate_order(k, s).len() as u64;
            let mut c: u64 = 1;
            for i in 0..(k as u64 - 1) {
                c = c * (s as u64 + k as u64 - 1 - i) / (i + 1);
            }
            prop_assert_eq!(count, c);
            let upto = MultiIndex::enumerate_up_to(k, s).len();
            let total: usize = (0..=s)
                .map(|r| MultiIndex::enumerate_order(k, r).len())
                .sum();
            prop_assert_eq!(upto, total);
        }
    }
}
