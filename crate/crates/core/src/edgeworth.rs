//! Edgeworth correction polynomials and the Gaussian-times-polynomial
//! approximant to the characteristic function of a weighted sum.
//!
//! P_r collects, for each way of writing r = i₁+…+i_m with positive parts
//! and each tuple of multi-indices with |ν_j| = i_j + 2, the monomial
//! t^{ν₁+…+ν_m} with coefficient κ_{ν₁}…κ_{ν_m}/(ν₁!…ν_m!·m!). P₀ ≡ 1.
//! Equivalently, 1 + Σ_{r≥1} P_r(t)u^r is the truncated exponential of
//! Σ_{s≥1} κ_{s+2}(t)·u^s where κ_s(t) is the order-s cumulant form; the
//! tests verify the two constructions against each other.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::moments::CumulantTable;
use crate::multiindex::MultiIndex;
use crate::special::{hermite_he, norm_cdf, norm_pdf};

/// P_r as a real coefficient map over monomials t^ν; the i^{|ν|} factor is
/// applied at evaluation time.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeworthPolynomial {
    pub r: u32,
    pub dim: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl EdgeworthPolynomial {
    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.coeffs
    }

    /// Evaluates at a complex vector argument.
    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        if self.r == 0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (nu, &c) in &self.coeffs {
            acc += nu.power_complex(z) * c;
        }
        Ok(acc)
    }

    /// Evaluates at a real vector argument.
    pub fn eval_real(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: t.len(),
            });
        }
        if self.r == 0 {
            return Ok(1.0);
        }
        Ok(self.coeffs.iter().map(|(nu, &c)| c * nu.power(t)).sum())
    }

    /// Coefficient table as CSV, one `nu,coeff` row per monomial in graded
    /// lexicographic order, 17 significant digits. The index field is quoted
    /// because it is itself comma-joined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu,coeff\n");
        for (nu, c) in &self.coeffs {
            let _ = writeln!(out, "\"{nu}\",{c:.16e}");
        }
        out
    }
}

/// Builds P_r from a cumulant table covering orders up to r + 2.
pub fn build_p(r: u32, weighted: &CumulantTable) -> Result<EdgeworthPolynomial> {
    let dim = weighted.dim;
    if r == 0 {
        return Ok(EdgeworthPolynomial {
            r: 0,
            dim,
            coeffs: BTreeMap::new(),
        });
    }
    if weighted.max_order < r + 2 {
        return Err(Error::OrderUnavailable {
            have: weighted.max_order,
            need: r + 2,
        });
    }
    let mut coeffs: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    let mut parts: Vec<u32> = Vec::new();
    let mut factorial_m = 1.0;
    for m in 1..=r {
        factorial_m *= m as f64;
        parts.clear();
        compositions(r, m, &mut parts, &mut |comp| {
            let seed = MultiIndex::zero(dim);
            tuple_products(weighted, comp, 0, &seed, 1.0 / factorial_m, &mut coeffs)
        })?;
    }
    coeffs.retain(|_, c| *c != 0.0);
    Ok(EdgeworthPolynomial { r, dim, coeffs })
}

/// Enumerates compositions of `total` into exactly `m` positive parts.
fn compositions<F: FnMut(&[u32]) -> Result<()>>(
    total: u32,
    m: u32,
    scratch: &mut Vec<u32>,
    f: &mut F,
) -> Result<()> {
    if m == 1 {
        scratch.push(total);
        f(scratch)?;
        scratch.pop();
        return Ok(());
    }
    for first in 1..=total - (m - 1) {
        scratch.push(first);
        compositions(total - first, m - 1, scratch, f)?;
        scratch.pop();
    }
    Ok(())
}

/// Walks all tuples (ν₁..ν_m) with |ν_j| = parts[j] + 2, accumulating the
/// product coefficient into the monomial ν₁+…+ν_m.
fn tuple_products(
    table: &CumulantTable,
    parts: &[u32],
    pos: usize,
    idx: &MultiIndex,
    coeff: f64,
    out: &mut BTreeMap<MultiIndex, f64>,
) -> Result<()> {
    if pos == parts.len() {
        *out.entry(idx.clone()).or_insert(0.0) += coeff;
        return Ok(());
    }
    let order = parts[pos] + 2;
    for nu in MultiIndex::enumerate_order(table.dim, order) {
        let kappa = table.get(&nu).ok_or(Error::OrderUnavailable {
            have: table.max_order,
            need: order,
        })?;
        if kappa == 0.0 {
            continue;
        }
        let next = idx.add(&nu);
        let c = coeff * kappa / nu.factorial()? as f64;
        tuple_products(table, parts, pos + 1, &next, c, out)?;
    }
    Ok(())
}

/// Whether the polynomial argument is the raw frequency or the normalized
/// one Q·t.
#[derive(Clone, Debug)]
pub enum CovarianceMode {
    Identity,
    /// Carries Q = D^{−1/2}.
    General(SymMat),
}

/// exp(−½‖t‖²)·Σ_{r=0}^{r_max} P_r(i·Qt) with Q = I in identity mode.
#[derive(Clone, Debug)]
pub struct EdgeworthApproximant {
    pub dim: usize,
    pub mode: CovarianceMode,
    polys: Vec<EdgeworthPolynomial>,
}

impl EdgeworthApproximant {
    /// Builds P_0..P_{r_max} from the cumulant table of the weighted sum.
    pub fn new(weighted: &CumulantTable, r_max: u32, mode: CovarianceMode) -> Result<Self> {
        if let CovarianceMode::General(q) = &mode {
            if q.dim() != weighted.dim {
                return Err(Error::DimensionMismatch {
                    expected: weighted.dim,
                    got: q.dim(),
                });
            }
        }
        let polys = (0..=r_max)
            .map(|r| build_p(r, weighted))
            .collect::<Result<Vec<_>>>()?;
        Ok(EdgeworthApproximant {
            dim: weighted.dim,
            mode,
            polys,
        })
    }

    pub fn r_max(&self) -> u32 {
        self.polys.len() as u32 - 1
    }

    pub fn poly(&self, r: u32) -> Option<&EdgeworthPolynomial> {
        self.polys.get(r as usize)
    }

    pub fn approximant_cf(&self, t: &[f64]) -> Result<Complex64> {
        if t.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: t.len(),
            });
        }
        let arg: Vec<f64> = match &self.mode {
            CovarianceMode::Identity => t.to_vec(),
            CovarianceMode::General(q) => q.mul_vec(t),
        };
        let z: Vec<Complex64> = arg.iter().map(|&u| Complex64::new(0.0, u)).collect();
        let mut sum = Complex64::new(0.0, 0.0);
        for p in &self.polys {
            sum += p.eval(&z)?;
        }
        let norm2: f64 = t.iter().map(|x| x * x).sum();
        Ok(sum * (-0.5 * norm2).exp())
    }

    /// Term-wise Fourier inversion for k = 1: the cf term c·(it)^s·e^{−t²/2}
    /// is the transform of the signed density c·He_s(x)φ(x), whose
    /// antiderivative is −c·He_{s−1}(x)φ(x). Exact, no quadrature.
    pub fn corrected_cdf_1d(&self, x: f64) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.dim,
            });
        }
        let scale = match &self.mode {
            CovarianceMode::Identity => 1.0,
            CovarianceMode::General(q) => q.get(0, 0),
        };
        let pdf = norm_pdf(x);
        let mut correction = 0.0;
        for p in self.polys.iter().skip(1) {
            for (nu, &c) in &p.coeffs {
                let s = nu.order() as usize;
                correction += c * scale.powi(s as i32) * hermite_he(s - 1, x);
            }
        }
        Ok(norm_cdf(x) - pdf * correction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::DistributionSpec;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn table_1d(entries: &[(u8, f64)], max_order: u32) -> CumulantTable {
        let mut vals = BTreeMap::new();
        for &(r, v) in entries {
            vals.insert(MultiIndex::new(&[r]), v);
        }
        for r in 1..=max_order {
            vals.entry(MultiIndex::new(&[r as u8])).or_insert(0.0);
        }
        CumulantTable::from_entries(1, max_order, vals)
    }

    #[test]
    fn p1_single_cubic_monomial() {
        let t = table_1d(&[(3, 1.8)], 3);
        let p = build_p(1, &t).unwrap();
        assert_eq!(p.coeffs.len(), 1);
        let c = p.coeffs[&MultiIndex::new(&[3])];
        assert!((c - 1.8 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn p2_closed_form() {
        let (k3, k4) = (0.7, -1.3);
        let t = table_1d(&[(3, k3), (4, k4)], 4);
        let p = build_p(2, &t).unwrap();
        let c4 = p.coeffs[&MultiIndex::new(&[4])];
        let c6 = p.coeffs[&MultiIndex::new(&[6])];
        assert!((c4 - k4 / 24.0).abs() < 1e-15);
        assert!((c6 - k3 * k3 / 72.0).abs() < 1e-15);
        assert_eq!(p.coeffs.len(), 2);
    }

    #[test]
    fn zero_cumulants_give_zero_polynomial() {
        let t = table_1d(&[], 6);
        for r in 1..=4 {
            let p = build_p(r, &t).unwrap();
            assert!(p.coeffs.is_empty());
            assert_eq!(p.eval_real(&[0.3]).unwrap(), 0.0);
        }
    }

    #[test]
    fn insufficient_order_is_an_error() {
        let t = table_1d(&[(3, 1.0)], 3);
        assert!(build_p(2, &t).is_err());
    }

    #[test]
    fn eval_examples() {
        let t = table_1d(&[(3, 1.0)], 3);
        let p1 = build_p(1, &t).unwrap();
        // P₁ at i·2: (2i)³/6 = −(8/6)i.
        let v = p1.eval(&[Complex64::new(0.0, 2.0)]).unwrap();
        assert!((v.re).abs() < 1e-15);
        assert!((v.im + 8.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            p1.eval(&[Complex64::new(0.0, 0.0)]).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        let p0 = build_p(0, &t).unwrap();
        assert_eq!(
            p0.eval(&[Complex64::new(0.7, -0.3)]).unwrap(),
            Complex64::new(1.0, 0.0)
        );
    }

    /// Brute-force oracle: truncated formal exponential of
    /// Σ_{s=1}^{r_max} κ_{s+2}(t)·u^s, coefficients by polynomial arithmetic.
    fn formal_exponential(table: &CumulantTable, r_max: u32) -> Vec<BTreeMap<MultiIndex, f64>> {
        let dim = table.dim;
        // a[s] = monomial map of κ_{s+2}(t) = Σ_{|ν|=s+2} κ_ν t^ν / ν!.
        let mut a: Vec<BTreeMap<MultiIndex, f64>> = vec![BTreeMap::new(); r_max as usize + 1];
        for s in 1..=r_max {
            for nu in MultiIndex::enumerate_order(dim, s + 2) {
                let k = table.get(&nu).unwrap();
                if k != 0.0 {
                    a[s as usize].insert(nu.clone(), k / nu.factorial().unwrap() as f64);
                }
            }
        }
        // exp(A) = Σ_j A^j / j!, exact at u-order ≤ r_max since A has no
        // constant term in u.
        let mut result: Vec<BTreeMap<MultiIndex, f64>> = vec![BTreeMap::new(); r_max as usize + 1];
        result[0].insert(MultiIndex::zero(dim), 1.0);
        let mut apow = result.clone();
        let mut jfact = 1.0;
        for j in 1..=r_max as usize {
            jfact *= j as f64;
            // apow = apow * A in the u variable.
            let mut next: Vec<BTreeMap<MultiIndex, f64>> =
                vec![BTreeMap::new(); r_max as usize + 1];
            for u1 in 0..=r_max as usize {
                for u2 in 1..=r_max as usize - u1 {
                    for (n1, &c1) in &apow[u1] {
                        for (n2, &c2) in &a[u2] {
                            *next[u1 + u2].entry(n1.add(n2)).or_insert(0.0) += c1 * c2;
                        }
                    }
                }
            }
            apow = next;
            for u in 0..=r_max as usize {
                for (n, &c) in &apow[u] {
                    *result[u].entry(n.clone()).or_insert(0.0) += c / jfact;
                }
            }
        }
        result
    }

    #[test]
    fn matches_formal_exponential_oracle() {
        let mut rng = stream_rng(21, 0);
        for trial in 0..12 {
            let k = 1 + trial % 3;
            let r_max = 4u32;
            let mut vals = BTreeMap::new();
            for nu in MultiIndex::enumerate_up_to(k, r_max + 2) {
                if nu.is_zero() {
                    continue;
                }
                vals.insert(nu, rng.random::<f64>() * 2.0 - 1.0);
            }
            let table = CumulantTable::from_entries(k, r_max + 2, vals);
            let oracle = formal_exponential(&table, r_max);
            for r in 1..=r_max {
                let p = build_p(r, &table).unwrap();
                let want = &oracle[r as usize];
                let mut keys: Vec<_> = p.coeffs.keys().chain(want.keys()).collect();
                keys.sort();
                keys.dedup();
                for nu in keys {
                    let got = p.coeffs.get(nu).copied().unwrap_or(0.0);
                    let expect = want.get(nu).copied().unwrap_or(0.0);
                    assert!(
                        (got - expect).abs() <= 1e-10 * expect.abs().max(1.0),
                        "trial {trial} r={r} nu={nu}: {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn monomial_orders_lie_in_stated_band() {
        let mut rng = stream_rng(22, 1);
        let k = 2;
        let mut vals = BTreeMap::new();
        for nu in MultiIndex::enumerate_up_to(k, 6) {
            if nu.is_zero() {
                continue;
            }
            vals.insert(nu, rng.random::<f64>());
        }
        let table = CumulantTable::from_entries(k, 6, vals);
        for r in 1..=4u32 {
            let p = build_p(r, &table).unwrap();
            for nu in p.coeffs.keys() {
                assert!(nu.order() >= r + 2 && nu.order() <= 3 * r);
            }
        }
    }

    #[test]
    fn rademacher_symmetry_kills_odd_orders() {
        let d = DistributionSpec::rademacher();
        let table = d.law().cumulants(6).unwrap();
        for r in 1..=4u32 {
            let p = build_p(r, &table).unwrap();
            if r % 2 == 1 {
                assert!(p.coeffs.is_empty(), "P_{r} should vanish");
            } else {
                for nu in p.coeffs.keys() {
                    assert_eq!(nu.order() % 2, 0);
                }
            }
        }
    }

    #[test]
    fn approximant_cf_examples() {
        // Pure Gaussian at r_max = 0.
        let t0 = table_1d(&[], 2);
        let a = EdgeworthApproximant::new(&t0, 0, CovarianceMode::Identity).unwrap();
        let v = a.approximant_cf(&[1.3]).unwrap();
        assert!((v.re - (-0.845f64).exp()).abs() < 1e-15 && v.im == 0.0);

        // κ₄ = −2, r_max = 2 at t = 1.
        let t = table_1d(&[(4, -2.0)], 4);
        let a = EdgeworthApproximant::new(&t, 2, CovarianceMode::Identity).unwrap();
        let v = a.approximant_cf(&[1.0]).unwrap();
        let want = (-0.5f64).exp() * (1.0 - 2.0 / 24.0);
        assert!((v.re - want).abs() < 1e-12, "{} vs {want}", v.re);
        assert!(v.im.abs() < 1e-15);
        assert!((want - 0.55601).abs() < 1e-4);

        // Normalization at t = 0.
        assert_eq!(a.approximant_cf(&[0.0]).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn approximant_cf_conjugate_symmetry() {
        let d = DistributionSpec::skewed_three_point();
        let table = d.law().cumulants(6).unwrap();
        let a = EdgeworthApproximant::new(&table, 3, CovarianceMode::Identity).unwrap();
        for &t in &[0.3, 1.1, 2.7, 5.0] {
            let plus = a.approximant_cf(&[t]).unwrap();
            let minus = a.approximant_cf(&[-t]).unwrap();
            assert!((plus.re - minus.re).abs() < 1e-15);
            assert!((plus.im + minus.im).abs() < 1e-15);
        }
    }

    #[test]
    fn corrected_cdf_examples() {
        let t0 = table_1d(&[], 2);
        let a = EdgeworthApproximant::new(&t0, 0, CovarianceMode::Identity).unwrap();
        assert!((a.corrected_cdf_1d(0.7).unwrap() - norm_cdf(0.7)).abs() < 1e-16);

        let c = 0.9;
        let t = table_1d(&[(3, c)], 3);
        let a = EdgeworthApproximant::new(&t, 1, CovarianceMode::Identity).unwrap();
        let got = a.corrected_cdf_1d(0.0).unwrap();
        assert!((got - (0.5 + c / 6.0 * norm_pdf(0.0))).abs() < 1e-15);
        assert!((a.corrected_cdf_1d(40.0).unwrap() - 1.0).abs() < 1e-9);
        assert!(a.corrected_cdf_1d(-40.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn coefficient_csv_is_graded_lex() {
        let d = DistributionSpec::rademacher_product(2);
        let table = d.law().cumulants(4).unwrap();
        let p = build_p(2, &table).unwrap();
        let csv = p.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "nu,coeff");
        let keys: Vec<String> = lines
            .map(|l| {
                l.trim_start_matches('"')
                    .split('"')
                    .next()
                    .unwrap()
                    .to_string()
            })
            .collect();
        assert!(!keys.is_empty());
        // Orders never decrease down the table.
        let orders: Vec<u32> = keys
            .iter()
            .map(|k| {
                let parts: Vec<u8> = k.split(',').map(|v| v.parse().unwrap()).collect();
                parts.iter().map(|&v| v as u32).sum()
            })
            .collect();
        assert!(orders.windows(2).all(|w| w[0] <= w[1]));
    }
}
