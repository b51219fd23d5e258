//! Finite atom laws, their exact mixed moments, and cumulant tables.
//!
//! All source distributions in this crate are finite mixtures of point masses
//! in ℝ^k, so every moment is an exact finite sum and cumulants follow from
//! the classical moment-cumulant recursion. A [`DistributionSpec`] is an atom
//! law validated to have mean zero and identity covariance (the standing
//! normalization for summands); raw [`AtomLaw`] values carry no such
//! invariant and also describe truncated or shifted laws.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::multiindex::MultiIndex;
use crate::special::{norm_cdf, norm_pdf, norm_quantile};

/// Validation tolerance for probabilities, means and covariances.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub prob: f64,
}

/// A finite law on ℝ^k with no normalization invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomLaw {
    pub dim: usize,
    pub atoms: Vec<Atom>,
}

impl AtomLaw {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if a.point.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.point.len(),
                });
            }
            if !(a.prob > 0.0) || !a.prob.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "atom probability {} is not positive and finite",
                    a.prob
                )));
            }
            if a.point.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidDistribution(
                    "atom coordinate is not finite".into(),
                ));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(AtomLaw { dim, atoms })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for a in &self.atoms {
            for (mi, &x) in m.iter_mut().zip(&a.point) {
                *mi += a.prob * x;
            }
        }
        m
    }

    pub fn covariance(&self) -> SymMat {
        let mean = self.mean();
        let mut c = SymMat::zeros(self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let mut s = 0.0;
                for a in &self.atoms {
                    s += a.prob * (a.point[i] - mean[i]) * (a.point[j] - mean[j]);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    /// Mixed moment `E X^ν`.
    pub fn moment(&self, nu: &MultiIndex) -> f64 {
        debug_assert_eq!(nu.dim(), self.dim);
        self.atoms.iter().map(|a| a.prob * nu.power(&a.point)).sum()
    }

    /// Absolute moment `E ‖X‖^s` for any real `s ≥ 0`.
    pub fn absolute_moment(&self, s: f64) -> f64 {
        assert!(s >= 0.0);
        self.atoms
            .iter()
            .map(|a| {
                let norm2: f64 = a.point.iter().map(|x| x * x).sum();
                a.prob * norm2.sqrt().powf(s)
            })
            .sum()
    }

    /// Fourth absolute moment `E ‖X‖⁴`.
    pub fn delta4(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let norm2: f64 = a.point.iter().map(|x| x * x).sum();
                a.prob * norm2 * norm2
            })
            .sum()
    }

    /// Largest atom norm.
    pub fn max_norm(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.point.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Probability of the event `‖c·X‖ > 1`.
    pub fn tail_mass_beyond_unit(&self, c: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| {
                let norm2: f64 = a.point.iter().map(|x| x * x).sum();
                c.abs() * norm2.sqrt() > 1.0
            })
            .map(|a| a.prob)
            .sum()
    }

    /// All mixed moments up to total order `s`.
    pub fn moments_table(&self, s: u32) -> MomentTable {
        let mut vals = BTreeMap::new();
        for nu in MultiIndex::enumerate_up_to(self.dim, s) {
            let m = self.moment(&nu);
            vals.insert(nu, m);
        }
        MomentTable {
            dim: self.dim,
            max_order: s,
            vals,
        }
    }

    /// Cumulants up to total order `s`.
    pub fn cumulants(&self, s: u32) -> Result<CumulantTable> {
        self.moments_table(s).cumulants()
    }

    /// The law of `X + shift`.
    pub fn shifted(&self, shift: &[f64]) -> AtomLaw {
        AtomLaw {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    point: a.point.iter().zip(shift).map(|(x, s)| x + s).collect(),
                    prob: a.prob,
                })
                .collect(),
        }
    }
}

/// A standardized source law: mean zero, identity covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionSpec {
    pub label: String,
    law: AtomLaw,
    normalized: bool,
}

impl DistributionSpec {
    /// Builds and validates a standardized law.
    pub fn from_atoms(dim: usize, atoms: Vec<Atom>, label: &str) -> Result<Self> {
        let law = AtomLaw::new(dim, atoms)?;
        let mean = law.mean();
        if mean.iter().any(|m| m.abs() > NORMALIZATION_TOL) {
            return Err(Error::InvalidDistribution(format!(
                "mean {mean:?} is not zero"
            )));
        }
        let cov = law.covariance();
        for i in 0..dim {
            for j in i..dim {
                let want = if i == j { 1.0 } else { 0.0 };
                if (cov.get(i, j) - want).abs() > NORMALIZATION_TOL {
                    return Err(Error::InvalidDistribution(format!(
                        "covariance entry ({i},{j}) = {} is not {want}",
                        cov.get(i, j)
                    )));
                }
            }
        }
        Ok(DistributionSpec {
            label: label.to_string(),
            law,
            normalized: true,
        })
    }

    /// Escape hatch: accepts any valid atom law without the standardization
    /// checks. Downstream theory assumes standardized summands; callers opt
    /// in explicitly.
    pub fn from_atoms_unnormalized(dim: usize, atoms: Vec<Atom>, label: &str) -> Result<Self> {
        let law = AtomLaw::new(dim, atoms)?;
        Ok(DistributionSpec {
            label: label.to_string(),
            law,
            normalized: false,
        })
    }

    pub fn law(&self) -> &AtomLaw {
        &self.law
    }

    pub fn dim(&self) -> usize {
        self.law.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn delta4(&self) -> f64 {
        self.law.delta4()
    }

    /// Symmetric two-point law on {−1, +1}.
    pub fn rademacher() -> Self {
        Self::rademacher_product(1)
    }

    /// Product of k independent symmetric two-point laws: 2^k atoms at the
    /// corners of the cube {−1, +1}^k.
    pub fn rademacher_product(k: usize) -> Self {
        assert!(k >= 1 && k <= 16);
        let n = 1usize << k;
        let p = 1.0 / n as f64;
        let atoms = (0..n)
            .map(|mask| Atom {
                point: (0..k)
                    .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect(),
                prob: p,
            })
            .collect();
        DistributionSpec {
            label: if k == 1 {
                "rademacher".to_string()
            } else {
                format!("rademacher_product_{k}")
            },
            law: AtomLaw { dim: k, atoms },
            normalized: true,
        }
    }

    /// Product of k uniform laws on m equally spaced points, scaled to unit
    /// variance per coordinate.
    pub fn uniform_cube_scaled(k: usize, m: usize) -> Result<Self> {
        if k < 1 || m < 2 {
            return Err(Error::InvalidArgument(
                "uniform_cube_scaled requires k >= 1 and points >= 2".into(),
            ));
        }
        let count = (m as u128).pow(k as u32);
        if count > 1 << 16 {
            return Err(Error::InvalidArgument(format!(
                "uniform_cube_scaled would create {count} atoms"
            )));
        }
        let step = (12.0 / ((m * m - 1) as f64)).sqrt();
        let levels: Vec<f64> = (0..m)
            .map(|i| (i as f64 - (m as f64 - 1.0) / 2.0) * step)
            .collect();
        let mut atoms = Vec::with_capacity(count as usize);
        let mut idx = vec![0usize; k];
        let p = 1.0 / count as f64;
        loop {
            atoms.push(Atom {
                point: idx.iter().map(|&i| levels[i]).collect(),
                prob: p,
            });
            let mut pos = k;
            while pos > 0 {
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < m {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    return Ok(DistributionSpec {
                        label: format!("uniform_cube_{k}x{m}"),
                        law: AtomLaw { dim: k, atoms },
                        normalized: true,
                    });
                }
            }
        }
    }

    /// Symmetric three-point law {−√2: 1/4, 0: 1/2, √2: 1/4}.
    pub fn three_point_symmetric() -> Self {
        let r = 2f64.sqrt();
        DistributionSpec {
            label: "three_point_symmetric".to_string(),
            law: AtomLaw {
                dim: 1,
                atoms: vec![
                    Atom {
                        point: vec![-r],
                        prob: 0.25,
                    },
                    Atom {
                        point: vec![0.0],
                        prob: 0.5,
                    },
                    Atom {
                        point: vec![r],
                        prob: 0.25,
                    },
                ],
            },
            normalized: true,
        }
    }

    /// Skewed three-point law {3: 2/21, 0: 1/3, −1/2: 4/7}; unit variance,
    /// third moment 5/2, fourth absolute moment 31/4.
    pub fn skewed_three_point() -> Self {
        DistributionSpec {
            label: "skewed_three_point".to_string(),
            law: AtomLaw {
                dim: 1,
                atoms: vec![
                    Atom {
                        point: vec![3.0],
                        prob: 2.0 / 21.0,
                    },
                    Atom {
                        point: vec![0.0],
                        prob: 1.0 / 3.0,
                    },
                    Atom {
                        point: vec![-0.5],
                        prob: 4.0 / 7.0,
                    },
                ],
            },
            normalized: true,
        }
    }

    /// A random standardized law: `m` random atoms whitened to mean zero and
    /// identity covariance.
    pub fn random_standardized<R: Rng>(k: usize, m: usize, rng: &mut R) -> Result<Self> {
        assert!(m >= k + 1, "need at least k+1 atoms to whiten");
        for _attempt in 0..64 {
            let mut atoms: Vec<Atom> = (0..m)
                .map(|_| Atom {
                    point: (0..k)
                        .map(|_| crate::rng::normal_pair(rng).0 * (1.0 + rng.random::<f64>()))
                        .collect(),
                    prob: 0.2 + rng.random::<f64>(),
                })
                .collect();
            let total: f64 = atoms.iter().map(|a| a.prob).sum();
            for a in &mut atoms {
                a.prob /= total;
            }
            let law = AtomLaw::new(k, atoms)?;
            let cov = law.covariance();
            let q = match cov.inverse_sqrt() {
                Ok(q) => q,
                Err(_) => continue,
            };
            let mean = law.mean();
            let whitened: Vec<Atom> = law
                .atoms
                .iter()
                .map(|a| {
                    let centered: Vec<f64> =
                        a.point.iter().zip(&mean).map(|(x, m)| x - m).collect();
                    Atom {
                        point: q.mul_vec(&centered),
                        prob: a.prob,
                    }
                })
                .collect();
            // Remove the O(1e-15) residue so the strict constructor accepts.
            let law = AtomLaw::new(k, whitened)?;
            let residue = law.mean();
            let atoms = law
                .atoms
                .iter()
                .map(|a| Atom {
                    point: a.point.iter().zip(&residue).map(|(x, m)| x - m).collect(),
                    prob: a.prob,
                })
                .collect();
            if let Ok(d) = Self::from_atoms(k, atoms, "random_standardized") {
                return Ok(d);
            }
        }
        Err(Error::InvalidDistribution(
            "could not whiten a random atom set".into(),
        ))
    }

    /// An m-atom quantile discretization of the standard normal, rescaled to
    /// unit variance, together with per-summand discretization error bounds.
    pub fn discretized_gaussian_1d(m: usize) -> Result<GaussianSurrogate> {
        if m < 8 || m % 2 != 0 {
            return Err(Error::InvalidArgument(
                "discretized_gaussian_1d needs an even atom count >= 8".into(),
            ));
        }
        // Conditional means of the m quantile cells: ∫_a^b xφ = φ(a) − φ(b).
        let mut pdf_at_edge = vec![0.0; m + 1];
        for i in 1..m {
            pdf_at_edge[i] = norm_pdf(norm_quantile(i as f64 / m as f64));
        }
        let p = 1.0 / m as f64;
        let mut points: Vec<f64> = (0..m)
            .map(|i| (pdf_at_edge[i] - pdf_at_edge[i + 1]) * m as f64)
            .collect();
        let var: f64 = points.iter().map(|x| p * x * x).sum();
        let scale = var.sqrt().recip();
        for x in points.iter_mut() {
            *x *= scale;
        }
        // Symmetrize exactly so the strict constructor sees mean 0.
        for i in 0..m / 2 {
            let v = 0.5 * (points[m - 1 - i] - points[i]);
            points[i] = -v;
            points[m - 1 - i] = v;
        }
        let atoms: Vec<Atom> = points
            .iter()
            .map(|&x| Atom {
                point: vec![x],
                prob: p,
            })
            .collect();
        let spec = Self::from_atoms(1, atoms, &format!("gaussian_discretized_{m}"))?;
        // W1 via ∫ |F̃ − Φ| on a fine grid.
        let mut sorted = points.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (lo, hi, h) = (-12.0f64, 12.0f64, 1e-3f64);
        let steps = ((hi - lo) / h) as usize;
        let mut w1 = 0.0;
        let mut cursor = 0usize;
        for s in 0..steps {
            let x = lo + (s as f64 + 0.5) * h;
            while cursor < m && sorted[cursor] <= x {
                cursor += 1;
            }
            let ftilde = cursor as f64 * p;
            w1 += (ftilde - norm_cdf(x)).abs() * h;
        }
        // Exact Kolmogorov distance to Φ: the empirical CDF jumps by 1/m at
        // each sorted atom, so the sup is attained one-sidedly at an atom.
        let mut ks = 0.0f64;
        for (i, &x) in sorted.iter().enumerate() {
            let phi = norm_cdf(x);
            ks = ks
                .max((phi - i as f64 * p).abs())
                .max(((i + 1) as f64 * p - phi).abs());
        }
        Ok(GaussianSurrogate {
            spec,
            w1_bound: w1 * 1.05,
            ks_bound: ks,
        })
    }

    /// Serializes to the flat text format; 17 significant digits per number.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dimension = {}", self.law.dim);
        let _ = writeln!(out, "label = {}", self.label);
        if !self.normalized {
            let _ = writeln!(out, "allow_unnormalized = true");
        }
        for a in &self.law.atoms {
            let coords: Vec<String> = a.point.iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(out, "atom = {} : {:.16e}", coords.join(" "), a.prob);
        }
        out
    }

    /// Parses the flat text format.
    ///
    /// Keys: `dimension`, `label`, optional `family` (`rademacher_product`,
    /// `uniform_cube_scaled` with `points = m`, or `discrete_mixture`),
    /// repeated `atom = x1 x2 ... xk : prob` lines, and optional
    /// `allow_unnormalized = true`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dimension: Option<usize> = None;
        let mut label: Option<String> = None;
        let mut family: Option<String> = None;
        let mut points_param: Option<usize> = None;
        let mut allow_unnormalized = false;
        let mut atoms: Vec<(Vec<f64>, f64)> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "dimension" => {
                    dimension = Some(value.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad dimension `{value}`", lineno + 1))
                    })?)
                }
                "label" => label = Some(value.to_string()),
                "family" => family = Some(value.to_string()),
                "points" => {
                    points_param = Some(value.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad points `{value}`", lineno + 1))
                    })?)
                }
                "allow_unnormalized" => {
                    allow_unnormalized = value.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad bool `{value}`", lineno + 1))
                    })?
                }
                "atom" => {
                    let (coords, prob) = value.split_once(':').ok_or_else(|| {
                        Error::Parse(format!("line {}: atom needs `coords : prob`", lineno + 1))
                    })?;
                    let point: Vec<f64> = coords
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<f64>().map_err(|_| {
                                Error::Parse(format!("line {}: bad coordinate `{t}`", lineno + 1))
                            })
                        })
                        .collect::<Result<_>>()?;
                    let prob: f64 = prob.trim().parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad probability", lineno + 1))
                    })?;
                    atoms.push((point, prob));
                }
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }

        let dim = dimension.ok_or_else(|| Error::Parse("missing `dimension` key".to_string()))?;
        let label = label.unwrap_or_else(|| "unnamed".to_string());
        match family.as_deref() {
            Some("rademacher_product") => Ok(Self::rademacher_product(dim)),
            Some("uniform_cube_scaled") => {
                let m = points_param
                    .ok_or_else(|| Error::Parse("uniform_cube_scaled needs `points`".into()))?;
                Self::uniform_cube_scaled(dim, m)
            }
            Some("discrete_mixture") | None => {
                if atoms.is_empty() {
                    return Err(Error::Parse("no atoms given".into()));
                }
                let atoms: Vec<Atom> = atoms
                    .into_iter()
                    .map(|(point, prob)| Atom { point, prob })
                    .collect();
                if allow_unnormalized {
                    Self::from_atoms_unnormalized(dim, atoms, &label)
                } else {
                    Self::from_atoms(dim, atoms, &label)
                }
            }
            Some(other) => Err(Error::Parse(format!("unknown family `{other}`"))),
        }
    }
}

/// A standardized discretization of N(0,1) together with certified
/// discretization error bounds.
#[derive(Clone, Debug)]
pub struct GaussianSurrogate {
    pub spec: DistributionSpec,
    /// Upper bound on W₁(X̃, G), G standard normal.
    pub w1_bound: f64,
    /// Exact sup_x |F̃(x) − Φ(x)| for a single summand.
    pub ks_bound: f64,
}

impl GaussianSurrogate {
    /// Bound on sup_x |P(Σθ_j X̃_j ≤ x) − Φ(x)| valid for every θ with
    /// ‖θ‖ = 1.
    ///
    /// Lindeberg swaps, smallest |θ_j| first. Replacing θ_i X̃_i by θ_i G_i
    /// changes the Kolmogorov distance by at most the smaller of
    /// (a) sup|F̃ − Φ| (convolving with an independent remainder never
    /// increases it), and (b) |θ_i|·W₁(X̃,G)/√(2π v_i) where v_i is the
    /// variance already swapped to Gaussian: x ↦ P(N(0,v_i) ≤ x − a) is
    /// Lipschitz with constant (2π v_i)^{−1/2} and W₁ controls expectations
    /// of Lipschitz functions.
    pub fn sum_ks_bound(&self, theta: &[f64]) -> f64 {
        let mut w: Vec<f64> = theta.iter().map(|t| t.abs()).collect();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut swapped_var = 0.0;
        let mut bound = 0.0;
        for &t in &w {
            let smooth = if swapped_var > 0.0 {
                t * self.w1_bound / (2.0 * std::f64::consts::PI * swapped_var).sqrt()
            } else {
                f64::INFINITY
            };
            bound += smooth.min(self.ks_bound);
            swapped_var += t * t;
        }
        bound
    }
}

/// Mixed moments `E X^ν`, `|ν| ≤ max_order`, keyed in graded lexicographic
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    pub dim: usize,
    pub max_order: u32,
    vals: BTreeMap<MultiIndex, f64>,
}

impl MomentTable {
    pub fn from_entries(dim: usize, max_order: u32, entries: BTreeMap<MultiIndex, f64>) -> Self {
        MomentTable {
            dim,
            max_order,
            vals: entries,
        }
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<f64> {
        self.vals.get(nu).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.vals.iter()
    }

    /// Moment-cumulant recursion. With `e` the first unit direction carried
    /// by ν, the generating-function identity `M' = K'·M` gives
    ///
    /// `μ_ν = Σ_{β ≤ ν−e} C(ν−e, β) · κ_{ν−β} · μ_β`,
    ///
    /// which solved for κ_ν in graded order yields every cumulant from lower
    /// ones.
    pub fn cumulants(&self) -> Result<CumulantTable> {
        let mut kappa: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for nu in MultiIndex::enumerate_up_to(self.dim, self.max_order) {
            if nu.is_zero() {
                continue;
            }
            let mu_nu = self.require(&nu)?;
            let pivot = nu
                .entries()
                .iter()
                .position(|&e| e > 0)
                .expect("nonzero index");
            let e = MultiIndex::unit(self.dim, pivot);
            let base = nu.checked_sub(&e).expect("pivot entry is positive");
            let mut rest = 0.0;
            for beta in MultiIndex::enumerate_up_to(self.dim, base.order()) {
                if beta.is_zero() || !beta.leq(&base) {
                    continue;
                }
                let coeff = base.binomial(&beta)? as f64;
                let k_idx = nu.checked_sub(&beta).expect("beta <= nu - e <= nu");
                rest += coeff * kappa[&k_idx] * self.require(&beta)?;
            }
            kappa.insert(nu, mu_nu - rest);
        }
        Ok(CumulantTable {
            dim: self.dim,
            max_order: self.max_order,
            vals: kappa,
        })
    }

    fn require(&self, nu: &MultiIndex) -> Result<f64> {
        self.get(nu).ok_or(Error::OrderUnavailable {
            have: self.max_order,
            need: nu.order(),
        })
    }
}

/// Cumulants `κ_ν`, `1 ≤ |ν| ≤ max_order`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantTable {
    pub dim: usize,
    pub max_order: u32,
    vals: BTreeMap<MultiIndex, f64>,
}

impl CumulantTable {
    pub fn from_entries(dim: usize, max_order: u32, entries: BTreeMap<MultiIndex, f64>) -> Self {
        CumulantTable {
            dim,
            max_order,
            vals: entries,
        }
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<f64> {
        self.vals.get(nu).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.vals.iter()
    }

    /// Inverse recursion: rebuilds the moment table.
    pub fn moments(&self) -> Result<MomentTable> {
        let mut mu: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        mu.insert(MultiIndex::zero(self.dim), 1.0);
        for nu in MultiIndex::enumerate_up_to(self.dim, self.max_order) {
            if nu.is_zero() {
                continue;
            }
            let pivot = nu
                .entries()
                .iter()
                .position(|&e| e > 0)
                .expect("nonzero index");
            let e = MultiIndex::unit(self.dim, pivot);
            let base = nu.checked_sub(&e).expect("pivot entry is positive");
            let mut acc = self.require(&nu)?;
            for beta in MultiIndex::enumerate_up_to(self.dim, base.order()) {
                if beta.is_zero() || !beta.leq(&base) {
                    continue;
                }
                let coeff = base.binomial(&beta)? as f64;
                let k_idx = nu.checked_sub(&beta).expect("beta <= nu - e <= nu");
                acc += coeff * self.require(&k_idx)? * mu[&beta];
            }
            mu.insert(nu, acc);
        }
        Ok(MomentTable {
            dim: self.dim,
            max_order: self.max_order,
            vals: mu,
        })
    }

    fn require(&self, nu: &MultiIndex) -> Result<f64> {
        self.get(nu).ok_or(Error::OrderUnavailable {
            have: self.max_order,
            need: nu.order(),
        })
    }

    /// Combinatorial factor bounding |κ_ν| by c₁(ν)·E‖X‖^{|ν|}: unwinding the
    /// recursion with the triangle inequality, every |μ| factor is at most
    /// the absolute moment of its order, and products of absolute moments of
    /// split orders are dominated by the absolute moment of the full order.
    pub fn c1_bound(nu: &MultiIndex) -> u64 {
        if nu.order() <= 1 {
            return 1;
        }
        let pivot = nu
            .entries()
            .iter()
            .position(|&e| e > 0)
            .expect("nonzero index");
        let e = MultiIndex::unit(nu.dim(), pivot);
        let base = nu.checked_sub(&e).expect("positive pivot");
        let mut c: u64 = 1;
        for beta in MultiIndex::enumerate_up_to(nu.dim(), base.order()) {
            if beta.is_zero() || !beta.leq(&base) {
                continue;
            }
            let coeff = base.binomial(&beta).expect("small order");
            c += coeff * Self::c1_bound(&nu.checked_sub(&beta).expect("beta <= nu"));
        }
        c
    }
}

/// Cumulant of the weighted sum `Σ_j θ_j Z_j` at index ν: by independence and
/// |ν|-homogeneity, `Σ_j θ_j^{|ν|} κ_ν(Z_j)`.
pub fn weighted_cumulant(tables: &[&CumulantTable], theta: &[f64], nu: &MultiIndex) -> Result<f64> {
    if tables.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: tables.len(),
        });
    }
    let r = nu.order() as i32;
    let mut s = 0.0;
    for (table, &w) in tables.iter().zip(theta) {
        let k = table.get(nu).ok_or(Error::OrderUnavailable {
            have: table.max_order,
            need: nu.order(),
        })?;
        s += w.powi(r) * k;
    }
    Ok(s)
}

/// Full cumulant table of the weighted sum up to `max_order`.
pub fn weighted_cumulant_table(
    tables: &[&CumulantTable],
    theta: &[f64],
    max_order: u32,
) -> Result<CumulantTable> {
    let dim = tables
        .first()
        .map(|t| t.dim)
        .ok_or_else(|| Error::InvalidArgument("no summands".into()))?;
    let mut vals = BTreeMap::new();
    for nu in MultiIndex::enumerate_up_to(dim, max_order) {
        if nu.is_zero() {
            continue;
        }
        vals.insert(nu.clone(), weighted_cumulant(tables, theta, &nu)?);
    }
    Ok(CumulantTable {
        dim,
        max_order,
        vals,
    })
}

/// Order-r cumulant form `κ_r(t) = Σ_{|ν| = r} κ_ν t^ν / ν!`.
pub fn kappa_r_poly(table: &CumulantTable, r: u32, t: &[f64]) -> Result<f64> {
    if t.len() != table.dim {
        return Err(Error::DimensionMismatch {
            expected: table.dim,
            got: t.len(),
        });
    }
    let mut s = 0.0;
    for nu in MultiIndex::enumerate_order(table.dim, r) {
        let k = table.get(&nu).ok_or(Error::OrderUnavailable {
            have: table.max_order,
            need: r,
        })?;
        s += k * nu.power(t) / nu.factorial()? as f64;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn rademacher_moments() {
        let d = DistributionSpec::rademacher();
        let m = d.law().moments_table(6);
        for r in 0..=6u8 {
            let want = if r % 2 == 0 { 1.0 } else { 0.0 };
            assert_eq!(m.get(&MultiIndex::new(&[r])).unwrap(), want);
        }
    }

    #[test]
    fn three_point_moments_and_absolute_moment() {
        let d = DistributionSpec::three_point_symmetric();
        let m = d.law().moments_table(4);
        assert!((m.get(&MultiIndex::new(&[2])).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.get(&MultiIndex::new(&[4])).unwrap() - 2.0).abs() < 1e-15);
        // E|X|³ = 2·(1/4)·(√2)³ = √2.
        assert!((d.law().absolute_moment(3.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn skewed_three_point_is_standardized_with_stated_moments() {
        let d = DistributionSpec::skewed_three_point();
        assert!(d.is_normalized());
        let m = d.law().moments_table(4);
        assert!((m.get(&MultiIndex::new(&[3])).unwrap() - 2.5).abs() < 1e-14);
        assert!((d.delta4() - 7.75).abs() < 1e-14);
    }

    #[test]
    fn rademacher_kappa4_is_minus_two() {
        let d = DistributionSpec::rademacher();
        let c = d.law().cumulants(6).unwrap();
        assert!((c.get(&MultiIndex::new(&[2])).unwrap() - 1.0).abs() < 1e-14);
        assert!((c.get(&MultiIndex::new(&[4])).unwrap() + 2.0).abs() < 1e-12);
        assert!((c.get(&MultiIndex::new(&[6])).unwrap() - 16.0).abs() < 1e-11);
    }

    #[test]
    fn three_point_kappa4_is_minus_one() {
        let d = DistributionSpec::three_point_symmetric();
        let c = d.law().cumulants(4).unwrap();
        assert!((c.get(&MultiIndex::new(&[4])).unwrap() + 1.0).abs() < 1e-13);
    }

    /// Independent 1D oracle: cumulants as coefficients of the series
    /// logarithm of the exponential moment generating series.
    fn series_log_cumulants(moments: &[f64]) -> Vec<f64> {
        let s = moments.len() - 1;
        // EGF coefficients a_i = μ_i / i!, a_0 = 1.
        let fact: Vec<f64> = (0..=s)
            .scan(1.0, |acc, i| {
                if i > 0 {
                    *acc *= i as f64;
                }
                Some(*acc)
            })
            .collect();
        let a: Vec<f64> = moments
            .iter()
            .enumerate()
            .map(|(i, m)| m / fact[i])
            .collect();
        // log(1 + A) = Σ_{j≥1} (−1)^{j+1} A^j / j, truncated at order s.
        let mut log = vec![0.0; s + 1];
        let mut apow = vec![0.0; s + 1];
        apow[0] = 1.0;
        for j in 1..=s {
            // apow = apow * A (A = a with a[0] = 0), truncated.
            let mut next = vec![0.0; s + 1];
            for i in 0..=s {
                for m in 1..=s - i {
                    next[i + m] += apow[i] * a[m];
                }
            }
            apow = next;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            for i in 0..=s {
                log[i] += sign * apow[i] / j as f64;
            }
        }
        (0..=s).map(|i| log[i] * fact[i]).collect()
    }

    #[test]
    fn cumulants_match_series_log_oracle_1d() {
        let laws = [
            DistributionSpec::rademacher(),
            DistributionSpec::three_point_symmetric(),
            DistributionSpec::skewed_three_point(),
        ];
        for d in laws {
            let s = 6u32;
            let m = d.law().moments_table(s);
            let mus: Vec<f64> = (0..=s)
                .map(|r| m.get(&MultiIndex::new(&[r as u8])).unwrap())
                .collect();
            let oracle = series_log_cumulants(&mus);
            let c = m.cumulants().unwrap();
            for r in 1..=s {
                let got = c.get(&MultiIndex::new(&[r as u8])).unwrap();
                assert!(
                    (got - oracle[r as usize]).abs() <= 1e-10 * oracle[r as usize].abs().max(1.0),
                    "{}: r={r} got={got} oracle={}",
                    d.label,
                    oracle[r as usize]
                );
            }
        }
    }

    #[test]
    fn moment_cumulant_roundtrip_random_tables() {
        let mut rng = stream_rng(11, 0);
        for trial in 0..60 {
            let k = 1 + trial % 3;
            let d = DistributionSpec::random_standardized(k, k + 3, &mut rng).unwrap();
            let m = d.law().moments_table(6);
            let c = m.cumulants().unwrap();
            let back = c.moments().unwrap();
            for (nu, &mu) in m.iter() {
                let b = back.get(nu).unwrap();
                assert!(
                    (mu - b).abs() <= 1e-12 * mu.abs().max(1.0),
                    "trial {trial} nu {nu}: {mu} vs {b}"
                );
            }
        }
    }

    #[test]
    fn moments_dominated_by_absolute_moments() {
        let mut rng = stream_rng(12, 0);
        for _ in 0..20 {
            let d = DistributionSpec::random_standardized(2, 5, &mut rng).unwrap();
            let m = d.law().moments_table(6);
            for (nu, &mu) in m.iter() {
                let rho = d.law().absolute_moment(nu.order() as f64);
                assert!(mu.abs() <= rho * (1.0 + 1e-12), "nu {nu}: |{mu}| > {rho}");
            }
        }
    }

    #[test]
    fn cumulants_within_c1_triangle_bound() {
        let mut rng = stream_rng(13, 0);
        for _ in 0..20 {
            let d = DistributionSpec::random_standardized(2, 6, &mut rng).unwrap();
            let c = d.law().cumulants(6).unwrap();
            for (nu, &kv) in c.iter() {
                let bound =
                    CumulantTable::c1_bound(nu) as f64 * d.law().absolute_moment(nu.order() as f64);
                assert!(
                    kv.abs() <= bound * (1.0 + 1e-12),
                    "nu {nu}: |{kv}| > {bound}"
                );
            }
        }
    }

    #[test]
    fn weighted_cumulant_two_equal_weights() {
        let d = DistributionSpec::skewed_three_point();
        let c = d.law().cumulants(3).unwrap();
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let nu = MultiIndex::new(&[3]);
        let got = weighted_cumulant(&[&c, &c], &[w, w], &nu).unwrap();
        let single = c.get(&nu).unwrap();
        assert!((got - single / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn kappa_r_poly_values() {
        // k=1: κ₃ = c gives κ_3(t) = c·t³/6.
        let mut vals = BTreeMap::new();
        vals.insert(MultiIndex::new(&[3]), 1.7);
        let table = CumulantTable::from_entries(1, 3, vals);
        let got = kappa_r_poly(&table, 3, &[2.0]).unwrap();
        assert!((got - 1.7 * 8.0 / 6.0).abs() < 1e-14);

        // k=2 identity-covariance table: κ_2(t) = (t₁² + t₂²)/2 at t=(1,1).
        let d = DistributionSpec::rademacher_product(2);
        let c = d.law().cumulants(2).unwrap();
        let got = kappa_r_poly(&c, 2, &[1.0, 1.0]).unwrap();
        assert!((got - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parse_serialize_roundtrip() {
        let d = DistributionSpec::skewed_three_point();
        let text = d.to_text();
        assert!(text.contains("dimension = 1"));
        let back = DistributionSpec::parse(&text).unwrap();
        assert_eq!(back.dim(), 1);
        for (a, b) in d.law().atoms.iter().zip(&back.law().atoms) {
            assert!((a.point[0] - b.point[0]).abs() < 1e-15);
            assert!((a.prob - b.prob).abs() < 1e-15);
        }
    }

    #[test]
    fn parse_families_and_errors() {
        let d = DistributionSpec::parse("dimension = 2\nfamily = rademacher_product\n").unwrap();
        assert_eq!(d.law().atoms.len(), 4);
        let d =
            DistributionSpec::parse("dimension = 1\nfamily = uniform_cube_scaled\npoints = 5\n")
                .unwrap();
        assert!(d.is_normalized());
        let m = d.law().moments_table(2);
        assert!((m.get(&MultiIndex::new(&[2])).unwrap() - 1.0).abs() < 1e-14);

        assert!(DistributionSpec::parse("label = x\n").is_err());
        assert!(
            DistributionSpec::parse("dimension = 1\natom = 1 : 0.4\natom = -1 : 0.4\n").is_err()
        );
        // Unnormalized escape hatch accepts a non-standard law.
        let text = "dimension = 1\nallow_unnormalized = true\natom = 2 : 0.5\natom = 0 : 0.5\n";
        let d = DistributionSpec::parse(text).unwrap();
        assert!(!d.is_normalized());
    }

    #[test]
    fn unnormalized_rejected_by_strict_constructor() {
        let atoms = vec![
            Atom {
                point: vec![2.0],
                prob: 0.5,
            },
            Atom {
                point: vec![0.0],
                prob: 0.5,
            },
        ];
        assert!(DistributionSpec::from_atoms(1, atoms.clone(), "bad").is_err());
        assert!(DistributionSpec::from_atoms_unnormalized(1, atoms, "ok").is_ok());
    }

    #[test]
    fn discretized_gaussian_is_standardized_with_small_bounds() {
        let g = DistributionSpec::discretized_gaussian_1d(256).unwrap();
        assert!(g.spec.is_normalized());
        assert!(g.w1_bound > 0.0 && g.w1_bound < 1e-2, "w1 = {}", g.w1_bound);
        // Single-summand KS at most one cell of mass.
        assert!(g.ks_bound > 0.0 && g.ks_bound <= 1.0 / 256.0 + 1e-12);
        let m = g.spec.law().moments_table(4);
        // Fourth moment approaches 3 from below as the grid refines.
        let m4 = m.get(&MultiIndex::new(&[4])).unwrap();
        assert!((m4 - 3.0).abs() < 0.05, "m4 = {m4}");
        // Sum-level bound: n=1 degenerates to the single-summand KS; equal
        // weights shrink per-swap cost but accumulate over n.
        assert!((g.sum_ks_bound(&[1.0]) - g.ks_bound).abs() < 1e-15);
        let n = 64;
        let eq = vec![(n as f64).sqrt().recip(); n];
        let b = g.sum_ks_bound(&eq);
        assert!(b > 0.0 && b < 0.06, "sum bound {b}");
    }
}
