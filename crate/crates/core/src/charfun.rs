//! Exact characteristic functions of weighted sums and 1D CDF recovery.
//!
//! The cf of S = Σθ_jX_j is the product Πφ_j(θ_j t). Three recovery routes,
//! chosen automatically:
//!
//! * exact enumeration of the sum's atoms when the product of per-summand
//!   atom counts is small;
//! * exact lattice convolution when the weights are all equal and the shared
//!   source law sits on an arithmetic lattice (the equal-weight cf is
//!   quasi-periodic, so quadrature is the wrong tool there);
//! * Gil–Pelaez trapezoid quadrature otherwise, with an alias-free step
//!   (the trapezoid sum equals the exact CDF plus images shifted by 2π/h,
//!   so the discretization error is the tail mass beyond the window) and a
//!   truncation radius tuned against the enumeration oracles.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::moments::{AtomLaw, DistributionSpec};
use crate::special::{norm_cdf, norm_quantile};
use crate::sphere::WeightVector;

/// One summand's characteristic function.
#[derive(Clone, Debug)]
pub enum CfComponent {
    Atoms {
        points: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
    StdGaussian {
        dim: usize,
    },
}

impl CfComponent {
    pub fn from_law(law: &AtomLaw) -> Self {
        CfComponent::Atoms {
            points: law.atoms.iter().map(|a| a.point.clone()).collect(),
            probs: law.atoms.iter().map(|a| a.prob).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CfComponent::Atoms { points, .. } => points.first().map_or(0, |p| p.len()),
            CfComponent::StdGaussian { dim } => *dim,
        }
    }

    /// φ(scale·t).
    fn cf(&self, scale: f64, t: &[f64]) -> Complex64 {
        match self {
            CfComponent::Atoms { points, probs } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, &p) in points.iter().zip(probs) {
                    let phase: f64 = scale * x.iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
                    acc += Complex64::from_polar(p, phase);
                }
                acc
            }
            CfComponent::StdGaussian { .. } => {
                let norm2: f64 = t.iter().map(|x| x * x).sum();
                Complex64::new((-0.5 * scale * scale * norm2).exp(), 0.0)
            }
        }
    }

    fn atom_count(&self) -> Option<usize> {
        match self {
            CfComponent::Atoms { probs, .. } => Some(probs.len()),
            CfComponent::StdGaussian { .. } => None,
        }
    }

    fn max_norm(&self) -> f64 {
        match self {
            CfComponent::Atoms { points, .. } => points
                .iter()
                .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            // Effective support: N(0,1) mass beyond ±9 is ~1e-19.
            CfComponent::StdGaussian { .. } => 9.0,
        }
    }

    /// Sub-Gaussian proxy standard deviation (Hoeffding for bounded atoms).
    fn sub_gaussian_sigma(&self) -> f64 {
        match self {
            CfComponent::Atoms { .. } => self.max_norm(),
            CfComponent::StdGaussian { .. } => 1.0,
        }
    }

    fn mean_1d(&self) -> f64 {
        match self {
            CfComponent::Atoms { points, probs } => {
                points.iter().zip(probs).map(|(x, &p)| p * x[0]).sum()
            }
            CfComponent::StdGaussian { .. } => 0.0,
        }
    }
}

enum ComponentSet {
    Iid(CfComponent),
    PerSummand(Vec<CfComponent>),
}

/// The characteristic function of Σθ_jX_j with independent summands.
pub struct ProductCf {
    dim: usize,
    theta: Vec<f64>,
    components: ComponentSet,
}

impl ProductCf {
    /// i.i.d. summands drawn from one source law.
    pub fn iid(d: &DistributionSpec, w: &WeightVector) -> Self {
        ProductCf {
            dim: d.dim(),
            theta: w.theta().to_vec(),
            components: ComponentSet::Iid(CfComponent::from_law(d.law())),
        }
    }

    pub fn iid_component(c: CfComponent, w: &WeightVector) -> Self {
        ProductCf {
            dim: c.dim(),
            theta: w.theta().to_vec(),
            components: ComponentSet::Iid(c),
        }
    }

    pub fn per_summand(cs: Vec<CfComponent>, w: &WeightVector) -> Result<Self> {
        if cs.len() != w.n() {
            return Err(Error::DimensionMismatch {
                expected: w.n(),
                got: cs.len(),
            });
        }
        let dim = cs.first().map(|c| c.dim()).unwrap_or(0);
        if cs.iter().any(|c| c.dim() != dim) {
            return Err(Error::InvalidArgument("summand dimensions disagree".into()));
        }
        Ok(ProductCf {
            dim,
            theta: w.theta().to_vec(),
            components: ComponentSet::PerSummand(cs),
        })
    }

    /// Exact standard normal summands: the sum is N(0,1) for any unit θ.
    pub fn gaussian_injection(w: &WeightVector) -> Self {
        ProductCf {
            dim: 1,
            theta: w.theta().to_vec(),
            components: ComponentSet::Iid(CfComponent::StdGaussian { dim: 1 }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn component(&self, j: usize) -> &CfComponent {
        match &self.components {
            ComponentSet::Iid(c) => c,
            ComponentSet::PerSummand(cs) => &cs[j],
        }
    }

    fn iid_component_ref(&self) -> Option<&CfComponent> {
        match &self.components {
            ComponentSet::Iid(c) => Some(c),
            ComponentSet::PerSummand(_) => None,
        }
    }

    /// Π_j φ_j(θ_j·t).
    pub fn eval_cf(&self, t: &[f64]) -> Result<Complex64> {
        if t.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: t.len(),
            });
        }
        let mut acc = Complex64::new(1.0, 0.0);
        for (j, &w) in self.theta.iter().enumerate() {
            acc *= self.component(j).cf(w, t);
        }
        Ok(acc)
    }

    /// Mean of S (k = 1).
    pub fn mean_1d(&self) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(j, &w)| w * self.component(j).mean_1d())
            .sum()
    }

    fn equal_weights(&self) -> bool {
        self.theta.windows(2).all(|w| w[0] == w[1]) && self.theta[0] > 0.0
    }

    /// Σ_j |θ_j|·(max atom norm of summand j).
    fn support_bound(&self) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(j, &w)| w.abs() * self.component(j).max_norm())
            .sum()
    }

    fn sub_gaussian_sigma2(&self) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                let s = self.component(j).sub_gaussian_sigma();
                w * w * s * s
            })
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Exact routes.

/// Cap on enumerated sum atoms (product of per-summand atom counts).
pub const ENUMERATION_CAP: usize = 1 << 20;

/// Guard on lattice convolution states.
const LATTICE_STATE_CAP: usize = 30_000_000;

/// All atoms of S = Σθ_jX_j as sorted (value, prob) pairs, when the product
/// of atom counts stays within `cap`. Ties are left unmerged; downstream
/// accumulation handles them.
pub fn enumerate_sum_atoms_1d(p: &ProductCf, cap: usize) -> Option<Vec<(f64, f64)>> {
    if p.dim != 1 {
        return None;
    }
    let mut total: usize = 1;
    for j in 0..p.n() {
        let w = p.component(j).atom_count()?;
        total = total.checked_mul(w)?;
        if total > cap {
            return None;
        }
    }
    let mut acc: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for (j, &wt) in p.theta.iter().enumerate() {
        let (points, probs) = match p.component(j) {
            CfComponent::Atoms { points, probs } => (points, probs),
            CfComponent::StdGaussian { .. } => unreachable!("checked above"),
        };
        let mut next = Vec::with_capacity(acc.len() * probs.len());
        for &(v, q) in &acc {
            for (x, &pp) in points.iter().zip(probs) {
                next.push((v + wt * x[0], q * pp));
            }
        }
        acc = next;
    }
    acc.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Some(acc)
}

/// Arithmetic-lattice spacing of a point set, if one exists: the largest g
/// with every |x| an integer multiple of g (floating-point Euclid).
fn lattice_spacing(values: &[f64]) -> Option<f64> {
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let tol = scale * 1e-9;
    let mut g = 0.0f64;
    for &x in values {
        let mut a = g.max(x.abs());
        let mut b = g.min(x.abs());
        while b > tol {
            let r = a % b;
            let r = r.min(b - r);
            a = b;
            b = r;
        }
        g = a;
    }
    if g <= tol {
        return None;
    }
    // Verify and reject absurdly fine lattices.
    for &x in values {
        let m = (x / g).round();
        if (x - m * g).abs() > tol || m.abs() > 2e6 {
            return None;
        }
    }
    Some(g)
}

/// Exact law of S for equal weights over an i.i.d. lattice source: integer
/// convolution, n passes. Returns sorted (value, prob) with zero-prob lattice
/// sites kept.
fn lattice_convolution(p: &ProductCf) -> Option<Vec<(f64, f64)>> {
    if p.dim != 1 || !p.equal_weights() {
        return None;
    }
    let comp = p.iid_component_ref()?;
    let (points, probs) = match comp {
        CfComponent::Atoms { points, probs } => (points, probs),
        CfComponent::StdGaussian { .. } => return None,
    };
    let xs: Vec<f64> = points.iter().map(|x| x[0]).collect();
    let g = lattice_spacing(&xs)?;
    let offsets: Vec<i64> = xs.iter().map(|&x| (x / g).round() as i64).collect();
    let m_min = *offsets.iter().min()?;
    let m_max = *offsets.iter().max()?;
    let span = (m_max - m_min) as usize;
    let n = p.n();
    if span == 0 {
        return None;
    }
    let states = n * span + 1;
    if states > LATTICE_STATE_CAP / n.max(1) && states > 1 << 22 {
        return None;
    }
    let mut dist = vec![0.0f64; states];
    dist[0] = 1.0;
    let mut filled = 1usize;
    for _ in 0..n {
        let new_len = filled + span;
        let mut next = vec![0.0f64; new_len];
        for (i, &q) in dist[..filled].iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            for (&m, &pp) in offsets.iter().zip(probs) {
                next[i + (m - m_min) as usize] += q * pp;
            }
        }
        dist = next;
        filled = new_len;
    }
    let theta = p.theta[0];
    let base = theta * g;
    Some(
        dist.into_iter()
            .enumerate()
            .map(|(i, q)| (base * (i as i64 + n as i64 * m_min) as f64, q))
            .collect(),
    )
}

fn exact_sum_atoms(p: &ProductCf) -> Option<(Vec<(f64, f64)>, &'static str)> {
    if let Some(atoms) = lattice_convolution(p) {
        return Some((atoms, "lattice_convolution"));
    }
    enumerate_sum_atoms_1d(p, ENUMERATION_CAP).map(|a| (a, "exact_enumeration"))
}

fn exact_cdf_at(atoms: &[(f64, f64)], x: f64) -> f64 {
    let mut f = 0.0;
    for &(v, q) in atoms {
        if v <= x {
            f += q;
        } else {
            break;
        }
    }
    f
}

// ---------------------------------------------------------------------------
// Gil–Pelaez quadrature.

/// Truncation radius and node step for the inversion integral.
#[derive(Clone, Copy, Debug)]
pub struct CdfParams {
    pub t_max: f64,
    pub step: f64,
}

/// Alias tail probability accepted when capping the window by the
/// sub-Gaussian radius instead of the exact support.
const ALIAS_EPS: f64 = 1e-9;

fn t_max_for(n: usize) -> f64 {
    // Tuned against exact enumeration: small n keeps near-lattice revivals,
    // large n is pure Gaussian lobe (the cf of a generic θ dies like
    // exp(−t²/2) well before the first revival). Near an atom of mass p the
    // truncated integral carries Gibbs residue ~p/(π·T·dist), so small-n
    // accuracy at points adjacent to atoms is capped near p/2, not 1e−6.
    if n < 24 {
        8.0e5
    } else if n < 48 {
        1.2e4
    } else if n < 64 {
        2.0e3
    } else {
        (0.75 * (n as f64).sqrt()).max(40.0)
    }
}

impl CdfParams {
    /// Alias-free step for evaluation points within ±x_abs_max and the tuned
    /// truncation radius. The window uses the smaller of the exact support
    /// bound and the sub-Gaussian radius at mass 1e−9.
    pub fn auto(p: &ProductCf, x_abs_max: f64) -> Self {
        let support = p.support_bound();
        let sub_gaussian = (2.0 * p.sub_gaussian_sigma2() * (2.0 / ALIAS_EPS).ln()).sqrt();
        let window = support.min(sub_gaussian) + x_abs_max.abs() + 2.0;
        CdfParams {
            t_max: t_max_for(p.n()),
            step: 2.0 * std::f64::consts::PI / window,
        }
    }
}

/// φ(m·h) for m = 1..=M, built once and shared across evaluation points.
/// Incremental phasor rotation with periodic exact resynchronization.
struct PhiTable {
    step: f64,
    values: Vec<Complex64>,
}

const RESYNC_PERIOD: usize = 2048;

fn build_phi_table(p: &ProductCf, params: &CdfParams) -> Result<PhiTable> {
    let h = params.step;
    let m_count = (params.t_max / h).ceil() as usize;
    // Flat phasor state: one rotating unit per (summand, atom).
    let mut cur: Vec<Complex64> = Vec::new();
    let mut rot: Vec<Complex64> = Vec::new();
    let mut probs_flat: Vec<f64> = Vec::new();
    let mut group: Vec<u32> = Vec::new(); // atoms per summand, in order
    let mut angles: Vec<f64> = Vec::new();
    let mut gaussian_scales: Vec<f64> = Vec::new();
    for (j, &w) in p.theta.iter().enumerate() {
        match p.component(j) {
            CfComponent::Atoms { points, probs } => {
                group.push(probs.len() as u32);
                for (x, &q) in points.iter().zip(probs) {
                    let ang = w * x[0];
                    angles.push(ang);
                    let (s, c) = (ang * h).sin_cos();
                    rot.push(Complex64::new(c, s));
                    cur.push(Complex64::new(c, s));
                    probs_flat.push(q);
                }
            }
            CfComponent::StdGaussian { .. } => {
                group.push(0);
                gaussian_scales.push(w);
            }
        }
    }
    let mut values = Vec::with_capacity(m_count);
    for m in 1..=m_count {
        let t = m as f64 * h;
        if (m - 1) % RESYNC_PERIOD == 0 && m > 1 {
            for (c, &ang) in cur.iter_mut().zip(&angles) {
                let (s, co) = (ang * t).sin_cos();
                *c = Complex64::new(co, s);
            }
        }
        let mut phi = Complex64::new(1.0, 0.0);
        let mut base = 0usize;
        for &glen in &group {
            if glen == 0 {
                continue;
            }
            let mut comp = Complex64::new(0.0, 0.0);
            for i in base..base + glen as usize {
                comp += cur[i] * probs_flat[i];
            }
            phi *= comp;
            base += glen as usize;
        }
        for &w in &gaussian_scales {
            phi *= Complex64::new((-0.5 * w * w * t * t).exp(), 0.0);
        }
        if !phi.re.is_finite() || !phi.im.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "characteristic function overflowed at t = {t}"
            )));
        }
        values.push(phi);
        for (c, r) in cur.iter_mut().zip(&rot) {
            *c *= r;
        }
    }
    Ok(PhiTable { step: h, values })
}

/// Trapezoid Gil–Pelaez: F(x) = ½ − (1/π)∫₀^T Im[e^{−itx}φ(t)]/t dt with the
/// integrand's t→0 limit (mean − x) at the origin node.
fn cdf_from_table(table: &PhiTable, mean: f64, xs: &[f64]) -> Vec<f64> {
    let h = table.step;
    let m_count = table.values.len();
    xs.iter()
        .map(|&x| {
            let mut sum = 0.5 * (mean - x);
            let (s, c) = (-h * x).sin_cos();
            let rot = Complex64::new(c, s);
            let mut e = rot;
            for (m, &phi) in table.values.iter().enumerate() {
                let t = (m + 1) as f64 * h;
                if m > 0 && m % RESYNC_PERIOD == 0 {
                    let (s, c) = (-t * x).sin_cos();
                    e = Complex64::new(c, s);
                }
                let g = (e * phi).im / t;
                sum += if m + 1 == m_count { 0.5 * g } else { g };
                e *= rot;
            }
            (0.5 - sum * h / std::f64::consts::PI).clamp(0.0, 1.0)
        })
        .collect()
}

/// Forced quadrature evaluation (bypasses the exact routes).
pub fn cdf_grid_1d_quadrature(p: &ProductCf, xs: &[f64], params: &CdfParams) -> Result<Vec<f64>> {
    if p.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.dim,
        });
    }
    let table = build_phi_table(p, params)?;
    Ok(cdf_from_table(&table, p.mean_1d(), xs))
}

/// Estimated quadrature error: alias tail (zero when the window covers the
/// exact support) plus a probed bound of the truncated cf tail.
pub fn quadrature_error_estimate(p: &ProductCf, params: &CdfParams) -> f64 {
    let support = p.support_bound();
    let window = 2.0 * std::f64::consts::PI / params.step;
    let alias = if window >= support { 0.0 } else { ALIAS_EPS };
    let probes = 64;
    let mut tail_sup = 0.0f64;
    for i in 0..probes {
        let t = params.t_max * 3.0f64.powf(i as f64 / (probes - 1) as f64);
        let v = p.eval_cf(&[t]).map(|c| c.norm()).unwrap_or(1.0);
        tail_sup = tail_sup.max(v);
    }
    alias + tail_sup * 3.0f64.ln() / std::f64::consts::PI + 1e-12
}

/// P(S ≤ x): exact when the law is enumerable or lattice, quadrature
/// otherwise (`params` or the auto rule).
pub fn cdf_1d(p: &ProductCf, x: f64, params: Option<CdfParams>) -> Result<f64> {
    Ok(cdf_grid_1d(p, &[x], params)?[0])
}

pub fn cdf_grid_1d(p: &ProductCf, xs: &[f64], params: Option<CdfParams>) -> Result<Vec<f64>> {
    if p.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.dim,
        });
    }
    if let Some((atoms, _)) = exact_sum_atoms(p) {
        return Ok(xs.iter().map(|&x| exact_cdf_at(&atoms, x)).collect());
    }
    let params = params.unwrap_or_else(|| {
        let xmax = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        CdfParams::auto(p, xmax)
    });
    cdf_grid_1d_quadrature(p, xs, &params)
}

// ---------------------------------------------------------------------------
// Kolmogorov distance.

/// Evaluation grid for the quadrature route: standard normal quantiles at
/// `levels` interior levels plus fixed tail points.
#[derive(Clone, Debug)]
pub struct KsGrid {
    pub levels: usize,
    pub tail_points: Vec<f64>,
}

impl Default for KsGrid {
    fn default() -> Self {
        KsGrid {
            levels: 257,
            tail_points: vec![3.25, 3.75, 4.5, 5.5, 7.0, 9.0],
        }
    }
}

impl KsGrid {
    pub fn points(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = (1..=self.levels)
            .map(|i| norm_quantile(i as f64 / (self.levels + 1) as f64))
            .collect();
        for &t in &self.tail_points {
            xs.push(t);
            xs.push(-t);
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs
    }
}

#[derive(Clone, Debug)]
pub struct KsResult {
    pub distance: f64,
    pub witness: f64,
    pub method: &'static str,
    /// Estimated numerical error of the reported distance (0-ish for exact
    /// routes; alias + truncation estimate for quadrature).
    pub method_error: f64,
}

/// Two-sided sup over atoms of |F − Φ|: on atomless stretches F is constant
/// and Φ monotone, so the sup is attained one-sidedly at atom locations.
fn ks_from_atoms(atoms: &[(f64, f64)]) -> (f64, f64) {
    let mut best = 0.0f64;
    let mut witness = 0.0f64;
    let mut cum = 0.0f64;
    let mut i = 0usize;
    while i < atoms.len() {
        let x = atoms[i].0;
        let mut mass = 0.0;
        while i < atoms.len() && atoms[i].0 == x {
            mass += atoms[i].1;
            i += 1;
        }
        let phi = norm_cdf(x);
        let left = (phi - cum).abs();
        cum += mass;
        let right = (cum - phi).abs();
        let dev = left.max(right);
        if dev > best {
            best = dev;
            witness = x;
        }
    }
    (best, witness)
}

/// sup_x |P(S ≤ x) − Φ(x)|, exact for enumerable or equal-weight lattice
/// laws (both one-sided values at every atom), quadrature on a normal
/// quantile grid otherwise.
pub fn kolmogorov_distance_1d(p: &ProductCf, grid: &KsGrid) -> Result<KsResult> {
    kolmogorov_distance_affine_1d(p, 1.0, 0.0, grid)
}

/// Kolmogorov distance of the rescaled sum scale·(S − shift) to N(0,1).
pub fn kolmogorov_distance_affine_1d(
    p: &ProductCf,
    scale: f64,
    shift: f64,
    grid: &KsGrid,
) -> Result<KsResult> {
    if p.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.dim,
        });
    }
    if !(scale > 0.0) || !shift.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "affine map needs positive scale and finite shift, got ({scale}, {shift})"
        )));
    }
    if let Some((mut atoms, method)) = exact_sum_atoms(p) {
        for a in &mut atoms {
            a.0 = scale * (a.0 - shift);
        }
        let (distance, witness) = ks_from_atoms(&atoms);
        return Ok(KsResult {
            distance,
            witness,
            method,
            method_error: 1e-12,
        });
    }
    let xs = grid.points();
    // P(scale·(S − shift) ≤ x) = F_S(x/scale + shift).
    let ys: Vec<f64> = xs.iter().map(|&x| x / scale + shift).collect();
    let ymax = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let params = CdfParams::auto(p, ymax);
    let fs = cdf_grid_1d_quadrature(p, &ys, &params)?;
    let mut best = 0.0;
    let mut witness = 0.0;
    for (&x, &f) in xs.iter().zip(&fs) {
        let dev = (f - norm_cdf(x)).abs();
        if dev > best {
            best = dev;
            witness = x;
        }
    }
    Ok(KsResult {
        distance: best,
        witness,
        method: "gil_pelaez_quadrature",
        method_error: quadrature_error_estimate(p, &params),
    })
}
