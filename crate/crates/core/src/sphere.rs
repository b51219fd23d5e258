//! Uniform weight vectors on the unit sphere S^{n−1}, their fourth-moment
//! statistics, and the tail-concentration experiment that separates typical
//! weight vectors from adversarial ones.
//!
//! Sampling uses the Gaussian-normalize construction Θ = Γ/‖Γ‖ with Γ a
//! standard normal vector, so 𝔼Θ_j² = 1/n and 𝔼Θ_j⁴ = 3/(n(n+2)).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, ExecPolicy};
use crate::fit::least_squares_line;
use crate::moments::DistributionSpec;
use crate::multiindex::MultiIndex;
use crate::rng::{fill_standard_normal, stream_rng};
use crate::truncation::truncate;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Sampled { seed: u64, stream: u64 },
    EqualWeights,
    Explicit,
}

/// A point of S^{n−1}: Σθ_j² = 1 within 1e−12.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    theta: Vec<f64>,
    pub provenance: Provenance,
}

impl WeightVector {
    pub fn equal_weights(n: usize) -> Self {
        assert!(n >= 1);
        WeightVector {
            theta: vec![(n as f64).sqrt().recip(); n],
            provenance: Provenance::EqualWeights,
        }
    }

    /// Uniform draw on S^{n−1}, deterministic in (seed, stream).
    ///
    /// Replicate r of an experiment uses stream r. An all-zero normal draw
    /// (probability zero, but cheap to guard) resamples from a shifted
    /// substream and logs the event to stderr.
    pub fn sample_uniform(n: usize, seed: u64, stream: u64) -> Self {
        assert!(n >= 1);
        for attempt in 0u64..16 {
            let mut rng = stream_rng(seed, stream + (attempt << 48));
            let mut theta = vec![0.0; n];
            fill_standard_normal(&mut rng, &mut theta);
            let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                for x in theta.iter_mut() {
                    *x /= norm;
                }
                return WeightVector {
                    theta,
                    provenance: Provenance::Sampled { seed, stream },
                };
            }
            eprintln!("degenerate zero-norm draw at (seed={seed}, stream={stream}), resampling");
        }
        unreachable!("sixteen consecutive all-zero normal draws");
    }

    /// Wraps an explicit vector, validating the unit-norm invariant.
    pub fn explicit(theta: Vec<f64>) -> Result<Self> {
        let norm2: f64 = theta.iter().map(|x| x * x).sum();
        if theta.is_empty() || (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weight vector has squared norm {norm2}, want 1"
            )));
        }
        Ok(WeightVector {
            theta,
            provenance: Provenance::Explicit,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }
}

/// Weighted fourth-moment statistics of a weight vector.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaStats {
    /// δ_θ⁴ = Σ θ_j⁴ δ_j⁴.
    pub delta_theta4: f64,
    pub sum_theta3: f64,
}

pub fn theta_stats(w: &WeightVector, delta4s: &[f64]) -> Result<ThetaStats> {
    if delta4s.len() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: delta4s.len(),
        });
    }
    let mut delta_theta4 = 0.0;
    let mut sum_theta3 = 0.0;
    for (&t, &d4) in w.theta().iter().zip(delta4s) {
        let t2 = t * t;
        delta_theta4 += t2 * t2 * d4;
        sum_theta3 += t2 * t;
    }
    Ok(ThetaStats {
        delta_theta4,
        sum_theta3,
    })
}

/// One empirical exceedance curve P(S ≥ t) with its stretched-exponential
/// fit: slope of log(−log p̂) against log t over p̂ ∈ [10/M, 1/2].
#[derive(Clone, Debug, Serialize)]
pub struct ExceedanceCurve {
    pub t_grid: Vec<f64>,
    pub counts: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub fitted_exponent: Option<f64>,
    pub fit_points: usize,
    /// No exceedance even at the smallest threshold.
    pub all_subcritical: bool,
}

impl ExceedanceCurve {
    fn from_counts(t_grid: Vec<f64>, counts: Vec<u64>, m: usize) -> Self {
        let p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / m as f64).collect();
        let all_subcritical = counts.first().is_some_and(|&c| c == 0);
        let lo = 10.0 / m as f64;
        let pts: Vec<(f64, f64)> = t_grid
            .iter()
            .zip(&p_hat)
            .filter(|&(_, &p)| p >= lo && p <= 0.5)
            .map(|(&t, &p)| (t.ln(), (-p.ln()).ln()))
            .collect();
        let fit_points = pts.len();
        let fitted_exponent = if all_subcritical || fit_points < 3 {
            None
        } else {
            least_squares_line(&pts).map(|(slope, _)| slope)
        };
        ExceedanceCurve {
            t_grid,
            counts,
            p_hat,
            fitted_exponent,
            fit_points,
            all_subcritical,
        }
    }
}

/// Exceedance curves for the two weighted tail statistics
/// S₁ = n·|Σθ_j³μ_ν(Z_j)|/δ⁴ and S₂ = n·Σθ_j⁴δ_j⁴/δ⁴ over sphere-uniform θ.
#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub nu: String,
    pub delta4: f64,
    pub s1: ExceedanceCurve,
    pub s2: ExceedanceCurve,
    /// Every replicate had S₁ = 0 exactly (symmetric sources).
    pub s1_identically_zero: bool,
}

/// Default threshold grid: 33 points geometric from 1/4 to 64.
pub fn default_t_grid() -> Vec<f64> {
    crate::fit::geomspace(0.25, 64.0, 33)
}

pub struct ConcentrationConfig {
    pub n: usize,
    pub replicates: usize,
    pub nu: MultiIndex,
    pub t_grid: Vec<f64>,
    pub seed: u64,
    pub policy: ExecPolicy,
}

/// Runs the two-statistic tail experiment. Replicate r draws θ from
/// substream r; the aggregation is a deterministic integer reduction in
/// batch order.
pub fn concentration_experiment(
    d: &DistributionSpec,
    cfg: &ConcentrationConfig,
) -> Result<ConcentrationReport> {
    if cfg.nu.order() != 3 {
        return Err(Error::InvalidArgument(format!(
            "third-order index required, got order {}",
            cfg.nu.order()
        )));
    }
    if cfg.nu.dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            got: cfg.nu.dim(),
        });
    }
    if cfg.replicates < 1_000 {
        return Err(Error::InvalidArgument(
            "need at least 1000 replicates".into(),
        ));
    }
    if cfg.t_grid.windows(2).any(|w| w[0] >= w[1]) || cfg.t_grid.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidArgument(
            "threshold grid must be positive and increasing".into(),
        ));
    }

    let n = cfg.n;
    let delta4 = d.delta4();
    // Truncation is inactive below this weight magnitude, where Z_j = X_j
    // and the ν-moment is the source one.
    let inactive_mu = d.law().moment(&cfg.nu);
    let activation = d.law().max_norm().recip();

    const BATCH: usize = 512;
    let batches = cfg.replicates.div_ceil(BATCH);
    let grid = cfg.t_grid.clone();
    let partials = map_indexed(cfg.policy, batches, |b| {
        let lo = b * BATCH;
        let hi = ((b + 1) * BATCH).min(cfg.replicates);
        let mut c1 = vec![0u64; grid.len()];
        let mut c2 = vec![0u64; grid.len()];
        let mut s1_max: f64 = 0.0;
        for rep in lo..hi {
            let w = WeightVector::sample_uniform(n, cfg.seed, rep as u64);
            let mut cubic = 0.0;
            let mut quartic = 0.0;
            for &t in w.theta() {
                let mu = if t.abs() <= activation {
                    inactive_mu
                } else {
                    truncate(d, t).z_law.moment(&cfg.nu)
                };
                let t2 = t * t;
                cubic += t2 * t * mu;
                quartic += t2 * t2 * delta4;
            }
            let s1 = n as f64 * cubic.abs() / delta4;
            let s2 = n as f64 * quartic / delta4;
            s1_max = s1_max.max(s1);
            for (i, &t) in grid.iter().enumerate() {
                if s1 >= t {
                    c1[i] += 1;
                }
                if s2 >= t {
                    c2[i] += 1;
                }
            }
        }
        (c1, c2, s1_max)
    });

    let mut counts1 = vec![0u64; cfg.t_grid.len()];
    let mut counts2 = vec![0u64; cfg.t_grid.len()];
    let mut s1_max: f64 = 0.0;
    for (c1, c2, m1) in partials {
        for (a, b) in counts1.iter_mut().zip(&c1) {
            *a += b;
        }
        for (a, b) in counts2.iter_mut().zip(&c2) {
            *a += b;
        }
        s1_max = s1_max.max(m1);
    }

    Ok(ConcentrationReport {
        n,
        replicates: cfg.replicates,
        seed: cfg.seed,
        nu: cfg.nu.to_string(),
        delta4,
        s1: ExceedanceCurve::from_counts(cfg.t_grid.clone(), counts1, cfg.replicates),
        s2: ExceedanceCurve::from_counts(cfg.t_grid.clone(), counts2, cfg.replicates),
        s1_identically_zero: s1_max == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_weights_values() {
        let w = WeightVector::equal_weights(4);
        assert_eq!(w.theta(), &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(WeightVector::equal_weights(1).theta(), &[1.0]);
        let norm2: f64 = WeightVector::equal_weights(1000)
            .theta()
            .iter()
            .map(|x| x * x)
            .sum();
        assert!((norm2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_weights_unit_norm_and_deterministic() {
        for stream in 0..20 {
            let w = WeightVector::sample_uniform(37, 5, stream);
            let norm2: f64 = w.theta().iter().map(|x| x * x).sum();
            assert!((norm2 - 1.0).abs() < 1e-12);
        }
        let a = WeightVector::sample_uniform(64, 9, 3);
        let b = WeightVector::sample_uniform(64, 9, 3);
        assert_eq!(a.theta(), b.theta());
        let c = WeightVector::sample_uniform(64, 9, 4);
        assert_ne!(a.theta(), c.theta());
    }

    #[test]
    fn explicit_weights_validated() {
        assert!(WeightVector::explicit(vec![0.6, 0.8]).is_ok());
        assert!(WeightVector::explicit(vec![0.6, 0.7]).is_err());
        assert!(WeightVector::explicit(vec![]).is_err());
    }

    #[test]
    fn sphere_coordinate_moments() {
        // 𝔼Θ² = 1/n and 𝔼Θ⁴ = 3/(n(n+2)), pooled across coordinates; the
        // acceptance suite reruns this at 10⁶ draws.
        let n = 16;
        let draws = 40_000;
        let mut m2 = 0.0;
        let mut m4 = 0.0;
        for rep in 0..draws {
            let w = WeightVector::sample_uniform(n, 77, rep);
            for &t in w.theta() {
                m2 += t * t;
                m4 += t * t * t * t;
            }
        }
        m2 /= (draws as usize * n) as f64;
        m4 /= (draws as usize * n) as f64;
        assert!((m2 - 1.0 / n as f64).abs() < 1e-9); // Σθ² = 1 exactly
        let want4 = 3.0 / (n as f64 * (n as f64 + 2.0));
        // 3·SE with Var(Θ⁴) ≤ 𝔼Θ⁸; generous envelope.
        assert!((m4 - want4).abs() < 0.05 * want4, "m4 = {m4}, want {want4}");
    }

    #[test]
    fn theta_stats_examples() {
        let d4 = 7.75;
        let n = 16;
        let eq = WeightVector::equal_weights(n);
        let s = theta_stats(&eq, &vec![d4; n]).unwrap();
        assert!((s.delta_theta4 - d4 / n as f64).abs() < 1e-14 * d4);
        assert!((s.sum_theta3 - n as f64 * (n as f64).powf(-1.5)).abs() < 1e-14);

        let corner = WeightVector::explicit(vec![1.0, 0.0, 0.0]).unwrap();
        let s = theta_stats(&corner, &[2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.delta_theta4, 2.0);
        assert_eq!(s.sum_theta3, 1.0);

        assert!(theta_stats(&corner, &[1.0]).is_err());
    }

    #[test]
    fn delta_theta4_concentrates_at_formula_mean() {
        // 𝔼δ_θ⁴ = δ⁴·n·3/(n(n+2)) = 3δ⁴/(n+2).
        let n = 1000;
        let draws = 2_000;
        let d4 = 7.75;
        let mut acc = 0.0;
        for rep in 0..draws {
            let w = WeightVector::sample_uniform(n, 123, rep);
            acc += theta_stats(&w, &vec![d4; n]).unwrap().delta_theta4;
        }
        let mean = acc / draws as f64;
        let want = 3.0 * d4 / (n as f64 + 2.0);
        assert!((mean - want).abs() < 0.05 * want, "{mean} vs {want}");
    }

    #[test]
    fn symmetric_source_s1_identically_zero() {
        let d = DistributionSpec::rademacher();
        let cfg = ConcentrationConfig {
            n: 32,
            replicates: 1_000,
            nu: MultiIndex::new(&[3]),
            t_grid: default_t_grid(),
            seed: 4,
            policy: ExecPolicy::Sequential,
        };
        let rep = concentration_experiment(&d, &cfg).unwrap();
        assert!(rep.s1_identically_zero);
        assert!(rep.s1.all_subcritical);
        assert!(rep.s1.counts.iter().all(|&c| c == 0));
        assert!(rep.s1.fitted_exponent.is_none());
        // S₂ is strictly positive so the first thresholds are exceeded.
        assert!(rep.s2.counts[0] > 0);
    }

    #[test]
    fn exceedance_curves_nonincreasing_and_deterministic() {
        let d = DistributionSpec::skewed_three_point();
        let cfg = ConcentrationConfig {
            n: 64,
            replicates: 2_000,
            nu: MultiIndex::new(&[3]),
            t_grid: default_t_grid(),
            seed: 11,
            policy: ExecPolicy::Parallel,
        };
        let a = concentration_experiment(&d, &cfg).unwrap();
        assert!(a.s1.p_hat.windows(2).all(|w| w[0] >= w[1]));
        assert!(a.s2.p_hat.windows(2).all(|w| w[0] >= w[1]));
        assert!(!a.s1_identically_zero);
        let cfg_seq = ConcentrationConfig {
            policy: ExecPolicy::Sequential,
            t_grid: default_t_grid(),
            nu: MultiIndex::new(&[3]),
            ..cfg
        };
        let b = concentration_experiment(&d, &cfg_seq).unwrap();
        assert_eq!(a.s1.counts, b.s1.counts);
        assert_eq!(a.s2.counts, b.s2.counts);
    }

    #[test]
    fn bad_configs_rejected() {
        let d = DistributionSpec::rademacher();
        let base = ConcentrationConfig {
            n: 8,
            replicates: 1_000,
            nu: MultiIndex::new(&[2]),
            t_grid: default_t_grid(),
            seed: 0,
            policy: ExecPolicy::Sequential,
        };
        assert!(concentration_experiment(&d, &base).is_err());
        let few = ConcentrationConfig {
            replicates: 10,
            nu: MultiIndex::new(&[3]),
            t_grid: default_t_grid(),
            ..base
        };
        assert!(concentration_experiment(&d, &few).is_err());
        let bad_grid = ConcentrationConfig {
            replicates: 1_000,
            nu: MultiIndex::new(&[3]),
            t_grid: vec![1.0, 1.0],
            ..base
        };
        assert!(concentration_experiment(&d, &bad_grid).is_err());
    }
}
