//! Experiment harness: rate sweeps, covariance-bound suites, tail
//! concentration runs, and single-shot discrepancy queries, all driven by a
//! flat text config and emitting deterministic CSV/JSON reports.

pub mod config;
pub mod report;

pub use config::{parse_theta_source, resolve_distribution, ExperimentConfig, Mode, ThetaPolicy};
pub use report::{
    write_concentration_report, write_lemma2_report, write_rate_report, Lemma2Case, Lemma2Report,
    NSummary, PolicySummary, RateReport, RateRow,
};

use crate::charfun::{kolmogorov_distance_affine_1d, KsGrid, ProductCf};
use crate::discrepancy::{
    discrepancy_1d, discrepancy_mc, discrepancy_mc_recentered, DiscrepancyMethod,
    DiscrepancyResult, SetClass, SetWitness,
};
use crate::edgeworth::build_p;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, ExecPolicy};
use crate::fit::{fit_slope, median, quantile};
use crate::moments::{Atom, DistributionSpec};
use crate::rng::{fill_standard_normal, stream_rng};
use crate::sphere::{
    concentration_experiment, default_t_grid, ConcentrationConfig, ConcentrationReport,
    WeightVector,
};
use crate::truncation::{normalization, truncate};

use config::{MC_N_CAP, MC_SAMPLES_CAP};
use report::SCHEMA_VERSION;

// ---------------------------------------------------------------------------
// Seed derivation. Weight draws, Monte Carlo batches, and suite internals
// must never share a ChaCha key, so every consumer mixes its own salt.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

const SALT_MC: u64 = 0x6d63; // Monte Carlo measurement streams
const SALT_LAW: u64 = 0x6c61; // lemma2 random law generation
const SALT_THETA: u64 = 0x7468; // lemma2 weight draws
const SALT_T: u64 = 0x7476; // lemma2 test-vector draws
const SALT_SINGLE: u64 = 0x7371; // discrepancy_single

// ---------------------------------------------------------------------------
// Rate experiments.

struct TaskOut {
    row: RateRow,
    noise_floor: f64,
}

fn rate_task(
    d: &DistributionSpec,
    cfg: &ExperimentConfig,
    samples: usize,
    exec: ExecPolicy,
    ni: usize,
    n: usize,
    policy_name: &str,
    r: usize,
) -> Result<TaskOut> {
    let k = d.dim();
    let (w, theta_id) = if policy_name == "equal" {
        (WeightVector::equal_weights(n), "equal".to_string())
    } else {
        let stream = ((ni as u64) << 32) | r as u64;
        (
            WeightVector::sample_uniform(n, cfg.seed, stream),
            format!("s{r:02}"),
        )
    };
    if k == 1 {
        let p = ProductCf::iid(d, &w);
        let grid = KsGrid::default();
        let ks = if cfg.recenter {
            let summands: Vec<_> = w.theta().iter().map(|&t| truncate(d, t)).collect();
            let state = normalization(&summands)?;
            kolmogorov_distance_affine_1d(&p, state.q.get(0, 0), state.a_n[0], &grid)?
        } else {
            kolmogorov_distance_affine_1d(&p, 1.0, 0.0, &grid)?
        };
        let se = ks.method_error;
        Ok(TaskOut {
            row: RateRow {
                n,
                theta_id,
                policy: policy_name.to_string(),
                discrepancy: ks.distance,
                method: ks.method.to_string(),
                se,
                usable: 5.0 * se < ks.distance,
            },
            noise_floor: 0.0,
        })
    } else {
        let class = cfg.class.build(k, cfg.m_dir);
        let policy_bit = u64::from(policy_name == "equal");
        let mc = crate::discrepancy::McConfig {
            samples,
            seed: mix_seed(
                cfg.seed,
                SALT_MC ^ ((ni as u64) << 24) ^ ((r as u64) << 1) ^ policy_bit,
            ),
            policy: exec,
        };
        let res = if cfg.recenter {
            let summands: Vec<_> = w.theta().iter().map(|&t| truncate(d, t)).collect();
            let state = normalization(&summands)?;
            discrepancy_mc_recentered(d, &w, &state, &class, &mc)?
        } else {
            discrepancy_mc(d, &w, &class, &mc)?
        };
        let (se, floor) = match res.method {
            DiscrepancyMethod::MonteCarlo {
                standard_error,
                noise_floor,
                ..
            } => (standard_error, noise_floor),
            _ => (0.0, 0.0),
        };
        Ok(TaskOut {
            row: RateRow {
                n,
                theta_id,
                policy: policy_name.to_string(),
                discrepancy: res.value,
                method: "monte_carlo".to_string(),
                se,
                usable: 5.0 * se < res.value,
            },
            noise_floor: floor,
        })
    }
}

/// Runs the full grid × policy × replicate sweep and fits per-policy slopes
/// on the median curve. Rows keep task order (grid-major, then policy, then
/// replicate), so identical configs produce identical reports.
pub fn run_rate(cfg: &ExperimentConfig) -> Result<RateReport> {
    if cfg.mode != Mode::Rate {
        return Err(Error::InvalidArgument("config mode is not `rate`".into()));
    }
    if cfg.n_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "rate experiment needs n_grid".into(),
        ));
    }
    let d = cfg.resolve_distribution()?;
    let k = d.dim();
    if cfg.k != k {
        return Err(Error::DimensionMismatch {
            expected: cfg.k,
            got: k,
        });
    }
    let exec = cfg.exec_policy();
    let samples = cfg
        .samples
        .unwrap_or(if k == 1 { 0 } else { MC_SAMPLES_CAP });
    let mut warnings: Vec<String> = Vec::new();
    if k >= 2 {
        let class = cfg.class.build(k, cfg.m_dir);
        let members = class.members(k) as f64;
        let floor = (2.0 * members.ln()).sqrt() * (0.25 / samples as f64).sqrt();
        warnings.push(format!(
            "k={k} Monte Carlo family: noise floor ~{floor:.2e} at M={samples}; \
             medians within 1.5x of it are reported as noise-limited"
        ));
        if cfg.n_grid.iter().any(|&n| n > MC_N_CAP) || samples > MC_SAMPLES_CAP {
            warnings.push(format!(
                "grid or budget exceeds the default k>=2 caps (n <= {MC_N_CAP}, M <= {MC_SAMPLES_CAP})"
            ));
        }
        for w in &warnings {
            eprintln!("warning: {w}");
        }
    }

    let policies: Vec<(&str, usize)> = match cfg.theta {
        ThetaPolicy::Equal => vec![("equal", 1)],
        ThetaPolicy::Sampled { replicates } => vec![("sampled", replicates)],
        ThetaPolicy::Both { replicates } => vec![("equal", 1), ("sampled", replicates)],
    };
    struct Task {
        ni: usize,
        n: usize,
        pi: usize,
        r: usize,
    }
    let mut tasks: Vec<Task> = Vec::new();
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        for (pi, &(_, reps)) in policies.iter().enumerate() {
            for r in 0..reps {
                tasks.push(Task { ni, n, pi, r });
            }
        }
    }
    let outs: Vec<Result<TaskOut>> = map_indexed(exec, tasks.len(), |i| {
        let t = &tasks[i];
        rate_task(&d, cfg, samples, exec, t.ni, t.n, policies[t.pi].0, t.r)
    });
    let mut rows: Vec<RateRow> = Vec::with_capacity(outs.len());
    let mut floors: Vec<f64> = Vec::with_capacity(outs.len());
    for out in outs {
        let out = out?;
        rows.push(out.row);
        floors.push(out.noise_floor);
    }

    let mut summaries: Vec<PolicySummary> = Vec::new();
    let mut noise_limited_ns: Vec<usize> = Vec::new();
    for &(pname, reps) in &policies {
        let mut per_n: Vec<NSummary> = Vec::new();
        let mut fit_pts: Vec<(f64, f64)> = Vec::new();
        for &n in &cfg.n_grid {
            let mut all_vals = Vec::new();
            let mut usable_vals = Vec::new();
            let mut floor = 0.0f64;
            for (row, &f) in rows.iter().zip(&floors) {
                if row.policy == pname && row.n == n {
                    all_vals.push(row.discrepancy);
                    if row.usable {
                        usable_vals.push(row.discrepancy);
                    }
                    floor = floor.max(f);
                }
            }
            let med = (!usable_vals.is_empty()).then(|| median(&usable_vals));
            let q90 = (!usable_vals.is_empty()).then(|| quantile(&usable_vals, 0.9));
            let med_all = median(&all_vals);
            let noise_limited = floor > 0.0 && med_all <= 1.5 * floor;
            if noise_limited && !noise_limited_ns.contains(&n) {
                noise_limited_ns.push(n);
            }
            if let Some(m) = med {
                fit_pts.push((n as f64, m));
            }
            per_n.push(NSummary {
                n,
                rows: all_vals.len(),
                usable_rows: usable_vals.len(),
                median: med,
                q90,
                noise_floor: floor,
                noise_limited,
            });
        }
        let (fit, fit_flag, residuals) = if fit_pts.len() >= 3 {
            let f = fit_slope(&fit_pts)?;
            let res = fit_pts
                .iter()
                .map(|&(n, v)| v.ln() - (f.intercept + f.slope * n.ln()))
                .collect();
            (Some(f), "ok".to_string(), res)
        } else {
            (None, "insufficient_rows".to_string(), Vec::new())
        };
        summaries.push(PolicySummary {
            policy: pname.to_string(),
            replicates: reps,
            per_n,
            fit,
            fit_flag,
            residuals,
        });
    }
    noise_limited_ns.sort_unstable();

    Ok(RateReport {
        schema_version: SCHEMA_VERSION,
        rng: report::rng_description(),
        mode: "rate".to_string(),
        k,
        dist: d.label.clone(),
        class: if k == 1 {
            "intervals_1d(sup)".to_string()
        } else {
            cfg.class.build(k, cfg.m_dir).label()
        },
        seed: cfg.seed,
        samples,
        recenter: cfg.recenter,
        n_grid: cfg.n_grid.clone(),
        rows,
        policies: summaries,
        noise_limited_ns,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Covariance-bound suite.

/// Checks the three covariance bounds for one (law, θ) pair and reports the
/// bound ratios (each must be ≤ 1 when δ_θ⁴ ≤ 1/(8k)).
pub fn lemma2_check(
    d: &DistributionSpec,
    w: &WeightVector,
    t_seed: u64,
    t_stream: u64,
) -> Result<(f64, f64, f64, f64)> {
    let k = d.dim();
    let summands: Vec<_> = w.theta().iter().map(|&t| truncate(d, t)).collect();
    let state = normalization(&summands)?;
    let bound = 2.0 * k as f64 * state.delta_theta4;
    let mut rng = stream_rng(t_seed, t_stream);
    let mut t = vec![0.0f64; k];
    let mut quad_ratio = 0.0f64;
    for _ in 0..100 {
        fill_standard_normal(&mut rng, &mut t);
        let norm2: f64 = t.iter().map(|x| x * x).sum();
        if norm2 == 0.0 {
            continue;
        }
        let lhs = (state.d.quadratic_form(&t) - norm2).abs();
        quad_ratio = quad_ratio.max(lhs / (bound * norm2));
    }
    let op_dev = state
        .d_eigenvalues
        .iter()
        .fold(0.0f64, |m, &l| m.max((l - 1.0).abs()));
    let min_eig = state
        .d_eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &l| m.min(l));
    if min_eig <= 0.0 {
        return Err(Error::DegenerateCovariance(min_eig));
    }
    let opnorm_ratio = op_dev / 0.25;
    let inv_ratio = (1.0 / min_eig) / (4.0 / 3.0);
    Ok((state.delta_theta4, quad_ratio, opnorm_ratio, inv_ratio))
}

/// Unit-variance three-point law with a small-mass atom at 3.2: heavy enough
/// that sampled weights around n = 64 occasionally truncate it, light enough
/// to pass the δ_θ⁴ filter. The other two atoms balance mean and variance.
fn spike_law(p: f64) -> Result<DistributionSpec> {
    let (s, x) = (3.2, -0.9);
    let c = 1.0 - p;
    let m = p * s;
    let v = 1.0 - p * s * s;
    let y = (v + m * x) / (-m - c * x);
    let r = (-m - c * x) / (y - x);
    let q = c - r;
    DistributionSpec::from_atoms(
        1,
        vec![
            Atom {
                point: vec![s],
                prob: p,
            },
            Atom {
                point: vec![x],
                prob: q,
            },
            Atom {
                point: vec![y],
                prob: r,
            },
        ],
        "spike_3p2",
    )
}

enum Attempt {
    Filtered,
    Survivor(Lemma2Case),
}

fn lemma2_attempt(seed: u64, a: usize) -> Attempt {
    let k = 1 + a % 3;
    let n = match k {
        1 => [64, 128, 256][(a / 3) % 3],
        2 => [256, 384, 512][(a / 3) % 3],
        _ => [1024, 1536, 2048][(a / 3) % 3],
    };
    let variant = (a / 9) % 4;
    let mut law_rng = stream_rng(mix_seed(seed, SALT_LAW), a as u64);
    let d = match variant {
        0 => DistributionSpec::random_standardized(k, k + 2 + a % 3, &mut law_rng),
        1 => match k {
            1 if a % 2 == 0 => spike_law(0.004 + 0.008 * ((a / 18) % 3) as f64),
            1 => Ok(DistributionSpec::skewed_three_point()),
            _ => Ok(DistributionSpec::rademacher_product(k)),
        },
        2 => DistributionSpec::random_standardized(k, 2 * k + 2, &mut law_rng),
        _ => match k {
            1 => Ok(DistributionSpec::three_point_symmetric()),
            _ => DistributionSpec::uniform_cube_scaled(k, 3),
        },
    };
    let d = match d {
        Ok(d) => d,
        Err(_) => return Attempt::Filtered,
    };
    let w = WeightVector::sample_uniform(n, mix_seed(seed, SALT_THETA), a as u64);
    let delta_theta4: f64 = d.delta4() * w.theta().iter().map(|t| t.powi(4)).sum::<f64>();
    if delta_theta4 > 1.0 / (8.0 * k as f64) {
        return Attempt::Filtered;
    }
    let case = match lemma2_check(&d, &w, mix_seed(seed, SALT_T), a as u64) {
        Ok((d4, quad, op, inv)) => Lemma2Case {
            id: a,
            k,
            n,
            law: d.label.clone(),
            delta_theta4: d4,
            quad_ratio: quad,
            opnorm_ratio: op,
            inv_ratio: inv,
            pass: quad <= 1.0 && op <= 1.0 && inv <= 1.0,
        },
        Err(_) => Lemma2Case {
            id: a,
            k,
            n,
            law: d.label.clone(),
            delta_theta4,
            quad_ratio: f64::INFINITY,
            opnorm_ratio: f64::INFINITY,
            inv_ratio: f64::INFINITY,
            pass: false,
        },
    };
    Attempt::Survivor(case)
}

/// Draws random (law, θ) configurations, filters by δ_θ⁴ ≤ 1/(8k), and
/// checks the covariance bounds on the first `suite_size` survivors.
pub fn run_lemma2_suite(cfg: &ExperimentConfig) -> Result<Lemma2Report> {
    if cfg.mode != Mode::Lemma2 {
        return Err(Error::InvalidArgument("config mode is not `lemma2`".into()));
    }
    let exec = cfg.exec_policy();
    let chunk = cfg.suite_size.max(64);
    let mut cases: Vec<Lemma2Case> = Vec::with_capacity(cfg.suite_size);
    let mut attempts_scanned = 0usize;
    let mut start = 0usize;
    while cases.len() < cfg.suite_size {
        if start >= 60 * chunk {
            return Err(Error::InvalidArgument(format!(
                "filter rejected too many configurations ({start} attempts for {} survivors)",
                cases.len()
            )));
        }
        let outs = map_indexed(exec, chunk, |i| lemma2_attempt(cfg.seed, start + i));
        for out in outs {
            attempts_scanned += 1;
            if let Attempt::Survivor(case) = out {
                cases.push(case);
                if cases.len() == cfg.suite_size {
                    break;
                }
            }
        }
        start += chunk;
    }
    let violations = cases.iter().filter(|c| !c.pass).count();
    let fold_max = |f: fn(&Lemma2Case) -> f64| cases.iter().map(f).fold(0.0f64, f64::max);
    Ok(Lemma2Report {
        schema_version: SCHEMA_VERSION,
        rng: report::rng_description(),
        mode: "lemma2".to_string(),
        seed: cfg.seed,
        total: attempts_scanned,
        filtered: attempts_scanned - cases.len(),
        evaluated: cases.len(),
        violations,
        max_quad_ratio: fold_max(|c| c.quad_ratio),
        max_opnorm_ratio: fold_max(|c| c.opnorm_ratio),
        max_inv_ratio: fold_max(|c| c.inv_ratio),
        pass: violations == 0,
        cases,
    })
}

// ---------------------------------------------------------------------------
// Concentration runs.

pub fn run_concentration(cfg: &ExperimentConfig) -> Result<ConcentrationReport> {
    if cfg.mode != Mode::Concentration {
        return Err(Error::InvalidArgument(
            "config mode is not `concentration`".into(),
        ));
    }
    let d = cfg.resolve_distribution()?;
    let nu = cfg
        .nu
        .clone()
        .ok_or_else(|| Error::InvalidArgument("concentration needs `nu`".into()))?;
    let n = *cfg
        .n_grid
        .first()
        .ok_or_else(|| Error::InvalidArgument("concentration needs n_grid".into()))?;
    let ccfg = ConcentrationConfig {
        n,
        replicates: cfg.samples.unwrap_or(10_000),
        nu,
        t_grid: default_t_grid(),
        seed: cfg.seed,
        policy: cfg.exec_policy(),
    };
    concentration_experiment(&d, &ccfg)
}

// ---------------------------------------------------------------------------
// Single-shot queries.

/// Edgeworth polynomial table (CSV) for the configured law and order.
pub fn edgeworth_table(cfg: &ExperimentConfig) -> Result<String> {
    if cfg.mode != Mode::EdgeworthTable {
        return Err(Error::InvalidArgument(
            "config mode is not `edgeworth_table`".into(),
        ));
    }
    let d = cfg.resolve_distribution()?;
    let table = d.law().cumulants(cfg.order + 2)?;
    Ok(build_p(cfg.order, &table)?.to_csv())
}

/// One discrepancy measurement for an explicit (law, θ, class) triple.
pub fn run_discrepancy_single(cfg: &ExperimentConfig) -> Result<DiscrepancyResult> {
    if cfg.mode != Mode::DiscrepancySingle {
        return Err(Error::InvalidArgument(
            "config mode is not `discrepancy_single`".into(),
        ));
    }
    let d = cfg.resolve_distribution()?;
    let k = d.dim();
    let source = cfg
        .theta_source
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("discrepancy_single needs `theta_source`".into()))?;
    let w = parse_theta_source(source)?;
    let class = cfg.class.build(k, cfg.m_dir);
    let one_dim_sup = k == 1 && matches!(class, SetClass::Intervals1d { .. });
    if one_dim_sup && !cfg.recenter {
        return discrepancy_1d(&d, &w);
    }
    if one_dim_sup {
        let summands: Vec<_> = w.theta().iter().map(|&t| truncate(&d, t)).collect();
        let state = normalization(&summands)?;
        let p = ProductCf::iid(&d, &w);
        let ks =
            kolmogorov_distance_affine_1d(&p, state.q.get(0, 0), state.a_n[0], &KsGrid::default())?;
        let method = match ks.method {
            "gil_pelaez_quadrature" => DiscrepancyMethod::CfInversion {
                estimated_error: ks.method_error,
            },
            _ => DiscrepancyMethod::EnumerationExact,
        };
        return Ok(DiscrepancyResult {
            value: ks.distance,
            method,
            class: "intervals_1d(sup) [recentered]".into(),
            witness: SetWitness::Interval { x: ks.witness },
        });
    }
    let mc = crate::discrepancy::McConfig {
        samples: cfg.samples.unwrap_or(1_000_000),
        seed: mix_seed(cfg.seed, SALT_SINGLE),
        policy: cfg.exec_policy(),
    };
    if cfg.recenter {
        let summands: Vec<_> = w.theta().iter().map(|&t| truncate(&d, t)).collect();
        let state = normalization(&summands)?;
        discrepancy_mc_recentered(&d, &w, &state, &class, &mc)
    } else {
        discrepancy_mc(&d, &w, &class, &mc)
    }
}
