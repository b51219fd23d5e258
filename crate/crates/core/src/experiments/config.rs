//! Experiment configuration: a flat `key = value` text format.
//!
//! Grammar
//! -------
//! One `key = value` pair per line. `#` starts a comment (full line or
//! trailing). Blank lines are ignored. Keys may appear at most once. Lists
//! are comma-separated. Unknown keys are rejected so typos fail loudly.
//!
//! Keys
//! ----
//! | key            | value                                              | default        |
//! |----------------|----------------------------------------------------|----------------|
//! | `mode`         | `rate`, `concentration`, `lemma2`,                 | required       |
//! |                | `edgeworth_table`, `discrepancy_single`            |                |
//! | `k`            | ambient dimension                                  | `1`            |
//! | `dist`         | path to a distribution file, or `builtin:NAME`    | mode-dependent |
//! | `n_grid`       | strictly increasing list, e.g. `64,128,256`        | mode-dependent |
//! | `theta`        | `equal`, `sampled:R`, or `both:R`                  | `both:32`      |
//! | `samples`      | Monte Carlo budget M / replicate count             | mode-dependent |
//! | `seed`         | base RNG seed (u64)                                | `1`            |
//! | `out_dir`      | output directory for reports                       | `out`          |
//! | `class`        | `intervals`, `halfspaces`, `balls`                 | by dimension   |
//! | `m_dir`        | direction count for the halfspace family           | `16`           |
//! | `recenter`     | `true`/`false`: apply truncation recentering       | `false`        |
//! | `nu`           | multi-index exponents, e.g. `3` or `1,2`           | concentration  |
//! | `order`        | Edgeworth order r                                  | `3`            |
//! | `theta_source` | `equal:N`, `sample:N:SEED`, or a weights file      | single mode    |
//! | `suite_size`   | number of lemma2 configurations                    | `500`          |
//! | `threads`      | worker pool size (`1` forces sequential)           | all cores      |
//!
//! Builtin distributions: `builtin:rademacher`, `builtin:rademacher_product:K`,
//! `builtin:three_point_symmetric`, `builtin:skewed_three_point`,
//! `builtin:uniform_cube:K:M`, `builtin:gaussian_surrogate:M`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::discrepancy::SetClass;
use crate::error::{Error, Result};
use crate::exec::ExecPolicy;
use crate::moments::DistributionSpec;
use crate::multiindex::MultiIndex;
use crate::sphere::WeightVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Rate,
    Concentration,
    Lemma2,
    EdgeworthTable,
    DiscrepancySingle,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "rate" => Ok(Mode::Rate),
            "concentration" => Ok(Mode::Concentration),
            "lemma2" => Ok(Mode::Lemma2),
            "edgeworth_table" => Ok(Mode::EdgeworthTable),
            "discrepancy_single" => Ok(Mode::DiscrepancySingle),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Rate => "rate",
            Mode::Concentration => "concentration",
            Mode::Lemma2 => "lemma2",
            Mode::EdgeworthTable => "edgeworth_table",
            Mode::DiscrepancySingle => "discrepancy_single",
        }
    }
}

/// Weight-vector policy for rate experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaPolicy {
    Equal,
    Sampled { replicates: usize },
    Both { replicates: usize },
}

impl ThetaPolicy {
    fn parse(s: &str) -> Result<ThetaPolicy> {
        if s == "equal" {
            return Ok(ThetaPolicy::Equal);
        }
        let (head, r) = match s.split_once(':') {
            Some((h, tail)) => {
                let r: usize = tail
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad replicate count `{tail}`")))?;
                (h, r)
            }
            None => (s, 32),
        };
        if r == 0 {
            return Err(Error::InvalidArgument(
                "theta replicates must be >= 1".into(),
            ));
        }
        match head {
            "sampled" => Ok(ThetaPolicy::Sampled { replicates: r }),
            "both" => Ok(ThetaPolicy::Both { replicates: r }),
            other => Err(Error::InvalidArgument(format!(
                "theta policy must be equal|sampled:R|both:R, got `{other}`"
            ))),
        }
    }

    pub fn replicates(self) -> usize {
        match self {
            ThetaPolicy::Equal => 1,
            ThetaPolicy::Sampled { replicates } | ThetaPolicy::Both { replicates } => replicates,
        }
    }
}

/// Measurement set class, resolved to a concrete family once k is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassSpec {
    Auto,
    Intervals,
    Halfspaces,
    Balls,
}

impl ClassSpec {
    fn parse(s: &str) -> Result<ClassSpec> {
        match s {
            "intervals" => Ok(ClassSpec::Intervals),
            "halfspaces" => Ok(ClassSpec::Halfspaces),
            "balls" => Ok(ClassSpec::Balls),
            other => Err(Error::InvalidArgument(format!(
                "class must be intervals|halfspaces|balls, got `{other}`"
            ))),
        }
    }

    pub fn build(self, k: usize, m_dir: usize) -> SetClass {
        match self {
            ClassSpec::Auto => {
                if k == 1 {
                    SetClass::intervals()
                } else {
                    SetClass::halfspaces(m_dir)
                }
            }
            ClassSpec::Intervals => SetClass::intervals(),
            ClassSpec::Halfspaces => SetClass::halfspaces(m_dir),
            ClassSpec::Balls => SetClass::balls(k),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub k: usize,
    pub dist: Option<String>,
    pub n_grid: Vec<usize>,
    pub theta: ThetaPolicy,
    pub samples: Option<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub class: ClassSpec,
    pub m_dir: usize,
    pub recenter: bool,
    pub nu: Option<MultiIndex>,
    pub order: u32,
    pub theta_source: Option<String>,
    pub suite_size: usize,
    pub threads: Option<usize>,
}

/// Default number of sampled θ replicates per n.
pub const DEFAULT_REPLICATES: usize = 32;
/// Soft caps for k ≥ 2 Monte Carlo rate runs.
pub const MC_N_CAP: usize = 512;
pub const MC_SAMPLES_CAP: usize = 10_000_000;

impl ExperimentConfig {
    /// Minimal config for the given mode; fields use documented defaults.
    pub fn new(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            k: 1,
            dist: None,
            n_grid: Vec::new(),
            theta: ThetaPolicy::Both {
                replicates: DEFAULT_REPLICATES,
            },
            samples: None,
            seed: 1,
            out_dir: PathBuf::from("out"),
            class: ClassSpec::Auto,
            m_dir: 16,
            recenter: false,
            nu: None,
            order: 3,
            theta_source: None,
            suite_size: 500,
            threads: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut mode: Option<Mode> = None;
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
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
                Error::InvalidArgument(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !seen.insert(key.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            if key == "mode" {
                mode = Some(Mode::parse(&value)?);
            } else {
                pairs.push((key, value));
            }
        }
        let mode =
            mode.ok_or_else(|| Error::InvalidArgument("missing required key `mode`".into()))?;
        let mut cfg = ExperimentConfig::new(mode);
        for (key, value) in pairs {
            cfg.apply(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidArgument(format!("bad {what} `{value}`"));
        match key {
            "k" => self.k = value.parse().map_err(|_| bad("k"))?,
            "dist" => self.dist = Some(value.to_string()),
            "n_grid" => {
                self.n_grid = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|_| bad("n_grid entry")))
                    .collect::<Result<Vec<_>>>()?;
            }
            "theta" => self.theta = ThetaPolicy::parse(value)?,
            "samples" => self.samples = Some(value.parse().map_err(|_| bad("samples"))?),
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "class" => self.class = ClassSpec::parse(value)?,
            "m_dir" => self.m_dir = value.parse().map_err(|_| bad("m_dir"))?,
            "recenter" => {
                self.recenter = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad("recenter flag")),
                }
            }
            "nu" => {
                let exps = value
                    .split(',')
                    .map(|s| s.trim().parse::<u8>().map_err(|_| bad("nu entry")))
                    .collect::<Result<Vec<_>>>()?;
                self.nu = Some(MultiIndex::new(&exps));
            }
            "order" => self.order = value.parse().map_err(|_| bad("order"))?,
            "theta_source" => self.theta_source = Some(value.to_string()),
            "suite_size" => self.suite_size = value.parse().map_err(|_| bad("suite_size"))?,
            "threads" => self.threads = Some(value.parse().map_err(|_| bad("threads"))?),
            other => {
                return Err(Error::InvalidArgument(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "n_grid must be strictly increasing".into(),
            ));
        }
        if self.n_grid.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("n_grid entries must be >= 1".into()));
        }
        if self.suite_size == 0 {
            return Err(Error::InvalidArgument("suite_size must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be >= 1".into()));
        }
        Ok(())
    }

    /// Execution policy implied by the `threads` key: a single worker runs
    /// the sequential path, anything else uses the parallel pool.
    pub fn exec_policy(&self) -> ExecPolicy {
        match self.threads {
            Some(1) => ExecPolicy::Sequential,
            _ => ExecPolicy::Parallel,
        }
    }

    /// Resolves the `dist` key to a concrete law.
    pub fn resolve_distribution(&self) -> Result<DistributionSpec> {
        let name = self.dist.as_deref().ok_or_else(|| {
            Error::InvalidArgument(format!("mode `{}` needs a `dist` entry", self.mode.label()))
        })?;
        resolve_distribution(name)
    }
}

/// `builtin:NAME[:args]` or a path to a distribution file.
pub fn resolve_distribution(name: &str) -> Result<DistributionSpec> {
    if let Some(spec) = name.strip_prefix("builtin:") {
        let parts: Vec<&str> = spec.split(':').collect();
        let usize_arg = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("builtin `{spec}` needs an argument"))
                })?
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad builtin argument in `{spec}`")))
        };
        return match parts[0] {
            "rademacher" => Ok(DistributionSpec::rademacher()),
            "rademacher_product" => Ok(DistributionSpec::rademacher_product(usize_arg(1)?)),
            "three_point_symmetric" => Ok(DistributionSpec::three_point_symmetric()),
            "skewed_three_point" => Ok(DistributionSpec::skewed_three_point()),
            "uniform_cube" => DistributionSpec::uniform_cube_scaled(usize_arg(1)?, usize_arg(2)?),
            "gaussian_surrogate" => {
                Ok(DistributionSpec::discretized_gaussian_1d(usize_arg(1)?)?.spec)
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown builtin distribution `{other}`"
            ))),
        };
    }
    let text = fs::read_to_string(name)
        .map_err(|e| Error::InvalidArgument(format!("cannot read distribution `{name}`: {e}")))?;
    DistributionSpec::parse(&text)
}

/// `equal:N`, `sample:N:SEED` (stream 0 of the given seed), or a file of
/// whitespace-separated weights.
pub fn parse_theta_source(source: &str) -> Result<WeightVector> {
    if let Some(tail) = source.strip_prefix("equal:") {
        let n: usize = tail
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad weight count in `{source}`")))?;
        return Ok(WeightVector::equal_weights(n));
    }
    if let Some(tail) = source.strip_prefix("sample:") {
        let (n, seed) = tail.split_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!("expected sample:N:SEED, got `{source}`"))
        })?;
        let n: usize = n
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad weight count in `{source}`")))?;
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad seed in `{source}`")))?;
        return Ok(WeightVector::sample_uniform(n, seed, 0));
    }
    let text = fs::read_to_string(source)
        .map_err(|e| Error::InvalidArgument(format!("cannot read weights `{source}`: {e}")))?;
    let theta = text
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad weight `{s}` in `{source}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    WeightVector::explicit(theta)
}
