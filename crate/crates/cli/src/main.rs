//! Command line front end: rate sweeps, concentration runs, the covariance
//! bound suite, Edgeworth tables, and one-shot discrepancy measurements.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 assertion-suite
//! failure (bound violations in `lemma2`).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use weighted_clt::exec::configure_threads;
use weighted_clt::experiments::config::ClassSpec;
use weighted_clt::experiments::report::{
    to_json, write_concentration_report, write_lemma2_report, write_rate_report,
};
use weighted_clt::experiments::{
    edgeworth_table, run_concentration, run_discrepancy_single, run_lemma2_suite, run_rate,
    ExperimentConfig, Mode,
};

#[derive(Parser)]
#[command(
    name = "weighted-clt",
    version,
    about = "Weighted-sum CLT experiment harness"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Experiment config file (`key = value` lines; see README).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker pool size; 1 forces the sequential path.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Discrepancy-vs-n sweep with equal and/or sampled weight vectors.
    Rate,
    /// Tail exceedance curves of the two weighted-moment statistics.
    Concentration,
    /// Covariance-bound suite over random (law, θ) configurations.
    Lemma2,
    /// Print the Edgeworth polynomial table for a law as CSV.
    Edgeworth {
        /// Distribution file or `builtin:NAME`.
        #[arg(long)]
        dist: Option<String>,
        /// Expansion order.
        #[arg(long)]
        r: Option<u32>,
    },
    /// One discrepancy measurement, printed as JSON.
    Discrepancy {
        /// Distribution file or `builtin:NAME`.
        #[arg(long)]
        dist: Option<String>,
        /// `equal:N`, `sample:N:SEED`, or a weights file.
        #[arg(long)]
        theta: Option<String>,
        /// `intervals`, `halfspaces[:MDIR]`, or `balls`.
        #[arg(long)]
        class: Option<String>,
        /// Monte Carlo budget for k ≥ 2 families.
        #[arg(long)]
        mc: Option<usize>,
        /// Recenter by the truncated-mean normalization before measuring.
        #[arg(long)]
        recenter: bool,
    },
}

impl Cmd {
    fn mode(&self) -> Mode {
        match self {
            Cmd::Rate => Mode::Rate,
            Cmd::Concentration => Mode::Concentration,
            Cmd::Lemma2 => Mode::Lemma2,
            Cmd::Edgeworth { .. } => Mode::EdgeworthTable,
            Cmd::Discrepancy { .. } => Mode::DiscrepancySingle,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mode = cli.cmd.mode();
    let mut cfg = match &cli.global.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_file(path)
                .with_context(|| format!("loading {}", path.display()))?;
            if cfg.mode != mode {
                bail!(
                    "config mode `{}` does not match subcommand `{}`",
                    cfg.mode.label(),
                    mode.label()
                );
            }
            cfg
        }
        None => match mode {
            Mode::EdgeworthTable | Mode::DiscrepancySingle => ExperimentConfig::new(mode),
            _ => bail!("`{}` needs --config <path>", mode.label()),
        },
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.global.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(threads) = cli.global.threads {
        if threads == 0 {
            bail!("--threads must be >= 1");
        }
        cfg.threads = Some(threads);
        configure_threads(threads);
    }
    match &cli.cmd {
        Cmd::Edgeworth { dist, r } => {
            if let Some(d) = dist {
                cfg.dist = Some(d.clone());
            }
            if let Some(r) = r {
                cfg.order = *r;
            }
        }
        Cmd::Discrepancy {
            dist,
            theta,
            class,
            mc,
            recenter,
        } => {
            if let Some(d) = dist {
                cfg.dist = Some(d.clone());
            }
            if let Some(t) = theta {
                cfg.theta_source = Some(t.clone());
            }
            if let Some(c) = class {
                let (name, mdir) = match c.split_once(':') {
                    Some((name, m)) => {
                        let m: usize = m
                            .parse()
                            .with_context(|| format!("bad direction count in `{c}`"))?;
                        (name, Some(m))
                    }
                    None => (c.as_str(), None),
                };
                cfg.class = match name {
                    "intervals" => ClassSpec::Intervals,
                    "halfspaces" => ClassSpec::Halfspaces,
                    "balls" => ClassSpec::Balls,
                    other => bail!("unknown class `{other}`"),
                };
                if let Some(m) = mdir {
                    cfg.m_dir = m;
                }
            }
            if let Some(m) = mc {
                cfg.samples = Some(*m);
            }
            if *recenter {
                cfg.recenter = true;
            }
        }
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli)?;
    match &cli.cmd {
        Cmd::Rate => {
            let report = run_rate(&cfg)?;
            let paths = write_rate_report(&report, &cfg.out_dir)?;
            for p in &paths {
                println!("wrote {}", p.display());
            }
            for ps in &report.policies {
                match &ps.fit {
                    Some(f) => println!(
                        "policy {}: slope {:+.4} intercept {:+.4} r2 {:.4} ({} points)",
                        ps.policy, f.slope, f.intercept, f.r_squared, f.points
                    ),
                    None => println!("policy {}: no fit ({})", ps.policy, ps.fit_flag),
                }
            }
            if !report.noise_limited_ns.is_empty() {
                println!("noise-limited n: {:?}", report.noise_limited_ns);
            }
            Ok(0)
        }
        Cmd::Concentration => {
            let report = run_concentration(&cfg)?;
            let paths = write_concentration_report(&report, &cfg.out_dir)?;
            for p in &paths {
                println!("wrote {}", p.display());
            }
            let fmt = |e: Option<f64>| match e {
                Some(e) => format!("{e:.3}"),
                None => "n/a".to_string(),
            };
            println!(
                "n={} replicates={} s1 exponent {} s2 exponent {}{}",
                report.n,
                report.replicates,
                fmt(report.s1.fitted_exponent),
                fmt(report.s2.fitted_exponent),
                if report.s1_identically_zero {
                    " (s1 identically zero)"
                } else {
                    ""
                }
            );
            Ok(0)
        }
        Cmd::Lemma2 => {
            let report = run_lemma2_suite(&cfg)?;
            let paths = write_lemma2_report(&report, &cfg.out_dir)?;
            for p in &paths {
                println!("wrote {}", p.display());
            }
            println!(
                "evaluated {} (filtered {}), violations {}, max ratios: quad {:.3e} opnorm {:.3e} inv {:.3e}",
                report.evaluated,
                report.filtered,
                report.violations,
                report.max_quad_ratio,
                report.max_opnorm_ratio,
                report.max_inv_ratio
            );
            if !report.pass {
                eprintln!("covariance bound violations detected");
                return Ok(2);
            }
            Ok(0)
        }
        Cmd::Edgeworth { .. } => {
            print!("{}", edgeworth_table(&cfg)?);
            Ok(0)
        }
        Cmd::Discrepancy { .. } => {
            let res = run_discrepancy_single(&cfg)?;
            print!("{}", to_json(&res)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
