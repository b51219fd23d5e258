//! Report types and deterministic CSV/JSON emission.
//!
//! All float columns use `{:.16e}` so identical runs produce byte-identical
//! files; JSON goes through serde with a fixed field order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::SlopeFit;
use crate::rng::RNG_DESCRIPTION;
use crate::sphere::ConcentrationReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub theta_id: String,
    pub policy: String,
    pub discrepancy: f64,
    pub method: String,
    /// Method error: MC standard error at the witness, or the quadrature
    /// error estimate; ~0 for exact routes.
    pub se: f64,
    /// Whether the row passes the error-vs-signal filter (5·se < value).
    pub usable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NSummary {
    pub n: usize,
    pub rows: usize,
    pub usable_rows: usize,
    pub median: Option<f64>,
    pub q90: Option<f64>,
    /// Largest MC noise floor among the rows (0 for exact/quadrature routes).
    pub noise_floor: f64,
    /// Median sits within 1.5× of the noise floor: the value is a ceiling,
    /// not a measurement.
    pub noise_limited: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub replicates: usize,
    pub per_n: Vec<NSummary>,
    pub fit: Option<SlopeFit>,
    /// `ok` or `insufficient_rows` (< 3 usable grid points).
    pub fit_flag: String,
    /// ln-space residuals at the fitted grid points.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub schema_version: u32,
    pub rng: String,
    pub mode: String,
    pub k: usize,
    pub dist: String,
    pub class: String,
    pub seed: u64,
    pub samples: usize,
    pub recenter: bool,
    pub n_grid: Vec<usize>,
    pub rows: Vec<RateRow>,
    pub policies: Vec<PolicySummary>,
    /// Grid points where some policy's median is noise-limited.
    pub noise_limited_ns: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma2Case {
    pub id: usize,
    pub k: usize,
    pub n: usize,
    pub law: String,
    pub delta_theta4: f64,
    /// max over 100 random t of |⟨t,Dt⟩ − ‖t‖²| / (2k δ_θ⁴ ‖t‖²); bound is 1.
    pub quad_ratio: f64,
    /// ‖D − I‖ / (1/4); bound is 1.
    pub opnorm_ratio: f64,
    /// ‖D⁻¹‖ / (4/3); bound is 1.
    pub inv_ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma2Report {
    pub schema_version: u32,
    pub rng: String,
    pub mode: String,
    pub seed: u64,
    pub total: usize,
    /// Configurations rejected by the δ_θ⁴ ≤ 1/(8k) precondition.
    pub filtered: usize,
    pub evaluated: usize,
    pub violations: usize,
    pub max_quad_ratio: f64,
    pub max_opnorm_ratio: f64,
    pub max_inv_ratio: f64,
    pub pass: bool,
    pub cases: Vec<Lemma2Case>,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub fn rate_rows_csv(report: &RateReport) -> String {
    let mut out = String::from("n,theta_id,policy,discrepancy,method,se,usable\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            r.theta_id,
            r.policy,
            fmt(r.discrepancy),
            r.method,
            fmt(r.se),
            r.usable
        ));
    }
    out
}

pub fn rate_summary_csv(report: &RateReport) -> String {
    let mut out = String::from("policy,n,rows,usable_rows,median,q90,noise_floor,noise_limited\n");
    for p in &report.policies {
        for s in &p.per_n {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.policy,
                s.n,
                s.rows,
                s.usable_rows,
                fmt_opt(s.median),
                fmt_opt(s.q90),
                fmt(s.noise_floor),
                s.noise_limited
            ));
        }
    }
    out
}

pub fn lemma2_csv(report: &Lemma2Report) -> String {
    let mut out = String::from("id,k,n,law,delta_theta4,quad_ratio,opnorm_ratio,inv_ratio,pass\n");
    for c in &report.cases {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.id,
            c.k,
            c.n,
            c.law,
            fmt(c.delta_theta4),
            fmt(c.quad_ratio),
            fmt(c.opnorm_ratio),
            fmt(c.inv_ratio),
            c.pass
        ));
    }
    out
}

pub fn concentration_csv(report: &ConcentrationReport) -> String {
    let mut out = String::from("t,count_s1,p_hat_s1,count_s2,p_hat_s2\n");
    for i in 0..report.s1.t_grid.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(report.s1.t_grid[i]),
            report.s1.counts[i],
            fmt(report.s1.p_hat[i]),
            report.s2.counts[i],
            fmt(report.s2.p_hat[i])
        ));
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn rng_description() -> String {
    RNG_DESCRIPTION.to_string()
}

/// Writes `content` to `dir/name`, creating the directory if needed.
pub fn write_text(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Emits rows.csv, summary.csv, and report.json for a rate run.
pub fn write_rate_report(report: &RateReport, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write_text(dir, "rows.csv", &rate_rows_csv(report))?,
        write_text(dir, "summary.csv", &rate_summary_csv(report))?,
        write_text(dir, "report.json", &to_json(report)?)?,
    ])
}

pub fn write_lemma2_report(report: &Lemma2Report, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write_text(dir, "cases.csv", &lemma2_csv(report))?,
        write_text(dir, "report.json", &to_json(report)?)?,
    ])
}

pub fn write_concentration_report(
    report: &ConcentrationReport,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write_text(dir, "exceedance.csv", &concentration_csv(report))?,
        write_text(dir, "report.json", &to_json(report)?)?,
    ])
}
