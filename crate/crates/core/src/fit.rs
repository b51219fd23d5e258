//! Small shared numerics for experiment summaries: least-squares lines and
//! geometric grids.

use serde::Serialize;

use crate::error::{Error, Result};

/// Ordinary least squares fit y = slope·x + intercept.
///
/// Returns `None` with fewer than two distinct x values.
pub fn least_squares_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Residual sum of squares of a fitted line.
pub fn line_rss(points: &[(f64, f64)], slope: f64, intercept: f64) -> f64 {
    points
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum()
}

/// `count` points geometrically spaced from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let ratio = (hi / lo).powf(1.0 / (count as f64 - 1.0));
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                lo * ratio.powi(i as i32)
            }
        })
        .collect()
}

/// Median of a nonempty slice (averages the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Log-log rate fit over (n, value) pairs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares on (ln n, ln value). Needs ≥ 3 rows with strictly
/// positive values; offending row indices are reported otherwise.
pub fn fit_slope(rows: &[(f64, f64)]) -> Result<SlopeFit> {
    let bad: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, &(n, v))| n <= 0.0 || v <= 0.0)
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "nonpositive rows at indices {bad:?}"
        )));
    }
    if rows.len() < 3 {
        return Err(Error::TooFewRows {
            needed: 3,
            got: rows.len(),
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let (slope, intercept) = least_squares_line(&pts)
        .ok_or_else(|| Error::InvalidArgument("degenerate x grid".into()))?;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let tss: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let rss = line_rss(&pts, slope, intercept);
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        points: rows.len(),
    })
}

/// Empirical quantile by linear interpolation of order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty() && (0.0..=1.0).contains(&q));
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}
