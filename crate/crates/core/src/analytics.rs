//! Closed-form median of the timing-return distribution and diagnostics
//! that compare it with Monte Carlo output.

use serde::Serialize;

use crate::market_data::AssetPair;
use crate::monte_carlo::McSummary;
use crate::timing::TimingPath;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("p = {0} outside [0, 1]")]
    Probability(f64),
    #[error("empty path sample")]
    EmptySample,
    #[error("path length {got} does not match {expected} periods")]
    LengthMismatch { expected: usize, got: usize },
    #[error("inputs disagree: {0}")]
    Mismatch(String),
}

/// Log-normal median implied by holding stocks a fraction `p` of the time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianAnalysis {
    /// Geometric mean of stock returns.
    pub r_bar_s: f64,
    /// Geometric mean of bond returns.
    pub r_bar_b: f64,
    pub p: f64,
    pub n: usize,
    /// Per-period log median, `ln(p r_bar_s + (1 - p) r_bar_b)`.
    pub mu: f64,
    pub median_return_per_period: f64,
    pub median_terminal: f64,
    /// Mean over periods of `ln(p r_s + (1-p) r_b) - p ln r_s - (1-p) ln r_b`.
    pub jensen_gap: f64,
}

pub fn geometric_mean(returns: &[f64]) -> f64 {
    (returns.iter().map(|r| r.ln()).sum::<f64>() / returns.len() as f64).exp()
}

pub fn expected_median(pair: &AssetPair, p: f64) -> Result<MedianAnalysis, AnalyticsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalyticsError::Probability(p));
    }
    let n = pair.n();
    let r_bar_s = geometric_mean(pair.stock_returns());
    let r_bar_b = geometric_mean(pair.bond_returns());
    let mu = (p * r_bar_s + (1.0 - p) * r_bar_b).ln();
    let jensen_gap = pair
        .stock_returns()
        .iter()
        .zip(pair.bond_returns())
        .map(|(s, b)| (p * s + (1.0 - p) * b).ln() - p * s.ln() - (1.0 - p) * b.ln())
        .sum::<f64>()
        / n as f64;
    Ok(MedianAnalysis {
        r_bar_s,
        r_bar_b,
        p,
        n,
        mu,
        median_return_per_period: mu.exp(),
        median_terminal: (mu * n as f64).exp(),
        jensen_gap,
    })
}

/// Covariance of timing decisions with asset returns across periods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceDiagnostic {
    pub paths: usize,
    /// Mean over paths of the sample covariance of `f_i` with `r_si`.
    pub cov_f_rs: f64,
    /// Mean over paths of the sample covariance of `1 - f_i` with `r_bi`.
    pub cov_1mf_rb: f64,
    /// Standard errors of the two means; zero for a single path.
    pub standard_errors: [f64; 2],
}

fn sample_cov(x: impl Iterator<Item = f64> + Clone, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mx = x.clone().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

pub fn covariance_diagnostic(
    paths: &[TimingPath],
    pair: &AssetPair,
) -> Result<CovarianceDiagnostic, AnalyticsError> {
    if paths.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let n = pair.n();
    if n < 2 {
        return Err(AnalyticsError::Mismatch(
            "covariance needs at least two periods".into(),
        ));
    }
    let mut cs = Vec::with_capacity(paths.len());
    let mut cb = Vec::with_capacity(paths.len());
    for f in paths {
        if f.len() != n {
            return Err(AnalyticsError::LengthMismatch {
                expected: n,
                got: f.len(),
            });
        }
        let w = f.weights();
        cs.push(sample_cov(w.iter().copied(), pair.stock_returns()));
        cb.push(sample_cov(w.iter().map(|x| 1.0 - x), pair.bond_returns()));
    }
    let (cov_f_rs, se_s) = mean_and_se(&cs);
    let (cov_1mf_rb, se_b) = mean_and_se(&cb);
    Ok(CovarianceDiagnostic {
        paths: paths.len(),
        cov_f_rs,
        cov_1mf_rb,
        standard_errors: [se_s, se_b],
    })
}

/// Monte Carlo results set against the analytic log-normal picture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LognormalConsistency {
    pub sample_median: f64,
    pub analytic_median: f64,
    pub median_rel_error: f64,
    /// Median gap allowed by the measured Jensen gap, `exp(n * gap) - 1`.
    pub jensen_bound_rel: f64,
    pub mode_estimate: f64,
    /// `exp(mean - var)` of the sampled log terminals.
    pub lognormal_mode: f64,
    pub mode_rel_error: f64,
    pub mode_within_bins: f64,
    pub skewness_log: f64,
    pub skewness_return: f64,
    pub mode_below_median: bool,
    pub right_skewed: bool,
}

pub fn lognormal_consistency(
    summary: &McSummary,
    analysis: &MedianAnalysis,
) -> Result<LognormalConsistency, AnalyticsError> {
    if summary.n != analysis.n {
        return Err(AnalyticsError::Mismatch(format!(
            "summary has {} periods, analysis {}",
            summary.n, analysis.n
        )));
    }
    if summary.p != analysis.p {
        return Err(AnalyticsError::Mismatch(format!(
            "summary p = {}, analysis p = {}",
            summary.p, analysis.p
        )));
    }
    let lognormal_mode = (summary.mean_log_terminal - summary.var_log_terminal).exp();
    let mode_within_bins = if summary.mode_bin_width > 0.0 {
        (summary.mode_estimate - lognormal_mode).abs() / summary.mode_bin_width
    } else {
        0.0
    };
    Ok(LognormalConsistency {
        sample_median: summary.median,
        analytic_median: analysis.median_terminal,
        median_rel_error: (summary.median - analysis.median_terminal) / analysis.median_terminal,
        jensen_bound_rel: (analysis.n as f64 * analysis.jensen_gap).exp_m1(),
        mode_estimate: summary.mode_estimate,
        lognormal_mode,
        mode_rel_error: (summary.mode_estimate - lognormal_mode) / lognormal_mode,
        mode_within_bins,
        skewness_log: summary.skewness_log,
        skewness_return: summary.skewness_return,
        mode_below_median: summary.mode_estimate < summary.median,
        right_skewed: summary.skewness_return > 0.0,
    })
}
