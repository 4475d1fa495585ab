//! Monte Carlo sampling of random binary timing paths.
//!
//! Path `k` draws its bits from its own ChaCha8 stream: the key comes from
//! the run seed and the stream id is `k`. Paths are evaluated in parallel
//! but folded into the summary in index order, so results do not depend on
//! the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::market_data::AssetPair;
use crate::stats::{self, Bins, Histogram, Moments, StatsError};
use crate::timing::{self, FeasibleSet, TimingPath};

/// Terminals are kept in full up to this many paths; beyond it a uniform
/// reservoir of this size stands in for the quantile and histogram inputs.
pub const DEFAULT_STORE_LIMIT: usize = 1_000_000;
/// Default ceiling on `paths * periods`.
pub const DEFAULT_WORK_LIMIT: u64 = 5_000_000_000;

const CHUNK: usize = 1 << 14;
// Stream id reserved for reservoir sampling; path streams use 0..M.
const RESERVOIR_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{paths} paths x {periods} periods exceeds the work limit of {limit}")]
    ResourceCap {
        paths: u64,
        periods: u64,
        limit: u64,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McConfig {
    pub m_paths: usize,
    /// Probability of holding stocks each period; `None` uses the pair's `p_b`.
    pub p: Option<f64>,
    pub seed: u64,
    pub bins: Bins,
    pub workers: usize,
    pub work_limit: u64,
    pub store_limit: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            m_paths: 100_000,
            p: None,
            seed: 0,
            bins: Bins::Auto,
            workers: 1,
            work_limit: DEFAULT_WORK_LIMIT,
            store_limit: DEFAULT_STORE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub n: usize,
    pub p: f64,
    pub m_paths: usize,
    pub seed: u64,
    #[serde(skip)]
    pub terminals: Vec<f64>,
    #[serde(skip)]
    pub log_terminals: Vec<f64>,
    /// False when `terminals` is a reservoir sample rather than every path.
    pub terminals_complete: bool,
    pub median: f64,
    pub median_log: f64,
    pub mode_estimate: f64,
    pub mode_bin_width: f64,
    pub skewness_log: f64,
    pub skewness_return: f64,
    pub excess_kurtosis_log: f64,
    pub mean_log_terminal: f64,
    pub var_log_terminal: f64,
    pub mean_terminal: f64,
    pub min_terminal: f64,
    pub max_terminal: f64,
    /// Mean of per-path log geometric means.
    pub mu_hat: f64,
    /// Standard deviation of per-path log geometric means.
    pub sigma_hat: f64,
    pub mean_ones_fraction: f64,
    pub envelope_violations: u64,
    pub hist_log: Histogram,
    pub hist_return: Histogram,
}

/// Random stream for path `index` of a run seeded with `seed`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn sample_bits(n: usize, p: f64, rng: &mut impl Rng, out: &mut Vec<bool>) {
    out.clear();
    out.extend((0..n).map(|_| rng.random::<f64>() < p));
}

/// Each period holds stocks independently with probability `p` (`u < p`).
pub fn sample_timing_path(n: usize, p: f64, rng: &mut impl Rng) -> TimingPath {
    let mut bits = Vec::with_capacity(n);
    sample_bits(n, p, rng, &mut bits);
    TimingPath::binary(bits).expect("n >= 1")
}

/// The timing path that [`run_simulation`] draws as path `index`.
pub fn sampled_path(n: usize, p: f64, seed: u64, index: u64) -> TimingPath {
    sample_timing_path(n, p, &mut path_stream(seed, index))
}

struct Outcome {
    terminal: f64,
    ones: usize,
    violated: bool,
}

fn simulate_path(
    pair: &AssetPair,
    envelope: &FeasibleSet,
    p: f64,
    seed: u64,
    index: u64,
) -> Outcome {
    let n = pair.n();
    let mut rng = path_stream(seed, index);
    let mut bits = Vec::with_capacity(n);
    sample_bits(n, p, &mut rng, &mut bits);
    let per_period: Vec<f64> = bits
        .iter()
        .zip(pair.stock_returns().iter().zip(pair.bond_returns()))
        .map(|(b, (s, r))| if *b { *s } else { *r })
        .collect();
    let cumulative = timing::compound(&per_period);
    let violated = cumulative
        .iter()
        .zip(
            envelope
                .worst
                .cumulative
                .iter()
                .zip(&envelope.best.cumulative),
        )
        .any(|(c, (lo, hi))| c < lo || c > hi);
    Outcome {
        terminal: *cumulative.last().expect("n >= 1"),
        ones: bits.iter().filter(|b| **b).count(),
        violated,
    }
}

pub fn resolve_p(pair: &AssetPair, cfg: &McConfig) -> Result<f64, McError> {
    let p = cfg.p.unwrap_or_else(|| timing::optimal_paths(pair).p_b);
    if !(0.0..=1.0).contains(&p) {
        return Err(McError::Config(format!("p = {p} outside [0, 1]")));
    }
    Ok(p)
}

/// Sample `m_paths` random timing paths and summarize their terminal returns.
pub fn run_simulation(pair: &AssetPair, cfg: &McConfig) -> Result<McSummary, McError> {
    if cfg.m_paths == 0 {
        return Err(McError::Config("need at least one path".into()));
    }
    if cfg.workers == 0 {
        return Err(McError::Config("need at least one worker".into()));
    }
    if cfg.store_limit == 0 {
        return Err(McError::Config("store limit must be positive".into()));
    }
    let n = pair.n();
    let (paths, periods) = (cfg.m_paths as u64, n as u64);
    if paths.saturating_mul(periods) > cfg.work_limit {
        return Err(McError::ResourceCap {
            paths,
            periods,
            limit: cfg.work_limit,
        });
    }
    let p = resolve_p(pair, cfg)?;
    let envelope = timing::optimal_paths(pair);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| McError::Config(format!("thread pool: {e}")))?;

    let keep_all = cfg.m_paths <= cfg.store_limit;
    let mut stored: Vec<f64> = Vec::with_capacity(cfg.m_paths.min(cfg.store_limit));
    let mut reservoir_rng = path_stream(cfg.seed, RESERVOIR_STREAM);
    let mut log_moments = Moments::new();
    let mut ret_moments = Moments::new();
    let mut geo_moments = Moments::new();
    let mut ones_total = 0u64;
    let mut violations = 0u64;
    let mut min_terminal = f64::INFINITY;
    let mut max_terminal = f64::NEG_INFINITY;

    let mut start = 0usize;
    while start < cfg.m_paths {
        let end = (start + CHUNK).min(cfg.m_paths);
        let chunk: Vec<Outcome> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|k| simulate_path(pair, &envelope, p, cfg.seed, k as u64))
                .collect()
        });
        for (offset, o) in chunk.into_iter().enumerate() {
            let k = start + offset;
            let log_t = o.terminal.ln();
            log_moments.push(log_t);
            ret_moments.push(o.terminal);
            geo_moments.push(log_t / n as f64);
            ones_total += o.ones as u64;
            violations += o.violated as u64;
            min_terminal = min_terminal.min(o.terminal);
            max_terminal = max_terminal.max(o.terminal);
            if keep_all || stored.len() < cfg.store_limit {
                stored.push(o.terminal);
            } else {
                // Algorithm R
                let j = reservoir_rng.random_range(0..=k);
                if j < cfg.store_limit {
                    stored[j] = o.terminal;
                }
            }
        }
        start = end;
    }

    let log_terminals: Vec<f64> = stored.iter().map(|t| t.ln()).collect();
    let (mode_estimate, mode_bin_width) = stats::mode_estimate(&stored)?;
    Ok(McSummary {
        n,
        p,
        m_paths: cfg.m_paths,
        seed: cfg.seed,
        terminals_complete: keep_all,
        median: stats::median(&stored)?,
        median_log: stats::median(&log_terminals)?,
        mode_estimate,
        mode_bin_width,
        skewness_log: log_moments.skewness(),
        skewness_return: ret_moments.skewness(),
        excess_kurtosis_log: log_moments.excess_kurtosis(),
        mean_log_terminal: log_moments.mean(),
        var_log_terminal: log_moments.variance(),
        mean_terminal: ret_moments.mean(),
        min_terminal,
        max_terminal,
        mu_hat: geo_moments.mean(),
        sigma_hat: geo_moments.std_dev(),
        mean_ones_fraction: ones_total as f64 / (paths * periods) as f64,
        envelope_violations: violations,
        hist_log: stats::histogram(&log_terminals, cfg.bins)?,
        hist_return: stats::histogram(&stored, cfg.bins)?,
        terminals: stored,
        log_terminals,
    })
}
