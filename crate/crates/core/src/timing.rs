//! Timing paths, return paths and the feasible-set envelope.
//!
//! A timing path assigns each period a stock weight `f_i`; the induced
//! return path compounds `f_i * r_s + (1 - f_i) * r_b`. Binary paths switch
//! all-or-nothing, static paths hold one constant mix rebalanced every period.

use rayon::prelude::*;
use serde::Serialize;

use crate::market_data::AssetPair;

/// Largest `n` accepted by [`enumerate_all_paths`] unless the caller raises it.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Beyond this many periods cumulative products are formed in log space.
const LOG_SPACE_THRESHOLD: usize = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimingError {
    #[error("timing path has {got} periods, pair has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("invalid timing path: {0}")]
    InvalidPath(String),
    #[error("cannot enumerate 2^{n} paths (cap is n <= {cap})")]
    TooManyPeriods { n: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Binary,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingPath {
    weights: Vec<f64>,
    kind: PathKind,
}

impl TimingPath {
    pub fn new(weights: Vec<f64>, kind: PathKind) -> Result<Self, TimingError> {
        if weights.is_empty() {
            return Err(TimingError::InvalidPath("empty path".into()));
        }
        match kind {
            PathKind::Binary => {
                if let Some(w) = weights.iter().find(|w| **w != 0.0 && **w != 1.0) {
                    return Err(TimingError::InvalidPath(format!(
                        "binary path contains {w}"
                    )));
                }
            }
            PathKind::Static => {
                let w0 = weights[0];
                if !(0.0..=1.0).contains(&w0) {
                    return Err(TimingError::WeightOutOfRange(w0));
                }
                if weights.iter().any(|w| *w != w0) {
                    return Err(TimingError::InvalidPath(
                        "static path weights are not constant".into(),
                    ));
                }
            }
        }
        Ok(Self { weights, kind })
    }

    pub fn binary<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self, TimingError> {
        let weights = bits
            .into_iter()
            .map(|b| if b { 1.0 } else { 0.0 })
            .collect();
        Self::new(weights, PathKind::Binary)
    }

    /// Binary path whose period `i` holds bit `i` of `mask`.
    pub fn from_mask(mask: u64, n: usize) -> Result<Self, TimingError> {
        Self::binary((0..n).map(|i| (mask >> i) & 1 == 1))
    }

    pub fn static_allocation(weight: f64, n: usize) -> Result<Self, TimingError> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(TimingError::WeightOutOfRange(weight));
        }
        Self::new(vec![weight; n], PathKind::Static)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Mean weight; for a binary path the fraction of periods in stocks.
    pub fn ones_fraction(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    /// The path as 0/1 bits, or `None` for a fractional static path.
    pub fn bits(&self) -> Option<Vec<u8>> {
        self.weights
            .iter()
            .map(|w| {
                if *w == 1.0 {
                    Some(1)
                } else if *w == 0.0 {
                    Some(0)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Cumulative wealth generated by a timing path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnPath {
    pub cumulative: Vec<f64>,
    pub terminal: f64,
    pub geo_mean: f64,
    pub log_geo_mean: f64,
}

impl ReturnPath {
    /// Compound a sequence of positive per-period returns.
    pub fn from_period_returns(per_period: &[f64]) -> Self {
        let n = per_period.len();
        let cumulative = compound(per_period);
        let terminal = *cumulative.last().expect("nonempty path");
        let log_geo_mean = terminal.ln() / n as f64;
        Self {
            cumulative,
            terminal,
            geo_mean: terminal.powf(1.0 / n as f64),
            log_geo_mean,
        }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }
}

pub(crate) fn compound(per_period: &[f64]) -> Vec<f64> {
    if per_period.len() > LOG_SPACE_THRESHOLD {
        let mut log_sum = 0.0;
        per_period
            .iter()
            .map(|r| {
                log_sum += r.ln();
                log_sum.exp()
            })
            .collect()
    } else {
        let mut acc = 1.0;
        per_period
            .iter()
            .map(|r| {
                acc *= r;
                acc
            })
            .collect()
    }
}

fn terminal_of(per_period: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n > LOG_SPACE_THRESHOLD {
        per_period.map(f64::ln).sum::<f64>().exp()
    } else {
        per_period.product()
    }
}

/// Per-period portfolio returns `f_i * r_si + (1 - f_i) * r_bi`.
pub fn period_returns(f: &TimingPath, pair: &AssetPair) -> Result<Vec<f64>, TimingError> {
    if f.len() != pair.n() {
        return Err(TimingError::LengthMismatch {
            expected: pair.n(),
            got: f.len(),
        });
    }
    Ok(f.weights
        .iter()
        .zip(pair.stock_returns().iter().zip(pair.bond_returns()))
        .map(|(w, (s, b))| w * s + (1.0 - w) * b)
        .collect())
}

pub fn evaluate_path(f: &TimingPath, pair: &AssetPair) -> Result<ReturnPath, TimingError> {
    Ok(ReturnPath::from_period_returns(&period_returns(f, pair)?))
}

/// Constant-mix portfolio with stock weight `weight`, rebalanced each period.
pub fn static_path(weight: f64, pair: &AssetPair) -> Result<ReturnPath, TimingError> {
    evaluate_path(&TimingPath::static_allocation(weight, pair.n())?, pair)
}

/// Hindsight-best and hindsight-worst paths bounding every timing outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleSet {
    pub best: ReturnPath,
    pub worst: ReturnPath,
    pub f_best: TimingPath,
    pub f_worst: TimingPath,
    /// Fraction of periods in which `f_best` holds stocks.
    pub p_b: f64,
    /// Periods where stock and bond returns were equal.
    pub ties: usize,
}

/// Best and worst paths by per-period hindsight.
///
/// Ties (`r_s == r_b`) go to stocks in `f_best` and to bonds in `f_worst`;
/// the return paths are unaffected by the choice.
pub fn optimal_paths(pair: &AssetPair) -> FeasibleSet {
    let (stocks, bonds) = (pair.stock_returns(), pair.bond_returns());
    let f_best = TimingPath::binary(stocks.iter().zip(bonds).map(|(s, b)| s >= b))
        .expect("pair is nonempty");
    let f_worst =
        TimingPath::binary(stocks.iter().zip(bonds).map(|(s, b)| s < b)).expect("pair is nonempty");
    let ties = stocks.iter().zip(bonds).filter(|(s, b)| s == b).count();
    let best = evaluate_path(&f_best, pair).expect("lengths match");
    let worst = evaluate_path(&f_worst, pair).expect("lengths match");
    let p_b = f_best.ones_fraction();
    FeasibleSet {
        best,
        worst,
        f_best,
        f_worst,
        p_b,
        ties,
    }
}

/// Every binary timing path with its terminal return, ordered by path index.
///
/// Path index `k` holds stocks in period `i` iff bit `i` of `k` is set.
pub fn enumerate_all_paths(
    pair: &AssetPair,
    max_n: usize,
) -> Result<Vec<(TimingPath, f64)>, TimingError> {
    let n = pair.n();
    let cap = max_n.min(63);
    if n > cap {
        return Err(TimingError::TooManyPeriods { n, cap });
    }
    let (stocks, bonds) = (pair.stock_returns(), pair.bond_returns());
    Ok((0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let path = TimingPath::from_mask(mask, n).expect("n >= 1");
            let terminal = terminal_of(
                (0..n).map(|i| {
                    if (mask >> i) & 1 == 1 {
                        stocks[i]
                    } else {
                        bonds[i]
                    }
                }),
                n,
            );
            (path, terminal)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(s: &[f64], b: &[f64]) -> AssetPair {
        AssetPair::from_returns(s, b).unwrap()
    }

    fn three() -> AssetPair {
        pair(&[1.10, 0.90, 1.05], &[1.01, 1.02, 1.00])
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs()
    }

    #[test]
    fn all_ones_and_all_zeros_follow_the_assets() {
        let p = three();
        let stocks = evaluate_path(&TimingPath::binary([true; 3]).unwrap(), &p).unwrap();
        assert_eq!(
            stocks.cumulative,
            vec![1.10, 1.10 * 0.90, 1.10 * 0.90 * 1.05]
        );
        let bonds = evaluate_path(&TimingPath::binary([false; 3]).unwrap(), &p).unwrap();
        assert_eq!(
            bonds.cumulative,
            vec![1.01, 1.01 * 1.02, 1.01 * 1.02 * 1.00]
        );
    }

    #[test]
    fn hand_multiplied_terminal() {
        let f = TimingPath::binary([true, false, true]).unwrap();
        let path = evaluate_path(&f, &three()).unwrap();
        assert!(close(path.terminal, 1.178_10));
        assert!(close(path.log_geo_mean, 1.178_10f64.ln() / 3.0));
    }

    #[test]
    fn length_mismatch_rejected() {
        let f = TimingPath::binary([true, false]).unwrap();
        assert_eq!(
            evaluate_path(&f, &three()).unwrap_err(),
            TimingError::LengthMismatch {
                expected: 3,
                got: 2
            }
        );
    }

    #[test]
    fn path_construction_rules() {
        assert!(TimingPath::new(vec![0.0, 0.5], PathKind::Binary).is_err());
        assert!(TimingPath::new(vec![0.5, 0.6], PathKind::Static).is_err());
        assert!(TimingPath::static_allocation(1.2, 3).is_err());
        assert!(TimingPath::static_allocation(-0.1, 3).is_err());
        assert_eq!(
            TimingPath::from_mask(0b101, 3).unwrap().bits(),
            Some(vec![1, 0, 1])
        );
        assert_eq!(TimingPath::static_allocation(0.6, 2).unwrap().bits(), None);
    }

    #[test]
    fn optimal_paths_three_periods() {
        let fs = optimal_paths(&three());
        assert_eq!(fs.f_best.bits(), Some(vec![1, 0, 1]));
        assert_eq!(fs.f_worst.bits(), Some(vec![0, 1, 0]));
        assert!(close(fs.best.terminal, 1.178_10));
        assert!(close(fs.worst.terminal, 0.909_00));
        assert!((fs.p_b - 2.0 / 3.0).abs() < 1e-15);

        // all 8 paths by hand
        let (s, b) = ([1.10, 0.90, 1.05], [1.01, 1.02, 1.00]);
        let terminals: Vec<f64> = (0..8u32)
            .map(|k| {
                (0..3)
                    .map(|i| if k >> i & 1 == 1 { s[i] } else { b[i] })
                    .product()
            })
            .collect();
        let max = terminals.iter().cloned().fold(f64::MIN, f64::max);
        let min = terminals.iter().cloned().fold(f64::MAX, f64::min);
        assert_eq!(fs.best.terminal, max);
        assert_eq!(fs.worst.terminal, min);
    }

    #[test]
    fn identical_assets_collapse_envelope() {
        let p = pair(&[1.01, 0.99, 1.03], &[1.01, 0.99, 1.03]);
        let fs = optimal_paths(&p);
        assert_eq!(fs.best, fs.worst);
        assert_eq!(fs.ties, 3);
        assert_eq!(fs.f_best.bits(), Some(vec![1, 1, 1]));
        assert_eq!(fs.f_worst.bits(), Some(vec![0, 0, 0]));
        assert_eq!(fs.p_b, 1.0);
    }

    #[test]
    fn static_paths() {
        let p = pair(&[1.10, 0.90], &[1.00, 1.02]);
        assert!(close(static_path(0.6, &p).unwrap().terminal, 1.06 * 0.948));
        assert!(close(static_path(0.6, &p).unwrap().terminal, 1.004_88));
        let stock = evaluate_path(&TimingPath::binary([true; 2]).unwrap(), &p).unwrap();
        let bond = evaluate_path(&TimingPath::binary([false; 2]).unwrap(), &p).unwrap();
        assert_eq!(static_path(1.0, &p).unwrap().cumulative, stock.cumulative);
        assert_eq!(static_path(0.0, &p).unwrap().cumulative, bond.cumulative);
        assert_eq!(
            static_path(1.5, &p).unwrap_err(),
            TimingError::WeightOutOfRange(1.5)
        );
    }

    #[test]
    fn enumeration_small_cases() {
        let all = enumerate_all_paths(&three(), DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 8);
        let max = all.iter().map(|(_, t)| *t).fold(f64::MIN, f64::max);
        assert_eq!(max, optimal_paths(&three()).best.terminal);
        for (k, (path, _)) in all.iter().enumerate() {
            assert_eq!(path, &TimingPath::from_mask(k as u64, 3).unwrap());
        }

        let one = pair(&[1.05], &[1.01]);
        let terminals: Vec<f64> = enumerate_all_paths(&one, 20)
            .unwrap()
            .into_iter()
            .map(|(_, t)| t)
            .collect();
        assert_eq!(terminals, vec![1.01, 1.05]);
    }

    #[test]
    fn enumeration_cap() {
        let p = pair(&[1.01; 21], &[1.0; 21]);
        assert_eq!(
            enumerate_all_paths(&p, 20).unwrap_err(),
            TimingError::TooManyPeriods { n: 21, cap: 20 }
        );
    }

    #[test]
    fn long_paths_use_log_space() {
        let n = 5000;
        let s: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.01 } else { 0.995 })
            .collect();
        let p = pair(&s, &vec![1.001; n]);
        let path = static_path(1.0, &p).unwrap();
        let want = (2500.0 * 1.01f64.ln() + 2500.0 * 0.995f64.ln()).exp();
        assert!((path.terminal - want).abs() <= 1e-10 * want);
        assert!((path.geo_mean.powi(n as i32) - path.terminal).abs() <= 1e-10 * path.terminal);
    }

    fn arb_pair(max_n: usize) -> impl Strategy<Value = AssetPair> {
        (1..=max_n).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.7f64..1.4, n),
                proptest::collection::vec(0.9f64..1.1, n),
            )
                .prop_map(|(s, b)| AssetPair::from_returns(&s, &b).unwrap())
        })
    }

    proptest! {
        #[test]
        fn envelope_contains_every_binary_path(
            (p, mask) in arb_pair(40).prop_flat_map(|p| (Just(p), any::<u64>()))
        ) {
            let fs = optimal_paths(&p);
            let path = evaluate_path(&TimingPath::from_mask(mask, p.n()).unwrap(), &p).unwrap();
            for i in 0..p.n() {
                prop_assert!(fs.worst.cumulative[i] <= path.cumulative[i]);
                prop_assert!(path.cumulative[i] <= fs.best.cumulative[i]);
            }
        }

        #[test]
        fn optimal_matches_enumeration(p in arb_pair(12)) {
            let fs = optimal_paths(&p);
            let all = enumerate_all_paths(&p, 12).unwrap();
            let max = all.iter().map(|(_, t)| *t).fold(f64::MIN, f64::max);
            let min = all.iter().map(|(_, t)| *t).fold(f64::MAX, f64::min);
            prop_assert_eq!(fs.best.terminal, max);
            prop_assert_eq!(fs.worst.terminal, min);
        }

        #[test]
        fn return_path_invariants(p in arb_pair(60), w in 0.0f64..=1.0) {
            let path = static_path(w, &p).unwrap();
            let n = p.n() as f64;
            prop_assert!(path.cumulative.iter().all(|c| *c > 0.0));
            prop_assert!(((path.geo_mean.powf(n) - path.terminal) / path.terminal).abs() <= 1e-10);
            prop_assert!((path.log_geo_mean - path.terminal.ln() / n).abs() <= 1e-12);
            let per = period_returns(&TimingPath::static_allocation(w, p.n()).unwrap(), &p).unwrap();
            for (c, r) in path.cumulative.windows(2).zip(&per[1..]) {
                prop_assert!((c[0] * r - c[1]).abs() <= 1e-12 * c[1]);
            }
        }

        #[test]
        fn static_terminal_monotone_under_dominance(
            n in 2usize..40,
            spread in proptest::collection::vec(0.001f64..0.2, 40),
            base in proptest::collection::vec(0.95f64..1.05, 40),
        ) {
            // stocks beat bonds every period: terminal rises with the stock weight
            let b: Vec<f64> = base[..n].to_vec();
            let s: Vec<f64> = b.iter().zip(&spread).map(|(b, d)| b + d).collect();
            let p = AssetPair::from_returns(&s, &b).unwrap();
            let terminals: Vec<f64> = (0..=20)
                .map(|k| static_path(k as f64 / 20.0, &p).unwrap().terminal)
                .collect();
            prop_assert!(terminals.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn static_endpoints_are_asset_paths(p in arb_pair(30)) {
            let n = p.n();
            let stock = evaluate_path(&TimingPath::binary(vec![true; n]).unwrap(), &p).unwrap();
            let bond = evaluate_path(&TimingPath::binary(vec![false; n]).unwrap(), &p).unwrap();
            prop_assert_eq!(static_path(1.0, &p).unwrap(), stock);
            prop_assert_eq!(static_path(0.0, &p).unwrap(), bond);
        }
    }
}
