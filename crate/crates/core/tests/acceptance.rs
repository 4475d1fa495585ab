//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use market_timing::analytics::expected_median;
use market_timing::market_data::{align, load_series, AssetPair, ReturnMode};
use market_timing::monte_carlo::{run_simulation, McConfig};
use market_timing::randomness::{
    cusum_excursion, run_all, runs_test, serial_statistics, BitSequence, CusumMode, TestName,
};
use market_timing::timing::{evaluate_path, optimal_paths, TimingPath};

fn verdict(n: u32, ok: bool, detail: &str, elapsed: Duration, budget: Duration) {
    let in_time = elapsed <= budget;
    let status = if ok && in_time { "PASS" } else { "FAIL" };
    println!(
        "criterion {n}: {status} {detail} [{:.2}s of {:.0}s]",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(ok, "criterion {n}: {detail}");
    assert!(in_time, "criterion {n}: over time budget");
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn bundled_pair() -> AssetPair {
    let dir = data_dir();
    let s = load_series(dir.join("stocks.csv"), ReturnMode::Percent, "stocks").unwrap();
    let b = load_series(dir.join("bonds.csv"), ReturnMode::Percent, "bonds").unwrap();
    align(&s, &b).unwrap()
}

fn random_pair(seed: u64, n: usize) -> AssetPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.85..1.18)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.97..1.05)).collect();
    AssetPair::from_returns(&s, &b).unwrap()
}

/// Cumulative products of every binary path, computed without the library.
fn brute_force_paths(pair: &AssetPair) -> Vec<(u32, Vec<f64>)> {
    let n = pair.n();
    (0u32..1 << n)
        .map(|mask| {
            let mut acc = 1.0;
            let path = (0..n)
                .map(|i| {
                    acc *= if mask >> i & 1 == 1 {
                        pair.stock_returns()[i]
                    } else {
                        pair.bond_returns()[i]
                    };
                    acc
                })
                .collect();
            (mask, path)
        })
        .collect()
}

#[test]
fn criterion_1_envelope_matches_enumeration() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..100 {
        let pair = random_pair(seed, 12);
        let fs = optimal_paths(&pair);
        let all = brute_force_paths(&pair);
        let max = all
            .iter()
            .map(|(_, c)| c[11])
            .fold(f64::NEG_INFINITY, f64::max);
        let min = all.iter().map(|(_, c)| c[11]).fold(f64::INFINITY, f64::min);
        if max != fs.best.terminal || min != fs.worst.terminal {
            failures.push(format!("seed {seed}: terminals differ"));
        }
        for (mask, c) in &all {
            let inside = c
                .iter()
                .zip(fs.worst.cumulative.iter().zip(&fs.best.cumulative))
                .all(|(v, (lo, hi))| lo <= v && v <= hi);
            if !inside {
                failures.push(format!("seed {seed}: path {mask} leaves the envelope"));
            }
        }
    }
    verdict(
        1,
        failures.is_empty(),
        &format!(
            "100 pairs x 4096 paths, {} mismatches {:?}",
            failures.len(),
            failures.first()
        ),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_2_median_matches_enumeration() {
    let start = Instant::now();
    let n = 12usize;
    let mut worst_margin = f64::INFINITY;
    let mut failures = Vec::new();
    for seed in 0..20 {
        let pair = random_pair(1000 + seed, n);
        let all = brute_force_paths(&pair);
        for p in [0.3f64, 0.5, 0.64] {
            let mut items: Vec<(f64, f64)> = all
                .iter()
                .map(|(mask, c)| {
                    let k = mask.count_ones() as i32;
                    (c[n - 1].ln(), p.powi(k) * (1.0 - p).powi(n as i32 - k))
                })
                .collect();
            items.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0.0;
            let median = items
                .iter()
                .find(|(_, w)| {
                    acc += w;
                    acc >= 0.5
                })
                .unwrap()
                .0;
            let a = expected_median(&pair, p).unwrap();
            let bound = n as f64 * a.jensen_gap + 0.02;
            let err = (median - n as f64 * a.mu).abs();
            worst_margin = worst_margin.min(bound - err);
            if err > bound {
                failures.push(format!(
                    "seed {seed} p {p}: |{median:.5} - {:.5}| > {bound:.5}",
                    n as f64 * a.mu
                ));
            }
        }
    }
    verdict(
        2,
        failures.is_empty(),
        &format!(
            "20 pairs x 3 p, smallest margin {worst_margin:.5} {:?}",
            failures.first()
        ),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_3_nist_reference_values() {
    let start = Instant::now();
    let bits = |s: &str| BitSequence::parse(s, "x").unwrap();

    // runs: oracle evaluates erfc(|V - 2n pi(1-pi)| / (2 sqrt(2n) pi (1-pi))) with statrs
    let eps = "1001101011";
    let n = eps.len() as f64;
    let pi = eps.matches('1').count() as f64 / n;
    let v = 1 + eps.as_bytes().windows(2).filter(|w| w[0] != w[1]).count();
    let x =
        (v as f64 - 2.0 * n * pi * (1.0 - pi)).abs() / (2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi));
    let oracle = statrs::function::erf::erfc(x);
    let got = runs_test(&bits(eps)).p_value();
    let runs_ok = (got - 0.147232).abs() <= 1e-4 && (got - oracle).abs() <= 1e-4;

    // serial: overlapping 3-bit counts with wraparound, counted by hand
    let eps = "0011011101";
    let b: Vec<u8> = eps.bytes().map(|c| c - b'0').collect();
    let brute = |m: usize| -> Vec<u64> {
        let mut counts = vec![0u64; 1 << m];
        for i in 0..b.len() {
            let v = (0..m).fold(0usize, |acc, j| acc << 1 | b[(i + j) % b.len()] as usize);
            counts[v] += 1;
        }
        counts
    };
    let st = serial_statistics(&bits(eps), 3).unwrap();
    let serial_ok =
        st.counts[0] == brute(3) && st.counts[1] == brute(2) && st.counts[2] == brute(1);

    let z = cusum_excursion(&bits("1011010111"), CusumMode::Forward);
    let cusum_ok = z == 4;

    verdict(
        3,
        runs_ok && serial_ok && cusum_ok,
        &format!(
            "runs P {got:.6} (oracle {oracle:.6}), serial counts {:?}, cusum z {z}",
            st.counts[0]
        ),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_4_calibration_biased_bits() {
    let start = Instant::now();
    let names = [
        TestName::Runs,
        TestName::Spectral,
        TestName::Serial,
        TestName::CumulativeSums,
    ];
    let mut rejected = [0usize; 4];
    let mut applicable = [0usize; 4];
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..99)
            .map(|_| (rng.random::<f64>() < 0.64) as u8)
            .collect();
        let report = run_all(&BitSequence::new(bits, "x").unwrap(), 0.01, 3).unwrap();
        for t in &report.tests {
            let i = names.iter().position(|n| *n == t.test_name).unwrap();
            if t.applicable {
                applicable[i] += 1;
                rejected[i] += !t.passed as usize;
            }
        }
    }
    let rates: Vec<String> = names
        .iter()
        .enumerate()
        .map(|(i, n)| format!("{n} {}/{}", rejected[i], applicable[i]))
        .collect();
    let ok = (0..4).all(|i| rejected[i] as f64 <= 0.03 * applicable[i] as f64);
    verdict(
        4,
        ok,
        &format!("rejections at alpha 0.01: {}", rates.join(", ")),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

fn bundled_run() -> (market_timing::monte_carlo::McSummary, f64) {
    let pair = bundled_pair();
    let cfg = McConfig {
        m_paths: 100_000,
        p: Some(0.64),
        seed: 0,
        workers: 1,
        ..McConfig::default()
    };
    let s = run_simulation(&pair, &cfg).unwrap();
    let a = expected_median(&pair, 0.64).unwrap();
    (s, a.median_terminal)
}

#[test]
fn criterion_5_distribution_shape() {
    let start = Instant::now();
    let (s, _) = bundled_run();
    let ok = s.skewness_log.abs() < 0.15 && s.skewness_return > 0.0 && s.mode_estimate < s.median;
    verdict(
        5,
        ok,
        &format!(
            "skew(log) {:.4}, skew(return) {:.4}, mode {:.4} < median {:.4}",
            s.skewness_log, s.skewness_return, s.mode_estimate, s.median
        ),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_6_analytic_median() {
    let start = Instant::now();
    let (s, analytic) = bundled_run();
    let bundled_err = (s.median - analytic).abs() / analytic;

    let n = 99;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let st: Vec<f64> = (0..n).map(|_| rng.random_range(0.99..=1.01)).collect();
    let bo: Vec<f64> = (0..n).map(|_| rng.random_range(0.99..=1.01)).collect();
    let pair = AssetPair::from_returns(&st, &bo).unwrap();
    let cfg = McConfig {
        m_paths: 100_000,
        p: Some(0.64),
        seed: 0,
        workers: 1,
        ..McConfig::default()
    };
    let low = run_simulation(&pair, &cfg).unwrap();
    let a = expected_median(&pair, 0.64).unwrap();
    let low_err = (low.median - a.median_terminal).abs() / a.median_terminal;

    verdict(
        6,
        bundled_err < 0.02 && low_err < 0.005,
        &format!("bundled rel err {bundled_err:.5} (< 0.02), low-volatility rel err {low_err:.6} (< 0.005)"),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_7_worker_count_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = data_dir();
    let run = |workers: &str| {
        let out = dir.path().join(format!("w{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_market-timing"))
            .args(["simulate", "--seed", "0", "--workers", workers, "--out"])
            .arg(&out)
            .arg("--stocks")
            .arg(data.join("stocks.csv"))
            .arg("--bonds")
            .arg(data.join("bonds.csv"))
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        std::fs::read(out.join("summary.json")).unwrap()
    };
    let (one, eight) = (run("1"), run("8"));
    verdict(
        7,
        one == eight,
        &format!(
            "summary.json {} bytes, identical: {}",
            one.len(),
            one == eight
        ),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

/// Needs a directory of real quarterly returns in `MARKET_TIMING_DATA`
/// (stocks.csv and bonds.csv, percent). Reported only; never fails.
#[test]
fn criterion_8_real_data_report() {
    let Some(dir) = std::env::var_os("MARKET_TIMING_DATA").map(PathBuf::from) else {
        println!(
            "criterion 8: SKIP set MARKET_TIMING_DATA to a directory with stocks.csv and bonds.csv"
        );
        return;
    };
    let start = Instant::now();
    let load = |name: &str| load_series(dir.join(name), ReturnMode::Percent, name);
    let pair = match (load("stocks.csv"), load("bonds.csv")) {
        (Ok(s), Ok(b)) => align(&s, &b),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    let pair = match pair {
        Ok(p) => p,
        Err(e) => {
            println!("criterion 8: SKIP cannot load data: {e}");
            return;
        }
    };
    let fs = optimal_paths(&pair);
    let seq = BitSequence::from_timing_path(&fs.f_best, "f_b").unwrap();
    let report = run_all(&seq, 0.01, 3).unwrap();
    let reference = [0.80, 0.32, 0.50, 0.01];
    let mut notes = Vec::new();
    let mut near = true;
    for (t, r) in report.tests.iter().zip(reference) {
        let p = t.p_value();
        near &= (p - r).abs() <= 0.05;
        notes.push(format!("{} {p:.3} (ref {r})", t.test_name));
    }
    let all_pass = report.tests.iter().all(|t| t.p_value() >= 0.01);
    let pb_ok = (fs.p_b - 0.64).abs() <= 0.02;
    let balanced = evaluate_path(
        &TimingPath::static_allocation(0.6, pair.n()).unwrap(),
        &pair,
    )
    .unwrap();
    let a = expected_median(&pair, fs.p_b).unwrap();
    let proxy = (a.median_terminal - balanced.terminal).abs() / balanced.terminal;
    let ok = pb_ok && near && all_pass;
    println!(
        "criterion 8: {} (non-blocking) p_b {:.4}, {}, all P >= 0.01: {all_pass}, median vs balanced {:.3} [{:.2}s]",
        if ok { "PASS" } else { "FAIL" },
        fs.p_b,
        notes.join(", "),
        proxy,
        start.elapsed().as_secs_f64()
    );
}
