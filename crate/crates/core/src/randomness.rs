//! Four SP 800-22 randomness tests for short binary sequences: runs,
//! discrete Fourier transform (spectral), serial and cumulative sums.
//!
//! Formulas and constants follow the NIST reference implementation
//! (`assess`), including its integer-truncated summation bounds in the
//! cumulative sums P-value. Sequences shorter than the suite's suggested
//! minimum of 100 bits are still tested; the report flags them.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};

use crate::special::{erfc, igamc, normal_cdf};
use crate::timing::TimingPath;

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_SERIAL_M: usize = 3;
/// Sequences shorter than this carry a caveat in the report.
pub const SUGGESTED_MIN_LEN: usize = 100;
/// Above this length the spectral test switches from a direct DFT to an FFT.
const DIRECT_DFT_MAX: usize = 4096;
/// Pattern tables are 2^m long; keep them bounded.
const MAX_BLOCK_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RandomnessError {
    #[error("sequence has {n} bits, need at least 2")]
    TooShort { n: usize },
    #[error("sequence contains a non-binary value at position {index}")]
    NotBinary { index: usize },
    #[error("serial block length m = {m} outside [{min}, {max}] for n = {n}")]
    BlockLength {
        m: usize,
        min: usize,
        max: usize,
        n: usize,
    },
    #[error("significance level {0} outside (0, 1)")]
    Alpha(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BitSequence {
    bits: Vec<u8>,
    source_label: String,
}

impl BitSequence {
    pub fn new(bits: Vec<u8>, source_label: impl Into<String>) -> Result<Self, RandomnessError> {
        if let Some(index) = bits.iter().position(|b| *b > 1) {
            return Err(RandomnessError::NotBinary { index });
        }
        if bits.len() < 2 {
            return Err(RandomnessError::TooShort { n: bits.len() });
        }
        Ok(Self {
            bits,
            source_label: source_label.into(),
        })
    }

    /// Parse a string of `0`/`1` characters; whitespace is ignored.
    pub fn parse(text: &str, source_label: impl Into<String>) -> Result<Self, RandomnessError> {
        let bits = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .enumerate()
            .map(|(index, c)| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(RandomnessError::NotBinary { index }),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Self::new(bits, source_label)
    }

    pub fn from_timing_path(
        path: &TimingPath,
        source_label: impl Into<String>,
    ) -> Result<Self, RandomnessError> {
        let bits = path.bits().ok_or(RandomnessError::NotBinary {
            index: path
                .weights()
                .iter()
                .position(|w| *w != 0.0 && *w != 1.0)
                .unwrap_or(0),
        })?;
        Self::new(bits, source_label)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|b| **b == 1).count()
    }

    /// Bits mapped to ±1.
    fn signs(&self) -> impl DoubleEndedIterator<Item = i64> + '_ {
        self.bits.iter().map(|b| 2 * *b as i64 - 1)
    }
}

impl fmt::Display for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestName {
    Runs,
    Spectral,
    Serial,
    CumulativeSums,
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestName::Runs => "runs",
            TestName::Spectral => "spectral",
            TestName::Serial => "serial",
            TestName::CumulativeSums => "cumulative_sums",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CusumMode {
    Forward,
    Backward,
}

impl fmt::Display for CusumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CusumMode::Forward => "forward",
            CusumMode::Backward => "backward",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    #[serde(rename = "test")]
    pub test_name: TestName,
    pub statistic: f64,
    pub p_values: Vec<f64>,
    pub passed: bool,
    pub applicable: bool,
    pub detail: BTreeMap<String, Value>,
}

impl TestResult {
    fn new(
        test_name: TestName,
        statistic: f64,
        p_values: Vec<f64>,
        applicable: bool,
        detail: BTreeMap<String, Value>,
    ) -> Self {
        let p_values = p_values.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let mut result = Self {
            test_name,
            statistic,
            p_values,
            passed: false,
            applicable,
            detail,
        };
        result.judge(DEFAULT_ALPHA);
        result
    }

    /// Smallest of the P-values; the one pass/fail is decided on.
    pub fn p_value(&self) -> f64 {
        self.p_values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Recompute `passed` at significance `alpha`.
    pub fn judge(&mut self, alpha: f64) {
        self.passed = self.applicable && self.p_value() >= alpha;
    }
}

fn detail<const N: usize>(pairs: [(&str, Value); N]) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Runs test: are the oscillations between zeros and ones too fast or slow?
///
/// Not applicable when the ones-proportion `π` fails `|π - 1/2| < 2/√n`.
pub fn runs_test(s: &BitSequence) -> TestResult {
    let n = s.len() as f64;
    let pi = s.ones() as f64 / n;
    let tau = 2.0 / n.sqrt();
    let v_obs = 1 + s.bits.windows(2).filter(|w| w[0] != w[1]).count();
    let expected = 2.0 * n * pi * (1.0 - pi);
    let applicable = (pi - 0.5).abs() < tau;
    let p = if applicable {
        erfc((v_obs as f64 - expected).abs() / (2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi)))
    } else {
        0.0
    };
    TestResult::new(
        TestName::Runs,
        v_obs as f64,
        vec![p],
        applicable,
        detail([
            ("pi", json!(pi)),
            ("tau", json!(tau)),
            ("v_obs", json!(v_obs)),
            ("expected_runs", json!(expected)),
        ]),
    )
}

/// Moduli of DFT coefficients 1..=⌊n/2⌋ of the ±1 signal.
pub fn dft_moduli(s: &BitSequence) -> Vec<f64> {
    let x: Vec<f64> = s.signs().map(|v| v as f64).collect();
    let n = x.len();
    let half = n / 2;
    if n > DIRECT_DFT_MAX {
        let mut buf: Vec<rustfft::num_complex::Complex<f64>> = x
            .iter()
            .map(|v| rustfft::num_complex::Complex::new(*v, 0.0))
            .collect();
        rustfft::FftPlanner::new()
            .plan_fft_forward(n)
            .process(&mut buf);
        return buf[1..=half].iter().map(|c| c.norm()).collect();
    }
    // twiddles indexed by (j * k) mod n keep the phase exact
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|t| {
            let a = 2.0 * PI * t as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .unzip();
    (1..=half)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            let mut t = 0usize;
            for v in &x {
                re += v * cos[t];
                im -= v * sin[t];
                t += k;
                if t >= n {
                    t -= n;
                }
            }
            re.hypot(im)
        })
        .collect()
}

/// Discrete Fourier transform test: detects periodic features.
pub fn spectral_test(s: &BitSequence) -> TestResult {
    let n = s.len() as f64;
    let moduli = dft_moduli(s);
    let threshold = (n * (1.0f64 / 0.05).ln()).sqrt();
    let n0 = 0.95 * n / 2.0;
    let n1 = moduli.iter().filter(|m| **m < threshold).count();
    let d = (n1 as f64 - n0) / (n * 0.95 * 0.05 / 4.0).sqrt();
    let p = erfc(d.abs() / SQRT_2);
    TestResult::new(
        TestName::Spectral,
        d,
        vec![p],
        true,
        detail([
            ("threshold", json!(threshold)),
            ("n0", json!(n0)),
            ("n1", json!(n1)),
            ("coefficients", json!(moduli.len())),
        ]),
    )
}

/// Pattern counts and statistics behind the serial test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SerialStatistics {
    pub m: usize,
    /// Overlapping (wraparound) counts of every m-, (m-1)- and (m-2)-bit
    /// pattern, indexed by the pattern read as a big-endian integer. Empty
    /// for orders below 1.
    pub counts: [Vec<u64>; 3],
    /// ψ²_m, ψ²_{m-1}, ψ²_{m-2}
    pub psi_sq: [f64; 3],
    pub del1: f64,
    pub del2: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Overlapping m-bit pattern counts with the first m-1 bits appended.
pub fn pattern_counts(bits: &[u8], m: usize) -> Vec<u64> {
    if m == 0 {
        return Vec::new();
    }
    let n = bits.len();
    let mask = (1usize << m) - 1;
    let mut counts = vec![0u64; 1 << m];
    let mut window = 0usize;
    for &b in bits.iter().take(m - 1) {
        window = (window << 1) | b as usize;
    }
    for i in 0..n {
        let next = bits[(i + m - 1) % n] as usize;
        window = ((window << 1) | next) & mask;
        counts[window] += 1;
    }
    counts
}

fn psi_sq(counts: &[u64], m: usize, n: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let sum_sq: f64 = counts.iter().map(|c| (*c as f64).powi(2)).sum();
    (1u64 << m) as f64 / n as f64 * sum_sq - n as f64
}

/// Serial statistics for any block length `1 <= m <= min(n, 20)`, without
/// the recommended-length check applied by [`serial_test`].
pub fn serial_statistics(s: &BitSequence, m: usize) -> Result<SerialStatistics, RandomnessError> {
    let n = s.len();
    let max = n.min(MAX_BLOCK_LEN);
    if m < 1 || m > max {
        return Err(RandomnessError::BlockLength { m, min: 1, max, n });
    }
    let orders = [m, m - 1, m.saturating_sub(2)];
    let counts = orders.map(|k| pattern_counts(&s.bits, k));
    let psi = [
        psi_sq(&counts[0], orders[0], n),
        psi_sq(&counts[1], orders[1], n),
        if m >= 2 {
            psi_sq(&counts[2], orders[2], n)
        } else {
            0.0
        },
    ];
    let del1 = psi[0] - psi[1];
    let del2 = psi[0] - 2.0 * psi[1] + psi[2];
    let p1 = igamc(2f64.powi(m as i32 - 2), del1 / 2.0);
    let p2 = igamc(2f64.powi(m as i32 - 3), del2 / 2.0);
    let counts = if m >= 2 {
        counts
    } else {
        [counts[0].clone(), Vec::new(), Vec::new()]
    };
    Ok(SerialStatistics {
        m,
        counts,
        psi_sq: psi,
        del1,
        del2,
        p1,
        p2,
    })
}

/// Largest block length the serial test accepts for `n` bits:
/// `⌊log2 n⌋ - 2`.
pub fn max_serial_block(n: usize) -> usize {
    (n.max(1).ilog2() as usize).saturating_sub(2)
}

/// Serial test: are all overlapping m-bit patterns about equally common?
///
/// Requires `1 <= m <= ⌊log2 n⌋ - 2`. Passing uses the smaller P-value.
pub fn serial_test(s: &BitSequence, m: usize) -> Result<TestResult, RandomnessError> {
    let max = max_serial_block(s.len());
    if m < 1 || m > max {
        return Err(RandomnessError::BlockLength {
            m,
            min: 1,
            max,
            n: s.len(),
        });
    }
    Ok(serial_result(serial_statistics(s, m)?))
}

fn serial_result(st: SerialStatistics) -> TestResult {
    TestResult::new(
        TestName::Serial,
        st.del1,
        vec![st.p1, st.p2],
        true,
        detail([
            ("m", json!(st.m)),
            ("psi_sq_m", json!(st.psi_sq[0])),
            ("psi_sq_m1", json!(st.psi_sq[1])),
            ("psi_sq_m2", json!(st.psi_sq[2])),
            ("del1", json!(st.del1)),
            ("del2", json!(st.del2)),
            ("counts_m", json!(st.counts[0])),
        ]),
    )
}

/// Maximum absolute partial sum of the ±1 walk.
pub fn cusum_excursion(s: &BitSequence, mode: CusumMode) -> i64 {
    let walk = |it: &mut dyn Iterator<Item = i64>| {
        let mut sum = 0i64;
        let mut z = 0i64;
        for v in it {
            sum += v;
            z = z.max(sum.abs());
        }
        z
    };
    match mode {
        CusumMode::Forward => walk(&mut s.signs()),
        CusumMode::Backward => walk(&mut s.signs().rev()),
    }
}

/// P-value of a maximal excursion `z` over `n` steps.
pub fn cusum_p_value(n: usize, z: i64) -> f64 {
    let n_i = n as i64;
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    // C-style truncating integer division, as in the reference code.
    let nz = n_i / z;
    let mut sum1 = 0.0;
    for k in (-nz + 1) / 4..=(nz - 1) / 4 {
        let k = k as f64;
        sum1 += normal_cdf((4.0 * k + 1.0) * zf / sqrt_n);
        sum1 -= normal_cdf((4.0 * k - 1.0) * zf / sqrt_n);
    }
    let mut sum2 = 0.0;
    for k in (-nz - 3) / 4..=(nz - 1) / 4 {
        let k = k as f64;
        sum2 += normal_cdf((4.0 * k + 3.0) * zf / sqrt_n);
        sum2 -= normal_cdf((4.0 * k + 1.0) * zf / sqrt_n);
    }
    1.0 - sum1 + sum2
}

/// Cumulative sums test: does the random walk stray too far from zero?
pub fn cusum_test(s: &BitSequence, mode: CusumMode) -> TestResult {
    let z = cusum_excursion(s, mode);
    let p = cusum_p_value(s.len(), z);
    TestResult::new(
        TestName::CumulativeSums,
        z as f64,
        vec![p],
        true,
        detail([("z", json!(z)), ("mode", json!(mode.to_string()))]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub alpha: f64,
    pub serial_m: usize,
    pub cusum_modes: Vec<CusumMode>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            serial_m: DEFAULT_SERIAL_M,
            cusum_modes: vec![CusumMode::Forward],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomnessReport {
    pub source_label: String,
    pub n: usize,
    pub ones: usize,
    pub alpha: f64,
    pub serial_m: usize,
    /// Shorter than the suite's suggested minimum length.
    pub short_sequence: bool,
    pub tests: Vec<TestResult>,
    /// All applicable tests passed at `alpha`.
    pub random: bool,
    pub verdict: String,
}

pub fn run_all(s: &BitSequence, alpha: f64, m: usize) -> Result<RandomnessReport, RandomnessError> {
    run_all_with(
        s,
        &SuiteConfig {
            alpha,
            serial_m: m,
            ..SuiteConfig::default()
        },
    )
}

pub fn run_all_with(
    s: &BitSequence,
    cfg: &SuiteConfig,
) -> Result<RandomnessReport, RandomnessError> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(RandomnessError::Alpha(cfg.alpha));
    }
    let mut tests = vec![
        runs_test(s),
        spectral_test(s),
        serial_test(s, cfg.serial_m)?,
    ];
    tests.extend(cfg.cusum_modes.iter().map(|mode| cusum_test(s, *mode)));
    for t in &mut tests {
        t.judge(cfg.alpha);
    }
    let random = tests.iter().filter(|t| t.applicable).all(|t| t.passed);
    let confidence = (1.0 - cfg.alpha) * 100.0;
    let verdict = if random {
        format!("random at {confidence}% confidence")
    } else {
        format!("not random at {confidence}% confidence")
    };
    Ok(RandomnessReport {
        source_label: s.source_label.clone(),
        n: s.len(),
        ones: s.ones(),
        alpha: cfg.alpha,
        serial_m: cfg.serial_m,
        short_sequence: s.len() < SUGGESTED_MIN_LEN,
        tests,
        random,
        verdict,
    })
}
