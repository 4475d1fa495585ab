//! Histograms, order statistics and streaming moments.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

/// Upper bound on automatically chosen bin counts.
pub const MAX_AUTO_BINS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("no values")]
    Empty,
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("non-finite value {0}")]
    NonFinite(f64),
}

/// Histogram bin count: fixed, or chosen by the Freedman–Diaconis rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bins {
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for Bins {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Bins::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!(
                "bins must be `auto` or a positive integer, got `{s}`"
            )),
            Ok(k) => Ok(Bins::Fixed(k)),
        }
    }
}

impl fmt::Display for Bins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bins::Auto => f.write_str("auto"),
            Bins::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for Bins {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Equal-width bins spanning `[lo, lo + width * counts.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn center(&self, i: usize) -> f64 {
        if self.width == 0.0 {
            self.lo
        } else {
            self.lo + (i as f64 + 0.5) * self.width
        }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width * self.counts.len() as f64
    }

    /// `(bin_center, count)` pairs.
    pub fn bins(&self) -> Vec<(f64, u64)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, c)| (self.center(i), *c))
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the fullest bin; the first one on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.counts.iter().enumerate() {
            if *c > self.counts[best] {
                best = i;
            }
        }
        best
    }
}

fn check(values: &[f64]) -> Result<(), StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(*v));
    }
    Ok(())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linearly interpolated quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Order-statistic median: the middle value, or the mean of the two middle
/// values for even counts.
pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    check(values)?;
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if v.len() % 2 == 1 {
        return Ok(upper);
    }
    let lower = v[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(lower + (upper - lower) / 2.0)
}

/// Freedman–Diaconis bin width `2 IQR / n^(1/3)`; zero when the IQR is.
pub fn freedman_diaconis_width(values: &[f64]) -> Result<f64, StatsError> {
    check(values)?;
    let s = sorted(values);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    Ok(2.0 * iqr / (values.len() as f64).cbrt())
}

fn auto_bin_count(values: &[f64], lo: f64, hi: f64) -> Result<usize, StatsError> {
    let width = freedman_diaconis_width(values)?;
    if width <= 0.0 || hi <= lo {
        return Ok(1);
    }
    let k = ((hi - lo) / width).ceil();
    Ok((k as usize).clamp(1, MAX_AUTO_BINS))
}

/// Equal-width histogram over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: Bins) -> Result<Histogram, StatsError> {
    check(values)?;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = match bins {
        Bins::Fixed(0) => return Err(StatsError::ZeroBins),
        Bins::Fixed(k) => k,
        Bins::Auto => auto_bin_count(values, lo, hi)?,
    };
    if hi == lo {
        // degenerate range: one zero-width bin
        return Ok(Histogram {
            lo,
            width: 0.0,
            counts: vec![values.len() as u64],
        });
    }
    let width = (hi - lo) / k as f64;
    let mut counts = vec![0u64; k];
    for v in values {
        let i = (((v - lo) / width) as usize).min(k - 1);
        counts[i] += 1;
    }
    Ok(Histogram { lo, width, counts })
}

/// Center of the fullest Freedman–Diaconis bin, with the bin width.
pub fn mode_estimate(values: &[f64]) -> Result<(f64, f64), StatsError> {
    let h = histogram(values, Bins::Auto)?;
    Ok((h.center(h.argmax()), h.width))
}

/// Running mean and central moments (Welford / Pébay updates).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased (n - 1) variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn population_variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.m2 / self.n as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Population skewness g1; zero for degenerate data.
    pub fn skewness(&self) -> f64 {
        if self.m2 == 0.0 {
            0.0
        } else {
            (self.n as f64).sqrt() * self.m3 / self.m2.powf(1.5)
        }
    }

    /// Population excess kurtosis g2; zero for degenerate data.
    pub fn excess_kurtosis(&self) -> f64 {
        if self.m2 == 0.0 {
            0.0
        } else {
            self.n as f64 * self.m4 / (self.m2 * self.m2) - 3.0
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}
