//! Return series ingestion, validation and date alignment.
//!
//! Input files are UTF-8 CSV with a `period,return` header and one row per
//! quarter. Period labels may be ISO dates (`1993-03-31`) or quarter labels
//! (`1993Q1`); both are canonicalized to quarters before comparison.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("file is empty")]
    Empty,
    #[error("line 1: expected header `period,return`, found `{found}`")]
    MissingHeader { found: String },
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: multiplicative return must be > 0, got {value}")]
    NonPositive { line: u64, value: f64 },
    #[error("line {line}: duplicate period {period}")]
    Duplicate { line: u64, period: Quarter },
    #[error("line {line}: period {period} does not follow {previous}")]
    NonMonotonic {
        line: u64,
        period: Quarter,
        previous: Quarter,
    },
    #[error("series share {common} common periods, need at least 2")]
    InsufficientOverlap { common: usize },
    #[error("invalid series: {0}")]
    Invalid(String),
}

/// A calendar quarter, the canonical period label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    year: i32,
    quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Option<Self> {
        (1..=4).contains(&quarter).then_some(Self { year, quarter })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn quarter(self) -> u8 {
        self.quarter
    }

    pub fn next(self) -> Self {
        if self.quarter == 4 {
            Self {
                year: self.year + 1,
                quarter: 1,
            }
        } else {
            Self {
                year: self.year,
                quarter: self.quarter + 1,
            }
        }
    }

    /// `count` consecutive quarters starting at `self`.
    pub fn range(self, count: usize) -> Vec<Quarter> {
        std::iter::successors(Some(self), |q| Some(q.next()))
            .take(count)
            .collect()
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((year, q)) = s.split_once(['Q', 'q']) {
            let year: i32 = year
                .parse()
                .map_err(|_| format!("bad year in period `{s}`"))?;
            let q: u8 = q
                .parse()
                .map_err(|_| format!("bad quarter in period `{s}`"))?;
            return Quarter::new(year, q).ok_or_else(|| format!("quarter out of range in `{s}`"));
        }
        let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|_| format!("unrecognized period `{s}` (want YYYY-MM-DD or YYYYQn)"))?;
        Ok(Quarter {
            year: date.year(),
            quarter: ((date.month() - 1) / 3 + 1) as u8,
        })
    }
}

impl Serialize for Quarter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the numbers in an input file are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnMode {
    /// Percent change per period, `3.0` meaning +3%.
    Percent,
    /// Price relative, `1.03` meaning +3%.
    Multiplicative,
}

impl FromStr for ReturnMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pct" | "percent" => Ok(ReturnMode::Percent),
            "mult" | "multiplicative" => Ok(ReturnMode::Multiplicative),
            other => Err(format!("unknown return mode `{other}` (want pct or mult)")),
        }
    }
}

pub fn percent_to_multiplicative(pct: f64) -> f64 {
    1.0 + pct / 100.0
}

pub fn multiplicative_to_percent(r: f64) -> f64 {
    (r - 1.0) * 100.0
}

/// One asset's per-period multiplicative returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    asset_id: String,
    periods: Vec<Quarter>,
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(
        asset_id: impl Into<String>,
        periods: Vec<Quarter>,
        returns: Vec<f64>,
    ) -> Result<Self, DataError> {
        if periods.len() != returns.len() {
            return Err(DataError::Invalid(format!(
                "{} periods but {} returns",
                periods.len(),
                returns.len()
            )));
        }
        if periods.is_empty() {
            return Err(DataError::Empty);
        }
        if let Some(r) = returns.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(DataError::Invalid(format!(
                "return {r} is not a positive finite number"
            )));
        }
        if let Some(w) = periods.windows(2).find(|w| w[0] >= w[1]) {
            return Err(DataError::Invalid(format!(
                "periods not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self {
            asset_id: asset_id.into(),
            periods,
            returns,
        })
    }

    /// Series over consecutive quarters starting at `start`.
    pub fn from_returns(
        asset_id: impl Into<String>,
        start: Quarter,
        returns: Vec<f64>,
    ) -> Result<Self, DataError> {
        let periods = start.range(returns.len());
        Self::new(asset_id, periods, returns)
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn periods(&self) -> &[Quarter] {
        &self.periods
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Keep only the given periods, which must be a subset of this series'.
    pub fn restrict_to(&self, periods: &[Quarter]) -> Result<Self, DataError> {
        let mut returns = Vec::with_capacity(periods.len());
        for p in periods {
            let idx = self.periods.binary_search(p).map_err(|_| {
                DataError::Invalid(format!("period {p} not present in {}", self.asset_id))
            })?;
            returns.push(self.returns[idx]);
        }
        Self::new(self.asset_id.clone(), periods.to_vec(), returns)
    }

    /// Render as `period,return` CSV. `decimals` fixes the number of
    /// fractional digits; `None` writes the shortest round-trip form.
    pub fn to_csv(&self, mode: ReturnMode, decimals: Option<usize>) -> String {
        let mut out = String::from("period,return\n");
        for (p, r) in self.periods.iter().zip(&self.returns) {
            let v = match mode {
                ReturnMode::Percent => multiplicative_to_percent(*r),
                ReturnMode::Multiplicative => *r,
            };
            match decimals {
                Some(d) => out.push_str(&format!("{p},{v:.d$}\n")),
                None => out.push_str(&format!("{p},{v}\n")),
            }
        }
        out
    }
}

/// Read and validate a return series from a CSV file.
pub fn load_series(
    path: impl AsRef<Path>,
    mode: ReturnMode,
    asset_id: &str,
) -> Result<ReturnSeries, DataError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_series(file, mode, asset_id)
}

/// Same as [`load_series`] over any reader.
pub fn parse_series<R: Read>(
    reader: R,
    mode: ReturnMode,
    asset_id: &str,
) -> Result<ReturnSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut periods: Vec<Quarter> = Vec::new();
    let mut returns = Vec::new();
    let mut saw_header = false;

    for record in rdr.records() {
        let record = record.map_err(|source| DataError::Csv {
            line: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if !saw_header {
            let found: Vec<&str> = record.iter().collect();
            let ok = found.len() == 2
                && found[0].eq_ignore_ascii_case("period")
                && found[1].eq_ignore_ascii_case("return");
            if !ok {
                return Err(DataError::MissingHeader {
                    found: found.join(","),
                });
            }
            saw_header = true;
            continue;
        }
        if record.len() != 2 {
            return Err(DataError::Malformed {
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let period: Quarter = record[0]
            .parse()
            .map_err(|reason| DataError::Malformed { line, reason })?;
        let value: f64 = record[1].parse().map_err(|_| DataError::Malformed {
            line,
            reason: format!("`{}` is not a number", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(DataError::Malformed {
                line,
                reason: format!("`{}` is not finite", &record[1]),
            });
        }
        let r = match mode {
            ReturnMode::Percent => percent_to_multiplicative(value),
            ReturnMode::Multiplicative => value,
        };
        if r <= 0.0 {
            return Err(DataError::NonPositive { line, value: r });
        }
        if let Some(&previous) = periods.last() {
            if period == previous {
                return Err(DataError::Duplicate { line, period });
            }
            if period < previous {
                return Err(DataError::NonMonotonic {
                    line,
                    period,
                    previous,
                });
            }
        }
        periods.push(period);
        returns.push(r);
    }

    if returns.is_empty() {
        return Err(DataError::Empty);
    }
    ReturnSeries::new(asset_id, periods, returns)
}

/// Two date-aligned series: stocks and bonds over the same periods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssetPair {
    stocks: ReturnSeries,
    bonds: ReturnSeries,
}

impl AssetPair {
    /// Pair two series that already share identical periods.
    pub fn new(stocks: ReturnSeries, bonds: ReturnSeries) -> Result<Self, DataError> {
        if stocks.periods != bonds.periods {
            return Err(DataError::Invalid(
                "stock and bond periods differ; use align()".into(),
            ));
        }
        Ok(Self { stocks, bonds })
    }

    /// Pair built from raw multiplicative returns, labelled from 2000Q1.
    pub fn from_returns(stocks: &[f64], bonds: &[f64]) -> Result<Self, DataError> {
        let start = Quarter::new(2000, 1).expect("valid quarter");
        Self::new(
            ReturnSeries::from_returns("stocks", start, stocks.to_vec())?,
            ReturnSeries::from_returns("bonds", start, bonds.to_vec())?,
        )
    }

    pub fn stocks(&self) -> &ReturnSeries {
        &self.stocks
    }

    pub fn bonds(&self) -> &ReturnSeries {
        &self.bonds
    }

    pub fn stock_returns(&self) -> &[f64] {
        &self.stocks.returns
    }

    pub fn bond_returns(&self) -> &[f64] {
        &self.bonds.returns
    }

    pub fn periods(&self) -> &[Quarter] {
        &self.stocks.periods
    }

    pub fn n(&self) -> usize {
        self.stocks.len()
    }
}

/// Periods present in every series, ascending.
pub fn common_periods(series: &[&ReturnSeries]) -> Vec<Quarter> {
    let Some((first, rest)) = series.split_first() else {
        return Vec::new();
    };
    first
        .periods
        .iter()
        .copied()
        .filter(|p| rest.iter().all(|s| s.periods.binary_search(p).is_ok()))
        .collect()
}

/// Restrict both series to their common periods.
pub fn align(stocks: &ReturnSeries, bonds: &ReturnSeries) -> Result<AssetPair, DataError> {
    let common = common_periods(&[stocks, bonds]);
    if common.len() < 2 {
        return Err(DataError::InsufficientOverlap {
            common: common.len(),
        });
    }
    AssetPair::new(stocks.restrict_to(&common)?, bonds.restrict_to(&common)?)
}
