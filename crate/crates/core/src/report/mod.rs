//! Command implementations behind the CLI: load inputs, run the analyses
//! and write tables, JSON and SVG figures into an output directory.

pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analytics::{
    covariance_diagnostic, expected_median, lognormal_consistency, AnalyticsError,
    CovarianceDiagnostic, LognormalConsistency, MedianAnalysis,
};
use crate::market_data::{
    common_periods, load_series, AssetPair, DataError, ReturnMode, ReturnSeries,
};
use crate::monte_carlo::{self, run_simulation, McConfig, McError, McSummary};
use crate::randomness::{
    run_all_with, BitSequence, CusumMode, RandomnessError, RandomnessReport, SuiteConfig,
};
use crate::stats::{self, Histogram};
use crate::timing::{self, compound, evaluate_path, optimal_paths, FeasibleSet};
use svg::{Axis, Marker, Plot, Series};

/// Most Monte Carlo paths drawn in `paths.svg`.
pub const MAX_PLOTTED_PATHS: usize = 2000;
pub const BALANCED_WEIGHT: f64 = 0.6;

const WORST: &str = "#2ca02c";
const BEST: &str = "#9467bd";
const MEDIAN: &str = "#ff7f0e";
const ENVELOPE: &str = "#d62728";
const OVERLAYS: [&str; 4] = ["#1f77b4", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Input(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ReportError {
    /// 1 for bad input, 2 for a failed internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Validation(_) => 2,
            _ => 1,
        }
    }
}

impl From<McError> for ReportError {
    fn from(e: McError) -> Self {
        ReportError::Input(e.to_string())
    }
}

impl From<RandomnessError> for ReportError {
    fn from(e: RandomnessError) -> Self {
        ReportError::Input(e.to_string())
    }
}

impl From<AnalyticsError> for ReportError {
    fn from(e: AnalyticsError) -> Self {
        ReportError::Input(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inputs {
    pub stocks: PathBuf,
    pub bonds: PathBuf,
    pub overlays: Vec<PathBuf>,
    pub mode: ReturnMode,
}

/// Stock/bond pair and overlays restricted to the periods they all share.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pair: AssetPair,
    pub overlays: Vec<ReturnSeries>,
}

fn series_id(path: &Path, fallback: &str) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map_or_else(|| fallback.to_string(), str::to_string)
}

pub fn load_dataset(inputs: &Inputs) -> Result<Dataset, ReportError> {
    let stocks = load_series(&inputs.stocks, inputs.mode, "stocks")?;
    let bonds = load_series(&inputs.bonds, inputs.mode, "bonds")?;
    let overlays = inputs
        .overlays
        .iter()
        .enumerate()
        .map(|(i, p)| load_series(p, inputs.mode, &series_id(p, &format!("overlay{i}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut all: Vec<&ReturnSeries> = vec![&stocks, &bonds];
    all.extend(overlays.iter());
    let common = common_periods(&all);
    if common.len() < 2 {
        return Err(DataError::InsufficientOverlap {
            common: common.len(),
        }
        .into());
    }
    let pair = AssetPair::new(stocks.restrict_to(&common)?, bonds.restrict_to(&common)?)?;
    let overlays = overlays
        .iter()
        .map(|s| s.restrict_to(&common))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset { pair, overlays })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub inputs: Inputs,
    pub periods: usize,
    pub first_period: String,
    pub last_period: String,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub m_paths: Option<usize>,
    pub bins: Option<String>,
    pub workers: Option<usize>,
    pub alpha: Option<f64>,
    pub serial_m: Option<usize>,
    pub cusum_modes: Option<Vec<CusumMode>>,
    pub output_dir: PathBuf,
    pub outputs: Vec<String>,
    pub timestamp: String,
}

/// Options for the randomness step.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomnessOptions {
    pub suite: SuiteConfig,
}

/// Options for the simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub mc: McConfig,
    pub dump_terminals: bool,
}

pub struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, ReportError> {
        fs::create_dir_all(dir).map_err(|source| ReportError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), ReportError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| ReportError::Write { path, source })?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ReportError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

fn check_envelope(fs: &FeasibleSet) -> Result<(), ReportError> {
    let bad = fs
        .best
        .cumulative
        .iter()
        .zip(&fs.worst.cumulative)
        .position(|(b, w)| b < w);
    match bad {
        Some(i) => Err(ReportError::Validation(format!(
            "rho_b < rho_w at period {i}"
        ))),
        None => Ok(()),
    }
}

fn cumulative_points(values: &[f64]) -> Vec<(f64, f64)> {
    std::iter::once((0.0, 1.0))
        .chain(values.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)))
        .collect()
}

fn envelope_series(ds: &Dataset, fs: &FeasibleSet) -> Vec<Series> {
    let mut out = vec![
        Series::new(
            "best (rho_b)",
            cumulative_points(&fs.best.cumulative),
            ENVELOPE,
        )
        .width(2.0),
        Series::new(
            "worst (rho_w)",
            cumulative_points(&fs.worst.cumulative),
            ENVELOPE,
        )
        .width(2.0),
    ];
    for (i, o) in ds.overlays.iter().enumerate() {
        out.push(
            Series::new(
                o.asset_id(),
                cumulative_points(&compound(o.returns())),
                OVERLAYS[i % 4],
            )
            .width(2.0),
        );
    }
    out
}

fn period_axis(n: usize) -> Axis {
    Axis::linear(0.0, n as f64, "period")
}

/// Envelope table and figures.
pub fn cmd_envelope(ds: &Dataset, out: &mut Output) -> Result<FeasibleSet, ReportError> {
    let pair = &ds.pair;
    let fs = optimal_paths(pair);
    check_envelope(&fs)?;
    let stocks = compound(pair.stock_returns());
    let bonds = compound(pair.bond_returns());
    let overlay_paths: Vec<Vec<f64>> = ds.overlays.iter().map(|o| compound(o.returns())).collect();

    let mut csv = String::from("period,rho_b,rho_w,stocks,bonds");
    for o in &ds.overlays {
        csv.push(',');
        csv.push_str(o.asset_id());
    }
    csv.push('\n');
    for (i, q) in pair.periods().iter().enumerate() {
        csv.push_str(&format!(
            "{q},{},{},{},{}",
            fs.best.cumulative[i], fs.worst.cumulative[i], stocks[i], bonds[i]
        ));
        for p in &overlay_paths {
            csv.push_str(&format!(",{}", p[i]));
        }
        csv.push('\n');
    }
    out.write("envelope.csv", &csv)?;

    let mut all: Vec<f64> = fs.best.cumulative.clone();
    all.extend(&fs.worst.cumulative);
    all.push(1.0);
    let mut plot = Plot::new(
        "Feasible set of timing return paths",
        period_axis(pair.n()),
        Axis::fit(&all, true, "cumulative return"),
    );
    plot.series = envelope_series(ds, &fs);
    plot.series
        .push(Series::new("stocks", cumulative_points(&stocks), "black"));
    plot.series
        .push(Series::new("bonds", cumulative_points(&bonds), "#7f7f7f"));
    out.write("envelope.svg", &svg::render(&plot, None))?;

    let bits = fs.f_best.bits().expect("binary path");
    let periods = pair.periods();
    out.write(
        "timingpath.svg",
        &svg::render_bits(
            "Hindsight-optimal timing path (black: stocks)",
            &bits,
            &periods[0].to_string(),
            &periods[periods.len() - 1].to_string(),
        ),
    )?;
    Ok(fs)
}

/// Randomness report of the hindsight-optimal path.
pub fn cmd_randomness(
    ds: &Dataset,
    opts: &RandomnessOptions,
    out: &mut Output,
) -> Result<RandomnessReport, ReportError> {
    let fs = optimal_paths(&ds.pair);
    let seq = BitSequence::from_timing_path(&fs.f_best, "f_b")?;
    let report = run_all_with(&seq, &opts.suite)?;
    out.write_json("randomness.json", &report)?;
    out.write("randomness.txt", &randomness_table(&report, fs.p_b))?;
    Ok(report)
}

pub fn randomness_table(report: &RandomnessReport, p_b: f64) -> String {
    let mut s = format!(
        "sequence: {} ({} bits, {} ones, p_b = {:.4})\nalpha: {}\n",
        report.source_label, report.n, report.ones, p_b, report.alpha
    );
    if report.short_sequence {
        s.push_str("note: sequence is shorter than the suggested minimum length\n");
    }
    s.push_str(&format!(
        "{:<16} {:>12} {:>10}  {}\n",
        "test", "statistic", "P-value", "result"
    ));
    for t in &report.tests {
        let result = if !t.applicable {
            "not applicable"
        } else if t.passed {
            "pass"
        } else {
            "fail"
        };
        s.push_str(&format!(
            "{:<16} {:>12.6} {:>10.6}  {}\n",
            t.test_name.to_string(),
            t.statistic,
            t.p_value(),
            result
        ));
    }
    s.push_str(&format!("verdict: {}\n", report.verdict));
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSummary {
    pub best_terminal: f64,
    pub worst_terminal: f64,
    pub stock_terminal: f64,
    pub bond_terminal: f64,
    pub p_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancedProxy {
    pub weight: f64,
    pub terminal: f64,
    /// `(analytic median - terminal) / terminal`.
    pub rel_diff_analytic_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlaySummary {
    pub id: String,
    pub terminal: f64,
    /// Inside `[rho_w, rho_b]` at every period.
    pub within_envelope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub monte_carlo: McSummary,
    pub median_analysis: MedianAnalysis,
    pub lognormal_consistency: LognormalConsistency,
    pub covariance: CovarianceDiagnostic,
    pub envelope: EnvelopeSummary,
    pub balanced_proxy: BalancedProxy,
    pub overlays: Vec<OverlaySummary>,
}

fn histogram_points(h: &Histogram, total: usize) -> Vec<(f64, f64)> {
    let scale = if h.width > 0.0 {
        1.0 / (total as f64 * h.width)
    } else {
        1.0
    };
    let mut pts = Vec::with_capacity(2 * h.counts.len() + 2);
    pts.push((h.lo, 0.0));
    for (i, c) in h.counts.iter().enumerate() {
        let x0 = h.lo + i as f64 * h.width;
        let d = *c as f64 * scale;
        pts.push((x0, d));
        pts.push((x0 + h.width, d));
    }
    pts.push((h.hi(), 0.0));
    pts
}

fn max_density(points: &[(f64, f64)]) -> f64 {
    points.iter().map(|p| p.1).fold(0.0, f64::max)
}

fn markers(worst: f64, median: f64, best: f64) -> Vec<Marker> {
    vec![
        Marker {
            name: "worst".into(),
            x: worst,
            stroke: WORST.into(),
        },
        Marker {
            name: "median (analytic)".into(),
            x: median,
            stroke: MEDIAN.into(),
        },
        Marker {
            name: "best".into(),
            x: best,
            stroke: BEST.into(),
        },
    ]
}

/// Monte Carlo run, analytic comparison and distribution figures.
pub fn cmd_simulate(
    ds: &Dataset,
    opts: &SimulateOptions,
    out: &mut Output,
) -> Result<SimulationReport, ReportError> {
    let pair = &ds.pair;
    let n = pair.n();
    let fs = optimal_paths(pair);
    check_envelope(&fs)?;
    let summary = run_simulation(pair, &opts.mc)?;
    if summary.envelope_violations > 0 {
        return Err(ReportError::Validation(format!(
            "{} sampled paths left the feasible envelope",
            summary.envelope_violations
        )));
    }
    if summary.terminals_complete
        && summary.median != stats::median(&summary.terminals).unwrap_or(f64::NAN)
    {
        return Err(ReportError::Validation(
            "summary median is not the sample median".into(),
        ));
    }
    let p = summary.p;
    let analysis = expected_median(pair, p)?;
    let consistency = lognormal_consistency(&summary, &analysis)?;

    let stride = opts.mc.m_paths.div_ceil(MAX_PLOTTED_PATHS);
    let plotted: Vec<timing::TimingPath> = (0..opts.mc.m_paths)
        .step_by(stride)
        .map(|k| monte_carlo::sampled_path(n, p, opts.mc.seed, k as u64))
        .collect();
    let covariance = covariance_diagnostic(&plotted, pair)?;

    let balanced = timing::static_path(BALANCED_WEIGHT, pair).expect("weight in range");
    let overlays = ds
        .overlays
        .iter()
        .map(|o| {
            let c = compound(o.returns());
            let within = c
                .iter()
                .zip(fs.worst.cumulative.iter().zip(&fs.best.cumulative))
                .all(|(v, (lo, hi))| lo <= v && v <= hi);
            OverlaySummary {
                id: o.asset_id().to_string(),
                terminal: *c.last().expect("nonempty"),
                within_envelope: within,
            }
        })
        .collect();
    let report = SimulationReport {
        envelope: EnvelopeSummary {
            best_terminal: fs.best.terminal,
            worst_terminal: fs.worst.terminal,
            stock_terminal: timing::static_path(1.0, pair).expect("valid").terminal,
            bond_terminal: timing::static_path(0.0, pair).expect("valid").terminal,
            p_b: fs.p_b,
        },
        balanced_proxy: BalancedProxy {
            weight: BALANCED_WEIGHT,
            terminal: balanced.terminal,
            rel_diff_analytic_median: (analysis.median_terminal - balanced.terminal)
                / balanced.terminal,
        },
        overlays,
        monte_carlo: summary,
        median_analysis: analysis,
        lognormal_consistency: consistency,
        covariance,
    };
    out.write_json("summary.json", &report)?;

    // paths.svg
    let mut y: Vec<f64> = fs.best.cumulative.clone();
    y.extend(&fs.worst.cumulative);
    y.push(1.0);
    let mut plot = Plot::new(
        format!(
            "{} random timing paths (p = {:.3}, {} drawn)",
            opts.mc.m_paths,
            p,
            plotted.len()
        ),
        period_axis(n),
        Axis::fit(&y, true, "cumulative return"),
    );
    for (i, f) in plotted.iter().enumerate() {
        let path = evaluate_path(f, pair).expect("lengths match");
        plot.series.push(
            Series::new(
                format!("path {}", i * stride),
                cumulative_points(&path.cumulative),
                "#999999",
            )
            .width(0.5)
            .faint(0.15),
        );
    }
    plot.series.extend(envelope_series(ds, &fs));
    out.write("paths.svg", &svg::render(&plot, None))?;

    let mc = &report.monte_carlo;
    let median_t = report.median_analysis.median_terminal;

    // pdf_log.svg
    let log_pts = histogram_points(&mc.hist_log, mc.terminals.len());
    let (lw, lb) = (fs.worst.terminal.ln(), fs.best.terminal.ln());
    let xs = [lw, lb, mc.hist_log.lo, mc.hist_log.hi()];
    let mut plot = Plot::new(
        "Distribution of log terminal return",
        Axis::fit(&xs, false, "log terminal return"),
        Axis::linear(
            0.0,
            1.1 * max_density(&log_pts).max(f64::MIN_POSITIVE),
            "density",
        ),
    );
    plot.series
        .push(Series::new("Monte Carlo", log_pts, "black"));
    let sd = mc.var_log_terminal.sqrt();
    if sd > 0.0 {
        let gauss = (0..=200)
            .map(|i| {
                let x = mc.hist_log.lo + (mc.hist_log.hi() - mc.hist_log.lo) * i as f64 / 200.0;
                let z = (x - mc.mean_log_terminal) / sd;
                (
                    x,
                    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()),
                )
            })
            .collect();
        plot.series
            .push(Series::new("normal fit", gauss, "#1f77b4").width(1.0));
    }
    plot.markers = markers(lw, median_t.ln(), lb);
    out.write("pdf_log.svg", &svg::render(&plot, None))?;

    // pdf_return.svg: body in the main panel, full range in the inset
    let ret_pts = histogram_points(&mc.hist_return, mc.terminals.len());
    let ymax = 1.1 * max_density(&ret_pts).max(f64::MIN_POSITIVE);
    let mut sorted = mc.terminals.clone();
    sorted.sort_by(f64::total_cmp);
    let body_hi = stats::quantile_sorted(&sorted, 0.995).max(median_t);
    let body_lo = fs.worst.terminal.min(mc.hist_return.lo);
    let mut main = Plot::new(
        "Distribution of terminal return",
        Axis::fit(&[body_lo, body_hi], false, "terminal return"),
        Axis::linear(0.0, ymax, "density"),
    );
    main.series
        .push(Series::new("Monte Carlo", ret_pts.clone(), "black"));
    main.markers = markers(fs.worst.terminal, median_t, fs.best.terminal);
    let mut inset = Plot::new(
        "full range",
        Axis::fit(&[body_lo, fs.best.terminal, mc.hist_return.hi()], false, ""),
        Axis::linear(0.0, ymax, ""),
    );
    inset
        .series
        .push(Series::new("Monte Carlo (full range)", ret_pts, "black").width(1.0));
    inset.markers = main.markers.clone();
    out.write("pdf_return.svg", &svg::render(&main, Some(&inset)))?;

    if opts.dump_terminals {
        if !mc.terminals_complete {
            return Err(ReportError::Input(format!(
                "terminals are only kept for up to {} paths",
                opts.mc.store_limit
            )));
        }
        let mut csv = String::from("path_index,terminal,log_terminal\n");
        for (k, (t, l)) in mc.terminals.iter().zip(&mc.log_terminals).enumerate() {
            csv.push_str(&format!("{k},{t},{l}\n"));
        }
        out.write("terminals.csv", &csv)?;
    }
    Ok(report)
}

/// Write `manifest.json` describing a run.
pub fn write_manifest(mut manifest: RunManifest, out: &mut Output) -> Result<(), ReportError> {
    manifest.outputs = out.written().to_vec();
    manifest.outputs.push("manifest.json".into());
    out.write_json("manifest.json", &manifest)
}

pub fn manifest_base(command: &str, inputs: &Inputs, ds: &Dataset, out: &Output) -> RunManifest {
    let periods = ds.pair.periods();
    RunManifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: inputs.clone(),
        periods: periods.len(),
        first_period: periods[0].to_string(),
        last_period: periods[periods.len() - 1].to_string(),
        p: None,
        seed: None,
        m_paths: None,
        bins: None,
        workers: None,
        alpha: None,
        serial_m: None,
        cusum_modes: None,
        output_dir: out.dir().to_path_buf(),
        outputs: Vec::new(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    }
}

pub fn with_randomness(mut m: RunManifest, opts: &RandomnessOptions) -> RunManifest {
    m.alpha = Some(opts.suite.alpha);
    m.serial_m = Some(opts.suite.serial_m);
    m.cusum_modes = Some(opts.suite.cusum_modes.clone());
    m
}

pub fn with_simulation(mut m: RunManifest, opts: &SimulateOptions, p: f64) -> RunManifest {
    m.p = Some(p);
    m.seed = Some(opts.mc.seed);
    m.m_paths = Some(opts.mc.m_paths);
    m.bins = Some(opts.mc.bins.to_string());
    m.workers = Some(opts.mc.workers);
    m
}
