use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use market_timing::market_data::ReturnMode;
use market_timing::monte_carlo::{resolve_p, McConfig, DEFAULT_STORE_LIMIT, DEFAULT_WORK_LIMIT};
use market_timing::randomness::{CusumMode, SuiteConfig, DEFAULT_ALPHA, DEFAULT_SERIAL_M};
use market_timing::report::{
    cmd_envelope, cmd_randomness, cmd_simulate, load_dataset, manifest_base, randomness_table,
    with_randomness, with_simulation, write_manifest, Dataset, Inputs, Output, RandomnessOptions,
    ReportError, SimulateOptions,
};
use market_timing::stats::Bins;
use market_timing::synthetic::{generate, to_csv_files, SyntheticSpec, DEFAULT_SEED};
use market_timing::timing::optimal_paths;

/// Feasible sets, randomness tests and Monte Carlo return distributions
/// for two-asset all-or-nothing market timing.
#[derive(Parser)]
#[command(name = "market-timing", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best/worst timing envelope: envelope.csv, envelope.svg, timingpath.svg
    Envelope(Common),
    /// NIST randomness tests on the hindsight-optimal timing path
    Randomness {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tests: TestArgs,
    },
    /// Monte Carlo distribution of random timing outcomes
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Run envelope, randomness and simulate into one directory
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tests: TestArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Write a seeded synthetic stocks/bonds/balanced dataset
    Synth {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Number of quarters, starting 1993Q1
        #[arg(long, default_value_t = 99)]
        periods: usize,
        /// Required count of quarters where stocks beat bonds
        #[arg(long, default_value_t = 63)]
        stock_wins: usize,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Stock returns CSV (`period,return`)
    #[arg(long)]
    stocks: PathBuf,
    /// Bond returns CSV (`period,return`)
    #[arg(long)]
    bonds: PathBuf,
    /// Extra return series to plot against the envelope (repeatable)
    #[arg(long)]
    overlay: Vec<PathBuf>,
    /// Return format in the input files: pct or mult
    #[arg(long, default_value = "pct")]
    mode: ReturnMode,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    /// Significance level
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Block length for the serial test
    #[arg(long, default_value_t = DEFAULT_SERIAL_M)]
    serial_m: usize,
    /// Run the cumulative sums test forward and backward
    #[arg(long)]
    both_modes: bool,
}

#[derive(Args)]
struct SimArgs {
    /// Number of random timing paths
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Probability of holding stocks each period [default: data p_b]
    #[arg(long)]
    p: Option<f64>,
    /// Random seed; results do not depend on --workers
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Histogram bins: a count or `auto`
    #[arg(long, default_value = "auto")]
    bins: Bins,
    /// Worker threads [default: available cores]
    #[arg(long, default_value_t = default_workers(), hide_default_value = true)]
    workers: usize,
    /// Ceiling on paths x periods
    #[arg(long, default_value_t = DEFAULT_WORK_LIMIT)]
    max_work: u64,
    /// Also write terminals.csv
    #[arg(long)]
    dump_terminals: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Common {
    fn inputs(&self) -> Inputs {
        Inputs {
            stocks: self.stocks.clone(),
            bonds: self.bonds.clone(),
            overlays: self.overlay.clone(),
            mode: self.mode,
        }
    }
}

impl TestArgs {
    fn options(&self) -> RandomnessOptions {
        let mut cusum_modes = vec![CusumMode::Forward];
        if self.both_modes {
            cusum_modes.push(CusumMode::Backward);
        }
        RandomnessOptions {
            suite: SuiteConfig {
                alpha: self.alpha,
                serial_m: self.serial_m,
                cusum_modes,
            },
        }
    }
}

impl SimArgs {
    fn options(&self) -> SimulateOptions {
        SimulateOptions {
            mc: McConfig {
                m_paths: self.paths,
                p: self.p,
                seed: self.seed,
                bins: self.bins,
                workers: self.workers,
                work_limit: self.max_work,
                store_limit: DEFAULT_STORE_LIMIT,
            },
            dump_terminals: self.dump_terminals,
        }
    }
}

fn setup(common: &Common) -> Result<(Inputs, Dataset, Output), ReportError> {
    let inputs = common.inputs();
    let ds = load_dataset(&inputs)?;
    let out = Output::create(&common.out)?;
    Ok((inputs, ds, out))
}

fn print_randomness(
    ds: &Dataset,
    opts: &RandomnessOptions,
    out: &mut Output,
) -> Result<(), ReportError> {
    let report = cmd_randomness(ds, opts, out)?;
    print!("{}", randomness_table(&report, optimal_paths(&ds.pair).p_b));
    Ok(())
}

fn print_simulation(
    ds: &Dataset,
    opts: &SimulateOptions,
    out: &mut Output,
) -> Result<f64, ReportError> {
    let r = cmd_simulate(ds, opts, out)?;
    let mc = &r.monte_carlo;
    println!(
        "simulated {} paths over {} periods at p = {:.4}",
        mc.m_paths, mc.n, mc.p
    );
    println!(
        "median terminal {:.4} (analytic {:.4}, {:+.2}%), mode {:.4}",
        mc.median,
        r.median_analysis.median_terminal,
        100.0 * r.lognormal_consistency.median_rel_error,
        mc.mode_estimate
    );
    println!(
        "worst {:.4}  best {:.4}  balanced {:.4}",
        r.envelope.worst_terminal, r.envelope.best_terminal, r.balanced_proxy.terminal
    );
    Ok(mc.p)
}

fn synth(seed: u64, periods: usize, stock_wins: usize, out: &Path) -> Result<(), ReportError> {
    let spec = SyntheticSpec {
        seed,
        periods,
        stock_wins: Some(stock_wins),
        ..SyntheticSpec::default()
    };
    let data = generate(&spec)?;
    let mut o = Output::create(out)?;
    for (name, text) in to_csv_files(&data) {
        o.write(name, &text)?;
    }
    println!(
        "wrote {} quarters to {} (seed {}, p_b = {:.4})",
        data.pair.n(),
        out.display(),
        data.seed_used,
        optimal_paths(&data.pair).p_b
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), ReportError> {
    match cli.command {
        Command::Envelope(common) => {
            let (inputs, ds, mut out) = setup(&common)?;
            let fs = cmd_envelope(&ds, &mut out)?;
            println!(
                "{} periods: best {:.4}, worst {:.4}, p_b = {:.4}",
                ds.pair.n(),
                fs.best.terminal,
                fs.worst.terminal,
                fs.p_b
            );
            write_manifest(manifest_base("envelope", &inputs, &ds, &out), &mut out)
        }
        Command::Randomness { common, tests } => {
            let (inputs, ds, mut out) = setup(&common)?;
            let opts = tests.options();
            print_randomness(&ds, &opts, &mut out)?;
            let m = with_randomness(manifest_base("randomness", &inputs, &ds, &out), &opts);
            write_manifest(m, &mut out)
        }
        Command::Simulate { common, sim } => {
            let (inputs, ds, mut out) = setup(&common)?;
            let opts = sim.options();
            let p = print_simulation(&ds, &opts, &mut out)?;
            let m = with_simulation(manifest_base("simulate", &inputs, &ds, &out), &opts, p);
            write_manifest(m, &mut out)
        }
        Command::Report { common, tests, sim } => {
            let (inputs, ds, mut out) = setup(&common)?;
            let (ropts, sopts) = (tests.options(), sim.options());
            let p = resolve_p(&ds.pair, &sopts.mc)?;
            cmd_envelope(&ds, &mut out)?;
            print_randomness(&ds, &ropts, &mut out)?;
            print_simulation(&ds, &sopts, &mut out)?;
            let m = manifest_base("report", &inputs, &ds, &out);
            let m = with_simulation(with_randomness(m, &ropts), &sopts, p);
            write_manifest(m, &mut out)
        }
        Command::Synth {
            seed,
            periods,
            stock_wins,
            out,
        } => synth(seed, periods, stock_wins, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
