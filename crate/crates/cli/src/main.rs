//! Command-line front end for the compressive sensing pipeline.
//!
//! One subcommand per pipeline stage: `ingest` windows a recording,
//! `train` fits a dictionary and sensing matrix, `compress` and
//! `reconstruct` move windows through the trained pair, `evaluate` scores a
//! bundle on held-out windows, and `sweep` runs the full benchmark grid.
//!
//! Every flag can also be supplied by a `--config` file of `key = value`
//! lines (see [`config`]); explicit flags win. Exit code 0 means success,
//! 1 a pipeline failure (reported as `error: <stage>: <detail>` on standard
//! error), and 2 a usage error. All file outputs are written atomically, so
//! an interrupted or failed run never leaves a partial artifact.

mod config;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use ddcs_core::harness::{self, MethodCombo};
use ddcs_core::ingest::{self, PreprocessConfig, SignalFormat};
use ddcs_core::recovery::{self, LambdaRule};
use ddcs_core::smt::SmtMode;
use ddcs_core::store;
use ddcs_core::{Error, ExperimentConfig, OdlConfig, RecoveryConfig, Result, SmtConfig};

use config::Resolver;

/// Comma-separated compression ratios, e.g. `2,4,6,8,10`.
#[derive(Clone, Debug)]
struct CrList(Vec<f64>);

impl FromStr for CrList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("invalid compression ratio {t:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(CrList)
    }
}

/// Comma-separated method names, e.g. `smt_odl,gaussian_dctdwt`.
#[derive(Clone, Debug)]
struct MethodList(Vec<MethodCombo>);

impl FromStr for MethodList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|t| t.trim().parse::<MethodCombo>())
            .collect::<Result<Vec<_>>>()
            .map(MethodList)
    }
}

fn parse_format(s: &str) -> std::result::Result<SignalFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<SmtMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_cr_list(s: &str) -> std::result::Result<CrList, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_methods(s: &str) -> std::result::Result<MethodList, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Parser)]
#[command(
    name = "ddcs",
    version,
    about = "Compressive sensing with a co-trained dictionary and sensing matrix",
    term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a recording, filter it, and write fixed-length windows
    Ingest(IngestArgs),
    /// Learn a dictionary and sensing matrix from a window file
    Train(TrainArgs),
    /// Project windows to compressed measurements with a trained bundle
    Compress(CompressArgs),
    /// Decode compressed measurements back into windows
    Reconstruct(ReconstructArgs),
    /// Score a trained bundle on a window file
    Evaluate(EvaluateArgs),
    /// Benchmark method combinations across compression ratios
    Sweep(SweepArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input recording (required; flag or config)
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Input encoding: csv or raw-i16le [default: csv]
    #[arg(long, value_name = "FORMAT", value_parser = parse_format)]
    format: Option<SignalFormat>,
    /// Sampling rate in Hz [default: 360]
    #[arg(long, value_name = "HZ")]
    fs: Option<f64>,
    /// Window length in samples [default: 128]
    #[arg(long, value_name = "N")]
    window: Option<usize>,
    /// Hop between consecutive windows in samples [default: the window length]
    #[arg(long, value_name = "N")]
    stride: Option<usize>,
    /// Short median window for baseline removal, seconds [default: 0.2]
    #[arg(long, value_name = "S")]
    baseline_short: Option<f64>,
    /// Long median window for baseline removal, seconds [default: 0.6]
    #[arg(long, value_name = "S")]
    baseline_long: Option<f64>,
    /// Lowpass cutoff in Hz [default: 40]
    #[arg(long, value_name = "HZ")]
    cutoff: Option<f64>,
    /// Lowpass FIR order, even [default: 64]
    #[arg(long, value_name = "N")]
    fir_order: Option<usize>,
    /// Output window file (required; flag or config)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Key-value file supplying any flag not given explicitly
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Window file from `ingest` (required; flag or config)
    #[arg(long, value_name = "PATH")]
    windows: Option<PathBuf>,
    /// Training windows taken from the front of the file [default: 3000]
    #[arg(long, value_name = "N")]
    train_count: Option<usize>,
    /// Held-out windows reserved right after the training block [default: 600]
    #[arg(long, value_name = "N")]
    test_count: Option<usize>,
    /// Dictionary size [default: twice the window length]
    #[arg(long, value_name = "K")]
    atoms: Option<usize>,
    /// Sparse-coding penalty [default: 1.2/sqrt(window length)]
    #[arg(long, value_name = "F")]
    lambda: Option<f64>,
    /// Dictionary-learning passes over the training windows [default: 5]
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Windows coded between dictionary updates [default: 1]
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    /// Compression ratio the sensing matrix is trained for [default: 10]
    #[arg(long, value_name = "F")]
    cr: Option<f64>,
    /// Sensing-matrix solver: factored or paper [default: factored]
    #[arg(long, value_name = "MODE", value_parser = parse_mode)]
    mode: Option<SmtMode>,
    /// Rank-penalty weight of the paper-mode objective [default: 0]
    #[arg(long, value_name = "F")]
    beta: Option<f64>,
    /// Sensing-matrix solver iteration cap [default: 2000]
    #[arg(long, value_name = "N")]
    smt_iter: Option<usize>,
    /// RNG seed for the whole pipeline [default: 42]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output bundle file (required; flag or config)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Key-value file supplying any flag not given explicitly
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompressArgs {
    /// Trained bundle from `train` (required; flag or config)
    #[arg(long, value_name = "PATH")]
    bundle: Option<PathBuf>,
    /// Window file to compress (required; flag or config)
    #[arg(long, value_name = "PATH")]
    windows: Option<PathBuf>,
    /// Output measurement file (required; flag or config)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Key-value file supplying any flag not given explicitly
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Trained bundle from `train` (required; flag or config)
    #[arg(long, value_name = "PATH")]
    bundle: Option<PathBuf>,
    /// Measurement file from `compress` (required; flag or config)
    #[arg(long, value_name = "PATH")]
    measurements: Option<PathBuf>,
    /// Fixed decoding penalty [default: scaled automatically per measurement]
    #[arg(long, value_name = "F")]
    lambda: Option<f64>,
    /// Decoder iteration cap [default: 1000]
    #[arg(long, value_name = "N")]
    max_iter: Option<usize>,
    /// Output window file (required; flag or config)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Key-value file supplying any flag not given explicitly
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained bundle from `train` (required; flag or config)
    #[arg(long, value_name = "PATH")]
    bundle: Option<PathBuf>,
    /// Window file to score against (required; flag or config)
    #[arg(long, value_name = "PATH")]
    windows: Option<PathBuf>,
    /// Windows to skip from the front of the file [default: 0]
    #[arg(long, value_name = "N")]
    skip: Option<usize>,
    /// Windows to score after skipping; 0 means all remaining [default: 0]
    #[arg(long, value_name = "N")]
    count: Option<usize>,
    /// Fixed decoding penalty [default: scaled automatically per measurement]
    #[arg(long, value_name = "F")]
    lambda: Option<f64>,
    /// Output metrics CSV (required; flag or config)
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Key-value file supplying any flag not given explicitly
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Window file from `ingest` (required; flag or config)
    #[arg(long, value_name = "PATH")]
    windows: Option<PathBuf>,
    /// Training windows taken from the front of the file [default: 3000]
    #[arg(long, value_name = "N")]
    train_count: Option<usize>,
    /// Held-out windows scored right after the training block [default: 600]
    #[arg(long, value_name = "N")]
    test_count: Option<usize>,
    /// Compression ratios to sweep, comma separated [default: 2,4,6,8,10]
    #[arg(long, value_name = "LIST", value_parser = parse_cr_list)]
    cr_list: Option<CrList>,
    /// Methods to run, comma separated
    /// [default: smt_odl,gaussian_odl,smt_dctdwt,gaussian_dctdwt]
    #[arg(long, value_name = "LIST", value_parser = parse_methods)]
    methods: Option<MethodList>,
    /// Dictionary size [default: twice the window length]
    #[arg(long, value_name = "K")]
    atoms: Option<usize>,
    /// Sparse-coding penalty [default: 1.2/sqrt(window length)]
    #[arg(long, value_name = "F")]
    lambda: Option<f64>,
    /// Dictionary-learning passes over the training windows [default: 5]
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Windows coded between dictionary updates [default: 1]
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    /// Sensing-matrix solver: factored or paper [default: factored]
    #[arg(long, value_name = "MODE", value_parser = parse_mode)]
    mode: Option<SmtMode>,
    /// Rank-penalty weight of the paper-mode objective [default: 0]
    #[arg(long, value_name = "F")]
    beta: Option<f64>,
    /// Sensing-matrix solver iteration cap [default: 2000]
    #[arg(long, value_name = "N")]
    smt_iter: Option<usize>,
    /// RNG seed for the whole pipeline [default: 42]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Record per-cell wall-clock time; off keeps reruns byte-identical
    /// [default: false]
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    measure_time: Option<bool>,
    /// Output report CSV (required; flag or config)
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Key-value file supplying any flag not given explicitly
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let (stage, outcome) = match cli.command {
        Command::Ingest(args) => ("ingest", run_ingest(args)),
        Command::Train(args) => ("train", run_train(args)),
        Command::Compress(args) => ("compress", run_compress(args)),
        Command::Reconstruct(args) => ("reconstruct", run_reconstruct(args)),
        Command::Evaluate(args) => ("evaluate", run_evaluate(args)),
        Command::Sweep(args) => ("sweep", run_sweep(args)),
    };
    if let Err(err) = outcome {
        eprintln!("error: {}", Error::in_stage(stage, err));
        std::process::exit(1);
    }
}

fn run_ingest(args: IngestArgs) -> Result<()> {
    let mut cfg = Resolver::load(args.config.as_deref())?;
    let input: PathBuf = cfg.require(args.input, "input")?;
    let format = cfg.value(args.format, "format")?.unwrap_or(SignalFormat::Csv);
    let fs_hz = cfg.value(args.fs, "fs")?.unwrap_or(360.0);
    let window = cfg.value(args.window, "window")?.unwrap_or(128);
    let stride = cfg.value(args.stride, "stride")?.unwrap_or(window);
    let baseline_short = cfg.value(args.baseline_short, "baseline_short")?.unwrap_or(0.2);
    let baseline_long = cfg.value(args.baseline_long, "baseline_long")?.unwrap_or(0.6);
    let cutoff = cfg.value(args.cutoff, "cutoff")?.unwrap_or(40.0);
    let fir_order = cfg.value(args.fir_order, "fir_order")?.unwrap_or(64);
    let out: PathBuf = cfg.require(args.out, "out")?;
    cfg.finish()?;

    let pre = PreprocessConfig {
        baseline_short_s: baseline_short,
        baseline_long_s: baseline_long,
        lowpass_cutoff_hz: cutoff,
        fir_order,
        window_length: window,
        stride,
        ..PreprocessConfig::default()
    };
    let recording = ingest::read_signal::<f64>(&input, format, fs_hz)?;
    let windows = ingest::preprocess(&recording, &pre)?;
    store::save_windows(&windows, &out)?;
    println!("wrote {} windows of length {window} to {}", windows.len(), out.display());
    Ok(())
}

/// Shared resolution for the dictionary-learning and sensing-matrix knobs
/// of `train` and `sweep`. `target_m` is a placeholder the pipeline
/// overwrites from the compression ratio.
#[allow(clippy::too_many_arguments)]
fn training_configs(
    n: usize,
    atoms: Option<usize>,
    lambda: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    mode: Option<SmtMode>,
    beta: Option<f64>,
    smt_iter: Option<usize>,
    seed: u64,
) -> (OdlConfig, SmtConfig) {
    let mut odl = OdlConfig::for_window_length(n);
    if let Some(k) = atoms {
        odl.atom_count = k;
    }
    if let Some(l) = lambda {
        odl.lambda = l;
    }
    if let Some(e) = epochs {
        odl.epochs = e;
    }
    if let Some(b) = batch_size {
        odl.batch_size = b;
    }
    odl.seed = seed;

    let mut smt = SmtConfig::for_target(1);
    if let Some(m) = mode {
        smt.mode = m;
    }
    if let Some(b) = beta {
        smt.beta = b;
    }
    if let Some(i) = smt_iter {
        smt.max_iter = i;
    }
    smt.seed = seed;
    (odl, smt)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut cfg = Resolver::load(args.config.as_deref())?;
    let windows_path: PathBuf = cfg.require(args.windows, "windows")?;
    let train_count = cfg.value(args.train_count, "train_count")?.unwrap_or(3000);
    let test_count = cfg.value(args.test_count, "test_count")?.unwrap_or(600);
    let atoms = cfg.value(args.atoms, "atoms")?;
    let lambda = cfg.value(args.lambda, "lambda")?;
    let epochs = cfg.value(args.epochs, "epochs")?;
    let batch_size = cfg.value(args.batch_size, "batch_size")?;
    let cr = cfg.value(args.cr, "cr")?.unwrap_or(10.0);
    let mode = cfg.value(args.mode, "mode")?;
    let beta = cfg.value(args.beta, "beta")?;
    let smt_iter = cfg.value(args.smt_iter, "smt_iter")?;
    let seed = cfg.value(args.seed, "seed")?.unwrap_or(42);
    let out: PathBuf = cfg.require(args.out, "out")?;
    cfg.finish()?;

    let windows = store::load_windows(&windows_path)?;
    let split = PreprocessConfig { train_count, test_count, ..PreprocessConfig::default() };
    let (train, _held_out) = ingest::split_train_test(&windows, &split)?;
    let n = train[0].len();
    let (odl, smt) = training_configs(n, atoms, lambda, epochs, batch_size, mode, beta, smt_iter, seed);
    let bundle = harness::run_ctsmd(&train, &odl, &smt, cr)?;
    store::save_bundle(&bundle, &out)?;
    println!(
        "trained bundle n={} m={} k={} delta={:.6e} seed={seed} to {}",
        bundle.n(),
        bundle.m(),
        bundle.k(),
        bundle.achieved_delta,
        out.display()
    );
    Ok(())
}

fn run_compress(args: CompressArgs) -> Result<()> {
    let mut cfg = Resolver::load(args.config.as_deref())?;
    let bundle_path: PathBuf = cfg.require(args.bundle, "bundle")?;
    let windows_path: PathBuf = cfg.require(args.windows, "windows")?;
    let out: PathBuf = cfg.require(args.out, "out")?;
    cfg.finish()?;

    let bundle = store::load_bundle(&bundle_path)?;
    let windows = store::load_windows(&windows_path)?;
    let measurements = windows
        .iter()
        .map(|w| recovery::encode(&bundle.phi, w))
        .collect::<Result<Vec<_>>>()?;
    store::save_measurements(&measurements, &out)?;
    println!(
        "compressed {} windows of length {} to {} measurements each, to {}",
        windows.len(),
        bundle.n(),
        bundle.m(),
        out.display()
    );
    Ok(())
}

fn run_reconstruct(args: ReconstructArgs) -> Result<()> {
    let mut cfg = Resolver::load(args.config.as_deref())?;
    let bundle_path: PathBuf = cfg.require(args.bundle, "bundle")?;
    let measurements_path: PathBuf = cfg.require(args.measurements, "measurements")?;
    let lambda = cfg.value(args.lambda, "lambda")?;
    let max_iter = cfg.value(args.max_iter, "max_iter")?;
    let out: PathBuf = cfg.require(args.out, "out")?;
    cfg.finish()?;

    let bundle = store::load_bundle(&bundle_path)?;
    let measurements = store::load_measurements(&measurements_path)?;
    let mut rec_cfg = RecoveryConfig::default();
    if let Some(l) = lambda {
        rec_cfg.lambda_rule = LambdaRule::Fixed(l);
    }
    if let Some(i) = max_iter {
        rec_cfg.max_iter = i;
    }
    let recoveries = recovery::recover_batch(&measurements, &bundle.phi, &bundle.psi, &rec_cfg)?;
    let windows = recoveries
        .iter()
        .map(|r| recovery::reconstruct(&bundle.psi, &r.code))
        .collect::<Result<Vec<_>>>()?;
    store::save_windows(&windows, &out)?;
    println!("reconstructed {} windows of length {} to {}", windows.len(), bundle.n(), out.display());
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let mut cfg = Resolver::load(args.config.as_deref())?;
    let bundle_path: PathBuf = cfg.require(args.bundle, "bundle")?;
    let windows_path: PathBuf = cfg.require(args.windows, "windows")?;
    let skip = cfg.value(args.skip, "skip")?.unwrap_or(0);
    let count = cfg.value(args.count, "count")?.unwrap_or(0);
    let lambda = cfg.value(args.lambda, "lambda")?;
    let report: PathBuf = cfg.require(args.report, "report")?;
    cfg.finish()?;

    let bundle = store::load_bundle(&bundle_path)?;
    let windows = store::load_windows(&windows_path)?;
    if skip >= windows.len() {
        return Err(Error::InvalidInput(format!(
            "skip {skip} leaves no windows ({} in file)",
            windows.len()
        )));
    }
    let rest = &windows[skip..];
    let slice = if count == 0 {
        rest
    } else if count <= rest.len() {
        &rest[..count]
    } else {
        return Err(Error::InvalidInput(format!(
            "insufficient windows ({} after skip, {count} requested)",
            rest.len()
        )));
    };
    let mut rec_cfg = RecoveryConfig::default();
    if let Some(l) = lambda {
        rec_cfg.lambda_rule = LambdaRule::Fixed(l);
    }
    let summary = harness::evaluate(&bundle, slice, &rec_cfg)?;
    let csv = format!(
        "windows,empirical_delta,mean_rsnr_db,median_rsnr_db\n{},{:.11e},{:.11e},{:.11e}\n",
        slice.len(),
        summary.empirical_delta,
        summary.mean_rsnr_db,
        summary.median_rsnr_db
    );
    store::write_atomic(&report, csv.as_bytes())?;
    println!(
        "evaluated {} windows: delta {:.3e}, mean rsnr {:.2} dB, median {:.2} dB, report {}",
        slice.len(),
        summary.empirical_delta,
        summary.mean_rsnr_db,
        summary.median_rsnr_db,
        report.display()
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = Resolver::load(args.config.as_deref())?;
    let windows_path: PathBuf = cfg.require(args.windows, "windows")?;
    let train_count = cfg.value(args.train_count, "train_count")?.unwrap_or(3000);
    let test_count = cfg.value(args.test_count, "test_count")?.unwrap_or(600);
    let cr_list = cfg.value(args.cr_list, "cr_list")?;
    let methods = cfg.value(args.methods, "methods")?;
    let atoms = cfg.value(args.atoms, "atoms")?;
    let lambda = cfg.value(args.lambda, "lambda")?;
    let epochs = cfg.value(args.epochs, "epochs")?;
    let batch_size = cfg.value(args.batch_size, "batch_size")?;
    let mode = cfg.value(args.mode, "mode")?;
    let beta = cfg.value(args.beta, "beta")?;
    let smt_iter = cfg.value(args.smt_iter, "smt_iter")?;
    let seed = cfg.value(args.seed, "seed")?.unwrap_or(42);
    let measure_time = cfg.value(args.measure_time, "measure_time")?.unwrap_or(false);
    let report_path: PathBuf = cfg.require(args.report, "report")?;
    cfg.finish()?;

    let windows = store::load_windows(&windows_path)?;
    let split = PreprocessConfig { train_count, test_count, ..PreprocessConfig::default() };
    let (train, test) = ingest::split_train_test(&windows, &split)?;
    let n = train[0].len();
    let (odl, smt) = training_configs(n, atoms, lambda, epochs, batch_size, mode, beta, smt_iter, seed);
    let mut experiment = ExperimentConfig::for_window_length(n);
    experiment.odl = odl;
    experiment.smt = smt;
    if let Some(list) = cr_list {
        experiment.cr_list = list.0;
    }
    if let Some(list) = methods {
        experiment.methods = list.0;
    }
    experiment.measure_time = measure_time;

    let report = harness::sweep(&train, &test, &experiment)?;
    report.write_csv(&report_path)?;
    println!(
        "swept {} methods at {} ratios: {} rows, {} comments, report {}",
        experiment.methods.len(),
        experiment.cr_list.len(),
        report.rows.len(),
        report.comments.len(),
        report_path.display()
    );
    Ok(())
}
