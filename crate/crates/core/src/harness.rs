//! Benchmark harness: trains the co-designed pipeline and its baselines
//! over a list of compression ratios, evaluates reconstruction quality on
//! held-out windows, and renders a deterministic CSV report.

use std::path::Path;
use std::time::Instant;

use crate::baselines::{dct_dwt_dictionary, gaussian_phi};
use crate::error::{Error, Result};
use crate::model::{Dictionary, SignalWindow, SparseCode, TrainedBundle};
use crate::odl::{batch_sparse_code, odl_train, OdlConfig};
use crate::recovery::{default_code_lambda, encode, reconstruct, recover_batch, RecoveryConfig};
use crate::scalar::Real;
use crate::smt::{
    derive_phi, empirical_delta, factor_gram, normalize_codes, solve_gram_factored,
    solve_gram_paper, RowSpaceProjector, SmtConfig, SmtMode,
};
use crate::store::write_atomic;

/// One dictionary-and-sensing pairing under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodCombo {
    /// Trained sensing matrix on the learned dictionary.
    SmtOdl,
    /// Gaussian sensing on the learned dictionary.
    GaussianOdl,
    /// Trained sensing matrix on the fixed DCT+DWT dictionary.
    SmtDctdwt,
    /// Gaussian sensing on the fixed DCT+DWT dictionary.
    GaussianDctdwt,
}

impl MethodCombo {
    pub const ALL: [MethodCombo; 4] = [
        MethodCombo::SmtOdl,
        MethodCombo::GaussianOdl,
        MethodCombo::SmtDctdwt,
        MethodCombo::GaussianDctdwt,
    ];

    pub fn uses_trained_sensing(self) -> bool {
        matches!(self, MethodCombo::SmtOdl | MethodCombo::SmtDctdwt)
    }

    pub fn uses_learned_dictionary(self) -> bool {
        matches!(self, MethodCombo::SmtOdl | MethodCombo::GaussianOdl)
    }
}

impl std::fmt::Display for MethodCombo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MethodCombo::SmtOdl => "smt_odl",
            MethodCombo::GaussianOdl => "gaussian_odl",
            MethodCombo::SmtDctdwt => "smt_dctdwt",
            MethodCombo::GaussianDctdwt => "gaussian_dctdwt",
        })
    }
}

impl std::str::FromStr for MethodCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smt_odl" => Ok(MethodCombo::SmtOdl),
            "gaussian_odl" => Ok(MethodCombo::GaussianOdl),
            "smt_dctdwt" => Ok(MethodCombo::SmtDctdwt),
            "gaussian_dctdwt" => Ok(MethodCombo::GaussianDctdwt),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?} (expected smt_odl, gaussian_odl, smt_dctdwt, or gaussian_dctdwt)"
            ))),
        }
    }
}

/// One cell of the sweep, in reporting precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: MethodCombo,
    pub cr: f64,
    pub m: usize,
    /// Isometry defect on held-out codes.
    pub empirical_delta: f64,
    pub mean_rsnr_db: f64,
    pub median_rsnr_db: f64,
    /// Zero when timing is disabled, keeping reports reproducible.
    pub wall_time_s: f64,
    /// The dictionary-training seed, identifying the run.
    pub seed: u64,
}

/// Full sweep settings. `smt.target_m` is overwritten per cell from the
/// compression ratio, and both dictionaries are coded with `odl.lambda`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig<T: Real> {
    pub odl: OdlConfig<T>,
    pub smt: SmtConfig<T>,
    pub recovery: RecoveryConfig<T>,
    pub cr_list: Vec<f64>,
    pub methods: Vec<MethodCombo>,
    /// Record wall-clock time per cell. Off by default so that repeated
    /// runs of one configuration emit identical bytes.
    pub measure_time: bool,
}

impl<T: Real> ExperimentConfig<T> {
    pub fn for_window_length(n: usize) -> Self {
        ExperimentConfig {
            odl: OdlConfig::for_window_length(n),
            smt: SmtConfig::for_target(1),
            recovery: RecoveryConfig::default(),
            cr_list: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            methods: MethodCombo::ALL.to_vec(),
            measure_time: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods selected".into()));
        }
        if self.cr_list.is_empty() {
            return Err(Error::InvalidInput("no compression ratios selected".into()));
        }
        Ok(())
    }
}

impl<T: Real> Default for ExperimentConfig<T> {
    fn default() -> Self {
        Self::for_window_length(128)
    }
}

/// Sweep output: one row per completed cell plus diagnostic comments
/// (failed cells, non-monotone quality trends).
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<MetricsRow>,
    pub comments: Vec<String>,
}

pub const REPORT_HEADER: &str =
    "method,cr,m,empirical_delta,mean_rsnr_db,median_rsnr_db,wall_time_s,seed";

impl SweepReport {
    /// Renders the report: `#`-prefixed comment lines, the header, then one
    /// row per cell with 12 significant digits on every metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for comment in &self.comments {
            out.push_str("# ");
            out.push_str(comment);
            out.push('\n');
        }
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.11e},{:.11e},{:.11e},{:.11e},{}\n",
                row.method,
                row.cr,
                row.m,
                row.empirical_delta,
                row.mean_rsnr_db,
                row.median_rsnr_db,
                row.wall_time_s,
                row.seed
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Measurements kept at a compression ratio: `round(n / cr)`, at least 1.
/// The ratio must leave actual compression (`m < n`).
pub fn measurement_count(n: usize, cr: f64) -> Result<usize> {
    if !(cr.is_finite() && cr > 0.0) {
        return Err(Error::InvalidInput("compression ratio must be positive".into()));
    }
    let m = ((n as f64 / cr).round() as usize).max(1);
    if m >= n {
        return Err(Error::InvalidInput(format!(
            "compression ratio {cr} keeps {m} of {n} samples (no compression)"
        )));
    }
    Ok(m)
}

/// The ratio a measurement count realizes.
pub fn compression_ratio(n: usize, m: usize) -> f64 {
    n as f64 / m as f64
}

/// Reconstruction signal-to-noise ratio in dB, clamped to [-300, 300] so a
/// numerically exact reconstruction stays finite.
pub fn rsnr_db<T: Real>(reference: &SignalWindow<T>, estimate: &SignalWindow<T>) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch (reference has length {}, estimate {})",
            reference.len(),
            estimate.len()
        )));
    }
    let ref_norm = reference.samples().norm().to_f64_lossy();
    if ref_norm == 0.0 {
        return Err(Error::InvalidInput("reference window has zero energy".into()));
    }
    let err_norm = (reference.samples() - estimate.samples()).norm().to_f64_lossy();
    if err_norm == 0.0 {
        return Ok(300.0);
    }
    Ok((20.0 * (ref_norm / err_norm).log10()).clamp(-300.0, 300.0))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Held-out quality of one trained bundle.
#[derive(Debug, Clone)]
pub struct EvaluationSummary {
    /// Isometry defect on the normalized held-out codes.
    pub empirical_delta: f64,
    pub mean_rsnr_db: f64,
    pub median_rsnr_db: f64,
    /// Per-window values, in input order.
    pub rsnr_db: Vec<f64>,
}

/// Codes a window set against one dictionary and unit-normalizes the
/// result, dropping windows that coded to zero.
fn normalized_codes_for<T: Real>(
    windows: &[SignalWindow<T>],
    psi: &Dictionary<T>,
    lambda: T,
) -> Result<Vec<SparseCode<T>>> {
    normalize_codes(&batch_sparse_code(windows, psi, lambda)?)
}

/// Evaluates a bundle against held-out windows when their normalized codes
/// are already available.
pub fn evaluate_with_codes<T: Real>(
    bundle: &TrainedBundle<T>,
    test: &[SignalWindow<T>],
    test_codes: &[SparseCode<T>],
    cfg: &RecoveryConfig<T>,
) -> Result<EvaluationSummary> {
    if test.is_empty() {
        return Err(Error::InvalidInput("no evaluation windows".into()));
    }
    let measurements = test
        .iter()
        .map(|w| encode(&bundle.phi, w))
        .collect::<Result<Vec<_>>>()?;
    let recoveries = recover_batch(&measurements, &bundle.phi, &bundle.psi, cfg)?;
    let mut rsnrs = Vec::with_capacity(test.len());
    for (w, rec) in test.iter().zip(&recoveries) {
        let estimate = reconstruct(&bundle.psi, &rec.code)?;
        rsnrs.push(rsnr_db(w, &estimate)?);
    }
    let delta = empirical_delta(&bundle.phi, &bundle.psi, test_codes)?;
    let mut sorted = rsnrs.clone();
    Ok(EvaluationSummary {
        empirical_delta: delta.to_f64_lossy(),
        mean_rsnr_db: mean(&rsnrs),
        median_rsnr_db: median(&mut sorted),
        rsnr_db: rsnrs,
    })
}

/// Evaluates a bundle against held-out windows: encode, decode,
/// reconstruct, and score each window, plus the isometry defect on the
/// windows' own normalized codes.
pub fn evaluate<T: Real>(
    bundle: &TrainedBundle<T>,
    test: &[SignalWindow<T>],
    cfg: &RecoveryConfig<T>,
) -> Result<EvaluationSummary> {
    let lambda = cfg.code_lambda.unwrap_or_else(|| default_code_lambda(bundle.n()));
    let codes = normalized_codes_for(test, &bundle.psi, lambda)?;
    evaluate_with_codes(bundle, test, &codes, cfg)
}

/// Trains a sensing matrix for one dictionary and measurement count.
///
/// The derived operator acts on codes only through the dictionary's strong
/// row-space directions, so the solver sees that part alone, renormalized:
/// training on raw codes would spend its budget on components `derive_phi`
/// zeroes out. The solved map is restricted to the same directions before
/// derivation, which keeps its feasibility on the projected codes and stops
/// the pseudoinverse from amplifying out-of-model signal content.
fn trained_phi<T: Real>(
    psi: &Dictionary<T>,
    train_codes: &[SparseCode<T>],
    smt: &SmtConfig<T>,
    m: usize,
) -> Result<crate::model::SensingMatrix<T>> {
    let projector = RowSpaceProjector::for_dictionary(psi)?;
    let reachable = normalize_codes(&projector.project(train_codes)?)?;
    let mut cell_cfg = smt.clone();
    cell_cfg.target_m = m;
    let a = match cell_cfg.mode {
        SmtMode::Factored => solve_gram_factored(&reachable, &cell_cfg)?.a,
        SmtMode::Paper => {
            let solution = solve_gram_paper(&reachable, &cell_cfg)?;
            factor_gram(&solution.y, m)?.0
        }
    };
    derive_phi(&projector.restrict(&a)?, psi)
}

/// Runs the full co-training pipeline once: learn the dictionary, code the
/// training windows, fit the sensing matrix at the given compression ratio,
/// and package the result with its training-side isometry defect.
pub fn run_ctsmd<T: Real>(
    train: &[SignalWindow<T>],
    odl: &OdlConfig<T>,
    smt: &SmtConfig<T>,
    cr: f64,
) -> Result<TrainedBundle<T>> {
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidInput("insufficient windows (none provided)".into()))?;
    let m = measurement_count(first.len(), cr)?;
    let psi = odl_train(train, odl).map_err(|e| Error::in_stage("dictionary training", e))?;
    let codes = normalized_codes_for(train, &psi, odl.lambda)
        .map_err(|e| Error::in_stage("sparse coding", e))?;
    let phi = trained_phi(&psi, &codes, smt, m)
        .map_err(|e| Error::in_stage("sensing-matrix training", e))?;
    let delta = empirical_delta(&phi, &psi, &codes)?;
    TrainedBundle::new(phi, psi, delta, odl.seed)
}

/// A dictionary with its train and test codes, shared across sweep cells.
struct DictionaryContext<T: Real> {
    psi: Dictionary<T>,
    train_codes: Vec<SparseCode<T>>,
    test_codes: Vec<SparseCode<T>>,
}

impl<T: Real> DictionaryContext<T> {
    fn build(
        psi: Dictionary<T>,
        train: &[SignalWindow<T>],
        test: &[SignalWindow<T>],
        lambda: T,
    ) -> Result<Self> {
        let train_codes = normalized_codes_for(train, &psi, lambda)?;
        let test_codes = normalized_codes_for(test, &psi, lambda)?;
        Ok(DictionaryContext { psi, train_codes, test_codes })
    }
}

/// Flags mean-RSNR values that improve when the compression ratio grows,
/// which usually signals an undertrained cell.
fn monotonicity_comments(rows: &[MetricsRow]) -> Vec<String> {
    let mut comments = Vec::new();
    for method in MethodCombo::ALL {
        let mut cells: Vec<&MetricsRow> = rows.iter().filter(|r| r.method == method).collect();
        cells.sort_by(|a, b| a.cr.partial_cmp(&b.cr).expect("finite cr"));
        for pair in cells.windows(2) {
            if pair[1].mean_rsnr_db > pair[0].mean_rsnr_db + 0.5 {
                comments.push(format!(
                    "non-monotone mean rsnr for {method}: cr {} ({:.2} dB) to cr {} ({:.2} dB)",
                    pair[0].cr, pair[0].mean_rsnr_db, pair[1].cr, pair[1].mean_rsnr_db
                ));
            }
        }
    }
    comments
}

/// Runs every configured method at every compression ratio. The learned
/// dictionary and both code sets are trained once and shared across cells;
/// cells that fail are reported as comments instead of aborting the sweep.
/// Rows appear in configuration order, methods outer, ratios inner.
pub fn sweep<T: Real>(
    train: &[SignalWindow<T>],
    test: &[SignalWindow<T>],
    cfg: &ExperimentConfig<T>,
) -> Result<SweepReport> {
    cfg.validate()?;
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidInput("insufficient windows (none provided)".into()))?;
    let n = first.len();
    if test.is_empty() {
        return Err(Error::InvalidInput("no evaluation windows".into()));
    }
    for w in train.iter().chain(test.iter()) {
        if w.len() != n {
            return Err(Error::InvalidInput(
                "dimension mismatch (windows have differing lengths)".into(),
            ));
        }
    }

    let learned = if cfg.methods.iter().any(|m| m.uses_learned_dictionary()) {
        let psi = odl_train(train, &cfg.odl).map_err(|e| Error::in_stage("dictionary training", e))?;
        Some(DictionaryContext::build(psi, train, test, cfg.odl.lambda)?)
    } else {
        None
    };
    let fixed = if cfg.methods.iter().any(|m| !m.uses_learned_dictionary()) {
        let psi = dct_dwt_dictionary(n)?;
        Some(DictionaryContext::build(psi, train, test, cfg.odl.lambda)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut comments = Vec::new();
    for &method in &cfg.methods {
        let context = if method.uses_learned_dictionary() { &learned } else { &fixed };
        let context = context.as_ref().expect("context trained for selected methods");
        for &cr in &cfg.cr_list {
            let started = Instant::now();
            match run_cell(method, cr, context, test, cfg) {
                Ok(mut row) => {
                    if cfg.measure_time {
                        row.wall_time_s = started.elapsed().as_secs_f64();
                    }
                    rows.push(row);
                }
                Err(e) => comments.push(format!("cell {method} cr={cr} failed: {e}")),
            }
        }
    }
    comments.extend(monotonicity_comments(&rows));
    Ok(SweepReport { rows, comments })
}

fn run_cell<T: Real>(
    method: MethodCombo,
    cr: f64,
    context: &DictionaryContext<T>,
    test: &[SignalWindow<T>],
    cfg: &ExperimentConfig<T>,
) -> Result<MetricsRow> {
    let n = context.psi.n();
    let m = measurement_count(n, cr)?;
    let phi = if method.uses_trained_sensing() {
        trained_phi(&context.psi, &context.train_codes, &cfg.smt, m)?
    } else {
        gaussian_phi(m, n, cfg.smt.seed)?
    };
    let train_delta = empirical_delta(&phi, &context.psi, &context.train_codes)?;
    let bundle = TrainedBundle::new(phi, context.psi.clone(), train_delta, cfg.odl.seed)?;
    let summary = evaluate_with_codes(&bundle, test, &context.test_codes, &cfg.recovery)?;
    Ok(MetricsRow {
        method,
        cr,
        m,
        empirical_delta: summary.empirical_delta,
        mean_rsnr_db: summary.mean_rsnr_db,
        median_rsnr_db: summary.median_rsnr_db,
        wall_time_s: 0.0,
        seed: cfg.odl.seed,
    })
}
