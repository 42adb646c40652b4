//! Compression and recovery: project a window to measurements, decode the
//! sparse code by l1-regularized least squares on the combined operator
//! `phi * psi`, and synthesize the reconstruction from the dictionary.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lasso::{operator_norm_sq, solve_lasso, LassoOptions};
use crate::model::{Dictionary, MeasurementVector, SensingMatrix, SignalWindow, SparseCode};
use crate::scalar::Real;

/// How the decoding weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule<T: Real> {
    /// `0.01 * ||(phi psi)^T y||_inf`, rescaling with the measurement so
    /// decoding behaves the same across signal amplitudes.
    Auto,
    Fixed(T),
}

/// Decoder settings.
#[derive(Debug, Clone)]
pub struct RecoveryConfig<T: Real> {
    pub lambda_rule: LambdaRule<T>,
    pub max_iter: usize,
    pub tol: T,
    /// Optional noise budget: when set, each recovery reports whether its
    /// measurement residual stayed inside it. Never affects the solve.
    pub epsilon: Option<T>,
    /// Weight used when re-coding windows for evaluation; `None` defers to
    /// [`default_code_lambda`].
    pub code_lambda: Option<T>,
}

impl<T: Real> Default for RecoveryConfig<T> {
    fn default() -> Self {
        RecoveryConfig {
            lambda_rule: LambdaRule::Auto,
            max_iter: 1000,
            tol: T::of(1e-7),
            epsilon: None,
            code_lambda: None,
        }
    }
}

/// Coding weight that tracks the `sqrt(window length)` growth of inner
/// products against unit-norm atoms.
pub fn default_code_lambda<T: Real>(window_length: usize) -> T {
    T::of(1.2) / T::of(window_length as f64).sqrt()
}

/// One decoded measurement.
#[derive(Debug, Clone)]
pub struct Recovery<T: Real> {
    pub code: SparseCode<T>,
    /// The weight the rule resolved to.
    pub lambda: T,
    pub iterations: usize,
    /// Optimality certificate of the decode (scaled subgradient residual).
    pub kkt_residual: T,
    /// `||y - phi psi theta||` at the solution.
    pub residual_norm: T,
    /// Present when a noise budget was configured.
    pub within_epsilon: Option<bool>,
}

/// Compresses a window: `y = phi x`.
pub fn encode<T: Real>(phi: &SensingMatrix<T>, window: &SignalWindow<T>) -> Result<MeasurementVector<T>> {
    if window.len() != phi.n() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch (window has length {}, sensing matrix expects {})",
            window.len(),
            phi.n()
        )));
    }
    MeasurementVector::new(phi.matrix() * window.samples())
}

/// Synthesizes a window from a code: `x_hat = psi theta`.
pub fn reconstruct<T: Real>(psi: &Dictionary<T>, code: &SparseCode<T>) -> Result<SignalWindow<T>> {
    if code.len() != psi.k() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch (code has length {}, dictionary has {} atoms)",
            code.len(),
            psi.k()
        )));
    }
    let atoms = psi.atoms();
    let mut x = DVector::zeros(psi.n());
    for (j, v) in code.support() {
        x.axpy(v, &atoms.column(j).clone_owned(), T::one());
    }
    SignalWindow::new(x, 0)
}

fn resolve_lambda<T: Real>(op: &DMatrix<T>, y: &DVector<T>, rule: LambdaRule<T>) -> Result<T> {
    match rule {
        LambdaRule::Fixed(v) => {
            if !(v > T::zero()) {
                return Err(Error::InvalidInput("lambda must be positive".into()));
            }
            Ok(v)
        }
        LambdaRule::Auto => Ok(T::of(0.01) * (op.transpose() * y).amax()),
    }
}

fn recover_with_operator<T: Real>(
    y: &MeasurementVector<T>,
    op: &DMatrix<T>,
    lipschitz: T,
    cfg: &RecoveryConfig<T>,
) -> Result<Recovery<T>> {
    if y.len() != op.nrows() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch (measurement has length {}, operator expects {})",
            y.len(),
            op.nrows()
        )));
    }
    let lambda = resolve_lambda(op, y.values(), cfg.lambda_rule)?;
    // A zero measurement (or one orthogonal enough that the auto rule
    // degenerates) decodes to the zero code exactly.
    if lambda == T::zero() {
        let residual_norm = y.values().norm();
        return Ok(Recovery {
            code: SparseCode::new(DVector::zeros(op.ncols()))?,
            lambda,
            iterations: 0,
            kkt_residual: T::zero(),
            residual_norm,
            within_epsilon: cfg.epsilon.map(|eps| residual_norm <= eps),
        });
    }
    let mut options = LassoOptions::new(lambda);
    options.max_iter = cfg.max_iter;
    options.tol = cfg.tol;
    options.lipschitz = Some(lipschitz);
    let solution = solve_lasso(op, y.values(), &options)?;

    let residual_norm = (y.values() - op * &solution.coeffs).norm();
    Ok(Recovery {
        code: SparseCode::new(solution.coeffs)?,
        lambda,
        iterations: solution.iterations,
        kkt_residual: solution.kkt_residual,
        residual_norm,
        within_epsilon: cfg.epsilon.map(|eps| residual_norm <= eps),
    })
}

/// Decodes one measurement against the combined operator `phi psi`.
pub fn recover<T: Real>(
    y: &MeasurementVector<T>,
    phi: &SensingMatrix<T>,
    psi: &Dictionary<T>,
    cfg: &RecoveryConfig<T>,
) -> Result<Recovery<T>> {
    let op = combined_operator(phi, psi)?;
    let lipschitz = operator_norm_sq(&op)?;
    recover_with_operator(y, &op, lipschitz, cfg)
}

/// Decodes a batch, forming the combined operator and its curvature bound
/// once. Results are identical to calling [`recover`] per measurement.
pub fn recover_batch<T: Real>(
    ys: &[MeasurementVector<T>],
    phi: &SensingMatrix<T>,
    psi: &Dictionary<T>,
    cfg: &RecoveryConfig<T>,
) -> Result<Vec<Recovery<T>>> {
    let op = combined_operator(phi, psi)?;
    let lipschitz = operator_norm_sq(&op)?;
    ys.iter().map(|y| recover_with_operator(y, &op, lipschitz, cfg)).collect()
}

fn combined_operator<T: Real>(phi: &SensingMatrix<T>, psi: &Dictionary<T>) -> Result<DMatrix<T>> {
    if phi.n() != psi.n() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch (sensing matrix has {} columns, dictionary {} rows)",
            phi.n(),
            psi.n()
        )));
    }
    Ok(phi.matrix() * psi.atoms())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::gaussian_phi;
    use crate::lasso::kkt_residual;
    use crate::rng::SeededRng;

    fn identity_dictionary(n: usize) -> Dictionary<f64> {
        Dictionary::new(DMatrix::identity(n, n)).unwrap()
    }

    fn window(samples: &[f64]) -> SignalWindow<f64> {
        SignalWindow::from_slice(samples, 0).unwrap()
    }

    #[test]
    fn encode_applies_the_sensing_matrix() {
        let phi = SensingMatrix::new(DMatrix::from_row_slice(2, 3, &[
            1.0, 0.0, 2.0, //
            0.0, 1.0, -1.0,
        ]))
        .unwrap();
        let y = encode(&phi, &window(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(y.values().as_slice(), &[7.0, -1.0]);

        let err = encode(&phi, &window(&[1.0, 2.0])).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"), "{err}");
    }

    #[test]
    fn reconstruct_synthesizes_from_support_only() {
        let psi = identity_dictionary(4);
        let code = SparseCode::new(DVector::from_column_slice(&[0.0, 2.5, 0.0, -1.0])).unwrap();
        let x = reconstruct(&psi, &code).unwrap();
        assert_eq!(x.samples().as_slice(), &[0.0, 2.5, 0.0, -1.0]);
    }

    #[test]
    fn zero_measurement_decodes_to_zero() {
        let phi = gaussian_phi::<f64>(4, 8, 1).unwrap();
        let psi = identity_dictionary(8);
        let y = MeasurementVector::new(DVector::zeros(4)).unwrap();
        let rec = recover(&y, &phi, &psi, &RecoveryConfig::default()).unwrap();
        assert_eq!(rec.code.nnz(), 0);
        assert_eq!(rec.kkt_residual, 0.0);
        assert_eq!(rec.residual_norm, 0.0);
    }

    #[test]
    fn dominant_lambda_suppresses_every_coefficient() {
        let phi = gaussian_phi::<f64>(4, 8, 2).unwrap();
        let psi = identity_dictionary(8);
        let y = encode(&phi, &window(&[1.0, -1.0, 0.5, 0.0, 0.0, 2.0, 0.0, -0.5])).unwrap();
        let cfg = RecoveryConfig { lambda_rule: LambdaRule::Fixed(1e6), ..RecoveryConfig::default() };
        let rec = recover(&y, &phi, &psi, &cfg).unwrap();
        assert_eq!(rec.code.nnz(), 0);
        assert!((rec.residual_norm - y.values().norm()).abs() <= 1e-12);
    }

    #[test]
    fn five_sparse_signal_is_recovered_to_working_precision() {
        let n = 32;
        let m = 16;
        let psi = identity_dictionary(n);
        let phi = gaussian_phi::<f64>(m, n, 3).unwrap();
        let mut rng = SeededRng::new(4);
        let mut truth = DVector::zeros(n);
        let mut placed = 0;
        while placed < 5 {
            let j = rng.index(n);
            if truth[j] == 0.0 {
                truth[j] = rng.standard_normal::<f64>() + 2.0f64.copysign(rng.standard_normal::<f64>());
                placed += 1;
            }
        }
        let y = encode(&phi, &SignalWindow::new(truth.clone(), 0).unwrap()).unwrap();
        let cfg = RecoveryConfig {
            lambda_rule: LambdaRule::Fixed(1e-4),
            max_iter: 5000,
            tol: 1e-10,
            ..RecoveryConfig::default()
        };
        let rec = recover(&y, &phi, &psi, &cfg).unwrap();
        let rel = (rec.code.coeffs() - &truth).norm() / truth.norm();
        assert!(rel <= 1e-3, "relative error {rel}");
    }

    #[test]
    fn reported_certificate_matches_an_independent_check() {
        let n = 16;
        let psi = identity_dictionary(n);
        let phi = gaussian_phi::<f64>(8, n, 5).unwrap();
        let y = encode(
            &phi,
            &window(&[
                0.0, 1.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.5, //
                0.0, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0,
            ]),
        )
        .unwrap();
        let rec = recover(&y, &phi, &psi, &RecoveryConfig::default()).unwrap();
        let op = phi.matrix() * psi.atoms();
        let check = kkt_residual(&op, y.values(), rec.code.coeffs(), rec.lambda);
        assert!((rec.kkt_residual - check).abs() <= 1e-12);
        assert!(check <= 1e-5, "certificate {check}");
    }

    #[test]
    fn scaling_the_measurement_scales_the_fixed_lambda_solution() {
        // The l1 problem is positively homogeneous: doubling y and lambda
        // together doubles the minimizer. An algorithm-independent probe.
        let n = 16;
        let psi = identity_dictionary(n);
        let phi = gaussian_phi::<f64>(8, n, 6).unwrap();
        let y1 = encode(
            &phi,
            &window(&[
                1.0, 0.0, 0.0, -1.5, 0.0, 0.0, 0.0, 0.0, //
                2.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.3, 0.0,
            ]),
        )
        .unwrap();
        let y2 = MeasurementVector::new(y1.values() * 2.0).unwrap();

        let base = 0.02;
        let cfg = |lambda: f64| RecoveryConfig {
            lambda_rule: LambdaRule::Fixed(lambda),
            tol: 1e-12,
            max_iter: 5000,
            ..RecoveryConfig::default()
        };
        let r1 = recover(&y1, &phi, &psi, &cfg(base)).unwrap();
        let r2 = recover(&y2, &phi, &psi, &cfg(2.0 * base)).unwrap();
        let defect = (r2.code.coeffs() - r1.code.coeffs() * 2.0).amax();
        assert!(defect <= 1e-6, "homogeneity defect {defect}");
    }

    #[test]
    fn auto_rule_is_invariant_to_amplitude() {
        let n = 16;
        let psi = identity_dictionary(n);
        let phi = gaussian_phi::<f64>(8, n, 7).unwrap();
        let y1 = encode(
            &phi,
            &window(&[
                1.0, 0.0, 0.0, -1.5, 0.0, 0.0, 0.0, 0.0, //
                2.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.3, 0.0,
            ]),
        )
        .unwrap();
        let y2 = MeasurementVector::new(y1.values() * 8.0).unwrap();
        let cfg = RecoveryConfig { tol: 1e-12, max_iter: 5000, ..RecoveryConfig::default() };
        let r1 = recover(&y1, &phi, &psi, &cfg).unwrap();
        let r2 = recover(&y2, &phi, &psi, &cfg).unwrap();
        assert!((r2.lambda - 8.0 * r1.lambda).abs() <= 1e-12);
        let defect = (r2.code.coeffs() - r1.code.coeffs() * 8.0).amax();
        assert!(defect <= 1e-6, "defect {defect}");
    }

    #[test]
    fn batch_recovery_matches_individual_calls() {
        let n = 16;
        let psi = identity_dictionary(n);
        let phi = gaussian_phi::<f64>(8, n, 8).unwrap();
        let windows = [
            window(&[1.0, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            window(&[0.0, 0.0, 3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0, 0.0]),
        ];
        let ys: Vec<_> = windows.iter().map(|w| encode(&phi, w).unwrap()).collect();
        let cfg = RecoveryConfig::default();
        let batch = recover_batch(&ys, &phi, &psi, &cfg).unwrap();
        for (y, b) in ys.iter().zip(&batch) {
            let single = recover(y, &phi, &psi, &cfg).unwrap();
            assert_eq!(single.code.coeffs(), b.code.coeffs());
            assert_eq!(single.iterations, b.iterations);
        }
    }

    #[test]
    fn epsilon_reporting_reflects_the_residual() {
        let n = 8;
        let psi = identity_dictionary(n);
        let phi = gaussian_phi::<f64>(4, n, 9).unwrap();
        let y = encode(&phi, &window(&[1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5, 0.0])).unwrap();
        let tight = RecoveryConfig {
            epsilon: Some(1e-12),
            lambda_rule: LambdaRule::Fixed(0.5),
            ..RecoveryConfig::default()
        };
        let loose = RecoveryConfig {
            epsilon: Some(1e3),
            lambda_rule: LambdaRule::Fixed(0.5),
            ..RecoveryConfig::default()
        };
        assert_eq!(recover(&y, &phi, &psi, &tight).unwrap().within_epsilon, Some(false));
        assert_eq!(recover(&y, &phi, &psi, &loose).unwrap().within_epsilon, Some(true));
        assert_eq!(recover(&y, &phi, &psi, &RecoveryConfig::default()).unwrap().within_epsilon, None);
    }

    #[test]
    fn default_code_lambda_decays_with_window_length() {
        let a: f64 = default_code_lambda(64);
        let b: f64 = default_code_lambda(256);
        assert!((a - 0.15).abs() <= 1e-12);
        assert!((b - 0.075).abs() <= 1e-12);
        assert!(a > b);
    }
}
