//! Sensing-matrix training: make the measurement operator a near-isometry
//! on the sparse codes the dictionary actually produces.
//!
//! Two solvers are provided. The Gram-space solver ([`solve_gram_paper`])
//! works over `Y = A^T A` directly: it alternates exact projections onto
//! the affine set built from the quadratic-form constraints
//! `theta_i^T Y theta_i = 1` and the unit diagonal with eigenvalue clips
//! onto the PSD cone, and reports the objective
//! `delta + beta * ||Y||_*`. On that feasible set the nuclear
//! norm equals the trace, which the unit diagonal pins to `k`, so the rank
//! penalty is constant and the identity matrix (which every unit-norm code
//! satisfies exactly) is always optimal; the solver exists to certify that
//! behavior and to expose the Gram-space geometry. The factored solver
//! ([`solve_gram_factored`]) is the practical one: it optimizes `A` itself
//! at a fixed rank budget `m`, minimizing a smoothed maximum violation with
//! projected gradient descent over unit-norm columns, and returns the best
//! true-violation iterate it saw.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{Dictionary, SensingMatrix, SparseCode};
use crate::rng::SeededRng;
use crate::scalar::Real;
use crate::store::write_atomic;

/// Which parameterization [`train`] callers optimize over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmtMode {
    /// Gram-space solver over `Y = A^T A` with the nuclear-norm rank proxy.
    Paper,
    /// Direct factored solver over `A` at a fixed rank budget.
    Factored,
}

impl std::str::FromStr for SmtMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SmtMode::Paper),
            "factored" => Ok(SmtMode::Factored),
            other => Err(Error::InvalidInput(format!(
                "unknown smt mode {other:?} (expected paper or factored)"
            ))),
        }
    }
}

/// Configuration shared by both solvers.
#[derive(Debug, Clone)]
pub struct SmtConfig<T: Real> {
    pub mode: SmtMode,
    /// Nuclear-norm weight in the Gram-space objective.
    pub beta: T,
    /// Measurement count `m`; the rank budget of the factored solver and
    /// the truncation target for [`factor_gram`].
    pub target_m: usize,
    pub max_iter: usize,
    /// Feasibility tolerance for the elliptope projection (and the point
    /// past which smaller violations stop being meaningful).
    pub tol_feas: T,
    /// Relative objective improvement below which progress counts as
    /// stalled.
    pub tol_conv: T,
    /// Initial gradient step of the factored solver.
    pub step_size: T,
    pub seed: u64,
    /// When set, a per-iteration `iteration,objective,delta` CSV is written
    /// here after the solve.
    pub trace_path: Option<PathBuf>,
}

impl<T: Real> SmtConfig<T> {
    /// Documented defaults at a given rank budget.
    pub fn for_target(target_m: usize) -> Self {
        SmtConfig {
            mode: SmtMode::Factored,
            beta: T::zero(),
            target_m,
            max_iter: 2000,
            tol_feas: T::of(1e-6),
            tol_conv: T::of(1e-7),
            step_size: T::of(1e-2),
            seed: 42,
            trace_path: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.target_m == 0 {
            return Err(Error::InvalidInput("target_m must be >= 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be >= 1".into()));
        }
        if !(self.tol_feas > T::zero() && self.tol_conv > T::zero() && self.step_size > T::zero()) {
            return Err(Error::InvalidInput("tolerances and step size must be positive".into()));
        }
        if self.beta < T::zero() {
            return Err(Error::InvalidInput("beta must be >= 0".into()));
        }
        Ok(())
    }
}

/// Independent re-measurement of a Gram solution's constraints.
#[derive(Debug, Clone)]
pub struct FeasibilityReport<T: Real> {
    /// Smallest eigenvalue of the returned matrix.
    pub min_eigenvalue: T,
    /// Largest deviation of a diagonal entry from 1.
    pub max_diag_deviation: T,
    /// Largest quadratic-form residual `|theta^T Y theta - 1|`.
    pub max_quad_residual: T,
}

/// Result of the Gram-space solver.
#[derive(Debug, Clone)]
pub struct GramSolution<T: Real> {
    pub y: DMatrix<T>,
    /// Certified maximum quadratic-form residual.
    pub delta: T,
    /// `delta + beta * ||Y||_*`; constant in everything but `delta` on the
    /// feasible set.
    pub objective: T,
    pub iterations: usize,
    pub feasibility: FeasibilityReport<T>,
}

/// Result of the factored solver.
#[derive(Debug, Clone)]
pub struct FactoredSolution<T: Real> {
    /// `target_m x k`, unit-norm columns.
    pub a: DMatrix<T>,
    /// Best true maximum violation seen (never worse than the starting
    /// point, which is included in the comparison).
    pub delta_hat: T,
    /// Maximum violation of the random initialization, for reference.
    pub initial_delta: T,
    pub iterations: usize,
}

/// Scales each code to unit norm, dropping zero codes. Errors if nothing
/// usable remains.
pub fn normalize_codes<T: Real>(codes: &[SparseCode<T>]) -> Result<Vec<SparseCode<T>>> {
    let mut normalized = Vec::with_capacity(codes.len());
    for code in codes {
        let norm = code.coeffs().norm();
        if norm > T::zero() {
            normalized.push(SparseCode::new(code.coeffs() / norm)?);
        }
    }
    if normalized.is_empty() {
        return Err(Error::InvalidInput("no usable codes".into()));
    }
    Ok(normalized)
}

fn check_codes<T: Real>(codes: &[SparseCode<T>]) -> Result<(usize, Vec<Vec<(usize, T)>>)> {
    let first = codes.first().ok_or_else(|| Error::InvalidInput("no usable codes".into()))?;
    let k = first.len();
    let slack = T::of(1e-6);
    let mut supports = Vec::with_capacity(codes.len());
    for (i, code) in codes.iter().enumerate() {
        if code.len() != k {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch (code {i} has length {}, expected {k})",
                code.len()
            )));
        }
        if (code.coeffs().norm() - T::one()).abs() > slack {
            return Err(Error::InvalidInput(format!(
                "codes must be unit normalized (index {i}); run normalize_codes first"
            )));
        }
        supports.push(code.support());
    }
    Ok((k, supports))
}

/// `A theta` using only the nonzero coefficients.
fn sparse_apply<T: Real>(a: &DMatrix<T>, support: &[(usize, T)]) -> DVector<T> {
    let m = a.nrows();
    let data = a.as_slice();
    let mut z = DVector::zeros(m);
    for &(j, v) in support {
        let col = &data[j * m..(j + 1) * m];
        for (zi, ci) in z.iter_mut().zip(col.iter()) {
            *zi += v * *ci;
        }
    }
    z
}

/// `theta^T Y theta` using only the nonzero coefficients.
fn quad_form<T: Real>(y: &DMatrix<T>, support: &[(usize, T)]) -> T {
    let mut acc = T::zero();
    for &(a, va) in support {
        for &(b, vb) in support {
            acc += va * vb * y[(a, b)];
        }
    }
    acc
}

fn write_trace<T: Real>(path: &PathBuf, rows: &[(usize, T, T)]) -> Result<()> {
    let mut text = String::from("iteration,objective,delta\n");
    for (iter, objective, delta) in rows {
        text.push_str(&format!(
            "{iter},{:.12e},{:.12e}\n",
            objective.to_f64_lossy(),
            delta.to_f64_lossy()
        ));
    }
    write_atomic(path, text.as_bytes())
}

/// Eigenvalue clip onto the PSD cone. Returns the projection and the
/// smallest eigenvalue of the input.
fn psd_clip<T: Real>(m: &DMatrix<T>) -> Result<(DMatrix<T>, T)> {
    let sym = (m + m.transpose()) * T::of(0.5);
    let eigen = SymmetricEigen::try_new(sym, T::default_epsilon(), 0)
        .ok_or_else(|| Error::Solver("eigendecomposition failed".into()))?;
    let min_eig = eigen.eigenvalues.iter().fold(T::of(f64::MAX), |acc, v| acc.min(*v));
    if min_eig >= T::zero() {
        let rebuilt = &eigen.eigenvectors
            * DMatrix::from_diagonal(&eigen.eigenvalues)
            * eigen.eigenvectors.transpose();
        return Ok((rebuilt, min_eig));
    }
    let clipped = eigen.eigenvalues.map(|v| v.max(T::zero()));
    let rebuilt =
        &eigen.eigenvectors * DMatrix::from_diagonal(&clipped) * eigen.eigenvectors.transpose();
    Ok((rebuilt, min_eig))
}

/// Random correlation matrix: the Gram matrix of `k` Gaussian vectors,
/// rescaled to a unit diagonal. Always strictly inside the elliptope, and
/// far from any particular feasible point, so convergence is informative.
fn random_correlation<T: Real>(k: usize, seed: u64) -> DMatrix<T> {
    let mut rng = SeededRng::substream(seed, 2);
    let b = DMatrix::from_fn(k, k, |_, _| rng.standard_normal::<T>());
    let mut s = b.transpose() * &b;
    // Guard against a degenerate draw; a tiny ridge keeps diagonals positive.
    for i in 0..k {
        s[(i, i)] += T::of(1e-9);
    }
    let scales: Vec<T> = (0..k).map(|i| T::one() / s[(i, i)].sqrt()).collect();
    DMatrix::from_fn(k, k, |i, j| s[(i, j)] * scales[i] * scales[j])
}

/// Sparse dot product of two support lists.
fn support_dot<T: Real>(a: &[(usize, T)], b: &[(usize, T)]) -> T {
    let mut acc = T::zero();
    for &(i, va) in a {
        for &(j, vb) in b {
            if i == j {
                acc += va * vb;
            }
        }
    }
    acc
}

/// Pseudoinverse action `mu = G^+ r` precomputed from a symmetric
/// eigendecomposition; eigenvalues below a relative floor are treated as
/// exact redundancy among the constraints.
struct GramProjector<T: Real> {
    vectors: DMatrix<T>,
    inv_eigs: DVector<T>,
}

impl<T: Real> GramProjector<T> {
    fn new(constraints: &[Vec<(usize, T)>]) -> Result<Self> {
        let c = constraints.len();
        // Gram matrix of the rank-one constraint matrices under the
        // Frobenius inner product: <v_i v_i^T, v_j v_j^T> = (v_i . v_j)^2.
        let mut g = DMatrix::zeros(c, c);
        for i in 0..c {
            for j in i..c {
                let d = support_dot(&constraints[i], &constraints[j]);
                let v = d * d;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let eigen = SymmetricEigen::try_new(g, T::default_epsilon(), 0)
            .ok_or_else(|| Error::Solver("eigendecomposition failed".into()))?;
        let max_eig = eigen.eigenvalues.iter().fold(T::zero(), |acc, v| acc.max(*v));
        let floor = max_eig * T::of(1e-12);
        let inv_eigs = eigen.eigenvalues.map(|v| if v > floor { T::one() / v } else { T::zero() });
        Ok(Self { vectors: eigen.eigenvectors, inv_eigs })
    }

    fn apply(&self, r: &DVector<T>) -> DVector<T> {
        let mut coords = self.vectors.transpose() * r;
        for (c, inv) in coords.iter_mut().zip(self.inv_eigs.iter()) {
            *c *= *inv;
        }
        &self.vectors * coords
    }
}

/// Gram-space solver: alternating projections between the affine constraint
/// set (quadratic forms and unit diagonal together) and the PSD cone, from a
/// random correlation-matrix start. Returns the best iterate with an
/// independently measured feasibility report; `delta` is certified on the
/// returned matrix.
pub fn solve_gram_paper<T: Real>(codes: &[SparseCode<T>], cfg: &SmtConfig<T>) -> Result<GramSolution<T>> {
    cfg.validate()?;
    let (k, supports) = check_codes(codes)?;

    // Each diagonal entry is itself a quadratic constraint with a basis
    // vector as its code, so the unit diagonal joins the same affine system.
    // The identity satisfies every constraint here, which keeps the system
    // consistent and its feasible set in reach of the PSD cone.
    let mut constraints = supports.clone();
    for i in 0..k {
        constraints.push(vec![(i, T::one())]);
    }
    let projector = GramProjector::new(&constraints)?;

    let mut y = random_correlation::<T>(k, cfg.seed);
    let mut best_y = y.clone();
    let mut best_feas = T::of(f64::MAX);
    let mut stalled = 0usize;
    let mut trace: Vec<(usize, T, T)> = Vec::new();
    let mut iterations = 0usize;

    for iter in 1..=cfg.max_iter {
        iterations = iter;
        // Exact projection onto the affine set: with multipliers solved
        // through the constraint Gram matrix, `y + sum_i mu_i v_i v_i^T`
        // is the nearest matrix satisfying every constraint at once.
        let residuals =
            DVector::from_fn(constraints.len(), |i, _| T::one() - quad_form(&y, &constraints[i]));
        let mu = projector.apply(&residuals);
        for (support, m) in constraints.iter().zip(mu.iter()) {
            for &(a, va) in support {
                for &(b, vb) in support {
                    y[(a, b)] += *m * va * vb;
                }
            }
        }
        let (projected, _) = psd_clip(&y)?;
        y = projected;

        // The clip restores the cone exactly, so the remaining infeasibility
        // is whatever it cost the affine constraints.
        let mut feas = T::zero();
        for support in &constraints {
            feas = feas.max((quad_form(&y, support) - T::one()).abs());
        }
        // Unit diagonal pins the trace, hence the nuclear norm, to k: the
        // rank proxy contributes a constant on the feasible set.
        let objective = feas + cfg.beta * y.trace();
        trace.push((iter, objective, feas));

        if feas < best_feas - cfg.tol_conv * best_feas.max(T::one()) {
            best_feas = feas;
            best_y = y.clone();
            stalled = 0;
        } else {
            if feas < best_feas {
                best_feas = feas;
                best_y = y.clone();
            }
            stalled += 1;
        }
        // The margin under tol_feas leaves room for the final diagonal
        // rescale to move the quadratic forms.
        if best_feas <= cfg.tol_feas * T::of(0.25) || stalled >= 50 {
            break;
        }
    }

    // Polish: exact PSD projection followed by a congruence rescale, which
    // restores an exactly unit diagonal without leaving the PSD cone.
    let (psd, _) = psd_clip(&best_y)?;
    let mut polished = psd.clone();
    let usable_diag = (0..k).all(|i| psd[(i, i)] > T::of(0.5));
    if usable_diag {
        let scales: Vec<T> = (0..k).map(|i| T::one() / psd[(i, i)].sqrt()).collect();
        polished = DMatrix::from_fn(k, k, |i, j| psd[(i, j)] * scales[i] * scales[j]);
    }

    // Certify the returned matrix from scratch.
    let eigen = SymmetricEigen::try_new(polished.clone(), T::default_epsilon(), 0)
        .ok_or_else(|| Error::Solver("eigendecomposition failed".into()))?;
    let min_eigenvalue = eigen.eigenvalues.iter().fold(T::of(f64::MAX), |acc, v| acc.min(*v));
    let mut max_diag_deviation = T::zero();
    for i in 0..k {
        max_diag_deviation = max_diag_deviation.max((polished[(i, i)] - T::one()).abs());
    }
    let mut delta = T::zero();
    for support in &supports {
        delta = delta.max((quad_form(&polished, support) - T::one()).abs());
    }
    let objective = delta + cfg.beta * polished.trace();

    if let Some(path) = &cfg.trace_path {
        write_trace(path, &trace)?;
    }
    Ok(GramSolution {
        y: polished,
        delta,
        objective,
        iterations,
        feasibility: FeasibilityReport { min_eigenvalue, max_diag_deviation, max_quad_residual: delta },
    })
}

/// Factored-mode objective: a numerically stable log-sum-exp smoothing of
/// `max_i |u_i|` at temperature `tau`, where `u_i = ||A theta_i||^2 - 1`.
fn smoothed_max<T: Real>(violations: &[T], tau: T) -> T {
    let peak = violations.iter().fold(T::zero(), |acc, u| acc.max(u.abs()));
    let shift = tau * peak;
    let mut denom = T::zero();
    for u in violations {
        denom += (tau * *u - shift).exp() + (-tau * *u - shift).exp();
    }
    (shift + denom.ln()) / tau
}

/// Factored solver: projected gradient descent on the smoothed maximum
/// violation over matrices with unit-norm columns, with backtracking line
/// search, one temperature doubling when progress stalls, and best-iterate
/// tracking on the true (unsmoothed) violation.
pub fn solve_gram_factored<T: Real>(codes: &[SparseCode<T>], cfg: &SmtConfig<T>) -> Result<FactoredSolution<T>> {
    cfg.validate()?;
    let (k, supports) = check_codes(codes)?;
    let m = cfg.target_m;

    // Gaussian init with variance 1/m, then unit columns: the Gram matrix
    // A^T A starts with an exactly unit diagonal.
    let mut rng = SeededRng::substream(cfg.seed, 3);
    let scale = T::of(1.0 / (m as f64).sqrt());
    let mut a = DMatrix::zeros(m, k);
    for i in 0..m {
        for j in 0..k {
            a[(i, j)] = rng.standard_normal::<T>() * scale;
        }
    }
    normalize_columns(&mut a);

    let violations = |mat: &DMatrix<T>| -> Vec<T> {
        supports
            .iter()
            .map(|s| sparse_apply(mat, s).norm_squared() - T::one())
            .collect()
    };

    let mut u = violations(&a);
    let true_delta = |u: &[T]| u.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let initial_delta = true_delta(&u);
    let mut best_a = a.clone();
    let mut best_delta = initial_delta;

    let mut tau = T::of(100.0);
    let mut doubled = false;
    let mut objective = smoothed_max(&u, tau);
    let mut step = cfg.step_size;
    let mut stalled = 0usize;
    let mut iterations = 0usize;
    let mut trace: Vec<(usize, T, T)> = vec![(0, objective, initial_delta)];

    'outer: for iter in 1..=cfg.max_iter {
        iterations = iter;

        // Gradient of the smoothed objective: a signed softmax weighting of
        // the per-code gradients 2 (A theta) theta^T, accumulated over the
        // code supports only.
        let shift = tau * true_delta(&u);
        let mut denom = T::zero();
        let mut weights = Vec::with_capacity(u.len());
        for v in &u {
            let pos = (tau * *v - shift).exp();
            let neg = (-tau * *v - shift).exp();
            denom += pos + neg;
            weights.push(pos - neg);
        }
        let mut grad: DMatrix<T> = DMatrix::zeros(m, k);
        let negligible = T::of(1e-16) * denom;
        for (i, support) in supports.iter().enumerate() {
            if weights[i].abs() <= negligible {
                continue;
            }
            let w = weights[i] / denom * T::of(2.0);
            let z = sparse_apply(&a, support);
            for &(j, v) in support {
                let mut col = grad.column_mut(j);
                for (gi, zi) in col.iter_mut().zip(z.iter()) {
                    *gi += w * v * *zi;
                }
            }
        }
        let grad_norm_sq = grad.norm_squared();
        if grad_norm_sq == T::zero() {
            break;
        }

        // Backtracking line search on the smoothed objective; prefer the
        // Armijo condition, fall back to plain decrease.
        let mut trial_step = step;
        let mut accepted: Option<(DMatrix<T>, Vec<T>, T, T)> = None;
        let mut fallback: Option<(DMatrix<T>, Vec<T>, T, T)> = None;
        for _ in 0..40 {
            let mut candidate = &a - &grad * trial_step;
            normalize_columns(&mut candidate);
            let u_new = violations(&candidate);
            let obj_new = smoothed_max(&u_new, tau);
            if obj_new <= objective - T::of(1e-4) * trial_step * grad_norm_sq {
                accepted = Some((candidate, u_new, obj_new, trial_step));
                break;
            }
            if obj_new < objective && fallback.is_none() {
                fallback = Some((candidate, u_new, obj_new, trial_step));
            }
            trial_step *= T::of(0.5);
        }

        match accepted.or(fallback) {
            Some((candidate, u_new, obj_new, used_step)) => {
                let improvement = objective - obj_new;
                a = candidate;
                u = u_new;
                objective = obj_new;
                step = (used_step * T::of(2.0)).min(T::of(1e3));

                let delta = true_delta(&u);
                trace.push((iter, objective, delta));
                if delta < best_delta {
                    best_delta = delta;
                    best_a = a.clone();
                }
                if best_delta <= cfg.tol_feas {
                    break 'outer;
                }
                if improvement < cfg.tol_conv * objective.abs().max(T::one()) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                if stalled >= 50 {
                    if doubled {
                        break 'outer;
                    }
                    // One continuation: sharpen the smoothing once the
                    // current temperature stops paying.
                    tau *= T::of(2.0);
                    doubled = true;
                    objective = smoothed_max(&u, tau);
                    stalled = 0;
                }
            }
            None => {
                if doubled {
                    break 'outer;
                }
                tau *= T::of(2.0);
                doubled = true;
                objective = smoothed_max(&u, tau);
                stalled = 0;
            }
        }
    }

    if let Some(path) = &cfg.trace_path {
        write_trace(path, &trace)?;
    }
    Ok(FactoredSolution { a: best_a, delta_hat: best_delta, initial_delta, iterations })
}

fn normalize_columns<T: Real>(a: &mut DMatrix<T>) {
    for j in 0..a.ncols() {
        let norm = a.column(j).norm();
        if norm > T::zero() {
            a.column_mut(j).scale_mut(T::one() / norm);
        } else {
            // A zero column carries no measurement energy; park it on a
            // coordinate axis to stay on the constraint set.
            let row = j % a.nrows();
            a[(row, j)] = T::one();
        }
    }
}

/// Best rank-`target_m` factorization of a PSD Gram matrix: eigenvalues
/// sorted descending, negatives clipped, row `i` of `A` set to
/// `sqrt(lambda_i) u_i^T`. Returns `A` and the exactly measured truncation
/// error `||Y - A^T A||_F`.
pub fn factor_gram<T: Real>(y: &DMatrix<T>, target_m: usize) -> Result<(DMatrix<T>, T)> {
    let k = y.nrows();
    if y.ncols() != k {
        return Err(Error::InvalidInput("dimension mismatch (gram matrix must be square)".into()));
    }
    if target_m == 0 || target_m > k {
        return Err(Error::InvalidInput(format!("target_m must be in 1..={k}")));
    }
    let sym = (y + y.transpose()) * T::of(0.5);
    let eigen = SymmetricEigen::try_new(sym, T::default_epsilon(), 0)
        .ok_or_else(|| Error::Solver("eigendecomposition failed".into()))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eigen.eigenvalues[j].partial_cmp(&eigen.eigenvalues[i]).unwrap());

    // Eigenvalues below working precision of the largest are rank noise,
    // not usable measurement energy.
    let floor = eigen.eigenvalues[order[0]].max(T::zero()) * T::of(1e-12);
    let mut a = DMatrix::zeros(target_m, k);
    for (row, &idx) in order.iter().take(target_m).enumerate() {
        let lambda = eigen.eigenvalues[idx];
        if lambda <= floor {
            return Err(Error::Solver(format!(
                "gram matrix has fewer than {target_m} positive eigenvalues"
            )));
        }
        let scale = lambda.sqrt();
        for col in 0..k {
            a[(row, col)] = scale * eigen.eigenvectors[(col, idx)];
        }
    }
    let error = (y - a.transpose() * &a).norm();
    Ok((a, error))
}

/// Lifts a code-space operator to signal space: `phi = A psi^+`, with the
/// pseudoinverse computed by thin SVD (singular values below `1e-10` of the
/// largest treated as zero). Requires the dictionary to have full row rank,
/// verified by `||psi psi^+ - I||_max <= 1e-8`; measuring a window then
/// acts on its codes through `phi psi = A psi^+ psi`.
pub fn derive_phi<T: Real>(a: &DMatrix<T>, psi: &Dictionary<T>) -> Result<SensingMatrix<T>> {
    let (n, k) = (psi.n(), psi.k());
    if a.ncols() != k {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch (factor has {} columns, dictionary has {k} atoms)",
            a.ncols()
        )));
    }
    let svd = psi
        .atoms()
        .clone()
        .try_svd(true, true, T::default_epsilon(), 100_000)
        .ok_or_else(|| Error::Solver("svd failed on dictionary".into()))?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().fold(T::zero(), |acc, s| acc.max(*s));
    let cutoff = T::of(1e-10) * sigma_max;
    let inv_sigma =
        DVector::from_fn(svd.singular_values.len(), |i, _| {
            let s = svd.singular_values[i];
            if s > cutoff {
                T::one() / s
            } else {
                T::zero()
            }
        });
    // psi^+ = V S^+ U^T, k x n.
    let mut pinv = v_t.transpose();
    for (mut col, inv) in pinv.column_iter_mut().zip(inv_sigma.iter()) {
        col.scale_mut(*inv);
    }
    let pinv = pinv * u.transpose();

    let identity_defect = (psi.atoms() * &pinv - DMatrix::<T>::identity(n, n)).amax();
    if identity_defect > T::of(1e-8) {
        return Err(Error::Solver(format!(
            "rank-deficient dictionary: pseudoinverse identity defect {:.3e}",
            identity_defect.to_f64_lossy()
        )));
    }
    SensingMatrix::new(a * pinv)
}

/// Relative singular-value floor separating the dictionary directions a
/// derived sensing matrix may respond to from those it must ignore.
///
/// A learned dictionary's spectrum typically collapses: a few dozen strong
/// directions carry all of the training signal, and the rest sit many
/// decades lower where they express nothing the data contains. Because
/// `derive_phi` builds `phi = A psi^+`, any response of `A` along a
/// direction with singular value `sigma` is amplified by `1 / sigma` in
/// signal space, so responding to the collapsed tail turns tiny
/// out-of-model signal content into measurement noise that swamps decoding.
/// One percent of the top singular value keeps every direction that carries
/// signal energy while bounding that amplification.
pub const SPECTRAL_FLOOR_RATIO: f64 = 1e-2;

/// Orthonormal basis of the dictionary row-space directions whose singular
/// values clear a relative floor.
///
/// A sensing matrix of the form `A psi^+` acts on codes only through the
/// dictionary's row space: `phi psi = A (psi^+ psi)`, so code energy outside
/// it never reaches the measurements, and for an overcomplete dictionary
/// that lost part is large (sparse codes are nothing like minimum-norm
/// ones). Training on raw codes therefore tunes directions the derived
/// operator zeroes out, and responding to weak directions amplifies noise
/// (see [`SPECTRAL_FLOOR_RATIO`]). The projector restricts both sides:
/// codes via [`project`](Self::project) before a solver, the solved map via
/// [`restrict`](Self::restrict) before [`derive_phi`].
pub struct RowSpaceProjector<T: Real> {
    // k x r with orthonormal columns; r is the kept direction count.
    basis: DMatrix<T>,
}

impl<T: Real> RowSpaceProjector<T> {
    /// Keeps the directions with singular value above `floor_ratio` times
    /// the largest one.
    pub fn new(psi: &Dictionary<T>, floor_ratio: T) -> Result<Self> {
        let svd = psi
            .atoms()
            .clone()
            .try_svd(false, true, T::default_epsilon(), 100_000)
            .ok_or_else(|| Error::Solver("svd failed on dictionary".into()))?;
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let sigma_max = svd.singular_values.iter().fold(T::zero(), |acc, s| acc.max(*s));
        let cutoff = floor_ratio * sigma_max;
        let kept: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > cutoff)
            .collect();
        if kept.is_empty() {
            return Err(Error::Solver("degenerate dictionary: no direction clears the spectral floor".into()));
        }
        let mut basis = DMatrix::zeros(psi.k(), kept.len());
        for (c, &i) in kept.iter().enumerate() {
            basis.set_column(c, &v_t.row(i).transpose());
        }
        Ok(RowSpaceProjector { basis })
    }

    /// The default floor for training pipelines.
    pub fn for_dictionary(psi: &Dictionary<T>) -> Result<Self> {
        Self::new(psi, T::of(SPECTRAL_FLOOR_RATIO))
    }

    /// Number of kept directions.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Projects codes onto the kept directions. Results come back
    /// unnormalized; run them through [`normalize_codes`] before a solver.
    pub fn project(&self, codes: &[SparseCode<T>]) -> Result<Vec<SparseCode<T>>> {
        let k = self.basis.nrows();
        let mut projected = Vec::with_capacity(codes.len());
        for code in codes {
            if code.len() != k {
                return Err(Error::InvalidInput(format!(
                    "dimension mismatch (code has length {}, dictionary has {k} atoms)",
                    code.len()
                )));
            }
            let coords = self.basis.transpose() * code.coeffs();
            projected.push(SparseCode::new(&self.basis * coords)?);
        }
        Ok(projected)
    }

    /// Zeroes a solved map's response outside the kept directions. Quadratic
    /// forms on the kept span are unchanged, so a solution's feasibility on
    /// projected codes survives the restriction.
    pub fn restrict(&self, a: &DMatrix<T>) -> Result<DMatrix<T>> {
        if a.ncols() != self.basis.nrows() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch (map has {} columns, dictionary has {} atoms)",
                a.ncols(),
                self.basis.nrows()
            )));
        }
        Ok((a * &self.basis) * self.basis.transpose())
    }
}

/// Maximum isometry defect of `phi` against unit-normalized codes:
/// `max_i | ||phi psi theta_i||^2 / ||theta_i||^2 - 1 |`. Codes must be
/// nonzero.
pub fn empirical_delta<T: Real>(
    phi: &SensingMatrix<T>,
    psi: &Dictionary<T>,
    codes: &[SparseCode<T>],
) -> Result<T> {
    if codes.is_empty() {
        return Err(Error::InvalidInput("no usable codes".into()));
    }
    if phi.n() != psi.n() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch (sensing matrix has {} columns, dictionary {} rows)",
            phi.n(),
            psi.n()
        )));
    }
    let op = phi.matrix() * psi.atoms();
    let mut delta = T::zero();
    for (i, code) in codes.iter().enumerate() {
        if code.len() != psi.k() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch (code {i} has length {}, expected {})",
                code.len(),
                psi.k()
            )));
        }
        let norm = code.coeffs().norm();
        if norm == T::zero() {
            return Err(Error::InvalidInput(format!("zero-norm code at index {i}")));
        }
        let support = code.support();
        let z = sparse_apply(&op, &support);
        let ratio = z.norm_squared() / (norm * norm);
        delta = delta.max((ratio - T::one()).abs());
    }
    Ok(delta)
}
