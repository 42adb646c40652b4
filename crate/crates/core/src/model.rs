//! Domain types shared across the pipeline.
//!
//! The checked constructors (`new`) enforce each type's invariants once, at
//! the boundary; the `*_unchecked` constructors exist for deserialization
//! and for assembling deliberately malformed values in validation tests.
//! [`validate_bundle`] re-checks every invariant of an assembled bundle and
//! never panics, so it can be pointed at arbitrary deserialized data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Norm slack for unit-normalized columns: generous enough for f32
/// round-off, exactly 1e-9 at f64 and below.
pub(crate) fn norm_slack<T: Real>() -> T {
    let eps32 = T::default_epsilon().to_f64_lossy() * 32.0;
    T::of(eps32.max(1e-9))
}

fn matrix_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// One fixed-length window cut from a recording, tagged with the sample
/// offset it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow<T: Real> {
    samples: DVector<T>,
    source_offset: usize,
}

impl<T: Real> SignalWindow<T> {
    /// Requires a non-empty, all-finite sample vector.
    pub fn new(samples: DVector<T>, source_offset: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("window must be non-empty".into()));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample in window".into()));
        }
        Ok(SignalWindow { samples, source_offset })
    }

    pub fn from_slice(samples: &[T], source_offset: usize) -> Result<Self> {
        Self::new(DVector::from_column_slice(samples), source_offset)
    }

    pub fn samples(&self) -> &DVector<T> {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn source_offset(&self) -> usize {
        self.source_offset
    }
}

/// Overcomplete synthesis dictionary, one atom per column.
///
/// Invariants: `n <= k`, all entries finite, every atom norm in
/// `(0, 1 + slack]` where the slack is [`norm_slack`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary<T: Real> {
    atoms: DMatrix<T>,
}

impl<T: Real> Dictionary<T> {
    pub fn new(atoms: DMatrix<T>) -> Result<Self> {
        let dict = Dictionary { atoms };
        let violations = dict.check();
        if violations.is_empty() {
            Ok(dict)
        } else {
            Err(Error::InvalidInput(violations.join("; ")))
        }
    }

    /// Skips invariant checks; used when loading already-validated data and
    /// when building intentionally broken inputs for `validate_bundle`.
    pub fn from_matrix_unchecked(atoms: DMatrix<T>) -> Self {
        Dictionary { atoms }
    }

    fn check(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let (n, k) = self.atoms.shape();
        if n == 0 || k == 0 {
            violations.push("dictionary must be non-empty".into());
            return violations;
        }
        if n > k {
            violations.push(format!("dictionary must have at least as many atoms as rows (n={n}, k={k})"));
        }
        if !matrix_finite(&self.atoms) {
            violations.push("non-finite entry in dictionary".into());
        } else {
            let limit = T::one() + norm_slack::<T>();
            for j in 0..k {
                let norm = self.atoms.column(j).norm();
                if norm <= T::zero() {
                    violations.push(format!("zero-norm atom at index {j}"));
                } else if norm > limit {
                    violations.push(format!("atom norm exceeds 1 at index {j}"));
                }
            }
        }
        violations
    }

    pub fn atoms(&self) -> &DMatrix<T> {
        &self.atoms
    }

    /// Window length (rows).
    pub fn n(&self) -> usize {
        self.atoms.nrows()
    }

    /// Atom count (columns).
    pub fn k(&self) -> usize {
        self.atoms.ncols()
    }
}

/// Measurement operator mapping length-`n` windows to `m < n` measurements.
///
/// Invariants: `1 <= m < n`, all entries finite, no all-zero row.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix<T: Real> {
    rows: DMatrix<T>,
}

impl<T: Real> SensingMatrix<T> {
    pub fn new(rows: DMatrix<T>) -> Result<Self> {
        let phi = SensingMatrix { rows };
        let violations = phi.check();
        if violations.is_empty() {
            Ok(phi)
        } else {
            Err(Error::InvalidInput(violations.join("; ")))
        }
    }

    /// See [`Dictionary::from_matrix_unchecked`].
    pub fn from_matrix_unchecked(rows: DMatrix<T>) -> Self {
        SensingMatrix { rows }
    }

    fn check(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let (m, n) = self.rows.shape();
        if m == 0 {
            violations.push("m must be >= 1".into());
        }
        if m >= n {
            violations.push("m must be < n".into());
        }
        if !matrix_finite(&self.rows) {
            violations.push("non-finite entry in sensing matrix".into());
        } else {
            for i in 0..m {
                if self.rows.row(i).iter().all(|v| *v == T::zero()) {
                    violations.push(format!("all-zero row at index {i} in sensing matrix"));
                }
            }
        }
        violations
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.rows
    }

    /// Measurement count (rows).
    pub fn m(&self) -> usize {
        self.rows.nrows()
    }

    /// Window length (columns).
    pub fn n(&self) -> usize {
        self.rows.ncols()
    }
}

/// Synthesis coefficients of one window against a dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode<T: Real> {
    coeffs: DVector<T>,
}

impl<T: Real> SparseCode<T> {
    pub fn new(coeffs: DVector<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("code must be non-empty".into()));
        }
        if !coeffs.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient in code".into()));
        }
        Ok(SparseCode { coeffs })
    }

    pub fn coeffs(&self) -> &DVector<T> {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Nonzero entries as `(index, value)` pairs, ascending by index.
    pub fn support(&self) -> Vec<(usize, T)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::zero())
            .map(|(j, v)| (j, *v))
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.iter().filter(|v| **v != T::zero()).count()
    }
}

/// Compressed representation of one window: `y = phi * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector<T: Real> {
    values: DVector<T>,
}

impl<T: Real> MeasurementVector<T> {
    pub fn new(values: DVector<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("measurement vector must be non-empty".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in measurement vector".into()));
        }
        Ok(MeasurementVector { values })
    }

    pub fn values(&self) -> &DVector<T> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A trained sensing matrix and dictionary pair, plus the provenance needed
/// to reproduce and audit it. This is the unit of persistence: compression
/// and reconstruction both run off a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedBundle<T: Real> {
    pub phi: SensingMatrix<T>,
    pub psi: Dictionary<T>,
    /// Near-isometry defect certified on the training codes.
    pub achieved_delta: T,
    /// Seed the training run was launched with.
    pub seed: u64,
    pub format_version: u32,
}

/// Current on-disk format version; bundles with any other version are
/// rejected both at load and by validation.
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

impl<T: Real> TrainedBundle<T> {
    /// Assembles and validates a bundle; returns every violation on failure.
    pub fn new(phi: SensingMatrix<T>, psi: Dictionary<T>, achieved_delta: T, seed: u64) -> Result<Self> {
        let bundle = TrainedBundle { phi, psi, achieved_delta, seed, format_version: BUNDLE_FORMAT_VERSION };
        let violations = validate_bundle(&bundle);
        if violations.is_empty() {
            Ok(bundle)
        } else {
            Err(Error::InvalidBundle(violations))
        }
    }

    pub fn n(&self) -> usize {
        self.psi.n()
    }

    pub fn m(&self) -> usize {
        self.phi.m()
    }

    pub fn k(&self) -> usize {
        self.psi.k()
    }
}

/// Re-checks every bundle invariant, returning one message per violation
/// (empty means valid). Runs all checks rather than stopping at the first,
/// and never panics, so it is safe on arbitrary deserialized input.
pub fn validate_bundle<T: Real>(bundle: &TrainedBundle<T>) -> Vec<String> {
    let mut violations = Vec::new();
    if bundle.format_version != BUNDLE_FORMAT_VERSION {
        violations.push(format!("unsupported format version {}", bundle.format_version));
    }

    let (m, phi_cols) = bundle.phi.matrix().shape();
    let (n, k) = bundle.psi.atoms().shape();

    if phi_cols != n {
        violations.push(format!(
            "dimension mismatch (sensing matrix is {m}x{phi_cols}, dictionary is {n}x{k})"
        ));
    }
    if m == 0 {
        violations.push("m must be >= 1".into());
    }
    if m >= n {
        violations.push("m must be < n".into());
    }
    if n > k {
        violations.push(format!("dictionary must have at least as many atoms as rows (n={n}, k={k})"));
    }

    if !matrix_finite(bundle.phi.matrix()) {
        violations.push("non-finite entry in sensing matrix".into());
    } else {
        for i in 0..m {
            if bundle.phi.matrix().row(i).iter().all(|v| *v == T::zero()) {
                violations.push(format!("all-zero row at index {i} in sensing matrix"));
            }
        }
    }

    if !matrix_finite(bundle.psi.atoms()) {
        violations.push("non-finite entry in dictionary".into());
    } else {
        let limit = T::one() + norm_slack::<T>();
        for j in 0..k {
            let norm = bundle.psi.atoms().column(j).norm();
            if norm <= T::zero() {
                violations.push(format!("zero-norm atom at index {j}"));
            } else if norm > limit {
                violations.push(format!("atom norm exceeds 1 at index {j}"));
            }
        }
    }

    if !bundle.achieved_delta.is_finite() || bundle.achieved_delta < T::zero() {
        violations.push("achieved_delta must be finite and >= 0".into());
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_columns(n: usize, k: usize) -> DMatrix<f64> {
        // Distinct unit-norm columns: shifted impulses with a slight tilt.
        DMatrix::from_fn(n, k, |i, j| {
            if i == j % n {
                1.0
            } else {
                0.0
            }
        })
    }

    fn valid_bundle(m: usize, n: usize, k: usize) -> TrainedBundle<f64> {
        let phi = SensingMatrix::new(DMatrix::from_fn(m, n, |i, j| {
            if j % m == i {
                1.0
            } else {
                0.01
            }
        }))
        .unwrap();
        let psi = Dictionary::new(unit_columns(n, k)).unwrap();
        TrainedBundle::new(phi, psi, 0.25, 42).unwrap()
    }

    #[test]
    fn consistent_bundle_passes_validation() {
        let bundle = valid_bundle(3, 8, 16);
        assert!(validate_bundle(&bundle).is_empty());
        assert_eq!((bundle.m(), bundle.n(), bundle.k()), (3, 8, 16));
    }

    #[test]
    fn wide_sensing_matrix_is_rejected() {
        let err = SensingMatrix::new(DMatrix::from_element(8, 8, 1.0)).unwrap_err();
        assert!(err.to_string().contains("m must be < n"), "{err}");
    }

    #[test]
    fn validate_reports_m_ge_n() {
        let mut bundle = valid_bundle(3, 8, 16);
        bundle.phi = SensingMatrix::from_matrix_unchecked(DMatrix::from_element(8, 8, 1.0));
        let violations = validate_bundle(&bundle);
        assert!(violations.iter().any(|v| v == "m must be < n"), "{violations:?}");
    }

    #[test]
    fn validate_reports_dimension_mismatch() {
        let mut bundle = valid_bundle(3, 8, 16);
        bundle.phi = SensingMatrix::from_matrix_unchecked(DMatrix::from_element(3, 6, 0.5));
        let violations = validate_bundle(&bundle);
        assert!(
            violations.iter().any(|v| v.contains("dimension mismatch")),
            "{violations:?}"
        );
    }

    #[test]
    fn validate_reports_zero_norm_atom() {
        let mut atoms = unit_columns(8, 16);
        atoms.column_mut(3).fill(0.0);
        let mut bundle = valid_bundle(3, 8, 16);
        bundle.psi = Dictionary::from_matrix_unchecked(atoms);
        let violations = validate_bundle(&bundle);
        assert!(violations.iter().any(|v| v == "zero-norm atom at index 3"), "{violations:?}");
    }

    #[test]
    fn validate_reports_overlong_atom_and_bad_delta() {
        let mut atoms = unit_columns(8, 16);
        atoms.column_mut(0).fill(0.9);
        let mut bundle = valid_bundle(3, 8, 16);
        bundle.psi = Dictionary::from_matrix_unchecked(atoms);
        bundle.achieved_delta = f64::NAN;
        let violations = validate_bundle(&bundle);
        assert!(violations.iter().any(|v| v == "atom norm exceeds 1 at index 0"), "{violations:?}");
        assert!(violations.iter().any(|v| v.contains("achieved_delta")), "{violations:?}");
    }

    #[test]
    fn validate_reports_unknown_version_without_panicking() {
        let mut bundle = valid_bundle(3, 8, 16);
        bundle.format_version = 9;
        let violations = validate_bundle(&bundle);
        assert!(violations.iter().any(|v| v.contains("unsupported format version 9")), "{violations:?}");
    }

    #[test]
    fn validate_reports_all_zero_sensing_row() {
        let mut rows = DMatrix::from_element(3, 8, 0.5);
        rows.row_mut(1).fill(0.0);
        let mut bundle = valid_bundle(3, 8, 16);
        bundle.phi = SensingMatrix::from_matrix_unchecked(rows);
        let violations = validate_bundle(&bundle);
        assert!(violations.iter().any(|v| v.contains("all-zero row at index 1")), "{violations:?}");
    }

    #[test]
    fn window_rejects_non_finite_samples() {
        let err = SignalWindow::from_slice(&[1.0, f64::INFINITY], 0).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn sparse_code_support_lists_nonzeros_in_order() {
        let code = SparseCode::new(DVector::from_column_slice(&[0.0, 2.0, 0.0, -1.5])).unwrap();
        assert_eq!(code.support(), vec![(1, 2.0), (3, -1.5)]);
        assert_eq!(code.nnz(), 2);
    }
}
