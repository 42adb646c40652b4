//! Reference designs the trained pipeline is benchmarked against: random
//! Gaussian sensing and a fixed DCT plus Daubechies-4 wavelet dictionary.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Dictionary, SensingMatrix};
use crate::rng::SeededRng;
use crate::scalar::Real;

/// Decomposition depth used by [`dct_dwt_dictionary`].
pub const DEFAULT_DWT_LEVELS: usize = 4;

/// Random sensing matrix with i.i.d. `N(0, 1/m)` entries, drawn row by row
/// from the seeded stream. The `1/m` variance puts measurement energy on
/// the scale of signal energy, the standard normalization for Gaussian
/// compressive sensing.
pub fn gaussian_phi<T: Real>(m: usize, n: usize, seed: u64) -> Result<SensingMatrix<T>> {
    if m == 0 || m >= n {
        return Err(Error::InvalidInput("m must be < n".into()));
    }
    let mut rng = SeededRng::new(seed);
    let scale = T::of(1.0 / (m as f64).sqrt());
    let mut phi = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            phi[(i, j)] = rng.standard_normal::<T>() * scale;
        }
    }
    SensingMatrix::new(phi)
}

/// Orthonormal DCT-II basis: column `j` holds the frequency-`j` cosine,
/// entry `(i, j) = c_j cos(pi (2i+1) j / (2n))` with `c_0 = sqrt(1/n)` and
/// `c_j = sqrt(2/n)` otherwise.
pub fn dct_basis<T: Real>(n: usize) -> Result<DMatrix<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("basis size must be positive".into()));
    }
    let mut basis = DMatrix::zeros(n, n);
    for j in 0..n {
        let scale = if j == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            let angle = std::f64::consts::PI * (2 * i + 1) as f64 * j as f64 / (2.0 * n as f64);
            basis[(i, j)] = T::of(scale * angle.cos());
        }
    }
    Ok(basis)
}

// Daubechies-4 analysis filters; the detail filter is the alternating-sign
// reversal of the scaling filter.
fn d4_filters() -> ([f64; 4], [f64; 4]) {
    let s = 4.0 * 2.0f64.sqrt();
    let r3 = 3.0f64.sqrt();
    let h = [(1.0 + r3) / s, (3.0 + r3) / s, (3.0 - r3) / s, (1.0 - r3) / s];
    let g = [h[3], -h[2], h[1], -h[0]];
    (h, g)
}

/// One synthesis (inverse) step with periodic boundaries: interleaves an
/// approximation and a detail band back into a signal of twice the length.
fn d4_synthesis_step<T: Real>(approx: &[T], detail: &[T]) -> Vec<T> {
    let half = approx.len();
    let n = 2 * half;
    let (h, g) = d4_filters();
    let h: Vec<T> = h.iter().map(|v| T::of(*v)).collect();
    let g: Vec<T> = g.iter().map(|v| T::of(*v)).collect();
    let mut x = vec![T::zero(); n];
    for i in 0..half {
        for t in 0..4 {
            let idx = (2 * i + t) % n;
            x[idx] += approx[i] * h[t] + detail[i] * g[t];
        }
    }
    x
}

/// Orthonormal Daubechies-4 synthesis matrix with periodic boundaries.
///
/// Columns are indexed by the usual multiresolution layout: the deepest
/// approximation band first, then detail bands from coarsest to finest.
/// Requires `n` to be a power of two and `1 <= levels <= log2(n)`.
pub fn dwt_basis<T: Real>(n: usize, levels: usize) -> Result<DMatrix<T>> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!("wavelet basis needs a power-of-two size, got {n}")));
    }
    let max_levels = n.trailing_zeros() as usize;
    if levels == 0 || levels > max_levels {
        return Err(Error::InvalidInput(format!(
            "wavelet levels must be in 1..={max_levels} for n={n}, got {levels}"
        )));
    }
    let mut basis = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut coeffs = vec![T::zero(); n];
        coeffs[j] = T::one();
        let column = d4_inverse(&coeffs, levels);
        for i in 0..n {
            basis[(i, j)] = column[i];
        }
    }
    Ok(basis)
}

/// Full inverse transform of a coefficient vector in multiresolution
/// layout `[a_L | d_L | d_{L-1} | ... | d_1]`.
fn d4_inverse<T: Real>(coeffs: &[T], levels: usize) -> Vec<T> {
    let n = coeffs.len();
    let coarsest = n >> levels;
    let mut approx = coeffs[..coarsest].to_vec();
    let mut band_start = coarsest;
    let mut band_len = coarsest;
    for _ in 0..levels {
        let detail = &coeffs[band_start..band_start + band_len];
        approx = d4_synthesis_step(&approx, detail);
        band_start += band_len;
        band_len *= 2;
    }
    approx
}

/// Fixed benchmark dictionary: DCT basis and 4-level D4 wavelet basis side
/// by side, `n x 2n`, every atom unit norm.
pub fn dct_dwt_dictionary<T: Real>(n: usize) -> Result<Dictionary<T>> {
    let dct = dct_basis::<T>(n)?;
    let dwt = dwt_basis::<T>(n, DEFAULT_DWT_LEVELS)?;
    let mut atoms = DMatrix::zeros(n, 2 * n);
    atoms.view_mut((0, 0), (n, n)).copy_from(&dct);
    atoms.view_mut((0, n), (n, n)).copy_from(&dwt);
    Dictionary::new(atoms)
}
