//! Binary persistence for bundles, window sets, and measurement sets.
//!
//! Three little-endian container formats, each `magic | version u32 | header
//! | payload`:
//!
//! * `DDCS` bundle: `seed u64 | n u32 | m u32 | k u32 | achieved_delta f64`,
//!   then the sensing matrix and dictionary as dimensioned blocks
//!   (`rows u32 | cols u32 | rows*cols f64 row-major`).
//! * `DDCW` window set: `n u32 | count u32 | count*n f64 row-major`.
//! * `DDCM` measurement set: `m u32 | count u32 | count*m f64 row-major`.
//!
//! Loads re-validate everything they parse: a file that decodes but violates
//! bundle invariants is rejected, so no code path can obtain an invalid
//! bundle through this module. All writes go through [`write_atomic`], which
//! stages into a sibling temp file and renames, so a crashed or failed write
//! never leaves a partial artifact at the destination.

use std::cell::Cell;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{
    validate_bundle, Dictionary, MeasurementVector, SensingMatrix, SignalWindow, TrainedBundle,
    BUNDLE_FORMAT_VERSION,
};

const BUNDLE_MAGIC: &[u8; 4] = b"DDCS";
const WINDOWS_MAGIC: &[u8; 4] = b"DDCW";
const MEASUREMENTS_MAGIC: &[u8; 4] = b"DDCM";

thread_local! {
    // Test seam: forces the staged write to fail before the rename so the
    // cleanup path can be exercised deterministically.
    static FAIL_BEFORE_RENAME: Cell<bool> = const { Cell::new(false) };
}

#[cfg(test)]
fn fail_next_rename() {
    FAIL_BEFORE_RENAME.with(|f| f.set(true));
}

/// Writes `bytes` to `path` via a sibling temp file and an atomic rename.
/// On any failure the temp file is removed and `path` is left untouched.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);

    let staged = fs::write(&tmp, bytes).map_err(|e| Error::cannot_write(path, e));
    let staged = staged.and_then(|()| {
        if FAIL_BEFORE_RENAME.with(|f| f.replace(false)) {
            Err(Error::cannot_write(
                path,
                std::io::Error::other("injected failure before rename"),
            ))
        } else {
            Ok(())
        }
    });
    let renamed = staged.and_then(|()| fs::rename(&tmp, path).map_err(|e| Error::cannot_write(path, e)));
    if renamed.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    renamed
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn magic(&mut self, magic: &[u8; 4]) -> &mut Self {
        self.buf.extend_from_slice(magic);
        self
    }

    fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    fn matrix_block(&mut self, m: &DMatrix<f64>) -> &mut Self {
        self.u32(m.nrows() as u32).u32(m.ncols() as u32);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.f64(m[(i, j)]);
            }
        }
        self
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < len {
            return Err(Error::Format("truncated payload".into()));
        }
        let slice = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn magic(&mut self, expected: &[u8; 4], kind: &str) -> Result<()> {
        if self.buf.len() < 4 || &self.buf[..4] != expected {
            return Err(Error::Format(format!("not a {kind} file")));
        }
        self.pos = 4;
        Ok(())
    }

    fn version(&mut self) -> Result<u32> {
        let v = self.u32()?;
        if v != BUNDLE_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {v}")));
        }
        Ok(v)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix_block(&mut self, expect_rows: usize, expect_cols: usize, what: &str) -> Result<DMatrix<f64>> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        if rows != expect_rows || cols != expect_cols {
            return Err(Error::Format(format!(
                "dimension mismatch ({what} block is {rows}x{cols}, header says {expect_rows}x{expect_cols})"
            )));
        }
        let raw = self.take(rows * cols * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format("trailing data after payload".into()));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::cannot_open(path, e))
}

/// Serializes a validated bundle to `path` atomically.
pub fn save_bundle(bundle: &TrainedBundle<f64>, path: &Path) -> Result<()> {
    let violations = validate_bundle(bundle);
    if !violations.is_empty() {
        return Err(Error::InvalidBundle(violations));
    }
    let mut w = Writer::new();
    w.magic(BUNDLE_MAGIC)
        .u32(bundle.format_version)
        .u64(bundle.seed)
        .u32(bundle.n() as u32)
        .u32(bundle.m() as u32)
        .u32(bundle.k() as u32)
        .f64(bundle.achieved_delta)
        .matrix_block(bundle.phi.matrix())
        .matrix_block(bundle.psi.atoms());
    write_atomic(path, &w.buf)
}

/// Loads and fully re-validates a bundle.
pub fn load_bundle(path: &Path) -> Result<TrainedBundle<f64>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes);
    r.magic(BUNDLE_MAGIC, "DDCS")?;
    let version = r.version()?;
    let seed = r.u64()?;
    let n = r.u32()? as usize;
    let m = r.u32()? as usize;
    let k = r.u32()? as usize;
    let achieved_delta = r.f64()?;
    let phi = r.matrix_block(m, n, "sensing matrix")?;
    let psi = r.matrix_block(n, k, "dictionary")?;
    r.finish()?;

    let bundle = TrainedBundle {
        phi: SensingMatrix::from_matrix_unchecked(phi),
        psi: Dictionary::from_matrix_unchecked(psi),
        achieved_delta,
        seed,
        format_version: version,
    };
    let violations = validate_bundle(&bundle);
    if !violations.is_empty() {
        return Err(Error::InvalidBundle(violations));
    }
    Ok(bundle)
}

/// Serializes a non-empty set of equal-length windows to `path` atomically.
///
/// Window source offsets are not persisted; see [`load_windows`].
pub fn save_windows(windows: &[SignalWindow<f64>], path: &Path) -> Result<()> {
    let first = windows
        .first()
        .ok_or_else(|| Error::InvalidInput("no windows to save".into()))?;
    let n = first.len();
    if windows.iter().any(|w| w.len() != n) {
        return Err(Error::InvalidInput("dimension mismatch (windows have differing lengths)".into()));
    }
    let mut w = Writer::new();
    w.magic(WINDOWS_MAGIC)
        .u32(BUNDLE_FORMAT_VERSION)
        .u32(n as u32)
        .u32(windows.len() as u32);
    for window in windows {
        for v in window.samples().iter() {
            w.f64(*v);
        }
    }
    write_atomic(path, &w.buf)
}

/// Loads a window set. The file does not carry source offsets, so loaded
/// windows are tagged with their ordinal position in the file instead.
pub fn load_windows(path: &Path) -> Result<Vec<SignalWindow<f64>>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes);
    r.magic(WINDOWS_MAGIC, "DDCW")?;
    r.version()?;
    let n = r.u32()? as usize;
    let count = r.u32()? as usize;
    if n == 0 {
        return Err(Error::Format("window length must be positive".into()));
    }
    let mut windows = Vec::with_capacity(count);
    for i in 0..count {
        let raw = r.take(n * 8)?;
        let samples: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        windows.push(SignalWindow::new(DVector::from_vec(samples), i)?);
    }
    r.finish()?;
    Ok(windows)
}

/// Serializes a non-empty set of equal-length measurement vectors to `path`
/// atomically.
pub fn save_measurements(measurements: &[MeasurementVector<f64>], path: &Path) -> Result<()> {
    let first = measurements
        .first()
        .ok_or_else(|| Error::InvalidInput("no measurements to save".into()))?;
    let m = first.len();
    if measurements.iter().any(|y| y.len() != m) {
        return Err(Error::InvalidInput("dimension mismatch (measurements have differing lengths)".into()));
    }
    let mut w = Writer::new();
    w.magic(MEASUREMENTS_MAGIC)
        .u32(BUNDLE_FORMAT_VERSION)
        .u32(m as u32)
        .u32(measurements.len() as u32);
    for y in measurements {
        for v in y.values().iter() {
            w.f64(*v);
        }
    }
    write_atomic(path, &w.buf)
}

/// Loads a measurement set.
pub fn load_measurements(path: &Path) -> Result<Vec<MeasurementVector<f64>>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes);
    r.magic(MEASUREMENTS_MAGIC, "DDCM")?;
    r.version()?;
    let m = r.u32()? as usize;
    let count = r.u32()? as usize;
    if m == 0 {
        return Err(Error::Format("measurement length must be positive".into()));
    }
    let mut measurements = Vec::with_capacity(count);
    for _ in 0..count {
        let raw = r.take(m * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        measurements.push(MeasurementVector::new(DVector::from_vec(values))?);
    }
    r.finish()?;
    Ok(measurements)
}
