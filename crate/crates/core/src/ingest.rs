//! Recording ingest: parsing, detrending, denoising, and windowing.
//!
//! The preprocessing chain is the standard one for ambulatory ECG: a
//! two-stage moving-median filter estimates and removes baseline wander,
//! a zero-phase windowed-sinc lowpass strips high-frequency noise, and the
//! cleaned recording is cut into fixed-length windows for training.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::SignalWindow;
use crate::scalar::Real;

/// A single-channel recording at a known sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording<T: Real> {
    pub samples: Vec<T>,
    /// Sampling rate in Hz.
    pub sampling_rate: f64,
}

/// Input encodings accepted by [`read_signal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    /// One decimal sample per line; a leading `sample` header line is
    /// tolerated.
    Csv,
    /// Little-endian i16 pairs scaled by 1/2048, the common storage of
    /// 11-bit ECG front ends.
    RawI16Le,
}

impl FromStr for SignalFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(SignalFormat::Csv),
            "raw-i16le" => Ok(SignalFormat::RawI16Le),
            other => Err(Error::InvalidInput(format!(
                "unknown signal format {other:?} (expected csv or raw-i16le)"
            ))),
        }
    }
}

impl fmt::Display for SignalFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalFormat::Csv => "csv",
            SignalFormat::RawI16Le => "raw-i16le",
        })
    }
}

/// Knobs for the full ingest chain. Defaults follow common ECG practice at
/// 360 Hz: 0.2 s / 0.6 s median windows, 40 Hz cutoff, order-64 FIR,
/// 128-sample non-overlapping windows, and a 3000/600 train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// First median window, seconds. Tracks the P-QRS-T complex scale.
    pub baseline_short_s: f64,
    /// Second median window, seconds. Tracks the beat-to-beat scale.
    pub baseline_long_s: f64,
    /// Lowpass cutoff, Hz. Must stay below the Nyquist rate.
    pub lowpass_cutoff_hz: f64,
    /// FIR order (tap count minus one). Must be even so the group delay is
    /// an integer number of samples.
    pub fir_order: usize,
    /// Window length in samples.
    pub window_length: usize,
    /// Hop between consecutive windows in samples.
    pub stride: usize,
    pub train_count: usize,
    pub test_count: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            baseline_short_s: 0.2,
            baseline_long_s: 0.6,
            lowpass_cutoff_hz: 40.0,
            fir_order: 64,
            window_length: 128,
            stride: 128,
            train_count: 3000,
            test_count: 600,
        }
    }
}

impl PreprocessConfig {
    fn validate(&self) -> Result<()> {
        if !(self.baseline_short_s > 0.0 && self.baseline_long_s > 0.0) {
            return Err(Error::InvalidInput("baseline windows must be positive".into()));
        }
        if !(self.lowpass_cutoff_hz > 0.0) {
            return Err(Error::InvalidInput("lowpass cutoff must be positive".into()));
        }
        if self.fir_order < 2 || self.fir_order % 2 != 0 {
            return Err(Error::InvalidInput("fir_order must be even and >= 2".into()));
        }
        if self.window_length < 2 {
            return Err(Error::InvalidInput("window_length must be >= 2".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidInput("stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Reads a recording from disk. `sampling_rate` is supplied by the caller;
/// neither format carries one.
pub fn read_signal<T: Real>(path: &Path, format: SignalFormat, sampling_rate: f64) -> Result<RawRecording<T>> {
    if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
        return Err(Error::InvalidInput("sampling rate must be positive".into()));
    }
    let samples = match format {
        SignalFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::cannot_open(path, e))?;
            parse_csv(&text)?
        }
        SignalFormat::RawI16Le => {
            let bytes = fs::read(path).map_err(|e| Error::cannot_open(path, e))?;
            parse_raw_i16le(&bytes)?
        }
    };
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty recording".into()));
    }
    Ok(RawRecording { samples, sampling_rate })
}

fn parse_csv<T: Real>(text: &str) -> Result<Vec<T>> {
    let mut samples = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        // A lone header line is tolerated, but only as the very first line.
        if idx == 0 && line.eq_ignore_ascii_case("sample") {
            continue;
        }
        let value: f64 = line
            .parse()
            .map_err(|_| Error::Parse { line: idx + 1, detail: format!("{line:?}") })?;
        if !value.is_finite() {
            return Err(Error::Parse { line: idx + 1, detail: format!("{line:?} is not finite") });
        }
        samples.push(T::of(value));
    }
    Ok(samples)
}

fn parse_raw_i16le<T: Real>(bytes: &[u8]) -> Result<Vec<T>> {
    if bytes.len() % 2 != 0 {
        return Err(Error::Format("odd byte count in raw-i16le input".into()));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|pair| {
            let v = i16::from_le_bytes([pair[0], pair[1]]);
            T::of(f64::from(v) / 2048.0)
        })
        .collect())
}

/// Mirror reflection about the end points: index -j maps to j, index
/// len-1+j maps to len-1-j.
fn reflect(i: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = i;
    // At most two folds are ever needed for the radii used here, but loop
    // for full generality.
    loop {
        if i < 0 {
            i = -i;
        } else if i >= len {
            i = 2 * len - 2 - i;
        } else {
            return i as usize;
        }
    }
}

/// Converts a window duration to an odd sample count (half-up rounding,
/// then +1 if even) so the median is always a single sample.
fn odd_window(duration_s: f64, sampling_rate: f64) -> usize {
    let w = (duration_s * sampling_rate).round() as usize;
    let w = w.max(1);
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Moving median with mirror boundary handling. Keeps the current window in
/// sorted order and slides it, so each step is one remove and one binary
/// insert.
fn moving_median<T: Real>(x: &[T], window: usize) -> Result<Vec<T>> {
    let radius = window / 2;
    if x.len() <= radius {
        return Err(Error::InvalidInput(format!(
            "recording too short for baseline removal ({} samples, median window {window})",
            x.len()
        )));
    }
    let at = |i: isize| x[reflect(i, x.len())];
    let mut sorted: Vec<T> = (-(radius as isize)..=radius as isize).map(at).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));

    let mut out = Vec::with_capacity(x.len());
    out.push(sorted[radius]);
    for i in 1..x.len() as isize {
        let leaving = at(i - 1 - radius as isize);
        let entering = at(i + radius as isize);
        let pos = sorted
            .binary_search_by(|v| v.partial_cmp(&leaving).expect("finite samples"))
            .expect("leaving sample present in window");
        sorted.remove(pos);
        let pos = match sorted.binary_search_by(|v| v.partial_cmp(&entering).expect("finite samples")) {
            Ok(p) | Err(p) => p,
        };
        sorted.insert(pos, entering);
        out.push(sorted[radius]);
    }
    Ok(out)
}

/// Removes baseline wander with the two-stage moving-median estimator: a
/// short median pass then a long median pass over its output form the
/// baseline estimate, which is subtracted from the input. Median filters
/// leave flat segments and slow trends intact (they pass into the baseline)
/// while beats, being narrow, survive subtraction unattenuated.
pub fn remove_baseline<T: Real>(recording: &RawRecording<T>, cfg: &PreprocessConfig) -> Result<RawRecording<T>> {
    cfg.validate()?;
    let w1 = odd_window(cfg.baseline_short_s, recording.sampling_rate);
    let w2 = odd_window(cfg.baseline_long_s, recording.sampling_rate);
    let stage1 = moving_median(&recording.samples, w1)?;
    let baseline = moving_median(&stage1, w2)?;
    let samples = recording
        .samples
        .iter()
        .zip(baseline.iter())
        .map(|(x, b)| *x - *b)
        .collect();
    Ok(RawRecording { samples, sampling_rate: recording.sampling_rate })
}

/// Hamming-windowed sinc taps, normalized to unit DC gain.
fn lowpass_taps(order: usize, cutoff_hz: f64, sampling_rate: f64) -> Vec<f64> {
    let half = order as f64 / 2.0;
    let fc = cutoff_hz / sampling_rate;
    let mut taps: Vec<f64> = (0..=order)
        .map(|t| {
            let s = t as f64 - half;
            let sinc = if s == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * s).sin() / (std::f64::consts::PI * s)
            };
            let hamming = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * t as f64 / order as f64).cos();
            sinc * hamming
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for tap in &mut taps {
        *tap /= sum;
    }
    taps
}

/// Zero-phase FIR lowpass: symmetric windowed-sinc taps applied with the
/// group delay compensated, mirror padding at the edges. A constant input
/// passes through exactly (unit DC gain by construction).
pub fn lowpass_filter<T: Real>(recording: &RawRecording<T>, cfg: &PreprocessConfig) -> Result<RawRecording<T>> {
    cfg.validate()?;
    let nyquist = recording.sampling_rate / 2.0;
    if cfg.lowpass_cutoff_hz >= nyquist {
        return Err(Error::InvalidInput(format!(
            "lowpass cutoff {} Hz must be below the Nyquist rate {} Hz",
            cfg.lowpass_cutoff_hz, nyquist
        )));
    }
    let len = recording.samples.len();
    if len < 2 {
        return Err(Error::InvalidInput("recording too short to filter".into()));
    }
    let taps: Vec<T> = lowpass_taps(cfg.fir_order, cfg.lowpass_cutoff_hz, recording.sampling_rate)
        .into_iter()
        .map(T::of)
        .collect();
    let half = (cfg.fir_order / 2) as isize;
    let x = &recording.samples;
    let samples = (0..len as isize)
        .map(|i| {
            let mut acc = T::zero();
            for (t, tap) in taps.iter().enumerate() {
                acc += *tap * x[reflect(i + half - t as isize, len)];
            }
            acc
        })
        .collect();
    Ok(RawRecording { samples, sampling_rate: recording.sampling_rate })
}

/// Cuts the recording into fixed-length windows at offsets `0, stride,
/// 2*stride, ...`, keeping only complete windows. Each window remembers its
/// source offset.
pub fn window_signal<T: Real>(recording: &RawRecording<T>, cfg: &PreprocessConfig) -> Result<Vec<SignalWindow<T>>> {
    cfg.validate()?;
    let n = cfg.window_length;
    let mut windows = Vec::new();
    let mut offset = 0usize;
    while offset + n <= recording.samples.len() {
        windows.push(SignalWindow::from_slice(&recording.samples[offset..offset + n], offset)?);
        offset += cfg.stride;
    }
    Ok(windows)
}

/// Full ingest chain: detrend, denoise, window.
pub fn preprocess<T: Real>(recording: &RawRecording<T>, cfg: &PreprocessConfig) -> Result<Vec<SignalWindow<T>>> {
    let detrended = remove_baseline(recording, cfg)?;
    let filtered = lowpass_filter(&detrended, cfg)?;
    window_signal(&filtered, cfg)
}

/// Splits windows into a training prefix and the test block that follows
/// it, in recording order. Time-ordered splitting keeps evaluation windows
/// strictly after everything trained on.
pub fn split_train_test<T: Real>(
    windows: &[SignalWindow<T>],
    cfg: &PreprocessConfig,
) -> Result<(Vec<SignalWindow<T>>, Vec<SignalWindow<T>>)> {
    let needed = cfg.train_count + cfg.test_count;
    if windows.len() < needed {
        return Err(Error::InvalidInput(format!(
            "insufficient windows ({} available, {needed} required)",
            windows.len()
        )));
    }
    let train = windows[..cfg.train_count].to_vec();
    let test = windows[cfg.train_count..needed].to_vec();
    Ok((train, test))
}
