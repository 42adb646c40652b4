//! Deterministic quasi-periodic test-signal generator.
//!
//! Produces an ECG-shaped waveform: a sum of five Gaussian bumps per beat
//! (the usual P, Q, R, S, T morphology), beat-to-beat timing and amplitude
//! jitter, slow sinusoidal baseline wander, and white noise. Everything is
//! driven by split substreams of one seed, so the beat schedule, the wander
//! and the noise are independently reproducible and a longer synthesis is a
//! bitwise extension of a shorter one.

use crate::error::{Error, Result};
use crate::ingest::RawRecording;
use crate::rng::SeededRng;
use crate::scalar::Real;

/// Amplitude, center offset from the beat anchor, and width of one bump,
/// all in seconds except the unitless amplitude.
const BUMPS: [(f64, f64, f64); 5] = [
    (0.11, -0.20, 0.022),
    (-0.14, -0.028, 0.009),
    (1.0, 0.0, 0.010),
    (-0.20, 0.030, 0.011),
    (0.28, 0.25, 0.05),
];

/// Half-width of the support window around each beat anchor; beyond it the
/// widest bump has decayed past four standard deviations.
const BEAT_SUPPORT_S: f64 = 0.45;

#[derive(Debug, Clone)]
pub struct EcgSynthConfig {
    pub sampling_rate: f64,
    /// Mean beat-to-beat interval.
    pub mean_rr_s: f64,
    /// Fractional standard deviation of the interval jitter.
    pub rr_jitter: f64,
    /// Fractional standard deviation of the per-beat amplitude jitter.
    pub amplitude_jitter: f64,
    /// Peak amplitude of the slow two-tone baseline wander.
    pub baseline_amplitude: f64,
    /// Standard deviation of the additive white noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for EcgSynthConfig {
    fn default() -> Self {
        EcgSynthConfig {
            sampling_rate: 360.0,
            mean_rr_s: 0.8,
            rr_jitter: 0.05,
            amplitude_jitter: 0.08,
            baseline_amplitude: 0.2,
            noise_sd: 0.01,
            seed: 42,
        }
    }
}

impl EcgSynthConfig {
    fn validate(&self) -> Result<()> {
        if !(self.sampling_rate > 0.0 && self.sampling_rate.is_finite()) {
            return Err(Error::InvalidInput("sampling rate must be positive".into()));
        }
        if !(self.mean_rr_s > 0.0 && self.mean_rr_s.is_finite()) {
            return Err(Error::InvalidInput("mean rr interval must be positive".into()));
        }
        if self.rr_jitter < 0.0
            || self.amplitude_jitter < 0.0
            || self.baseline_amplitude < 0.0
            || self.noise_sd < 0.0
        {
            return Err(Error::InvalidInput("jitter and noise parameters must be >= 0".into()));
        }
        Ok(())
    }
}

/// Generates `sample_count` samples of the configured waveform.
pub fn synthesize_ecg<T: Real>(config: &EcgSynthConfig, sample_count: usize) -> Result<RawRecording<T>> {
    config.validate()?;
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample_count must be >= 1".into()));
    }
    let fs = config.sampling_rate;
    let duration = sample_count as f64 / fs;
    let mut samples = vec![0.0f64; sample_count];

    // Beat schedule and shapes. The first anchor sits half an interval in,
    // so a jitter-free synthesis has its first peak on a known instant.
    let mut beat_rng = SeededRng::substream(config.seed, 0);
    let mut anchor = config.mean_rr_s * 0.5;
    while anchor < duration + BEAT_SUPPORT_S {
        let amp_scale =
            (1.0 + config.amplitude_jitter * beat_rng.standard_normal::<f64>()).clamp(0.6, 1.4);
        let lo = ((anchor - BEAT_SUPPORT_S) * fs).ceil().max(0.0) as usize;
        let hi = (((anchor + BEAT_SUPPORT_S) * fs).floor() as usize).min(sample_count.saturating_sub(1));
        for (i, sample) in samples.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let t = i as f64 / fs - anchor;
            let mut v = 0.0;
            for (a, mu, sigma) in BUMPS {
                let d = (t - mu) / sigma;
                v += a * (-0.5 * d * d).exp();
            }
            *sample += amp_scale * v;
        }
        let rr = config.mean_rr_s
            * (1.0 + config.rr_jitter * beat_rng.standard_normal::<f64>()).clamp(0.5, 1.5);
        anchor += rr;
    }

    // Baseline wander: two slow tones with random frequencies and phases.
    let mut wander_rng = SeededRng::substream(config.seed, 1);
    let f1 = 0.15 + 0.10 * wander_rng.uniform();
    let f2 = 0.25 + 0.10 * wander_rng.uniform();
    let p1 = std::f64::consts::TAU * wander_rng.uniform();
    let p2 = std::f64::consts::TAU * wander_rng.uniform();
    if config.baseline_amplitude > 0.0 {
        for (i, sample) in samples.iter_mut().enumerate() {
            let t = i as f64 / fs;
            *sample += config.baseline_amplitude
                * (0.6 * (std::f64::consts::TAU * f1 * t + p1).sin()
                    + 0.4 * (std::f64::consts::TAU * f2 * t + p2).sin());
        }
    }

    if config.noise_sd > 0.0 {
        let mut noise_rng = SeededRng::substream(config.seed, 2);
        for sample in samples.iter_mut() {
            *sample += config.noise_sd * noise_rng.standard_normal::<f64>();
        }
    }

    Ok(RawRecording { samples: samples.into_iter().map(T::of).collect(), sampling_rate: fs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean_config() -> EcgSynthConfig {
        EcgSynthConfig {
            rr_jitter: 0.0,
            amplitude_jitter: 0.0,
            baseline_amplitude: 0.0,
            noise_sd: 0.0,
            ..EcgSynthConfig::default()
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = EcgSynthConfig::default();
        let a = synthesize_ecg::<f64>(&cfg, 2000).unwrap();
        let b = synthesize_ecg::<f64>(&cfg, 2000).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.sampling_rate, 360.0);
    }

    #[test]
    fn longer_synthesis_extends_a_shorter_one() {
        let cfg = EcgSynthConfig::default();
        let short = synthesize_ecg::<f64>(&cfg, 2000).unwrap();
        let long = synthesize_ecg::<f64>(&cfg, 4000).unwrap();
        assert_eq!(short.samples, &long.samples[..2000]);
    }

    #[test]
    fn different_seeds_differ() {
        let a = synthesize_ecg::<f64>(&EcgSynthConfig::default(), 1000).unwrap();
        let b = synthesize_ecg::<f64>(&EcgSynthConfig { seed: 43, ..EcgSynthConfig::default() }, 1000)
            .unwrap();
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn jitter_free_peak_lands_on_the_known_instant() {
        // First anchor at mean_rr/2 = 0.4 s, which is exactly sample 144 at
        // 360 Hz. The peak value is 1 plus small neighboring-bump tails.
        let rec = synthesize_ecg::<f64>(&clean_config(), 720).unwrap();
        let peak = rec.samples[144];
        assert!((0.97..=1.03).contains(&peak), "peak {peak}");
        let best = rec
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best % 288, 144, "peak index {best}");
    }

    #[test]
    fn beat_count_tracks_the_configured_rate() {
        // 20 s at 0.8 s per beat: 25 beats, give or take edge effects.
        let rec = synthesize_ecg::<f64>(&EcgSynthConfig::default(), 7200).unwrap();
        let samples = &rec.samples;
        let mut peaks = 0;
        let mut last_peak = -1000i64;
        for i in 1..samples.len() - 1 {
            if samples[i] > 0.55
                && samples[i] >= samples[i - 1]
                && samples[i] >= samples[i + 1]
                && (i as i64 - last_peak) > 100
            {
                peaks += 1;
                last_peak = i as i64;
            }
        }
        assert!((22..=28).contains(&peaks), "{peaks} peaks");
    }

    #[test]
    fn quiet_segments_sit_near_zero_without_wander_or_noise() {
        let rec = synthesize_ecg::<f64>(&clean_config(), 720).unwrap();
        // Midway between beats (anchor 0.4 s, next 1.2 s): t = 0.8 s is
        // sample 288, more than 0.35 s from both anchors.
        let v = rec.samples[288];
        assert!(v.abs() < 0.02, "inter-beat value {v}");
    }

    #[test]
    fn noise_and_wander_raise_background_energy() {
        let clean = synthesize_ecg::<f64>(&clean_config(), 1440).unwrap();
        let noisy = synthesize_ecg::<f64>(&EcgSynthConfig::default(), 1440).unwrap();
        let energy = |xs: &[f64]| xs.iter().map(|v| v * v).sum::<f64>();
        assert!(energy(&noisy.samples) > energy(&clean.samples));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let err = synthesize_ecg::<f64>(&EcgSynthConfig { sampling_rate: 0.0, ..Default::default() }, 10)
            .unwrap_err();
        assert!(err.to_string().contains("sampling rate"), "{err}");
        let err = synthesize_ecg::<f64>(&EcgSynthConfig { noise_sd: -1.0, ..Default::default() }, 10)
            .unwrap_err();
        assert!(err.to_string().contains(">= 0"), "{err}");
        let err = synthesize_ecg::<f64>(&EcgSynthConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("sample_count"), "{err}");
    }

    #[test]
    fn f32_synthesis_tracks_f64() {
        let cfg = EcgSynthConfig::default();
        let a = synthesize_ecg::<f64>(&cfg, 500).unwrap();
        let b = synthesize_ecg::<f32>(&cfg, 500).unwrap();
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert!((x - *y as f64).abs() <= 1e-6);
        }
    }

    fn bundled_sample_text() -> String {
        let cfg = EcgSynthConfig::default();
        let rec = synthesize_ecg::<f64>(&cfg, 57_600).unwrap();
        let mut text = String::with_capacity(rec.samples.len() * 10 + 8);
        text.push_str("sample\n");
        for v in &rec.samples {
            text.push_str(&format!("{v:.6}\n"));
        }
        text
    }

    /// The recording in data/ is exactly what this generator produces with
    /// default parameters; any drift in either is a provenance break.
    #[test]
    fn bundled_sample_matches_the_generator() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ecg_sample.csv");
        let bundled = std::fs::read_to_string(path).unwrap();
        assert_eq!(bundled_sample_text(), bundled, "data/ecg_sample.csv does not match the generator");
    }

    // Regenerates the sample recording bundled in data/. Manual tool, not
    // a test: run with `cargo test ... regenerate_bundled_sample -- --ignored`
    // after changing the generator.
    #[test]
    #[ignore]
    fn regenerate_bundled_sample() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("ecg_sample.csv"), bundled_sample_text()).unwrap();
    }
}
