//! Audio front end: STFT, time-frequency automatic gain control, mel
//! mapping, amplitude compression and the onset detection function.

mod filterbank;
pub mod resample;

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

pub use filterbank::{hz_to_mel, mel_filterbank, mel_to_hz};

pub const SAMPLE_RATE: u32 = 22050;
/// 46.44 ms at 22.05 kHz.
pub const WINDOW: usize = 1024;
pub const HOP: usize = 512;
pub const N_BINS: usize = WINDOW / 2 + 1;
pub const N_MELS: usize = 128;
pub const ONSET_BANDS: usize = 40;
pub const AGC_BANDS: usize = 10;
pub const AGC_TIME_CONSTANT: f64 = 0.5;
pub const AGC_FLOOR: f64 = 1e-8;
pub const DEFAULT_COMPRESSION: f64 = 10.0;

/// Lowest band center of the gain-control layout.
const AGC_F_LO: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidAudio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!("non-finite sample at {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns the clip at the pipeline rate, resampling when needed.
    pub fn to_pipeline_rate(&self) -> AudioClip {
        AudioClip {
            samples: resample::resample(&self.samples, self.sample_rate, SAMPLE_RATE),
            sample_rate: SAMPLE_RATE,
        }
    }
}

/// Magnitude spectrogram, `frames x 513`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub frame_rate: f64,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.nrows()
    }
}

/// Log-compressed mel spectrogram, `frames x 128`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Array2<f64>,
    pub frame_rate: f64,
    pub compression: f64,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnsetFunction {
    pub strength: Vec<f64>,
}

pub fn frame_count(n_samples: usize) -> usize {
    if n_samples < WINDOW {
        0
    } else {
        (n_samples - WINDOW) / HOP + 1
    }
}

fn hann(len: usize) -> Vec<f64> {
    // periodic form, so that 50% overlapped windows sum to a constant
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

pub fn stft(clip: &AudioClip) -> Result<Spectrogram> {
    if clip.sample_rate != SAMPLE_RATE {
        return Err(Error::InvalidAudio(format!(
            "expected {SAMPLE_RATE} Hz input, got {} Hz",
            clip.sample_rate
        )));
    }
    let n = clip.samples.len();
    if n < WINDOW {
        return Err(Error::ClipTooShort {
            samples: n,
            needed: WINDOW,
        });
    }
    let frames = frame_count(n);
    let window = hann(WINDOW);
    let fft = FftPlanner::new().plan_fft_forward(WINDOW);
    let mut buf = vec![Complex::new(0.0, 0.0); WINDOW];
    let mut magnitudes = Array2::zeros((frames, N_BINS));
    for (t, mut row) in magnitudes.rows_mut().into_iter().enumerate() {
        let start = t * HOP;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(clip.samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, m) in row.iter_mut().enumerate() {
            *m = buf[k].norm();
        }
    }
    Ok(Spectrogram {
        magnitudes,
        frame_rate: SAMPLE_RATE as f64 / HOP as f64,
    })
}

/// Per-bin interpolation weights over `AGC_BANDS` log-spaced band centers.
/// Each row (bin) sums to one.
fn agc_band_weights() -> Array2<f64> {
    let nyquist = SAMPLE_RATE as f64 / 2.0;
    let bin_width = nyquist / (N_BINS - 1) as f64;
    let log_lo = AGC_F_LO.ln();
    let log_hi = nyquist.ln();
    let centers: Vec<f64> = (0..AGC_BANDS)
        .map(|b| log_lo + (log_hi - log_lo) * b as f64 / (AGC_BANDS - 1) as f64)
        .collect();
    let mut weights = Array2::zeros((N_BINS, AGC_BANDS));
    for k in 0..N_BINS {
        let f = (k as f64 * bin_width).max(AGC_F_LO).ln();
        let upper = centers.iter().position(|&c| c >= f).unwrap_or(AGC_BANDS - 1);
        if upper == 0 {
            weights[[k, 0]] = 1.0;
        } else {
            let (c0, c1) = (centers[upper - 1], centers[upper]);
            let frac = ((f - c0) / (c1 - c0)).clamp(0.0, 1.0);
            weights[[k, upper - 1]] = 1.0 - frac;
            weights[[k, upper]] = frac;
        }
    }
    weights
}

/// Time-frequency automatic gain control.
///
/// Ten log-spaced sub-bands each track an RMS envelope with a first-order
/// recursive smoother (0.5 s time constant). The per-bin gain is the
/// envelope interpolated across bands; magnitudes are divided by it,
/// with `AGC_FLOOR` guarding silent bands.
pub fn agc(spec: &Spectrogram) -> Spectrogram {
    let weights = agc_band_weights();
    let band_mass = weights.sum_axis(Axis(0));
    let power = spec.magnitudes.mapv(|m| m * m);
    // frames x bands mean power
    let mut band_rms = power.dot(&weights);
    for mut row in band_rms.rows_mut() {
        for (v, mass) in row.iter_mut().zip(band_mass.iter()) {
            *v = (*v / mass).sqrt();
        }
    }

    let decay = (-1.0 / (AGC_TIME_CONSTANT * spec.frame_rate)).exp();
    let mut envelope = band_rms.clone();
    for t in 1..envelope.nrows() {
        for b in 0..AGC_BANDS {
            envelope[[t, b]] = decay * envelope[[t - 1, b]] + (1.0 - decay) * band_rms[[t, b]];
        }
    }

    let gain = envelope.dot(&weights.t());
    let mut magnitudes = spec.magnitudes.clone();
    ndarray::Zip::from(&mut magnitudes)
        .and(&gain)
        .for_each(|m, &g| *m /= g.max(AGC_FLOOR));
    Spectrogram {
        magnitudes,
        frame_rate: spec.frame_rate,
    }
}

/// `frames x 513` to `frames x 128` through the unit-area mel filterbank.
pub fn mel_map(spec: &Spectrogram) -> Array2<f64> {
    let bank = mel_filterbank(N_MELS, N_BINS, SAMPLE_RATE as f64, 0.0, SAMPLE_RATE as f64 / 2.0);
    spec.magnitudes.dot(&bank.t())
}

pub fn log_compress(x: &Array2<f64>, compression: f64, frame_rate: f64) -> Result<MelSpectrogram> {
    if !(compression > 0.0) {
        return Err(Error::Config(format!("compression must be positive, got {compression}")));
    }
    if let Some(((row, col), &value)) = x.indexed_iter().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeMagnitude { row, col, value });
    }
    Ok(MelSpectrogram {
        values: x.mapv(|v| (1.0 + compression * v).log10()),
        frame_rate,
        compression,
    })
}

/// Half-wave rectified spectral flux of energies in 40 mel-spaced sub-bands.
pub fn onset_function(spec: &Spectrogram) -> OnsetFunction {
    let bank = mel_filterbank(
        ONSET_BANDS,
        N_BINS,
        SAMPLE_RATE as f64,
        0.0,
        SAMPLE_RATE as f64 / 2.0,
    );
    let energy = spec.magnitudes.mapv(|m| m * m).dot(&bank.t());
    let mut strength = vec![0.0; energy.nrows()];
    for t in 1..energy.nrows() {
        strength[t] = energy
            .row(t)
            .iter()
            .zip(energy.row(t - 1).iter())
            .map(|(now, before)| (now - before).max(0.0))
            .sum();
    }
    OnsetFunction { strength }
}

/// Full feature front end: STFT, gain control, mel mapping and compression,
/// plus the onset function of the ungained spectrogram.
pub fn featurize(clip: &AudioClip, compression: f64) -> Result<(MelSpectrogram, OnsetFunction)> {
    let spec = stft(clip)?;
    let odf = onset_function(&spec);
    let gained = agc(&spec);
    let mel = log_compress(&mel_map(&gained), compression, spec.frame_rate)?;
    Ok((mel, odf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, SAMPLE_RATE).unwrap()
    }

    fn sine(freq: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / SAMPLE_RATE as f64).sin())
            .collect()
    }

    /// O(N^2) DFT magnitude, independent of rustfft.
    fn reference_dft(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, x) in frame.iter().enumerate() {
                    let a = -2.0 * PI * (k * i) as f64 / n as f64;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    fn argmax(v: impl IntoIterator<Item = f64>) -> usize {
        v.into_iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, x)| if x > bv { (i, x) } else { (bi, bv) })
            .0
    }

    #[test]
    fn silence_gives_one_zero_frame() {
        let s = stft(&clip(vec![0.0; 1024])).unwrap();
        assert_eq!(s.magnitudes.dim(), (1, 513));
        assert!(s.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn frame_count_follows_hop() {
        assert_eq!(stft(&clip(vec![0.0; 2048])).unwrap().n_frames(), 3);
        assert_eq!(frame_count(29 * 22050), 1247);
    }

    #[test]
    fn short_clip_is_rejected() {
        let err = stft(&clip(vec![0.0; 1023])).unwrap_err();
        assert!(err.to_string().starts_with("clip too short"));
    }

    #[test]
    fn bin_centered_sinusoid_peaks_at_its_bin() {
        let window = hann(WINDOW);
        for k in [5usize, 40, 200, 500] {
            let freq = k as f64 * SAMPLE_RATE as f64 / WINDOW as f64;
            let samples = sine(freq, 4096);
            let spec = stft(&clip(samples.clone())).unwrap();
            for t in 0..spec.n_frames() {
                let frame: Vec<f64> = (0..WINDOW).map(|i| samples[t * HOP + i] * window[i]).collect();
                let reference = reference_dft(&frame);
                assert_eq!(argmax(reference.iter().copied()), k);
                assert_eq!(argmax(spec.magnitudes.row(t).iter().copied()), k);
                for (a, b) in spec.magnitudes.row(t).iter().zip(&reference) {
                    assert!((a - b).abs() < 1e-8 * (1.0 + b));
                }
            }
        }
    }

    #[test]
    fn agc_silence_stays_zero() {
        let spec = Spectrogram {
            magnitudes: Array2::zeros((50, N_BINS)),
            frame_rate: 43.0,
        };
        let out = agc(&spec);
        assert!(out.magnitudes.iter().all(|&m| m == 0.0));
    }

    fn noise_spectrogram(frames: usize, scale: f64, seed: u64) -> Spectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Spectrogram {
            magnitudes: Array2::from_shape_fn((frames, N_BINS), |_| scale * rng.random::<f64>()),
            frame_rate: SAMPLE_RATE as f64 / HOP as f64,
        }
    }

    #[test]
    fn agc_is_gain_invariant_after_two_seconds() {
        let spec = noise_spectrogram(200, 3.0, 1);
        let loud = Spectrogram {
            magnitudes: spec.magnitudes.mapv(|m| m * 10.0),
            frame_rate: spec.frame_rate,
        };
        let (a, b) = (agc(&spec), agc(&loud));
        let tail_start = (2.0 * spec.frame_rate).ceil() as usize;
        for t in tail_start..200 {
            for k in 0..N_BINS {
                let (x, y) = (a.magnitudes[[t, k]], b.magnitudes[[t, k]]);
                assert!((x - y).abs() <= 0.01 * x.abs().max(1e-12), "({t},{k}) {x} vs {y}");
            }
        }
    }

    #[test]
    fn agc_reduces_band_variance_of_stationary_noise() {
        let spec = noise_spectrogram(300, 20.0, 2);
        let out = agc(&spec);
        let weights = agc_band_weights();
        let band_var = |m: &Array2<f64>| -> Vec<f64> {
            let bands = m.dot(&weights);
            bands.var_axis(Axis(0), 1.0).to_vec()
        };
        for (vin, vout) in band_var(&spec.magnitudes).iter().zip(band_var(&out.magnitudes)) {
            assert!(vout < *vin, "{vout} !< {vin}");
        }
    }

    #[test]
    fn agc_weights_partition_unity() {
        let w = agc_band_weights();
        for row in w.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mel_map_of_zero_is_zero() {
        let spec = Spectrogram {
            magnitudes: Array2::zeros((3, N_BINS)),
            frame_rate: 43.0,
        };
        assert!(mel_map(&spec).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mel_filters_are_contiguous_unimodal_and_nonnegative() {
        let bank = mel_filterbank(N_MELS, N_BINS, SAMPLE_RATE as f64, 0.0, SAMPLE_RATE as f64 / 2.0);
        for (m, row) in bank.rows().into_iter().enumerate() {
            assert!(row.iter().all(|&w| w >= 0.0));
            let support: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(k, _)| k)
                .collect();
            assert!(!support.is_empty(), "filter {m} is empty");
            assert_eq!(support.last().unwrap() - support[0] + 1, support.len(), "filter {m} has gaps");
            let peak = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let n_peak = row.iter().filter(|&&w| w == peak).count();
            assert_eq!(n_peak, 1, "filter {m} has {n_peak} maxima");
            let p = argmax(row.iter().copied());
            assert!(row.iter().take(p + 1).collect::<Vec<_>>().windows(2).all(|w| w[0] <= w[1]));
            assert!(row.iter().skip(p).collect::<Vec<_>>().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn flat_spectrum_maps_to_filter_areas() {
        let spec = Spectrogram {
            magnitudes: Array2::ones((2, N_BINS)),
            frame_rate: 43.0,
        };
        let bank = mel_filterbank(N_MELS, N_BINS, SAMPLE_RATE as f64, 0.0, SAMPLE_RATE as f64 / 2.0);
        let out = mel_map(&spec);
        for m in 0..N_MELS {
            // direct summation of the filter weights
            let area: f64 = bank.row(m).iter().sum();
            assert!((out[[0, m]] - area).abs() < 1e-6);
            assert!((out[[0, m]] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn log_compress_exact_values() {
        let x = ndarray::array![[0.0, 0.9, 0.1]];
        let mel = log_compress(&x, 10.0, 43.0).unwrap();
        assert_eq!(mel.values[[0, 0]], 0.0);
        assert!((mel.values[[0, 1]] - 1.0).abs() < 1e-15);
        assert!((mel.values[[0, 2]] - 0.30103).abs() < 1e-5);
    }

    #[test]
    fn log_compress_rejects_negative() {
        let x = ndarray::array![[0.0, -0.5]];
        let err = log_compress(&x, 10.0, 43.0).unwrap_err();
        assert!(err.to_string().starts_with("negative magnitude"));
    }

    #[test]
    fn onset_of_silence_is_zero() {
        let spec = stft(&clip(vec![0.0; 8192])).unwrap();
        assert!(onset_function(&spec).strength.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn broadband_impulse_is_global_onset_max() {
        let mut spec = noise_spectrogram(60, 0.01, 3);
        let k = 37;
        spec.magnitudes.row_mut(k).fill(5.0);
        let odf = onset_function(&spec);
        assert_eq!(odf.strength[0], 0.0);
        assert_eq!(argmax(odf.strength.iter().copied()), k);
    }

    #[test]
    fn steady_tone_has_no_flux_after_onset() {
        let onset_frame = 10;
        let mut samples = vec![0.0; onset_frame * HOP];
        samples.extend(sine(440.0, 60 * HOP));
        let spec = stft(&clip(samples)).unwrap();
        let odf = onset_function(&spec);
        let peak = odf.strength.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 0.0);
        for t in onset_frame + 1..odf.strength.len() {
            assert!(odf.strength[t] <= 0.05 * peak, "frame {t}: {}", odf.strength[t]);
        }
    }

    #[test]
    fn featurize_aligns_onsets_with_frames_and_is_deterministic() {
        let samples: Vec<f64> = sine(300.0, 30000).iter().zip(sine(2500.0, 30000)).map(|(a, b)| a + 0.3 * b).collect();
        let c = clip(samples);
        let (mel, odf) = featurize(&c, DEFAULT_COMPRESSION).unwrap();
        assert_eq!(mel.values.ncols(), N_MELS);
        assert_eq!(mel.n_frames(), frame_count(30000));
        assert_eq!(odf.strength.len(), mel.n_frames());
        assert!(mel.values.iter().all(|&v| v >= 0.0 && v.is_finite()));
        let (mel2, odf2) = featurize(&c, DEFAULT_COMPRESSION).unwrap();
        assert_eq!(mel, mel2);
        assert_eq!(odf, odf2);
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        assert!(AudioClip::new(vec![0.0, f64::NAN], SAMPLE_RATE).is_err());
        assert!(AudioClip::new(vec![0.0], 0).is_err());
    }
}
