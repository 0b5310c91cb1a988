//! Synthetic tagged corpus: each tag switches one acoustic ingredient on.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::audio::write_wav;
use super::manifest::{DatasetManifest, ManifestEntry, Split};
use crate::dsp::SAMPLE_RATE;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const MAX_TAGS: usize = 16;

/// Tag names in generation order; a corpus with `n` tags uses the first `n`.
pub const TAG_NAMES: [&str; MAX_TAGS] = [
    "noise-burst",
    "bass-drone",
    "harmonic-stack",
    "fast-clicks",
    "slow-pulse",
    "chirp",
    "high-tone",
    "tremolo",
    "low-noise",
    "vibrato",
    "square-lead",
    "bell",
    "hiss",
    "fifth-chord",
    "staccato",
    "sub-rumble",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub n_clips: usize,
    pub n_tags: usize,
    pub seed: u64,
    pub duration_seconds: f64,
    /// Probability of each tag being on, independently.
    pub tag_probability: f64,
}

impl SynthOptions {
    pub fn new(n_clips: usize, n_tags: usize, seed: u64) -> Self {
        Self {
            n_clips,
            n_tags,
            seed,
            duration_seconds: 10.0,
            tag_probability: 0.35,
        }
    }
}

/// Train / valid / test sizes: two thirds, two fifteenths, the rest.
pub fn split_sizes(n_clips: usize) -> (usize, usize, usize) {
    let train = (n_clips as f64 * 2.0 / 3.0).round() as usize;
    let valid = ((n_clips as f64 * 2.0 / 15.0).round() as usize).min(n_clips - train);
    (train, valid, n_clips - train - valid)
}

/// Writes `audio/clip_NNNN.wav` files and `manifest.tsv` under `dir`.
pub fn make_synthetic_corpus(dir: &Path, options: &SynthOptions) -> Result<DatasetManifest> {
    if options.n_tags == 0 || options.n_tags > MAX_TAGS {
        return Err(Error::Config(format!(
            "n_tags must be in 1..={MAX_TAGS}, got {}",
            options.n_tags
        )));
    }
    if !(options.duration_seconds >= 1.0) {
        return Err(Error::Config("clip duration must be at least one second".into()));
    }
    let audio_dir = dir.join("audio");
    fs::create_dir_all(&audio_dir)?;
    let (n_train, n_valid, _) = split_sizes(options.n_clips);
    let n_samples = (options.duration_seconds * SAMPLE_RATE as f64).round() as usize;
    let mut entries = Vec::with_capacity(options.n_clips);
    for i in 0..options.n_clips {
        let mut rng = rng::seeded(rng::derive(options.seed, i as u64));
        let mut tags: Vec<bool> = (0..options.n_tags)
            .map(|_| rng.random::<f64>() < options.tag_probability)
            .collect();
        if !tags.contains(&true) {
            tags[rng.random_range(0..options.n_tags)] = true;
        }
        let samples = render_clip(&tags, n_samples, &mut rng);
        let clip_id = format!("clip_{i:04}");
        let audio_path = audio_dir.join(format!("{clip_id}.wav"));
        write_wav(&audio_path, &samples, SAMPLE_RATE)?;
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
        entries.push(ManifestEntry {
            clip_id,
            audio_path,
            split,
            tags,
        });
    }
    let manifest = DatasetManifest {
        tag_vocabulary: TAG_NAMES[..options.n_tags].iter().map(|s| s.to_string()).collect(),
        entries,
    };
    fs::write(dir.join("manifest.tsv"), manifest.to_text(dir))?;
    Ok(manifest)
}

const COMPONENT_RMS: f64 = 0.08;
const BACKGROUND_RMS: f64 = 0.004;

fn render_clip(tags: &[bool], n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut mix: Vec<f64> = scaled(white_noise(n, rng), BACKGROUND_RMS);
    for (t, &on) in tags.iter().enumerate() {
        if !on {
            continue;
        }
        let gain = COMPONENT_RMS * rng.random_range(0.7..1.0);
        let part = scaled(component(t, n, rng), gain);
        for (m, p) in mix.iter_mut().zip(part) {
            *m += p;
        }
    }
    let peak = mix.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if peak > 0.95 {
        let k = 0.95 / peak;
        mix.iter_mut().for_each(|x| *x *= k);
    }
    mix
}

fn component(tag: usize, n: usize, rng: &mut Rng) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let time = |i: usize| i as f64 / sr;
    match tag {
        // short bursts of 5-9 kHz noise, about two per second
        0 => {
            let noise = band_noise(n, 5000.0, 9000.0, rng);
            let env = event_envelope(n, 2.0, 0.15, 0.01, rng);
            noise.iter().zip(env).map(|(x, e)| x * e).collect()
        }
        1 => {
            let f0 = rng.random_range(55.0..110.0);
            harmonic(n, f0, 6, 1.0, rng)
        }
        // stacked harmonics with a new pitch every half second
        2 => {
            let note_len = (0.5 * sr) as usize;
            let mut out = vec![0.0; n];
            let mut start = 0;
            while start < n {
                let f0 = rng.random_range(220.0..440.0);
                let end = (start + note_len).min(n);
                let note = harmonic(end - start, f0, 8, 0.8, rng);
                for (k, v) in note.into_iter().enumerate() {
                    let fade = ((k.min(end - start - 1 - k)) as f64 / 200.0).min(1.0);
                    out[start + k] = v * fade;
                }
                start = end;
            }
            out
        }
        3 => clicks(n, rng.random_range(6.0..8.0), 0.004, rng),
        // low thumps around 60 Hz
        4 => {
            let rate = rng.random_range(1.5..2.0);
            let phase = rng.random::<f64>() / rate;
            (0..n)
                .map(|i| {
                    let t = time(i) + phase;
                    let local = t % (1.0 / rate);
                    (2.0 * PI * 60.0 * local).sin() * (-local / 0.08).exp()
                })
                .collect()
        }
        // rising sweeps, one per second
        5 => {
            let len = 0.3;
            let offset = rng.random::<f64>();
            (0..n)
                .map(|i| {
                    let local = (time(i) + offset) % 1.0;
                    if local >= len {
                        return 0.0;
                    }
                    let (f_lo, f_hi) = (500.0, 3000.0);
                    let k = (f_hi - f_lo) / len;
                    let phase = 2.0 * PI * (f_lo * local + 0.5 * k * local * local);
                    phase.sin() * (PI * local / len).sin()
                })
                .collect()
        }
        6 => {
            let f = rng.random_range(3000.0..5000.0);
            let phase = rng.random::<f64>() * 2.0 * PI;
            (0..n).map(|i| (2.0 * PI * f * time(i) + phase).sin()).collect()
        }
        // 1-2 kHz noise with 4 Hz amplitude modulation
        7 => {
            let noise = band_noise(n, 1000.0, 2000.0, rng);
            noise
                .iter()
                .enumerate()
                .map(|(i, x)| x * (0.5 + 0.5 * (2.0 * PI * 4.0 * time(i)).sin()))
                .collect()
        }
        8 => band_noise(n, 100.0, 400.0, rng),
        9 => {
            let f = rng.random_range(600.0..900.0);
            let mut phase = 0.0;
            (0..n)
                .map(|i| {
                    phase += 2.0 * PI * f * (1.0 + 0.03 * (2.0 * PI * 6.0 * time(i)).sin()) / sr;
                    phase.sin()
                })
                .collect()
        }
        10 => {
            let f0 = rng.random_range(300.0..600.0);
            let odd: Vec<f64> = (0..8).map(|k| 1.0 / (2 * k + 1) as f64).collect();
            (0..n)
                .map(|i| {
                    odd.iter()
                        .enumerate()
                        .map(|(k, a)| a * (2.0 * PI * f0 * (2 * k + 1) as f64 * time(i)).sin())
                        .sum()
                })
                .collect()
        }
        // inharmonic decaying partials, struck every second
        11 => {
            let base = rng.random_range(400.0..800.0);
            let ratios = [1.0, 2.76, 5.40, 8.93];
            (0..n)
                .map(|i| {
                    let local = time(i) % 1.0;
                    ratios
                        .iter()
                        .map(|r| (2.0 * PI * base * r * local).sin() * (-local * 3.0 * r).exp())
                        .sum()
                })
                .collect()
        }
        12 => band_noise(n, 9000.0, 11000.0, rng),
        13 => {
            let f = rng.random_range(200.0..400.0);
            (0..n)
                .map(|i| (2.0 * PI * f * time(i)).sin() + (2.0 * PI * 1.5 * f * time(i)).sin())
                .collect()
        }
        // 1 kHz blips at 3 Hz
        14 => {
            let phase = rng.random::<f64>() / 3.0;
            (0..n)
                .map(|i| {
                    let t = time(i) + phase;
                    let local = t % (1.0 / 3.0);
                    if local < 0.05 {
                        (2.0 * PI * 1000.0 * t).sin()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        _ => {
            let f = rng.random_range(30.0..50.0);
            (0..n).map(|i| (2.0 * PI * f * time(i)).sin()).collect()
        }
    }
}

fn scaled(mut x: Vec<f64>, target_rms: f64) -> Vec<f64> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let k = target_rms / rms;
        x.iter_mut().for_each(|v| *v *= k);
    }
    x
}

fn white_noise(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

/// Gaussian noise restricted to `[lo, hi)` Hz by zeroing FFT bins.
fn band_noise(n: usize, lo: f64, hi: f64, rng: &mut Rng) -> Vec<f64> {
    let mut spectrum: Vec<Complex<f64>> = white_noise(n, rng).into_iter().map(|x| Complex::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spectrum);
    let hz_per_bin = SAMPLE_RATE as f64 / n as f64;
    for (k, c) in spectrum.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * hz_per_bin;
        if f < lo || f >= hi {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut spectrum);
    spectrum.into_iter().map(|c| c.re / n as f64).collect()
}

fn harmonic(n: usize, f0: f64, partials: usize, rolloff: f64, rng: &mut Rng) -> Vec<f64> {
    let phases: Vec<f64> = (0..partials).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let sr = SAMPLE_RATE as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            phases
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let h = (k + 1) as f64;
                    (2.0 * PI * f0 * h * t + p).sin() / h.powf(rolloff)
                })
                .sum()
        })
        .collect()
}

/// Exponentially decaying broadband impulses at a fixed rate.
fn clicks(n: usize, rate: f64, decay: f64, rng: &mut Rng) -> Vec<f64> {
    let noise = white_noise(n, rng);
    let sr = SAMPLE_RATE as f64;
    let phase = rng.random::<f64>() / rate;
    (0..n)
        .map(|i| {
            let local = (i as f64 / sr + phase) % (1.0 / rate);
            noise[i] * (-local / decay).exp()
        })
        .collect()
}

/// Unit-height gates of `length` seconds with linear fades, placed at
/// random times at an average `rate` per second.
fn event_envelope(n: usize, rate: f64, length: f64, fade: f64, rng: &mut Rng) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let mut env = vec![0.0; n];
    let count = ((n as f64 / sr) * rate).round() as usize;
    let len = (length * sr) as usize;
    let fade = ((fade * sr) as usize).max(1);
    for _ in 0..count {
        let start = rng.random_range(0..n.saturating_sub(len).max(1));
        for k in 0..len.min(n - start) {
            let g = (k.min(len - 1 - k) as f64 / fade as f64).min(1.0);
            env[start + k] = f64::max(env[start + k], g);
        }
    }
    env
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_match_reference_proportions() {
        assert_eq!(split_sizes(300), (200, 40, 60));
        assert_eq!(split_sizes(15), (10, 2, 3));
    }

    #[test]
    fn band_noise_stays_in_band() {
        let mut r = rng::seeded(1);
        let x = band_noise(4096, 5000.0, 9000.0, &mut r);
        let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(4096).process(&mut spec);
        let hz = SAMPLE_RATE as f64 / 4096.0;
        let (mut inside, mut outside) = (0.0, 0.0);
        for (k, c) in spec.iter().enumerate().take(2049) {
            let f = k as f64 * hz;
            if (5000.0..9000.0).contains(&f) {
                inside += c.norm_sqr();
            } else {
                outside += c.norm_sqr();
            }
        }
        assert!(outside < 1e-12 * inside);
    }

    #[test]
    fn rejects_too_many_tags() {
        let dir = tempfile::tempdir().unwrap();
        assert!(make_synthetic_corpus(dir.path(), &SynthOptions::new(2, 17, 0)).is_err());
    }
}
