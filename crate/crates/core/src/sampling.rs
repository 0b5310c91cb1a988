//! Training-block collection from mel spectrograms.
//!
//! Both sampling modes split a clip into one-second spans (at the default
//! rate of one block per second) and take one block of `n_frames`
//! consecutive frames per span: at a uniformly random start, or at the frame
//! where the onset detection function peaks.

use ndarray::{s, Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{MelSpectrogram, OnsetFunction};
use crate::error::{Error, Result};
use crate::rng;

pub const ALLOWED_FRAME_COUNTS: [usize; 5] = [2, 4, 6, 8, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Random,
    Onset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub mode: SamplingMode,
    pub blocks_per_second: f64,
    pub n_frames: usize,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        Self {
            mode: SamplingMode::Onset,
            blocks_per_second: 1.0,
            n_frames: 8,
        }
    }
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.blocks_per_second > 0.0) {
            return Err(Error::Config(format!(
                "blocks_per_second must be positive, got {}",
                self.blocks_per_second
            )));
        }
        if !ALLOWED_FRAME_COUNTS.contains(&self.n_frames) {
            return Err(Error::Config(format!(
                "n_frames must be one of {ALLOWED_FRAME_COUNTS:?}, got {}",
                self.n_frames
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    /// `n_frames x 128`, flattened row-major.
    pub data: Array1<f64>,
    pub source_frame: usize,
}

/// Flattens frames `[start, start + n_frames)` into one vector.
pub fn block_at(mel: &MelSpectrogram, start: usize, n_frames: usize) -> Array1<f64> {
    mel.values
        .slice(s![start..start + n_frames, ..])
        .iter()
        .copied()
        .collect()
}

/// Frame spans, one per block. The span count is the clip duration in
/// blocks rounded to nearest (at least one); the last span runs to the end.
fn spans(n_frames_total: usize, frame_rate: f64, blocks_per_second: f64) -> Vec<(usize, usize)> {
    let span_len = frame_rate / blocks_per_second;
    let count = ((n_frames_total as f64 / span_len).round() as usize).max(1);
    (0..count)
        .map(|s| {
            let start = ((s as f64 * span_len).floor() as usize).min(n_frames_total - 1);
            let end = if s + 1 == count {
                n_frames_total
            } else {
                (((s + 1) as f64 * span_len).floor() as usize).min(n_frames_total)
            };
            (start, end.max(start + 1))
        })
        .collect()
}

fn make_block(mel: &MelSpectrogram, start: usize, n_frames: usize) -> SpectralBlock {
    let start = start.min(mel.n_frames() - n_frames);
    SpectralBlock {
        data: block_at(mel, start, n_frames),
        source_frame: start,
    }
}

pub fn sample_random(mel: &MelSpectrogram, policy: &SamplingPolicy, seed: u64) -> Vec<SpectralBlock> {
    if mel.n_frames() < policy.n_frames {
        return Vec::new();
    }
    let mut rng = rng::seeded(seed);
    spans(mel.n_frames(), mel.frame_rate, policy.blocks_per_second)
        .into_iter()
        .map(|(lo, hi)| make_block(mel, rng.random_range(lo..hi), policy.n_frames))
        .collect()
}

pub fn sample_onset(mel: &MelSpectrogram, odf: &OnsetFunction, policy: &SamplingPolicy) -> Vec<SpectralBlock> {
    if mel.n_frames() < policy.n_frames {
        return Vec::new();
    }
    debug_assert_eq!(odf.strength.len(), mel.n_frames());
    spans(mel.n_frames(), mel.frame_rate, policy.blocks_per_second)
        .into_iter()
        .map(|(lo, hi)| {
            let mut best = lo;
            for t in lo + 1..hi {
                if odf.strength[t] > odf.strength[best] {
                    best = t;
                }
            }
            make_block(mel, best, policy.n_frames)
        })
        .collect()
}

pub fn sample_clip(
    mel: &MelSpectrogram,
    odf: &OnsetFunction,
    policy: &SamplingPolicy,
    seed: u64,
) -> Vec<SpectralBlock> {
    match policy.mode {
        SamplingMode::Random => sample_random(mel, policy, seed),
        SamplingMode::Onset => sample_onset(mel, odf, policy),
    }
}

/// Collects up to `target_count` blocks by visiting clips round-robin: the
/// first block of every clip, then the second of every clip, and so on.
/// Clip `i` samples with seed `derive(seed, i)`.
pub fn build_training_set(
    corpus: &[(MelSpectrogram, OnsetFunction)],
    policy: &SamplingPolicy,
    target_count: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    policy.validate()?;
    let per_clip: Vec<Vec<SpectralBlock>> = corpus
        .iter()
        .enumerate()
        .map(|(i, (mel, odf))| sample_clip(mel, odf, policy, rng::derive(seed, i as u64)))
        .collect();
    let longest = per_clip.iter().map(Vec::len).max().unwrap_or(0);
    let available: usize = per_clip.iter().map(Vec::len).sum();
    let mut rows: Vec<&Array1<f64>> = Vec::with_capacity(target_count.min(available));
    'outer: for round in 0..longest {
        for blocks in &per_clip {
            if rows.len() == target_count {
                break 'outer;
            }
            if let Some(b) = blocks.get(round) {
                rows.push(&b.data);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let dim = rows[0].len();
    let mut out = Array2::zeros((rows.len(), dim));
    for (mut dst, src) in out.rows_mut().into_iter().zip(rows) {
        dst.assign(src);
    }
    Ok(out)
}
