//! Convolutional feature extraction and bag-of-features summarization.

use ndarray::{s, Array1, Array2, Axis};

use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::rbm::RbmModel;
use crate::sampling::block_at;
use crate::whitening::WhiteningModel;

pub const POOL_SECONDS_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Hidden-unit probabilities at every block position (hop of one frame).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    pub values: Array2<f64>,
    pub frame_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BagOfFeatures {
    pub values: Array1<f64>,
    pub pool_seconds: f64,
}

pub fn extract_activations(
    mel: &MelSpectrogram,
    whitening: &WhiteningModel,
    rbm: &RbmModel,
    n_frames: usize,
) -> Result<ActivationMap> {
    let frames = mel.n_frames();
    if frames < n_frames || n_frames == 0 {
        return Err(Error::TrackTooShort {
            frames,
            needed: n_frames,
        });
    }
    let positions = frames - n_frames + 1;
    let dim = n_frames * mel.values.ncols();
    let mut blocks = Array2::zeros((positions, dim));
    for (t, mut row) in blocks.rows_mut().into_iter().enumerate() {
        row.assign(&block_at(mel, t, n_frames));
    }
    let whitened = whitening.apply(blocks.view())?;
    if whitened.ncols() != rbm.n_visible() {
        return Err(Error::DimensionMismatch {
            expected: rbm.n_visible(),
            got: whitened.ncols(),
        });
    }
    Ok(ActivationMap {
        values: rbm.hidden_given_visible(whitened.view()),
        frame_rate: mel.frame_rate,
    })
}

/// Per-unit maxima over non-overlapping segments of
/// `round(pool_seconds * frame_rate)` positions; the trailing partial
/// segment is kept.
pub fn max_pool(act: &ActivationMap, pool_seconds: f64, frame_rate: f64) -> Array2<f64> {
    let seg = ((pool_seconds * frame_rate).round() as usize).max(1);
    let positions = act.values.nrows();
    let n_segments = positions.div_ceil(seg);
    let mut pooled = Array2::zeros((n_segments, act.values.ncols()));
    for (i, mut out) in pooled.rows_mut().into_iter().enumerate() {
        let chunk = act.values.slice(s![i * seg..((i + 1) * seg).min(positions), ..]);
        for (j, v) in out.iter_mut().enumerate() {
            *v = chunk.column(j).fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        }
    }
    pooled
}

pub fn average(pooled: &Array2<f64>, pool_seconds: f64) -> BagOfFeatures {
    BagOfFeatures {
        values: pooled.mean_axis(Axis(0)).expect("at least one segment"),
        pool_seconds,
    }
}

/// extract, pool and average for one track.
pub fn bag_of_features(
    mel: &MelSpectrogram,
    whitening: &WhiteningModel,
    rbm: &RbmModel,
    n_frames: usize,
    pool_seconds: f64,
) -> Result<BagOfFeatures> {
    let act = extract_activations(mel, whitening, rbm, n_frames)?;
    let pooled = max_pool(&act, pool_seconds, act.frame_rate);
    Ok(average(&pooled, pool_seconds))
}
