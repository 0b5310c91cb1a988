use ndarray::Array2;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centers uniformly spaced on the mel scale between
/// `f_min` and `f_max`, returned as an `n_filters x n_bins` matrix.
///
/// Each FFT bin is treated as a cell of width `sample_rate / n_fft` centered
/// on its frequency, and the filter weight is the integral of the triangle
/// over that cell. Narrow low-frequency filters therefore never collapse to
/// an empty row. Rows are normalized to unit area (they sum to one).
pub fn mel_filterbank(
    n_filters: usize,
    n_bins: usize,
    sample_rate: f64,
    f_min: f64,
    f_max: f64,
) -> Array2<f64> {
    let n_fft = 2 * (n_bins - 1);
    let bin_width = sample_rate / n_fft as f64;
    let mel_lo = hz_to_mel(f_min);
    let mel_hi = hz_to_mel(f_max);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_filters + 1) as f64))
        .collect();

    let mut bank = Array2::zeros((n_filters, n_bins));
    for (m, mut row) in bank.rows_mut().into_iter().enumerate() {
        let tri = Triangle {
            left: edges[m],
            center: edges[m + 1],
            right: edges[m + 2],
        };
        for (k, w) in row.iter_mut().enumerate() {
            let lo = (k as f64 - 0.5) * bin_width;
            let hi = (k as f64 + 0.5) * bin_width;
            *w = tri.cumulative(hi) - tri.cumulative(lo);
        }
        let area: f64 = row.sum();
        if area > 0.0 {
            row.mapv_inplace(|w| w / area);
        }
    }
    bank
}

/// Unit-height triangle on the frequency axis.
struct Triangle {
    left: f64,
    center: f64,
    right: f64,
}

impl Triangle {
    /// Integral of the triangle from minus infinity to `x`.
    fn cumulative(&self, x: f64) -> f64 {
        let Triangle {
            left,
            center,
            right,
        } = *self;
        if x <= left {
            0.0
        } else if x <= center {
            let d = x - left;
            d * d / (2.0 * (center - left))
        } else if x <= right {
            let d = x - center;
            (center - left) / 2.0 + d - d * d / (2.0 * (right - center))
        } else {
            (right - left) / 2.0
        }
    }
}
