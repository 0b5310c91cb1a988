//! Rational-ratio polyphase resampling with a symmetric (linear-phase)
//! windowed-sinc FIR.

use std::f64::consts::PI;

/// Zero crossings of the sinc kernel on each side, in units of the slower rate.
const ZERO_CROSSINGS: usize = 16;
const CUTOFF_SCALE: f64 = 0.95;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Resample `samples` from `from_rate` to `to_rate`. Output length is
/// `ceil(len * to / from)`.
pub fn resample(samples: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if from_rate == to_rate || samples.is_empty() {
        return samples.to_vec();
    }
    let g = gcd(from_rate as u64, to_rate as u64);
    let up = (to_rate as u64 / g) as i64;
    let down = (from_rate as u64 / g) as i64;

    // cutoff in cycles per sample of the virtual upsampled signal
    let fc = CUTOFF_SCALE * 0.5 / up.max(down) as f64;
    let half = (ZERO_CROSSINGS as i64) * up.max(down);
    let kernel: Vec<f64> = (-half..=half)
        .map(|n| {
            let x = n as f64;
            let sinc = if n == 0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            // Blackman window over [-half, half]
            let phase = PI * (x + half as f64) / half as f64;
            let window = 0.42 - 0.5 * phase.cos() + 0.08 * (2.0 * phase).cos();
            up as f64 * sinc * window
        })
        .collect();

    let n_in = samples.len() as i64;
    let n_out = ((n_in * up) + down - 1) / down;
    (0..n_out)
        .map(|m| {
            let t = m * down;
            let k_lo = ((t - half) as f64 / up as f64).ceil().max(0.0) as i64;
            let k_hi = (((t + half) as f64 / up as f64).floor() as i64).min(n_in - 1);
            (k_lo..=k_hi)
                .map(|k| samples[k as usize] * kernel[(t - k * up + half) as usize])
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, seconds: f64) -> Vec<f64> {
        let n = (rate as f64 * seconds) as usize;
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect()
    }

    #[test]
    fn identity_when_rates_match() {
        let x = vec![0.1, -0.2, 0.3];
        assert_eq!(resample(&x, 22050, 22050), x);
    }

    #[test]
    fn output_length_follows_ratio() {
        let x = vec![0.0; 44100];
        assert_eq!(resample(&x, 44100, 22050).len(), 22050);
        let x = vec![0.0; 48000];
        assert_eq!(resample(&x, 48000, 22050).len(), 22050);
    }

    #[test]
    fn passband_tone_survives_downsampling() {
        for from in [44100u32, 48000, 16000] {
            let x = tone(1000.0, from, 1.0);
            let y = resample(&x, from, 22050);
            let reference = tone(1000.0, 22050, 1.0);
            // skip filter edges
            let (a, b) = (2000, 20000);
            let err = y[a..b]
                .iter()
                .zip(&reference[a..b])
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-2, "rate {from}: max err {err}");
        }
    }

    #[test]
    fn stopband_tone_is_suppressed() {
        // 15 kHz is above the 11.025 kHz output Nyquist
        let x = tone(15000.0, 44100, 1.0);
        let y = resample(&x, 44100, 22050);
        let rms = (y[1000..20000].iter().map(|v| v * v).sum::<f64>() / 19000.0).sqrt();
        assert!(rms < 1e-3, "rms {rms}");
    }
}
