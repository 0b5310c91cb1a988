//! Onset-aligned versus random block sampling on a click track.

use deepbof::dsp::{self, AudioClip, SAMPLE_RATE};
use deepbof::sampling::{sample_onset, sample_random, SamplingMode, SamplingPolicy};

fn main() -> deepbof::Result<()> {
    // one click every 0.7 s over a quiet hum
    let sr = SAMPLE_RATE as usize;
    let mut samples: Vec<f64> = (0..6 * sr)
        .map(|i| 0.01 * (i as f64 * 2.0 * std::f64::consts::PI * 110.0 / sr as f64).sin())
        .collect();
    let period = sr * 7 / 10;
    for start in (period / 2..samples.len()).step_by(period) {
        for k in 0..200.min(samples.len() - start) {
            samples[start + k] += 0.8 * (-(k as f64) / 40.0).exp() * if k % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    let clip = AudioClip::new(samples, SAMPLE_RATE)?;
    let (mel, odf) = dsp::featurize(&clip, 10.0)?;

    let policy = SamplingPolicy {
        mode: SamplingMode::Onset,
        ..SamplingPolicy::default()
    };
    let onset = sample_onset(&mel, &odf, &policy);
    let random = sample_random(&mel, &policy, 7);
    println!("click frames: {:?}", (0..6).map(|c| ((period / 2 + c * period) as f64 / 512.0).round() as usize).collect::<Vec<_>>());
    println!("onset blocks start at  {:?}", onset.iter().map(|b| b.source_frame).collect::<Vec<_>>());
    println!("random blocks start at {:?}", random.iter().map(|b| b.source_frame).collect::<Vec<_>>());
    println!("block dimension: {}", onset[0].data.len());
    Ok(())
}
