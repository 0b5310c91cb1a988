//! Mel spectrogram and onset function of a synthetic two-note signal.
//!
//! cargo run --release --example dsp_frontend -- [file.wav]

use std::f64::consts::PI;

use deepbof::dsp::{self, AudioClip, SAMPLE_RATE};
use deepbof::pipeline::audio;

fn two_notes() -> AudioClip {
    let sr = SAMPLE_RATE as f64;
    let samples = (0..3 * SAMPLE_RATE as usize)
        .map(|i| {
            let t = i as f64 / sr;
            let f = if t < 1.5 { 440.0 } else { 660.0 };
            0.5 * (2.0 * PI * f * t).sin()
        })
        .collect();
    AudioClip::new(samples, SAMPLE_RATE).unwrap()
}

fn main() -> deepbof::Result<()> {
    let clip = match std::env::args().nth(1) {
        Some(path) => audio::load_clip(path.as_ref())?,
        None => two_notes(),
    };
    let (mel, odf) = dsp::featurize(&clip, dsp::DEFAULT_COMPRESSION)?;
    println!(
        "{:.2}s -> {} frames x {} mel bands at {:.2} frames/s",
        clip.duration(),
        mel.n_frames(),
        mel.values.ncols(),
        mel.frame_rate
    );

    let peak = odf
        .strength
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, f64::MIN), |best, (t, &v)| if v > best.1 { (t, v) } else { best });
    println!("strongest onset at frame {} ({:.2}s)", peak.0, peak.0 as f64 / mel.frame_rate);

    for t in (0..mel.n_frames()).step_by(mel.n_frames() / 6 + 1) {
        let row = mel.values.row(t);
        let (band, level) = row
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (m, &v)| if v > b.1 { (m, v) } else { b });
        println!("frame {t:>4}: loudest mel band {band:>3} ({level:.3})");
    }
    Ok(())
}
