//! Track-level bag-of-features at every max-pooling size.

use deepbof::bof::{extract_activations, max_pool, average, POOL_SECONDS_GRID};
use deepbof::dsp;
use deepbof::pipeline::{audio, make_synthetic_corpus, SynthOptions};
use deepbof::rbm::{train_rbm, RbmTrainConfig};
use deepbof::sampling::{build_training_set, SamplingPolicy};
use deepbof::whitening::fit_whitening;

fn main() -> deepbof::Result<()> {
    let dir = std::env::temp_dir().join("deepbof-bof");
    let mut options = SynthOptions::new(40, 8, 5);
    options.duration_seconds = 6.0;
    let manifest = make_synthetic_corpus(&dir, &options)?;
    let features = manifest
        .entries
        .iter()
        .map(|e| dsp::featurize(&audio::load_clip(&e.audio_path)?, 10.0))
        .collect::<deepbof::Result<Vec<_>>>()?;
    let policy = SamplingPolicy {
        blocks_per_second: 8.0,
        ..SamplingPolicy::default()
    };
    let x = build_training_set(&features, &policy, 5000, 1)?;
    let whitening = fit_whitening(x.view(), 0.9)?;
    let config = RbmTrainConfig {
        epochs: 30,
        ..RbmTrainConfig::sparse_gaussian(128, 0.02)
    };
    let rbm = train_rbm(whitening.apply(x.view())?.view(), &config)?.model;

    let (mel, _) = &features[0];
    let act = extract_activations(mel, &whitening, &rbm, policy.n_frames)?;
    println!("{}: {} positions x {} units", manifest.entries[0].clip_id, act.values.nrows(), act.values.ncols());
    for pool in POOL_SECONDS_GRID {
        let pooled = max_pool(&act, pool, act.frame_rate);
        let bof = average(&pooled, pool);
        println!(
            "pool {pool:>4}s: {:>3} segments, mean feature {:.4}, max feature {:.4}",
            pooled.nrows(),
            bof.values.mean().unwrap(),
            bof.values.iter().cloned().fold(0.0, f64::max)
        );
    }
    Ok(())
}
