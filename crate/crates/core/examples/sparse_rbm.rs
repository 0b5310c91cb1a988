//! Sparse Gaussian-binary RBM on whitened blocks from synthetic audio.

use deepbof::dsp;
use deepbof::pipeline::{audio, make_synthetic_corpus, SynthOptions};
use deepbof::rbm::{train_rbm, RbmTrainConfig};
use deepbof::sampling::{build_training_set, SamplingPolicy};
use deepbof::whitening::fit_whitening;

fn main() -> deepbof::Result<()> {
    let dir = std::env::temp_dir().join("deepbof-sparse-rbm");
    let mut options = SynthOptions::new(60, 8, 3);
    options.duration_seconds = 10.0;
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
    let w = whitening.apply(x.view())?;
    println!("{} blocks, {} -> {} dims after whitening", x.nrows(), x.ncols(), w.ncols());

    for rho in [0.01, 0.03] {
        let config = RbmTrainConfig {
            epochs: 30,
            seed: 2,
            ..RbmTrainConfig::sparse_gaussian(64, rho)
        };
        let trained = train_rbm(w.view(), &config)?;
        println!("rho = {rho}:");
        for (e, (err, act)) in trained.reconstruction_error.iter().zip(&trained.mean_activation).enumerate().step_by(5) {
            println!("  epoch {e:>2}  reconstruction {err:.4}  mean activation {act:.4}");
        }
    }
    Ok(())
}
