#![allow(dead_code)]

use std::path::Path;

use deepbof::pipeline::{make_synthetic_corpus, PipelineConfig, SynthOptions};

/// 200 train / 40 valid / 60 test clips with 8 tags.
pub fn desk_corpus(dir: &Path) {
    make_synthetic_corpus(dir, &SynthOptions::new(300, 8, 1)).unwrap();
}

/// Scaled-down model: 256 feature units, a 2 x 128 network.
pub fn desk_config(manifest: &Path, seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.seed = seed;
    c.data.manifest = manifest.to_path_buf();
    c.sampling.blocks_per_second = 4.0;
    c.rbm.n_hidden = 256;
    c.pretrain.hidden_sizes = vec![128, 128];
    c.pretrain.weight_costs = vec![0.001, 0.01];
    c
}

/// A few seconds of synthetic audio, quick enough for unit-scale checks.
pub fn small_config(manifest: &Path, seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.seed = seed;
    c.data.manifest = manifest.to_path_buf();
    c.sampling.blocks_per_second = 4.0;
    c.sampling.n_frames = 4;
    c.rbm.n_hidden = 32;
    c.rbm.epochs = 5;
    c.pretrain.hidden_sizes = vec![16];
    c.pretrain.weight_costs = vec![0.001];
    c.pretrain.epochs = 3;
    c.finetune.epochs = 5;
    c
}
