//! Synthesizes a small tagged corpus and runs every stage on it.
//!
//! cargo run --release --example end_to_end -- [work_dir]

use std::path::PathBuf;
use std::time::Instant;

use deepbof::pipeline::{make_synthetic_corpus, Pipeline, PipelineConfig, SynthOptions};
use deepbof::sampling::SamplingMode;

fn main() -> deepbof::Result<()> {
    let work: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("deepbof-end-to-end"));
    let corpus_dir = work.join("corpus");
    if !corpus_dir.join("manifest.tsv").exists() {
        let t = Instant::now();
        make_synthetic_corpus(&corpus_dir, &SynthOptions::new(300, 8, 1))?;
        println!("corpus: 300 clips in {:.1}s", t.elapsed().as_secs_f64());
    }

    let mut config = PipelineConfig::default();
    config.seed = 1;
    config.data.manifest = corpus_dir.join("manifest.tsv");
    config.sampling.mode = SamplingMode::Onset;
    config.sampling.blocks_per_second = 4.0;
    config.rbm.n_hidden = 256;
    config.pretrain.hidden_sizes = vec![128, 128];
    config.pretrain.weight_costs = vec![0.001, 0.01];

    let pipeline = Pipeline::new(config, work.join("artifacts"))?;
    let t = Instant::now();
    let (report, stages) = pipeline.run_all(true)?;
    for s in &stages {
        let note = if s.reused { " (reused)" } else { "" };
        println!("{:<12} {}{note}", s.stage.name(), s.dir.display());
    }
    println!("pipeline: {:.1}s\n", t.elapsed().as_secs_f64());
    print!("{}", report.to_table());
    Ok(())
}
