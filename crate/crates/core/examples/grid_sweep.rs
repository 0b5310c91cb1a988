//! Expands a config grid into individual runs and lists the weight-cost
//! schedules it covers.

use deepbof::pipeline::config::{all_schedules, wc_inc_schedules};
use deepbof::pipeline::PipelineConfig;

const CONFIG: &str = r#"
seed = 1

[rbm]
n_hidden = 1024

[grid]
target_sparsity = [0.007, 0.01, 0.02, 0.03]
pool_seconds = [0.25, 0.5, 1.0, 2.0, 4.0]
weight_costs = "wc_inc"
"#;

fn main() -> deepbof::Result<()> {
    for layers in 1..=3 {
        println!(
            "{layers} layer(s): {} schedules in total, {} increasing: {:?}",
            all_schedules(layers).len(),
            wc_inc_schedules(layers).len(),
            wc_inc_schedules(layers)
        );
    }
    let runs = PipelineConfig::from_toml(CONFIG)?.expand_grid()?;
    println!("\n{} runs; the first three:", runs.len());
    for c in runs.iter().take(3) {
        println!(
            "  rho {:<5} pool {:<4} weight costs {:?}",
            c.rbm.target_sparsity, c.bof.pool_seconds, c.pretrain.weight_costs
        );
    }
    Ok(())
}
