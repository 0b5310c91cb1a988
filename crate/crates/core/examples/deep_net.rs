//! Pretrained versus randomly initialized networks on a toy tagging task.

use deepbof::eval::auc_tag;
use deepbof::net::{finetune, pretrain_stack, DeepNet, FinetuneConfig, PretrainConfig};
use deepbof::rng;
use ndarray::{s, Array2};
use rand::Rng;

fn main() -> deepbof::Result<()> {
    // features in [0, 1]; tag j fires when a hidden pair of features co-occurs
    let mut r = rng::seeded(3);
    let x = Array2::from_shape_fn((600, 64), |_| r.random::<f64>().powi(3));
    let y = Array2::from_shape_fn((600, 6), |(i, j)| {
        if x[[i, 2 * j]] + x[[i, 2 * j + 1]] > 0.5 { 1.0 } else { 0.0 }
    });
    let (tx, ty) = (x.slice(s![..400, ..]), y.slice(s![..400, ..]));
    let (vx, vy) = (x.slice(s![400..500, ..]), y.slice(s![400..500, ..]));
    let (ex, ey) = (x.slice(s![500.., ..]), y.slice(s![500.., ..]));

    let pretrain = PretrainConfig {
        hidden_sizes: vec![32, 32],
        weight_costs: vec![0.001, 0.01],
        epochs: 10,
        ..PretrainConfig::default()
    };
    let stack = pretrain_stack(tx, &pretrain)?;
    let config = FinetuneConfig {
        epochs: 60,
        minibatch_size: 50,
        ..FinetuneConfig::default()
    };
    let candidates = [
        ("pretrained", DeepNet::from_stack(&stack, 6, &mut rng::seeded(1))?),
        ("random", DeepNet::random(64, &[32, 32], 6, 0.01, &mut rng::seeded(1))),
    ];
    for (name, net) in candidates {
        let out = finetune(net, tx, ty, vx, vy, &config)?;
        let test = auc_tag(out.net.predict(ex).view(), ey)?;
        println!(
            "{name:>10}: best epoch {:>2} of {}, valid AUC-T {:.4}, test AUC-T {:.4}",
            out.best_epoch,
            out.history.len(),
            out.history[out.best_epoch].valid_auc_tag,
            test.mean
        );
    }
    Ok(())
}
