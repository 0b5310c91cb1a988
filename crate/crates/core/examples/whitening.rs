//! PCA whitening of correlated data and the retained-variance rule.

use deepbof::rng;
use deepbof::whitening::fit_whitening;
use ndarray::{Array2, Axis};
use rand_distr::{Distribution, Normal};

fn main() -> deepbof::Result<()> {
    // 6-dimensional data generated from 2 strong and 4 weak latent factors
    let mut r = rng::seeded(1);
    let n = Normal::new(0.0, 1.0).unwrap();
    let scales = [5.0, 3.0, 0.3, 0.2, 0.1, 0.1];
    let mixing = Array2::from_shape_fn((6, 6), |_| n.sample(&mut r));
    let latent = Array2::from_shape_fn((5000, 6), |(_, j)| scales[j] * n.sample(&mut r));
    let x = latent.dot(&mixing);

    for retain in [0.9, 0.99, 1.0] {
        let model = fit_whitening(x.view(), retain)?;
        let w = model.apply(x.view())?;
        let c = w.t().dot(&w) / (w.nrows() as f64 - 1.0);
        let off: f64 = c
            .indexed_iter()
            .filter(|((a, b), _)| a != b)
            .fold(0.0, |m, (_, v)| m.max(v.abs()));
        println!(
            "retain {retain:<4}: k = {}, retained variance {:.4}, diag mean {:.6}, max off-diagonal {off:.1e}",
            model.output_dim(),
            model.retained_variance,
            c.diag().mean().unwrap(),
        );
    }
    let model = fit_whitening(x.view(), 0.9)?;
    println!("mean of whitened data: {:.1e}", model.apply(x.view())?.mean_axis(Axis(0)).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    Ok(())
}
