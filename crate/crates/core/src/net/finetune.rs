use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{cross_entropy_loss, AdaDelta, DeepNet};
use crate::error::{Error, Result};
use crate::eval;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub dropout_input: f64,
    pub dropout_hidden: f64,
    pub adadelta_decay: f64,
    pub adadelta_epsilon: f64,
    pub minibatch_size: usize,
    /// Upper bound on epochs.
    pub epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            dropout_input: 0.2,
            dropout_hidden: 0.5,
            adadelta_decay: 0.95,
            adadelta_epsilon: 1e-6,
            minibatch_size: 100,
            epochs: 200,
            early_stop_patience: 10,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("dropout_input", self.dropout_input), ("dropout_hidden", self.dropout_hidden)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {p}")));
            }
        }
        if self.minibatch_size == 0 {
            return Err(Error::Config("minibatch_size must be positive".into()));
        }
        if !(self.adadelta_decay > 0.0 && self.adadelta_decay < 1.0) || !(self.adadelta_epsilon > 0.0) {
            return Err(Error::Config("adadelta decay must be in (0, 1) and epsilon positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-example cross-entropy on the training set, dropout off.
    pub train_loss: f64,
    pub valid_auc_tag: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneResult {
    /// Parameters from the epoch with the best validation AUC-T.
    pub net: DeepNet,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Minibatch backpropagation with AdaDelta and per-minibatch dropout masks.
/// Stops once validation AUC-T has not improved for more than
/// `early_stop_patience` consecutive epochs.
pub fn finetune(
    mut net: DeepNet,
    train_x: ArrayView2<f64>,
    train_y: ArrayView2<f64>,
    valid_x: ArrayView2<f64>,
    valid_y: ArrayView2<f64>,
    config: &FinetuneConfig,
) -> Result<FinetuneResult> {
    config.validate()?;
    if train_x.nrows() != train_y.nrows() || valid_x.nrows() != valid_y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: train_x.nrows(),
            got: train_y.nrows(),
        });
    }
    let mut rng = rng::seeded(config.seed);
    let mut optimizer = AdaDelta::new(&net.layers, config.adadelta_decay, config.adadelta_epsilon);
    let mut order: Vec<usize> = (0..train_x.nrows()).collect();
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0usize, net.clone());
    let mut stale = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.minibatch_size) {
            let x = train_x.select(Axis(0), chunk);
            let y = train_y.select(Axis(0), chunk);
            let masks = net.sample_masks(chunk.len(), config.dropout_input, config.dropout_hidden, &mut rng);
            let (_, mut grads) = net.loss_and_gradients(x.view(), y.view(), Some(&masks));
            let scale = 1.0 / chunk.len() as f64;
            for g in &mut grads {
                g.weights *= scale;
                g.bias *= scale;
            }
            optimizer.step(&mut net.layers, &grads);
        }

        let train_loss = cross_entropy_loss(net.predict(train_x).view(), train_y) / train_x.nrows() as f64;
        if !train_loss.is_finite() || !net.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let valid_auc_tag = eval::auc_tag(net.predict(valid_x).view(), valid_y)?.mean;
        history.push(EpochRecord {
            epoch,
            train_loss,
            valid_auc_tag,
        });
        if valid_auc_tag > best.0 {
            best = (valid_auc_tag, epoch, net.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale > config.early_stop_patience {
                break;
            }
        }
    }
    Ok(FinetuneResult {
        net: best.2,
        history,
        best_epoch: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    /// Tag j is on when feature j exceeds 0.5.
    fn separable(rows: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut r = rng::seeded(seed);
        let x = Array2::from_shape_fn((rows, 12), |_| r.random::<f64>());
        let y = Array2::from_shape_fn((rows, 4), |(i, j)| if x[[i, j]] > 0.5 { 1.0 } else { 0.0 });
        (x, y)
    }

    fn config() -> FinetuneConfig {
        FinetuneConfig {
            minibatch_size: 20,
            epochs: 8,
            dropout_input: 0.0,
            dropout_hidden: 0.0,
            ..FinetuneConfig::default()
        }
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let (x, y) = separable(200, 1);
        let (vx, vy) = separable(60, 2);
        let net = DeepNet::random(12, &[16, 16], 4, 0.1, &mut rng::seeded(3));
        let mut cfg = config();
        cfg.early_stop_patience = 100;
        let out = finetune(net, x.view(), y.view(), vx.view(), vy.view(), &cfg).unwrap();
        let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
        assert!(losses[..6].windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn zero_patience_stops_at_first_non_improving_epoch() {
        let (x, y) = separable(100, 4);
        let (vx, vy) = separable(40, 5);
        let net = DeepNet::random(12, &[8], 4, 0.1, &mut rng::seeded(6));
        let mut cfg = config();
        cfg.epochs = 100;
        cfg.early_stop_patience = 0;
        let out = finetune(net, x.view(), y.view(), vx.view(), vy.view(), &cfg).unwrap();
        let aucs: Vec<f64> = out.history.iter().map(|r| r.valid_auc_tag).collect();
        let first_drop = aucs.windows(2).position(|w| w[1] <= w[0]);
        match first_drop {
            Some(i) => assert_eq!(aucs.len(), i + 2),
            None => assert_eq!(aucs.len(), 100),
        }
        assert!(aucs.iter().all(|&a| a <= aucs[out.best_epoch]));
    }

    #[test]
    fn identical_seeds_give_identical_history() {
        let (x, y) = separable(80, 7);
        let (vx, vy) = separable(30, 8);
        let mk = || DeepNet::random(12, &[8, 8], 4, 0.1, &mut rng::seeded(9));
        let mut cfg = config();
        cfg.dropout_input = 0.2;
        cfg.dropout_hidden = 0.5;
        cfg.epochs = 4;
        let a = finetune(mk(), x.view(), y.view(), vx.view(), vy.view(), &cfg).unwrap();
        let b = finetune(mk(), x.view(), y.view(), vx.view(), vy.view(), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.net, b.net);
    }

    #[test]
    fn rejects_bad_dropout() {
        let mut cfg = FinetuneConfig::default();
        cfg.dropout_hidden = 1.0;
        assert!(cfg.validate().is_err());
    }
}
