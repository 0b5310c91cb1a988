use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbm::{train_rbm, RbmModel, RbmTrainConfig, UnitType};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub hidden_sizes: Vec<usize>,
    /// One weight-cost per layer, bottom first.
    pub weight_costs: Vec<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![512, 512, 512],
            weight_costs: vec![0.001, 0.01, 0.1],
            learning_rate: 0.003,
            epochs: 30,
            minibatch_size: 100,
            seed: 0,
        }
    }
}

/// Greedy layer-wise ReLU RBMs. The bottom RBM has binary visible units
/// over the bag-of-features; every upper RBM is ReLU-ReLU and trains on the
/// deterministic rates `max(0, c + W'x)` of the layer below.
pub fn pretrain_stack(bof: ArrayView2<f64>, config: &PretrainConfig) -> Result<Vec<RbmModel>> {
    if config.weight_costs.len() != config.hidden_sizes.len() {
        return Err(Error::WeightCostCount {
            layers: config.hidden_sizes.len(),
            got: config.weight_costs.len(),
        });
    }
    if let Some(v) = bof.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Config(format!("bag-of-features value {v} outside [0, 1]")));
    }
    let mut stack = Vec::with_capacity(config.hidden_sizes.len());
    let mut input: Array2<f64> = bof.to_owned();
    for (layer, (&size, &weight_cost)) in config.hidden_sizes.iter().zip(&config.weight_costs).enumerate() {
        let visible = if layer == 0 { UnitType::Binary } else { UnitType::Relu };
        let rbm_config = RbmTrainConfig {
            learning_rate: config.learning_rate,
            epochs: config.epochs,
            minibatch_size: config.minibatch_size,
            seed: rng::derive(config.seed, layer as u64),
            ..RbmTrainConfig::relu_pretraining(visible, size, weight_cost)
        };
        let trained = train_rbm(input.view(), &rbm_config)?;
        input = trained.model.hidden_given_visible(input.view());
        stack.push(trained.model);
    }
    Ok(stack)
}
