//! Restricted Boltzmann machines trained with one-step contrastive
//! divergence.
//!
//! Three unit families are supported. Binary units use the logistic
//! activation, Gaussian visible units have unit variance (inputs are expected
//! to be whitened), and rectified linear units use `max(0, x)` rates with
//! Gibbs steps drawn from `max(0, x + N(0, sigmoid(x)))`.
//!
//! The energy is `E(v, h) = -(b'v + c'h + v'Wh)` (plus `v'v` for Gaussian
//! visible units), so `W` is `d_v x d_h`, `b` is the visible bias and `c` the
//! hidden bias.

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::{dbof, header};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitType {
    Gaussian,
    Binary,
    Relu,
}

impl fmt::Display for UnitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitType::Gaussian => "gaussian",
            UnitType::Binary => "binary",
            UnitType::Relu => "relu",
        })
    }
}

impl FromStr for UnitType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(UnitType::Gaussian),
            "binary" => Ok(UnitType::Binary),
            "relu" => Ok(UnitType::Relu),
            other => Err(format!("unknown unit type '{other}'")),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One Gibbs draw for a rectified linear unit with pre-activation `x`:
/// `max(0, x + g)` with `g ~ N(0, sigmoid(x))`.
pub fn noisy_relu_sample(x: f64, rng: &mut Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (x + sigmoid(x).sqrt() * z).max(0.0)
}

fn activate(kind: UnitType, pre: &mut Array2<f64>) {
    match kind {
        UnitType::Gaussian => {}
        UnitType::Binary => pre.mapv_inplace(sigmoid),
        UnitType::Relu => pre.mapv_inplace(|x| x.max(0.0)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub visible: UnitType,
    pub hidden: UnitType,
}

impl RbmModel {
    /// `W ~ N(0, 0.01^2)`, `b = 0`, `c = initial_hidden_bias`.
    pub fn init(
        n_visible: usize,
        n_hidden: usize,
        visible: UnitType,
        hidden: UnitType,
        initial_hidden_bias: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if hidden == UnitType::Gaussian {
            return Err(Error::Config("gaussian hidden units are not supported".into()));
        }
        let normal = Normal::new(0.0, 0.01).unwrap();
        Ok(Self {
            weights: Array2::from_shape_fn((n_visible, n_hidden), |_| normal.sample(rng)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::from_elem(n_hidden, initial_hidden_bias),
            visible,
            hidden,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    /// `c + W'v` for each row of `v`.
    pub fn hidden_pre_activation(&self, v: ArrayView2<f64>) -> Array2<f64> {
        v.dot(&self.weights) + &self.hidden_bias
    }

    /// Hidden probabilities (binary) or rates (ReLU), one row per input row.
    pub fn hidden_given_visible(&self, v: ArrayView2<f64>) -> Array2<f64> {
        let mut pre = self.hidden_pre_activation(v);
        activate(self.hidden, &mut pre);
        pre
    }

    /// Gaussian means, binary probabilities or ReLU rates of the visible layer.
    pub fn visible_given_hidden(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let mut pre = h.dot(&self.weights.t()) + &self.visible_bias;
        activate(self.visible, &mut pre);
        pre
    }

    /// Draws hidden states given the visible layer.
    pub fn sample_hidden(&self, v: ArrayView2<f64>, rng: &mut Rng) -> Array2<f64> {
        let pre = self.hidden_pre_activation(v);
        match self.hidden {
            UnitType::Binary => pre.mapv(|x| if rng.random::<f64>() < sigmoid(x) { 1.0 } else { 0.0 }),
            UnitType::Relu => pre.mapv(|x| noisy_relu_sample(x, rng)),
            UnitType::Gaussian => unreachable!("rejected at construction"),
        }
    }

    /// Draws visible states given the hidden layer.
    pub fn sample_visible(&self, h: ArrayView2<f64>, rng: &mut Rng) -> Array2<f64> {
        let pre = h.dot(&self.weights.t()) + &self.visible_bias;
        match self.visible {
            UnitType::Gaussian => pre.mapv(|m| m + Distribution::<f64>::sample(&StandardNormal, rng)),
            UnitType::Binary => pre.mapv(|x| if rng.random::<f64>() < sigmoid(x) { 1.0 } else { 0.0 }),
            UnitType::Relu => pre.mapv(|x| noisy_relu_sample(x, rng)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite())
            && self.visible_bias.iter().all(|v| v.is_finite())
            && self.hidden_bias.iter().all(|v| v.is_finite())
    }

    /// Mean squared error of the deterministic one-step reconstruction.
    pub fn reconstruction_error(&self, x: ArrayView2<f64>) -> f64 {
        let h = self.hidden_given_visible(x);
        let recon = self.visible_given_hidden(h.view());
        (&recon - &x).mapv(|d| d * d).mean().unwrap_or(0.0)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        header::write(
            &dir.join("rbm.txt"),
            &[
                ("visible_type", self.visible.to_string()),
                ("hidden_type", self.hidden.to_string()),
                ("d_v", self.n_visible().to_string()),
                ("d_h", self.n_hidden().to_string()),
            ],
        )?;
        dbof::write(&dir.join("W.dbof"), &self.weights)?;
        dbof::write_vector(&dir.join("b.dbof"), &self.visible_bias)?;
        dbof::write_vector(&dir.join("c.dbof"), &self.hidden_bias)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let h = header::read(&dir.join("rbm.txt"))?;
        let model = Self {
            weights: dbof::read(&dir.join("W.dbof"))?,
            visible_bias: dbof::read_vector(&dir.join("b.dbof"))?,
            hidden_bias: dbof::read_vector(&dir.join("c.dbof"))?,
            visible: h.get("visible_type")?,
            hidden: h.get("hidden_type")?,
        };
        let (d_v, d_h): (usize, usize) = (h.get("d_v")?, h.get("d_h")?);
        if model.weights.dim() != (d_v, d_h)
            || model.visible_bias.len() != d_v
            || model.hidden_bias.len() != d_h
        {
            return Err(Error::Format {
                path: dir.to_path_buf(),
                message: "rbm header disagrees with matrix shapes".into(),
            });
        }
        Ok(model)
    }
}

/// Parameter-shaped increments (`dW`, `db`, `dc`).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &RbmModel) -> Self {
        Self {
            weights: Array2::zeros(model.weights.raw_dim()),
            visible_bias: Array1::zeros(model.n_visible()),
            hidden_bias: Array1::zeros(model.n_hidden()),
        }
    }

    pub fn dot(&self, other: &Gradients) -> f64 {
        (&self.weights * &other.weights).sum()
            + self.visible_bias.dot(&other.visible_bias)
            + self.hidden_bias.dot(&other.hidden_bias)
    }
}

/// CD-1 statistics for one minibatch, before weight decay and sparsity.
#[derive(Debug, Clone)]
pub struct CdStep {
    pub gradients: Gradients,
    /// Positive-phase hidden probabilities (or rates), one row per example.
    pub positive_hidden: Array2<f64>,
}

/// `<v h>_data - <v h>_recon` with one Gibbs step, averaged over the batch.
///
/// Hidden states are sampled for the reconstruction; the correlation terms
/// use probabilities (rates for ReLU units). The visible reconstruction is
/// the conditional mean.
pub fn cd1_gradients(model: &RbmModel, batch: ArrayView2<f64>, rng: &mut Rng) -> CdStep {
    let m = batch.nrows() as f64;
    let h0 = model.hidden_given_visible(batch);
    let h_sample = model.sample_hidden(batch, rng);
    let v1 = model.visible_given_hidden(h_sample.view());
    let h1 = model.hidden_given_visible(v1.view());

    let weights = (batch.t().dot(&h0) - v1.t().dot(&h1)) / m;
    let visible_bias = (&batch - &v1).sum_axis(Axis(0)) / m;
    let hidden_bias = (&h0 - &h1).sum_axis(Axis(0)) / m;
    CdStep {
        gradients: Gradients {
            weights,
            visible_bias,
            hidden_bias,
        },
        positive_hidden: h0,
    }
}

/// Per-unit hidden-bias increment `lambda * (rho - mean_batch h_j)`.
pub fn sparsity_bias_update(hidden_probs: ArrayView2<f64>, rho: f64, lambda: f64) -> Array1<f64> {
    let mean = hidden_probs.mean_axis(Axis(0)).expect("non-empty batch");
    mean.mapv(|q| lambda * (rho - q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmTrainConfig {
    pub n_hidden: usize,
    pub visible: UnitType,
    pub hidden: UnitType,
    pub learning_rate: f64,
    pub weight_cost: f64,
    pub target_sparsity: f64,
    pub sparsity_strength: f64,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Epoch at which momentum switches to `final_momentum`.
    pub momentum_switch_epoch: usize,
    pub initial_hidden_bias: f64,
    pub seed: u64,
}

impl Default for RbmTrainConfig {
    fn default() -> Self {
        Self::sparse_gaussian(1024, 0.02)
    }
}

impl RbmTrainConfig {
    /// Gaussian-binary sparse RBM for local feature learning.
    pub fn sparse_gaussian(n_hidden: usize, target_sparsity: f64) -> Self {
        Self {
            n_hidden,
            visible: UnitType::Gaussian,
            hidden: UnitType::Binary,
            learning_rate: 0.03,
            weight_cost: 0.001,
            target_sparsity,
            sparsity_strength: 3.0,
            minibatch_size: 100,
            epochs: 30,
            initial_momentum: 0.5,
            final_momentum: 0.9,
            momentum_switch_epoch: 5,
            initial_hidden_bias: -4.0,
            seed: 0,
        }
    }

    /// ReLU RBM for song-level pretraining (no sparsity).
    pub fn relu_pretraining(visible: UnitType, n_hidden: usize, weight_cost: f64) -> Self {
        Self {
            n_hidden,
            visible,
            hidden: UnitType::Relu,
            learning_rate: 0.003,
            weight_cost,
            target_sparsity: 0.0,
            sparsity_strength: 0.0,
            minibatch_size: 100,
            epochs: 30,
            initial_momentum: 0.5,
            final_momentum: 0.9,
            momentum_switch_epoch: 5,
            initial_hidden_bias: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.weight_cost >= 0.0) {
            return bad(format!("weight_cost must be non-negative, got {}", self.weight_cost));
        }
        if !(self.sparsity_strength >= 0.0) {
            return bad(format!("sparsity_strength must be non-negative, got {}", self.sparsity_strength));
        }
        if self.sparsity_strength > 0.0 && !(self.target_sparsity > 0.0 && self.target_sparsity < 1.0) {
            return bad(format!("target_sparsity must be in (0, 1), got {}", self.target_sparsity));
        }
        if self.minibatch_size == 0 || self.n_hidden == 0 {
            return bad("minibatch_size and n_hidden must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRbm {
    pub model: RbmModel,
    /// Mean-field reconstruction error on the training data after each epoch.
    pub reconstruction_error: Vec<f64>,
    /// Mean hidden activation on the training data after each epoch.
    pub mean_activation: Vec<f64>,
}

pub fn mean_activation(model: &RbmModel, x: ArrayView2<f64>) -> f64 {
    model.hidden_given_visible(x).mean().unwrap_or(0.0)
}

/// Minibatch CD-1 with momentum, L2 weight decay on `W` and, when
/// `sparsity_strength > 0`, the sparsity shift on the hidden bias.
pub fn train_rbm(x: ArrayView2<f64>, config: &RbmTrainConfig) -> Result<TrainedRbm> {
    config.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut rng = rng::seeded(config.seed);
    let mut model = RbmModel::init(
        x.ncols(),
        config.n_hidden,
        config.visible,
        config.hidden,
        config.initial_hidden_bias,
        &mut rng,
    )?;
    let mut velocity = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut reconstruction_error = Vec::with_capacity(config.epochs);
    let mut activation_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let momentum = if epoch < config.momentum_switch_epoch {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.minibatch_size) {
            let batch = x.select(Axis(0), chunk);
            let step = cd1_gradients(&model, batch.view(), &mut rng);
            let mut g = step.gradients;
            if config.weight_cost > 0.0 {
                g.weights.scaled_add(-config.weight_cost, &model.weights);
            }
            if config.sparsity_strength > 0.0 {
                g.hidden_bias += &sparsity_bias_update(
                    step.positive_hidden.view(),
                    config.target_sparsity,
                    config.sparsity_strength,
                );
            }
            let lr = config.learning_rate;
            velocity.weights.mapv_inplace(|v| v * momentum);
            velocity.weights.scaled_add(lr, &g.weights);
            velocity.visible_bias.mapv_inplace(|v| v * momentum);
            velocity.visible_bias.scaled_add(lr, &g.visible_bias);
            velocity.hidden_bias.mapv_inplace(|v| v * momentum);
            velocity.hidden_bias.scaled_add(lr, &g.hidden_bias);
            model.weights += &velocity.weights;
            model.visible_bias += &velocity.visible_bias;
            model.hidden_bias += &velocity.hidden_bias;
        }
        let err = model.reconstruction_error(x);
        if !model.is_finite() || !err.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        reconstruction_error.push(err);
        activation_trace.push(mean_activation(&model, x));
    }
    Ok(TrainedRbm {
        model,
        reconstruction_error,
        mean_activation: activation_trace,
    })
}
