//! Song-level deep network: ReLU hidden layers with a logistic output per
//! tag, pretrained with stacked RBMs and fine-tuned with AdaDelta and
//! dropout.

mod adadelta;
mod finetune;
mod pretrain;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rbm::{sigmoid, RbmModel};
use crate::rng::Rng;
use crate::{dbof, header};

pub use adadelta::AdaDelta;
pub use finetune::{finetune, EpochRecord, FinetuneConfig, FinetuneResult};
pub use pretrain::{pretrain_stack, PretrainConfig};

/// Predictions are clamped to `[CLAMP, 1 - CLAMP]` inside the loss.
pub const CLAMP: f64 = 1e-12;

/// Fully connected layer, `weights` is `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn gaussian(inputs: usize, outputs: usize, std: f64, rng: &mut Rng) -> Self {
        let normal = Normal::new(0.0, std).unwrap();
        Self {
            weights: Array2::from_shape_fn((inputs, outputs), |_| normal.sample(rng)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn affine(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }
}

/// ReLU hidden layers followed by a logistic output head. `layers` holds the
/// hidden layers in order and then the head.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepNet {
    pub layers: Vec<Dense>,
}

/// Per-example dropout masks holding `0` or `1 / (1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub input: Array2<f64>,
    pub hidden: Vec<Array2<f64>>,
}

struct ForwardCache {
    /// Masked input followed by each masked hidden activation.
    activations: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl DeepNet {
    /// Gaussian `N(0, std^2)` weights and zero biases everywhere.
    pub fn random(input_dim: usize, hidden_sizes: &[usize], n_tags: usize, std: f64, rng: &mut Rng) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden_sizes);
        dims.push(n_tags);
        Self {
            layers: dims.windows(2).map(|w| Dense::gaussian(w[0], w[1], std, rng)).collect(),
        }
    }

    /// Hidden layers copy `W` and the hidden bias of each RBM; the output head
    /// starts from `N(0, 0.01^2)` weights and a zero bias.
    pub fn from_stack(stack: &[RbmModel], n_tags: usize, rng: &mut Rng) -> Result<Self> {
        for pair in stack.windows(2) {
            if pair[0].n_hidden() != pair[1].n_visible() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].n_hidden(),
                    got: pair[1].n_visible(),
                });
            }
        }
        let mut layers: Vec<Dense> = stack
            .iter()
            .map(|r| Dense {
                weights: r.weights.clone(),
                bias: r.hidden_bias.clone(),
            })
            .collect();
        let top = stack.last().ok_or_else(|| Error::Config("empty RBM stack".into()))?;
        layers.push(Dense::gaussian(top.n_hidden(), n_tags, 0.01, rng));
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn n_tags(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Dense::outputs).collect()
    }

    pub fn sample_masks(&self, batch: usize, input_drop: f64, hidden_drop: f64, rng: &mut Rng) -> DropoutMasks {
        let mut mask = |cols: usize, p: f64| {
            let keep = 1.0 / (1.0 - p);
            Array2::from_shape_fn((batch, cols), |_| if rng.random::<f64>() < p { 0.0 } else { keep })
        };
        let input = mask(self.input_dim(), input_drop);
        let hidden = self.hidden_sizes().into_iter().map(|n| mask(n, hidden_drop)).collect();
        DropoutMasks { input, hidden }
    }

    fn forward_cached(&self, x: ArrayView2<f64>, masks: Option<&DropoutMasks>) -> ForwardCache {
        let n_hidden = self.layers.len() - 1;
        let mut a = match masks {
            Some(m) => &x * &m.input,
            None => x.to_owned(),
        };
        let mut activations = Vec::with_capacity(n_hidden + 1);
        let mut pre = Vec::with_capacity(n_hidden);
        for (l, layer) in self.layers[..n_hidden].iter().enumerate() {
            let z = layer.affine(a.view());
            let mut next = z.mapv(|v| v.max(0.0));
            if let Some(m) = masks {
                next *= &m.hidden[l];
            }
            activations.push(a);
            pre.push(z);
            a = next;
        }
        let output = self.layers[n_hidden].affine(a.view()).mapv(sigmoid);
        activations.push(a);
        ForwardCache {
            activations,
            pre,
            output,
        }
    }

    /// Tag scores for each row of `x`; masks are applied when given.
    pub fn forward(&self, x: ArrayView2<f64>, masks: Option<&DropoutMasks>) -> Array2<f64> {
        self.forward_cached(x, masks).output
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x, None)
    }

    /// Summed cross-entropy over the batch and its gradient for every layer.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        labels: ArrayView2<f64>,
        masks: Option<&DropoutMasks>,
    ) -> (f64, Vec<Dense>) {
        let cache = self.forward_cached(x, masks);
        let loss = cross_entropy_loss(cache.output.view(), labels);
        let mut grads: Vec<Dense> = self.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect();

        // d loss / d logit of the sigmoid head
        let mut delta = &cache.output - &labels;
        for l in (0..self.layers.len()).rev() {
            let input = &cache.activations[l];
            grads[l].weights = input.t().dot(&delta);
            grads[l].bias = delta.sum_axis(Axis(0));
            if l == 0 {
                break;
            }
            let mut upstream = delta.dot(&self.layers[l].weights.t());
            if let Some(m) = masks {
                upstream *= &m.hidden[l - 1];
            }
            ndarray::Zip::from(&mut upstream)
                .and(&cache.pre[l - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            delta = upstream;
        }
        (loss, grads)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let sizes: Vec<String> = std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::outputs))
            .map(|n| n.to_string())
            .collect();
        header::write(
            &dir.join("net.txt"),
            &[
                ("layer_sizes", sizes.join(",")),
                ("n_tags", self.n_tags().to_string()),
                ("hidden_activation", "relu".into()),
                ("output_activation", "logistic".into()),
            ],
        )?;
        for (i, layer) in self.layers.iter().enumerate() {
            dbof::write(&dir.join(format!("layer{i}_W.dbof")), &layer.weights)?;
            dbof::write_vector(&dir.join(format!("layer{i}_b.dbof")), &layer.bias)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let h = header::read(&dir.join("net.txt"))?;
        let sizes: Vec<usize> = h
            .get_str("layer_sizes")?
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format {
                path: dir.to_path_buf(),
                message: format!("bad layer_sizes: {e}"),
            })?;
        let mut layers = Vec::with_capacity(sizes.len().saturating_sub(1));
        for (i, w) in sizes.windows(2).enumerate() {
            let layer = Dense {
                weights: dbof::read(&dir.join(format!("layer{i}_W.dbof")))?,
                bias: dbof::read_vector(&dir.join(format!("layer{i}_b.dbof")))?,
            };
            if layer.weights.dim() != (w[0], w[1]) || layer.bias.len() != w[1] {
                return Err(Error::Format {
                    path: dir.to_path_buf(),
                    message: format!("layer {i} disagrees with the header sizes"),
                });
            }
            layers.push(layer);
        }
        if layers.is_empty() || h.get::<usize>("n_tags")? != sizes[sizes.len() - 1] {
            return Err(Error::Format {
                path: dir.to_path_buf(),
                message: "inconsistent net header".into(),
            });
        }
        Ok(Self { layers })
    }
}

/// Binary cross-entropy summed over examples and tags (negated for
/// minimization), with predictions clamped to `[1e-12, 1 - 1e-12]`.
pub fn cross_entropy_loss(predictions: ArrayView2<f64>, labels: ArrayView2<f64>) -> f64 {
    predictions
        .iter()
        .zip(labels.iter())
        .map(|(&h, &y)| {
            let h = h.clamp(CLAMP, 1.0 - CLAMP);
            -(y * h.ln() + (1.0 - y) * (1.0 - h).ln())
        })
        .sum()
}
