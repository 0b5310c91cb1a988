//! Exhaustive-enumeration likelihood for tiny binary-binary RBMs.
//!
//! Only usable for toy models; it exists to check CD-1 against the exact
//! log-likelihood gradient.

use ndarray::{Array1, Array2, ArrayView2};

use super::{sigmoid, Gradients, RbmModel, UnitType};
use crate::error::{Error, Result};

pub const MAX_UNITS: usize = 20;

fn check(model: &RbmModel) -> Result<()> {
    let units = model.n_visible() + model.n_hidden();
    if units > MAX_UNITS {
        return Err(Error::OracleInfeasible {
            units,
            limit: MAX_UNITS,
        });
    }
    if model.visible != UnitType::Binary || model.hidden != UnitType::Binary {
        return Err(Error::Config("the oracle needs a binary-binary model".into()));
    }
    Ok(())
}

fn bits(index: usize, len: usize) -> Array1<f64> {
    Array1::from_shape_fn(len, |i| ((index >> i) & 1) as f64)
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `-E(v, h)`.
pub fn negative_energy(model: &RbmModel, v: &Array1<f64>, h: &Array1<f64>) -> f64 {
    model.visible_bias.dot(v) + model.hidden_bias.dot(h) + v.dot(&model.weights.dot(h))
}

/// `log Z`, summing `exp(-E)` over every joint configuration.
pub fn log_partition(model: &RbmModel) -> Result<f64> {
    check(model)?;
    let (nv, nh) = (model.n_visible(), model.n_hidden());
    let hidden: Vec<Array1<f64>> = (0..1usize << nh).map(|j| bits(j, nh)).collect();
    Ok(log_sum_exp((0..1usize << nv).flat_map(|i| {
        let v = bits(i, nv);
        hidden
            .iter()
            .map(|h| negative_energy(model, &v, h))
            .collect::<Vec<_>>()
    })))
}

/// `log sum_h exp(-E(v, h))`, with the hidden layer summed analytically.
fn log_unnormalized_marginal(model: &RbmModel, v: &Array1<f64>) -> f64 {
    let pre = model.weights.t().dot(v) + &model.hidden_bias;
    model.visible_bias.dot(v) + pre.iter().map(|&x| softplus(x)).sum::<f64>()
}

/// `p(v)` for every visible configuration, indexed by its bit pattern.
pub fn visible_probabilities(model: &RbmModel) -> Result<Vec<f64>> {
    let log_z = log_partition(model)?;
    let nv = model.n_visible();
    Ok((0..1usize << nv)
        .map(|i| (log_unnormalized_marginal(model, &bits(i, nv)) - log_z).exp())
        .collect())
}

/// Mean log-likelihood of the rows of `x`.
pub fn log_likelihood(model: &RbmModel, x: ArrayView2<f64>) -> Result<f64> {
    let log_z = log_partition(model)?;
    let total: f64 = x
        .rows()
        .into_iter()
        .map(|row| log_unnormalized_marginal(model, &row.to_owned()) - log_z)
        .sum();
    Ok(total / x.nrows() as f64)
}

/// Exact gradient of the mean log-likelihood.
pub fn exact_gradient(model: &RbmModel, x: ArrayView2<f64>) -> Result<Gradients> {
    let probs = visible_probabilities(model)?;
    let (nv, nh) = (model.n_visible(), model.n_hidden());
    let stats = |v: &Array1<f64>| {
        let h = (model.weights.t().dot(v) + &model.hidden_bias).mapv(sigmoid);
        let vh = Array2::from_shape_fn((nv, nh), |(i, j)| v[i] * h[j]);
        (vh, v.clone(), h)
    };

    let mut data = Gradients::zeros_like(model);
    for row in x.rows() {
        let (vh, v, h) = stats(&row.to_owned());
        data.weights += &vh;
        data.visible_bias += &v;
        data.hidden_bias += &h;
    }
    let m = x.nrows() as f64;
    data.weights /= m;
    data.visible_bias /= m;
    data.hidden_bias /= m;

    for (i, p) in probs.iter().enumerate() {
        let (vh, v, h) = stats(&bits(i, nv));
        data.weights.scaled_add(-p, &vh);
        data.visible_bias.scaled_add(-p, &v);
        data.hidden_bias.scaled_add(-p, &h);
    }
    Ok(data)
}
