//! PCA whitening learned from sampled spectral blocks.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::{dbof, header};

pub const DEFAULT_RETAIN: f64 = 0.9;
/// Added to every eigenvalue inside the inverse square root.
pub const EIGEN_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningModel {
    pub mean: Array1<f64>,
    /// `k x d`; row `i` is the `i`-th principal direction over `sqrt(lambda_i + eps)`.
    pub basis: Array2<f64>,
    /// Eigenvalues of the retained directions, descending.
    pub eigenvalues: Array1<f64>,
    pub retain: f64,
    pub retained_variance: f64,
    pub epsilon: f64,
}

impl WhiteningModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let centered = &x - &self.mean;
        Ok(centered.dot(&self.basis.t()))
    }

    pub fn apply_vector(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.basis.dot(&(&x - &self.mean)))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        header::write(
            &dir.join("whitening.txt"),
            &[
                ("d", self.input_dim().to_string()),
                ("k", self.output_dim().to_string()),
                ("retain", self.retain.to_string()),
                ("retained_variance", self.retained_variance.to_string()),
                ("epsilon", self.epsilon.to_string()),
            ],
        )?;
        dbof::write_vector(&dir.join("mean.dbof"), &self.mean)?;
        dbof::write(&dir.join("basis.dbof"), &self.basis)?;
        dbof::write_vector(&dir.join("eigenvalues.dbof"), &self.eigenvalues)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let h = header::read(&dir.join("whitening.txt"))?;
        let model = Self {
            mean: dbof::read_vector(&dir.join("mean.dbof"))?,
            basis: dbof::read(&dir.join("basis.dbof"))?,
            eigenvalues: dbof::read_vector(&dir.join("eigenvalues.dbof"))?,
            retain: h.get("retain")?,
            retained_variance: h.get("retained_variance")?,
            epsilon: h.get("epsilon")?,
        };
        let (d, k): (usize, usize) = (h.get("d")?, h.get("k")?);
        if model.basis.dim() != (k, d) || model.mean.len() != d {
            return Err(Error::Format {
                path: dir.to_path_buf(),
                message: "whitening header disagrees with matrix shapes".into(),
            });
        }
        Ok(model)
    }
}

/// Sample covariance with `1/(n-1)` normalization and the column means.
pub fn covariance(x: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = x.nrows();
    let mean = x.mean_axis(Axis(0)).expect("non-empty input");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    (mean, cov)
}

/// Smallest `k` whose leading eigenvalues carry at least `retain` of the total.
pub fn retained_count(eigenvalues_desc: &[f64], retain: f64) -> usize {
    let total: f64 = eigenvalues_desc.iter().sum();
    let mut acc = 0.0;
    for (i, &l) in eigenvalues_desc.iter().enumerate() {
        acc += l;
        if acc >= retain * total {
            return i + 1;
        }
    }
    eigenvalues_desc.len()
}

pub fn fit_whitening(x: ArrayView2<f64>, retain: f64) -> Result<WhiteningModel> {
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(Error::Config(format!("retain must be in (0, 1], got {retain}")));
    }
    let (n, d) = x.dim();
    if n < 2 || d == 0 {
        return Err(Error::DegenerateCovariance);
    }
    let (mean, cov) = covariance(x);
    let total: f64 = cov.diag().sum();
    let scale = 1.0 + mean.dot(&mean) / d as f64;
    if !(total > 1e-12 * scale) {
        return Err(Error::DegenerateCovariance);
    }

    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let k = retained_count(&sorted, retain);

    let mut basis = Array2::zeros((k, d));
    for (r, &col) in order.iter().take(k).enumerate() {
        let dir = eig.eigenvectors.column(col);
        let pivot = (0..d)
            .max_by(|&a, &b| dir[a].abs().total_cmp(&dir[b].abs()).then(b.cmp(&a)))
            .unwrap();
        let sign = if dir[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / (sorted[r] + EIGEN_FLOOR).sqrt();
        for j in 0..d {
            basis[[r, j]] = dir[j] * scale;
        }
    }
    let kept: f64 = sorted[..k].iter().sum();
    let all: f64 = sorted.iter().sum();
    Ok(WhiteningModel {
        mean,
        basis,
        eigenvalues: Array1::from(sorted[..k].to_vec()),
        retain,
        retained_variance: kept / all,
        epsilon: EIGEN_FLOOR,
    })
}
