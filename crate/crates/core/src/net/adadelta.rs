use ndarray::Zip;

use super::Dense;

/// AdaDelta: per-parameter running averages of squared gradients and
/// squared updates; no global learning rate.
#[derive(Debug, Clone)]
pub struct AdaDelta {
    pub decay: f64,
    pub epsilon: f64,
    mean_sq_grad: Vec<Dense>,
    mean_sq_update: Vec<Dense>,
}

impl AdaDelta {
    pub fn new(params: &[Dense], decay: f64, epsilon: f64) -> Self {
        let zeros = |p: &Dense| Dense::zeros(p.inputs(), p.outputs());
        Self {
            decay,
            epsilon,
            mean_sq_grad: params.iter().map(zeros).collect(),
            mean_sq_update: params.iter().map(zeros).collect(),
        }
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [Dense], grads: &[Dense]) {
        let (rho, eps) = (self.decay, self.epsilon);
        let update = |p: &mut f64, g: &f64, eg: &mut f64, ex: &mut f64| {
            *eg = rho * *eg + (1.0 - rho) * g * g;
            let dx = -((*ex + eps).sqrt() / (*eg + eps).sqrt()) * g;
            *ex = rho * *ex + (1.0 - rho) * dx * dx;
            *p += dx;
        };
        for (((p, g), eg), ex) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.mean_sq_grad)
            .zip(&mut self.mean_sq_update)
        {
            Zip::from(&mut p.weights)
                .and(&g.weights)
                .and(&mut eg.weights)
                .and(&mut ex.weights)
                .for_each(update);
            Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut eg.bias)
                .and(&mut ex.bias)
                .for_each(update);
        }
    }
}
