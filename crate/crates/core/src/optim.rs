//! Stochastic gradient descent over lists of weight matrices.

use ndarray::Array2;

/// SGD with optional heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<Array2<f64>>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Self {
        Self {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        }
    }

    /// Applies one update. `params` and `grads` must list tensors in the same order on every call.
    pub fn step(&mut self, params: Vec<&mut Array2<f64>>, grads: Vec<&Array2<f64>>) {
        debug_assert_eq!(params.len(), grads.len());
        if self.momentum == 0.0 {
            for (p, g) in params.into_iter().zip(grads) {
                p.scaled_add(-self.learning_rate, g);
            }
            return;
        }
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| Array2::zeros(g.raw_dim())).collect();
        }
        for ((p, g), v) in params.into_iter().zip(grads).zip(self.velocity.iter_mut()) {
            *v *= self.momentum;
            *v += g;
            p.scaled_add(-self.learning_rate, v);
        }
    }
}

/// Rescales gradients in place so their joint L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: Vec<&mut Array2<f64>>, max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = max_norm / norm;
        for g in grads {
            *g *= factor;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn plain_step() {
        let mut p = array![[1.0, 2.0]];
        let g = array![[0.5, -1.0]];
        Sgd::new(0.1, 0.0).step(vec![&mut p], vec![&g]);
        assert_eq!(p, array![[0.95, 2.1]]);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = array![[0.0]];
        let g = array![[1.0]];
        let mut opt = Sgd::new(1.0, 0.5);
        opt.step(vec![&mut p], vec![&g]);
        opt.step(vec![&mut p], vec![&g]);
        assert_eq!(p, array![[-2.5]]);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut a = array![[3.0]];
        let mut b = array![[4.0]];
        let norm = clip_global_norm(vec![&mut a, &mut b], 1.0);
        assert_eq!(norm, 5.0);
        assert!((a[[0, 0]] - 0.6).abs() < 1e-12 && (b[[0, 0]] - 0.8).abs() < 1e-12);
    }
}
