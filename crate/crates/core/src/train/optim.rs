use crate::network::NetworkModel;

/// Adaptive moment estimation over every live weight of a model.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(model: &NetworkModel) -> Self {
        let zeros = || -> Vec<Vec<f64>> {
            model
                .connections()
                .iter()
                .map(|w| vec![0.0; w.len()])
                .collect()
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// Applies one update with learning rate `lr`. Masked weights are never
    /// touched.
    pub fn step(&mut self, model: &mut NetworkModel, grads: &[Vec<f64>], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (c, w) in model.connections_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[c], &mut self.v[c], &grads[c]);
            w.update_live(|idx, old| {
                m[idx] = b1 * m[idx] + (1.0 - b1) * g[idx];
                v[idx] = b2 * v[idx] + (1.0 - b2) * g[idx] * g[idx];
                let m_hat = m[idx] / bc1;
                let v_hat = v[idx] / bc2;
                let delta = lr * m_hat / (v_hat.sqrt() + eps);
                // keeps the exact bits (including -0.0) when nothing moves
                if delta == 0.0 {
                    old
                } else {
                    old - delta
                }
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DelaySet, NeuronParams};

    #[test]
    fn first_step_moves_each_weight_by_the_learning_rate() {
        let sets = [DelaySet::zero()];
        let mut m = NetworkModel::zeros(&[2, 1], &sets, NeuronParams::default(), 2).unwrap();
        m.connection_mut(0).prune(0, 1, 0);
        let mut adam = Adam::new(&m);
        adam.step(&mut m, &[vec![0.5, -3.0]], 0.01);
        assert!((m.connection(0).get(0, 0, 0) + 0.01).abs() < 1e-9);
        assert_eq!(m.connection(0).get(0, 1, 0), 0.0);
    }
}
