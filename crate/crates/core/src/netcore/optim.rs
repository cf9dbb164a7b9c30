//! Parameter update rules.

use super::network::{Gradients, Network};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators and step counter. Moments are allocated lazily on the
/// first step so one state can serve any parameter list.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn apply(&mut self, net: &mut Network, grads: &Gradients) {
        let mut params = net.parameters_mut();
        self.update(&mut params, &grads.tensors);
    }

    /// One update of `params` against `grads` (same order, same shapes).
    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) {
        assert_eq!(
            params.len(),
            grads.len(),
            "gradient list does not match parameters"
        );
        for (p, g) in params.iter().zip(grads) {
            assert_eq!(
                p.shape(),
                g.shape(),
                "gradient shape does not match parameter"
            );
        }
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let c = self.config;
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w = (*w as f64 - c.learning_rate * d as f64) as f32;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first.iter_mut().zip(self.second.iter_mut()))
                {
                    for (((w, &d), mi), vi) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        let d = d as f64;
                        *mi = c.beta1 * *mi + (1.0 - c.beta1) * d;
                        *vi = c.beta2 * *vi + (1.0 - c.beta2) * d * d;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *w = (*w as f64 - c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon))
                            as f32;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = Network::with_side(1, 8);
        let before = net.clone();
        let mut st = OptimizerState::new(OptimizerConfig::default());
        let zeros = Gradients::zeros_like(&net);
        st.apply(&mut net, &zeros);
        assert_eq!(net, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut net = Network::with_side(1, 8);
            let before = net.clone();
            let mut grads = Gradients::zeros_like(&net);
            for t in &mut grads.tensors {
                t.data_mut().fill(0.25);
            }
            let mut st = OptimizerState::new(OptimizerConfig {
                kind,
                learning_rate: 0.0,
                ..OptimizerConfig::default()
            });
            st.apply(&mut net, &grads);
            assert_eq!(net, before);
        }
    }

    /// Scalar Adam recurrence written out independently of `update`.
    fn adam_scalar_oracle(w0: f64, lr: f64, steps: u32) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
        let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
        for t in 1..=steps {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            w -= lr * mh / (vh.sqrt() + eps);
        }
        w
    }

    #[test]
    fn adam_minimizes_scalar_quadratic() {
        let mut w = Tensor::new(vec![1], vec![1.0]).unwrap();
        let mut st = OptimizerState::new(OptimizerConfig {
            learning_rate: 0.1,
            ..OptimizerConfig::default()
        });
        for _ in 0..100 {
            let g = Tensor::new(vec![1], vec![2.0 * w.data()[0]]).unwrap();
            st.update(&mut [&mut w], &[g]);
        }
        let oracle = adam_scalar_oracle(1.0, 0.1, 100);
        assert!(oracle.abs() < 0.1, "oracle {oracle}");
        assert!(w.data()[0].abs() < 0.1);
        assert!((w.data()[0] as f64 - oracle).abs() < 1e-3);
        assert_eq!(st.step, 100);
    }
}
