//! Adaptive weighting of the prediction and constraint losses.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradNormConfig {
    /// Asymmetry: how strongly slower tasks are pushed.
    pub alpha: f64,
    pub learning_rate: f64,
}

impl Default for GradNormConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            learning_rate: 0.025,
        }
    }
}

pub const MIN_WEIGHT: f64 = 1e-4;

/// Task weights `w = (w0, w1)` for the prediction and constraint losses.
#[derive(Debug, Clone, PartialEq)]
pub struct GradNormState {
    pub weights: [f64; 2],
    /// Loss of each task at the first call where it was positive.
    pub initial: [Option<f64>; 2],
    pub steps: u64,
}

impl Default for GradNormState {
    fn default() -> Self {
        Self {
            weights: [1.0, 1.0],
            initial: [None, None],
            steps: 0,
        }
    }
}

impl GradNormState {
    /// `w1 / w0`.
    pub fn lambda(&self) -> f64 {
        self.weights[1] / self.weights[0]
    }

    /// One weight update. `losses` are the unweighted task losses and
    /// `grad_norms` the L2 norms of their unweighted gradients at the shared
    /// layer, so `G_i = w_i * grad_norms[i]`.
    ///
    /// Weights are left alone until both tasks have a recorded initial loss.
    pub fn update(&mut self, losses: [f64; 2], grad_norms: [f64; 2], cfg: &GradNormConfig) {
        assert!(losses
            .iter()
            .chain(&grad_norms)
            .all(|v| v.is_finite() && *v >= 0.0));
        self.steps += 1;
        for i in 0..2 {
            if self.initial[i].is_none() && losses[i] > 0.0 {
                self.initial[i] = Some(losses[i]);
            }
        }
        let (Some(l0), Some(l1)) = (self.initial[0], self.initial[1]) else {
            return;
        };
        let ratios = [losses[0] / l0, losses[1] / l1];
        let mean_ratio = (ratios[0] + ratios[1]) / 2.0;
        let rates = if mean_ratio > 0.0 {
            [ratios[0] / mean_ratio, ratios[1] / mean_ratio]
        } else {
            [1.0, 1.0]
        };
        let g = [
            self.weights[0] * grad_norms[0],
            self.weights[1] * grad_norms[1],
        ];
        let g_mean = (g[0] + g[1]) / 2.0;
        for i in 0..2 {
            let target = g_mean * rates[i].powf(cfg.alpha);
            let diff = g[i] - target;
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            self.weights[i] =
                (self.weights[i] - cfg.learning_rate * sign * grad_norms[i]).max(MIN_WEIGHT);
        }
        let scale = 2.0 / (self.weights[0] + self.weights[1]);
        self.weights[0] *= scale;
        self.weights[1] = 2.0 - self.weights[0];
    }
}
