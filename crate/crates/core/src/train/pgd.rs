//! Sign-gradient ascent on the constraint loss inside an L-infinity ball.

use crate::logic::{truth_with_grad, AtomMode, Bindings, Env, Formula, LogicError};
use crate::netcore::Network;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdConfig {
    pub epsilon: f64,
    pub steps: usize,
    /// Defaults to `epsilon / 4`.
    pub step_size: Option<f64>,
    pub random_start: bool,
}

impl PgdConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            steps: 10,
            step_size: None,
            random_start: false,
        }
    }

    pub fn step(&self) -> f64 {
        self.step_size.unwrap_or(self.epsilon / 4.0)
    }
}

/// What to attack: the formula `body` with the quantified input `var` free.
/// `env` binds parameters and every other input.
#[derive(Debug, Clone, Copy)]
pub struct Target<'a> {
    pub net: &'a Network,
    pub body: &'a Formula,
    pub env: &'a Env,
    pub var: &'a str,
    pub sharpness: f64,
}

#[derive(Debug, Clone)]
pub struct Attack {
    pub point: Tensor,
    /// Clamped constraint loss at `point`.
    pub loss: f64,
    /// Unclamped loss at `point`, the tie-breaker between equal clamped losses.
    pub surrogate: f64,
}

/// `B(center, eps) ∩ [0, 1]` as per-coordinate f32 bounds, rounded inward so
/// every f32 point inside is within `eps` of `center`.
pub fn ball_box(center: &Tensor, eps: f64) -> (Vec<f32>, Vec<f32>) {
    assert!(eps >= 0.0, "ball radius must be non-negative");
    let inward = |c: f32, e: f64| -> (f32, f32) {
        let c64 = c as f64;
        let mut lo = (c64 - e).max(0.0) as f32;
        if (lo as f64) < c64 - e {
            lo = lo.next_up();
        }
        let mut hi = (c64 + e).min(1.0) as f32;
        if (hi as f64) > c64 + e {
            hi = hi.next_down();
        }
        (lo.min(c.clamp(0.0, 1.0)), hi.max(c.clamp(0.0, 1.0)))
    };
    center.data().iter().map(|&c| inward(c, eps)).unzip()
}

impl<'a> Target<'a> {
    /// Outputs of every referenced input except `var`, computed once.
    pub fn fixed_bindings(&self) -> Result<Bindings, LogicError> {
        let mut b = Bindings {
            params: self.env.params.clone(),
            ..Bindings::default()
        };
        for name in self.body.referenced_inputs() {
            if name == self.var {
                continue;
            }
            let x = self
                .env
                .inputs
                .get(&name)
                .ok_or_else(|| LogicError::UnboundInput(name.clone()))?;
            let out = self.net.forward(x)?;
            b.outputs
                .insert(name, out.data().iter().map(|&v| v as f64).collect());
        }
        Ok(b)
    }

    /// Clamped loss, surrogate loss and d(surrogate loss)/dx at `x`.
    fn probe(
        &self,
        fixed: &Bindings,
        x: &Tensor,
        with_grad: bool,
    ) -> Result<(f64, f64, Vec<f64>), LogicError> {
        let trace = self.net.forward_trace(x)?;
        let mut b = fixed.clone();
        b.outputs.insert(
            self.var.to_string(),
            trace.output().data().iter().map(|&v| v as f64).collect(),
        );
        let (clamped, _) = truth_with_grad(self.body, &b, self.sharpness, AtomMode::Clamped)?;
        let (surrogate, grads) =
            truth_with_grad(self.body, &b, self.sharpness, AtomMode::Surrogate)?;
        let grad = match (with_grad, grads.get(self.var)) {
            (true, Some(g)) if g.iter().any(|&v| v != 0.0) => {
                let upstream: Vec<f64> = g.iter().map(|v| -v).collect();
                self.net.input_gradient(&trace, &upstream)?
            }
            _ => Vec::new(),
        };
        Ok((1.0 - clamped, 1.0 - surrogate, grad))
    }
}

/// Attack within `B(x0, cfg.epsilon) ∩ [0, 1]`.
pub fn pgd_attack(
    target: &Target,
    x0: &Tensor,
    cfg: &PgdConfig,
    seed: u64,
) -> Result<Attack, LogicError> {
    let (lo, hi) = ball_box(x0, cfg.epsilon);
    pgd_in_box(target, &lo, &hi, x0, cfg, seed)
}

/// Attack within the box `[lo, hi]`, starting from `start` (clamped into the
/// box) or from a uniform point when `cfg.random_start` is set. Returns the
/// best iterate, the start included.
pub fn pgd_in_box(
    target: &Target,
    lo: &[f32],
    hi: &[f32],
    start: &Tensor,
    cfg: &PgdConfig,
    seed: u64,
) -> Result<Attack, LogicError> {
    assert_eq!(lo.len(), start.len());
    assert_eq!(hi.len(), start.len());
    let fixed = target.fixed_bindings()?;
    let mut x = start.clone();
    if cfg.random_start {
        let mut rng = Rng::new(seed);
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v = rng.uniform_f32(lo[i], hi[i]).clamp(lo[i], hi[i]);
        }
    } else {
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v = v.clamp(lo[i], hi[i]);
        }
    }
    let step = cfg.step();
    let (mut loss, mut surrogate, mut grad) = target.probe(&fixed, &x, cfg.steps > 0)?;
    let mut best = Attack {
        point: x.clone(),
        loss,
        surrogate,
    };
    for k in 0..cfg.steps {
        if grad.is_empty() || step == 0.0 {
            break;
        }
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            let moved = (*v as f64 + step * sign(grad[i])) as f32;
            *v = moved.clamp(lo[i], hi[i]);
            assert!(lo[i] <= *v && *v <= hi[i], "iterate left the box");
        }
        (loss, surrogate, grad) = target.probe(&fixed, &x, k + 1 < cfg.steps)?;
        if (loss, surrogate) > (best.loss, best.surrogate) {
            best = Attack {
                point: x.clone(),
                loss,
                surrogate,
            };
        }
    }
    Ok(best)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
