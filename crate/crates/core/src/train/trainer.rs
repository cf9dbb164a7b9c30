use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::{
    mse_grad, mse_loss, pgd_attack, Constraint, EpochMetrics, GradNormState, PgdConfig, Target,
    TrainConfig, TrainError,
};
use crate::data::Dataset;
use crate::logic::{exact, truth_with_grad, AtomMode, Bindings, Env};
use crate::netcore::{Gradients, Network, OptimizerState, Trace};
use crate::rng::{derive_seed, Rng};
use crate::tensor::Tensor;

// seed streams
const INIT: u64 = 0;
const ATTACK: u64 = 1;
const EVAL: u64 = 2;
const SHUFFLE: u64 = 3;

#[derive(Debug, Default)]
pub struct Counters {
    pub optimizer_steps: AtomicU64,
    /// PGD runs on training samples.
    pub train_attacks: AtomicU64,
    /// PGD runs inside [`evaluate`].
    pub eval_attacks: AtomicU64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub metrics: Vec<EpochMetrics>,
    pub gradnorm: GradNormState,
    /// GradNorm weights after every optimizer step (constrained mode only).
    pub weight_trace: Vec<[f64; 2]>,
    pub counters: Counters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub p_loss: f64,
    pub c_acc: f64,
    pub satisfied: usize,
    pub count: usize,
}

/// Trains a freshly initialized network sized to the data.
pub fn train_epochs(
    cfg: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    constraint: &Constraint,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    let side = train.side();
    if side % 4 != 0 || side < 4 {
        return Err(TrainError::Config(format!(
            "image side {side} is not a multiple of 4"
        )));
    }
    let net = Network::with_side(derive_seed(cfg.seed, &[INIT]), side);
    train_network(cfg, net, train, test, constraint, on_epoch)
}

pub fn train_network(
    cfg: &TrainConfig,
    mut net: Network,
    train: &Dataset,
    test: &Dataset,
    constraint: &Constraint,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(TrainError::Config(
            "training and test sets must be non-empty".into(),
        ));
    }
    let shared = net
        .last_linear_weight_index()
        .ok_or_else(|| TrainError::Config("network has no linear layer".into()))?;
    let counters = Counters::default();
    let mut opt = OptimizerState::new(cfg.optimizer);
    let mut gradnorm = GradNormState::default();
    let mut weight_trace = Vec::new();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.epochs {
        Rng::derive(cfg.seed, &[SHUFFLE, epoch as u64]).shuffle(&mut order);
        let (mut p_sum, mut c_sum) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let terms = batch
                .par_iter()
                .map(|&i| {
                    let seed = derive_seed(cfg.seed, &[ATTACK, epoch as u64, i as u64]);
                    sample_terms(
                        &net,
                        cfg,
                        constraint,
                        &train.samples[i].image,
                        &train.samples[i].label_norm(),
                        seed,
                        &counters,
                    )
                })
                .collect::<Result<Vec<_>, TrainError>>()?;
            let n = batch.len() as f64;
            let mut g_p = Gradients::zeros_like(&net);
            let mut g_c = Gradients::zeros_like(&net);
            let (mut lp, mut lc) = (0.0, 0.0);
            for t in &terms {
                lp += t.p_loss;
                lc += t.c_loss;
                g_p.add_scaled(&t.g_p, 1.0);
                if let Some(g) = &t.g_c {
                    g_c.add_scaled(g, 1.0);
                }
            }
            p_sum += lp;
            c_sum += lc;
            g_p.scale((1.0 / n) as f32);
            g_c.scale((1.0 / n) as f32);
            let (lp, lc) = (lp / n, lc / n);
            if cfg.constrained {
                let w = gradnorm.weights;
                let mut combined = g_p.clone();
                combined.scale(w[0] as f32);
                combined.add_scaled(&g_c, w[1] as f32);
                opt.apply(&mut net, &combined);
                gradnorm.update(
                    [lp, lc],
                    [g_p.norm_of(shared), g_c.norm_of(shared)],
                    &cfg.gradnorm,
                );
                weight_trace.push(gradnorm.weights);
            } else {
                opt.apply(&mut net, &g_p);
            }
            counters.optimizer_steps.fetch_add(1, Ordering::Relaxed);
        }
        let eval = evaluate_counted(
            &net,
            test,
            constraint,
            &cfg.eval_pgd,
            derive_seed(cfg.seed, &[EVAL, epoch as u64]),
            &counters,
        )?;
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_p_loss: p_sum / train.len() as f64,
            train_c_loss: c_sum / train.len() as f64,
            test_p_loss: eval.p_loss,
            test_c_acc: eval.c_acc,
            lambda: if cfg.constrained {
                gradnorm.lambda()
            } else {
                0.0
            },
        };
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome {
        network: net,
        metrics,
        gradnorm,
        weight_trace,
        counters,
    })
}

struct SampleTerms {
    p_loss: f64,
    c_loss: f64,
    g_p: Gradients,
    g_c: Option<Gradients>,
}

fn anchored_env(constraint: &Constraint, image: &Tensor) -> Env {
    let mut env = Env {
        params: constraint.params.clone(),
        ..Env::default()
    };
    env.inputs.insert(constraint.anchor.clone(), image.clone());
    env
}

fn sample_terms(
    net: &Network,
    cfg: &TrainConfig,
    constraint: &Constraint,
    image: &Tensor,
    label: &[f32; 2],
    seed: u64,
    counters: &Counters,
) -> Result<SampleTerms, TrainError> {
    let trace0 = net.forward_trace(image)?;
    let pred = trace0.output().data();
    let p_loss = mse_loss(pred, label);
    let (g_p, _) = net.backward(&trace0, &mse_grad(pred, label))?;

    let env = anchored_env(constraint, image);
    let target = Target {
        net,
        body: &constraint.body,
        env: &env,
        var: &constraint.var,
        sharpness: constraint.sharpness,
    };
    let x_star = if cfg.constrained {
        counters.train_attacks.fetch_add(1, Ordering::Relaxed);
        pgd_attack(&target, image, &cfg.pgd, seed)?.point
    } else {
        uniform_in_ball(image, cfg.pgd.epsilon, seed)
    };
    let trace_star = net.forward_trace(&x_star)?;
    let (c_loss, upstream) = constraint_terms(constraint, &trace0, &trace_star)?;
    let g_c = match (cfg.constrained, upstream) {
        (true, Some((u_star, u0))) => {
            let (mut g, _) = net.backward(&trace_star, &u_star)?;
            if u0.iter().any(|&v| v != 0.0) {
                g.add_scaled(&net.backward(&trace0, &u0)?.0, 1.0);
            }
            Some(g)
        }
        _ => None,
    };
    Ok(SampleTerms {
        p_loss,
        c_loss,
        g_p,
        g_c,
    })
}

/// Constraint loss with the variable at `trace_star` and the anchor at
/// `trace0`, plus d loss / d output for each when nonzero.
#[allow(clippy::type_complexity)]
fn constraint_terms(
    constraint: &Constraint,
    trace0: &Trace,
    trace_star: &Trace,
) -> Result<(f64, Option<(Vec<f64>, Vec<f64>)>), TrainError> {
    let out = |t: &Trace| {
        t.output()
            .data()
            .iter()
            .map(|&v| v as f64)
            .collect::<Vec<f64>>()
    };
    let mut b = Bindings {
        params: constraint.params.clone(),
        ..Bindings::default()
    };
    b.outputs.insert(constraint.anchor.clone(), out(trace0));
    b.outputs.insert(constraint.var.clone(), out(trace_star));
    let (t, grads) = truth_with_grad(
        &constraint.body,
        &b,
        constraint.sharpness,
        AtomMode::Clamped,
    )?;
    let upstream = |name: &str| -> Vec<f64> {
        match grads.get(name) {
            Some(g) => g.iter().map(|v| -v).collect(),
            None => vec![0.0; trace0.output().len()],
        }
    };
    let (u_star, u0) = (upstream(&constraint.var), upstream(&constraint.anchor));
    let nonzero = u_star.iter().chain(&u0).any(|&v| v != 0.0);
    Ok((1.0 - t, nonzero.then_some((u_star, u0))))
}

fn uniform_in_ball(center: &Tensor, eps: f64, seed: u64) -> Tensor {
    let (lo, hi) = super::ball_box(center, eps);
    let mut rng = Rng::new(seed);
    let mut x = center.clone();
    for (i, v) in x.data_mut().iter_mut().enumerate() {
        *v = rng.uniform_f32(lo[i], hi[i]).clamp(lo[i], hi[i]);
    }
    x
}

/// Mean prediction loss and the fraction of samples whose constraint holds
/// exactly at the PGD counterexample.
pub fn evaluate(
    net: &Network,
    data: &Dataset,
    constraint: &Constraint,
    pgd: &PgdConfig,
    seed: u64,
) -> Result<EvalResult, TrainError> {
    evaluate_counted(net, data, constraint, pgd, seed, &Counters::default())
}

fn evaluate_counted(
    net: &Network,
    data: &Dataset,
    constraint: &Constraint,
    pgd: &PgdConfig,
    seed: u64,
    counters: &Counters,
) -> Result<EvalResult, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Config("evaluation set is empty".into()));
    }
    let per_sample = data
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<(f64, bool), TrainError> {
            let pred = net.forward(&s.image)?;
            let p_loss = mse_loss(pred.data(), &s.label_norm());
            let env = anchored_env(constraint, &s.image);
            let target = Target {
                net,
                body: &constraint.body,
                env: &env,
                var: &constraint.var,
                sharpness: constraint.sharpness,
            };
            counters.eval_attacks.fetch_add(1, Ordering::Relaxed);
            let attack = pgd_attack(&target, &s.image, pgd, derive_seed(seed, &[i as u64]))?;
            let mut b = target.fixed_bindings()?;
            let out = net.forward(&attack.point)?;
            b.outputs.insert(
                constraint.var.clone(),
                out.data().iter().map(|&v| v as f64).collect(),
            );
            Ok((p_loss, exact(&constraint.body, &b)?))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let count = per_sample.len();
    let satisfied = per_sample.iter().filter(|r| r.1).count();
    Ok(EvalResult {
        p_loss: per_sample.iter().map(|r| r.0).sum::<f64>() / count as f64,
        c_acc: satisfied as f64 / count as f64,
        satisfied,
        count,
    })
}
