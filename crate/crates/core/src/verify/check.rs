//! Verdicts: interval check, PGD falsification, optional input splitting.

use std::collections::VecDeque;

use super::kleene::{kleene, Range, RangeBindings, Tri};
use super::{propagate_bounds, IntervalTensor, VerifyError};
use crate::logic::{exact, Bindings, Env, Expr, Formula};
use crate::netcore::{Layer, Network};
use crate::rng::derive_seed;
use crate::speclang::Problem;
use crate::tensor::Tensor;
use crate::train::{pgd_in_box, PgdConfig, Target};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub pgd_steps: usize,
    /// Defaults to a quarter of the ball radius.
    pub pgd_step_size: Option<f64>,
    /// Maximum number of leaf boxes; 0 and 1 disable splitting.
    pub split_budget: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            pgd_steps: 10,
            pgd_step_size: None,
            split_budget: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Verified,
    /// `counterexample` lies in the ball and violates the property under
    /// exact semantics. `violation` is the largest output deviation from
    /// the centre's output.
    Falsified {
        counterexample: Tensor,
        violation: f64,
    },
    Unknown {
        bounds: IntervalTensor,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Verified => "verified",
            Verdict::Falsified { .. } => "falsified",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub verdict: Verdict,
    /// Output bounds over the examined boxes (the whole ball unless the
    /// search stopped at a counterexample).
    pub bounds: IntervalTensor,
    /// Network output at the ball centre.
    pub center_output: Tensor,
    /// Boxes whose bounds were computed.
    pub boxes: usize,
}

/// A property over one L-infinity ball.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub net: &'a Network,
    pub body: &'a Formula,
    /// Parameters and every input other than `var`.
    pub env: &'a Env,
    pub var: &'a str,
    pub center: &'a Tensor,
    pub epsilon: f64,
    /// Atom sharpness for the PGD loss.
    pub sharpness: f64,
}

/// Local robustness `|N(x)[i] - N(x0)[i]| <= delta` for every output.
pub fn check_robustness(
    net: &Network,
    x0: &Tensor,
    epsilon: f64,
    delta: f64,
    cfg: &VerifyConfig,
) -> Result<Verification, VerifyError> {
    let body = Formula::robustness("N", "x", "x0", Expr::Num(delta), net.output_len());
    let mut env = Env::default();
    env.inputs.insert("x0".into(), x0.clone());
    check(
        &Query {
            net,
            body: &body,
            env: &env,
            var: "x",
            center: x0,
            epsilon,
            sharpness: delta,
        },
        cfg,
    )
}

pub fn check_problem(
    net: &Network,
    problem: &Problem,
    cfg: &VerifyConfig,
) -> Result<Verification, VerifyError> {
    check(
        &Query {
            net,
            body: &problem.body,
            env: &problem.env,
            var: &problem.var,
            center: &problem.anchor,
            epsilon: problem.epsilon,
            sharpness: problem.delta.unwrap_or(0.1),
        },
        cfg,
    )
}

pub fn check(q: &Query, cfg: &VerifyConfig) -> Result<Verification, VerifyError> {
    if !(q.epsilon >= 0.0 && q.epsilon.is_finite()) {
        return Err(VerifyError::Radius(q.epsilon));
    }
    let target = Target {
        net: q.net,
        body: q.body,
        env: q.env,
        var: q.var,
        sharpness: q.sharpness,
    };
    let fixed = target.fixed_bindings()?;
    let center_output = q.net.forward(q.center)?;
    let pgd = PgdConfig {
        epsilon: q.epsilon,
        steps: cfg.pgd_steps,
        step_size: cfg.pgd_step_size,
        random_start: false,
    };
    let influence = input_influence(q.net);

    let mut queue = VecDeque::from([IntervalTensor::ball(q.center, q.epsilon)]);
    let mut leaves = 1usize;
    let mut boxes = 0usize;
    let mut hull: Option<IntervalTensor> = None;
    let mut undecided = false;
    while let Some(region) = queue.pop_front() {
        let bounds = propagate_bounds(q.net, &region)?;
        boxes += 1;
        let ranges = range_bindings(&fixed, q.var, &bounds);
        if kleene(q.body, &ranges)? != Tri::True {
            let seed = derive_seed(cfg.seed, &[boxes as u64]);
            let attack = pgd_in_box(
                &target,
                region.lower().data(),
                region.upper().data(),
                q.center,
                &pgd,
                seed,
            )?;
            let mut b = fixed.clone();
            let out = q.net.forward(&attack.point)?;
            b.outputs.insert(q.var.to_string(), to_f64(out.data()));
            if !exact(q.body, &b)? {
                let violation = out
                    .data()
                    .iter()
                    .zip(center_output.data())
                    .map(|(a, c)| (*a as f64 - *c as f64).abs())
                    .fold(0.0, f64::max);
                return Ok(Verification {
                    verdict: Verdict::Falsified {
                        counterexample: attack.point,
                        violation,
                    },
                    bounds: merge(hull, bounds),
                    center_output,
                    boxes,
                });
            }
            if leaves < cfg.split_budget {
                if let Some((a, b)) = bisect(&region, &influence) {
                    queue.push_back(a);
                    queue.push_back(b);
                    leaves += 1;
                    continue;
                }
            }
            undecided = true;
        }
        hull = Some(merge(hull, bounds));
    }
    let bounds = hull.expect("at least one leaf");
    let verdict = if undecided {
        Verdict::Unknown {
            bounds: bounds.clone(),
        }
    } else {
        Verdict::Verified
    };
    Ok(Verification {
        verdict,
        bounds,
        center_output,
        boxes,
    })
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn merge(acc: Option<IntervalTensor>, b: IntervalTensor) -> IntervalTensor {
    match acc {
        Some(a) => a.hull(&b),
        None => b,
    }
}

fn range_bindings(fixed: &Bindings, var: &str, bounds: &IntervalTensor) -> RangeBindings {
    let mut r = RangeBindings {
        params: fixed.params.clone(),
        ..RangeBindings::default()
    };
    for (name, outs) in &fixed.outputs {
        r.outputs.insert(
            name.clone(),
            outs.iter().map(|&v| Range::point(v)).collect(),
        );
    }
    let (l, u) = (bounds.lower().data(), bounds.upper().data());
    r.outputs.insert(
        var.to_string(),
        (0..bounds.len())
            .map(|i| Range {
                lo: l[i] as f64,
                hi: u[i] as f64,
            })
            .collect(),
    );
    r
}

/// Per-input weight mass of the first affine layer: for a convolution, the
/// sum of absolute kernel weights over every tap that reads the pixel; for a
/// linear layer, the absolute column sum.
pub fn input_influence(net: &Network) -> Vec<f64> {
    let n: usize = net.input_shape().iter().product();
    let mut infl = vec![0.0; n];
    for layer in net.layers() {
        match layer {
            Layer::Conv2d(c) => {
                for oy in 0..c.out_h() {
                    for ox in 0..c.out_w() {
                        c.accumulate(oy, ox, |w, i| {
                            infl[i] += w.abs() as f64;
                            0.0
                        });
                    }
                }
                return infl;
            }
            Layer::Linear(l) => {
                for r in 0..l.out_dim() {
                    l.accumulate(r, |w, j| {
                        infl[j] += w.abs() as f64;
                        0.0
                    });
                }
                return infl;
            }
            Layer::Flatten(_) => continue,
            _ => break,
        }
    }
    vec![1.0; n]
}

/// Halves the box along the coordinate with the largest
/// `half-width * influence`; `None` when no coordinate can be split.
pub fn bisect(
    region: &IntervalTensor,
    influence: &[f64],
) -> Option<(IntervalTensor, IntervalTensor)> {
    let (l, u) = (region.lower().data(), region.upper().data());
    let mut best: Option<(usize, f64)> = None;
    for i in 0..l.len() {
        let mid = l[i] + (u[i] - l[i]) / 2.0;
        if !(l[i] < mid && mid < u[i]) {
            continue;
        }
        let score = (u[i] - l[i]) as f64 / 2.0 * influence[i].max(f64::MIN_POSITIVE);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    let (i, _) = best?;
    let mid = l[i] + (u[i] - l[i]) / 2.0;
    let mut left_hi = region.upper().clone();
    left_hi.data_mut()[i] = mid;
    let mut right_lo = region.lower().clone();
    right_lo.data_mut()[i] = mid;
    Some((
        IntervalTensor::from_parts(region.lower().clone(), left_hi),
        IntervalTensor::from_parts(right_lo, region.upper().clone()),
    ))
}
