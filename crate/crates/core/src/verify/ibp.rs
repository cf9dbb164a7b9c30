//! Interval bound propagation.
//!
//! Affine layers bound each output by the split sum
//! `b + sum(w >= 0 ? w * l : w * u)` (and symmetrically for the upper bound),
//! accumulated in the same order and precision as the forward pass. Rounding
//! to nearest is monotone, so every f32 input in the box produces a forward
//! output inside the bounds, and a degenerate box reproduces the forward
//! pass bit for bit.

use super::{IntervalTensor, VerifyError};
use crate::netcore::{tanh_sat, Layer, Network};
use crate::tensor::Tensor;

pub fn propagate_bounds(
    net: &Network,
    input: &IntervalTensor,
) -> Result<IntervalTensor, VerifyError> {
    input.lower().expect_shape(&net.input_shape())?;
    let mut cur = input.clone();
    for layer in net.layers() {
        cur = layer_bounds(layer, &cur);
    }
    Ok(cur)
}

/// Bounds after each layer; `result[0]` is the input.
pub fn propagate_trace(
    net: &Network,
    input: &IntervalTensor,
) -> Result<Vec<IntervalTensor>, VerifyError> {
    input.lower().expect_shape(&net.input_shape())?;
    let mut out = vec![input.clone()];
    for layer in net.layers() {
        let next = layer_bounds(layer, out.last().unwrap());
        out.push(next);
    }
    Ok(out)
}

fn layer_bounds(layer: &Layer, x: &IntervalTensor) -> IntervalTensor {
    let (l, u) = (x.lower().data(), x.upper().data());
    let shape = layer.output_shape();
    let (lo, hi): (Vec<f32>, Vec<f32>) = match layer {
        Layer::Conv2d(c) => {
            let mut lo = Vec::with_capacity(c.out_h() * c.out_w());
            let mut hi = Vec::with_capacity(lo.capacity());
            for oy in 0..c.out_h() {
                for ox in 0..c.out_w() {
                    lo.push(c.accumulate(oy, ox, |w, i| lower_term(w, l[i], u[i])) as f32);
                    hi.push(c.accumulate(oy, ox, |w, i| upper_term(w, l[i], u[i])) as f32);
                }
            }
            (lo, hi)
        }
        Layer::Linear(lin) => (0..lin.out_dim())
            .map(|r| {
                (
                    lin.accumulate(r, |w, j| lower_term(w, l[j], u[j])) as f32,
                    lin.accumulate(r, |w, j| upper_term(w, l[j], u[j])) as f32,
                )
            })
            .unzip(),
        Layer::Relu(_) => (
            l.iter().map(|v| v.max(0.0)).collect(),
            u.iter().map(|v| v.max(0.0)).collect(),
        ),
        Layer::MaxPool2d(p) => {
            let mut lo = Vec::with_capacity(p.out_h() * p.out_w());
            let mut hi = Vec::with_capacity(lo.capacity());
            for oy in 0..p.out_h() {
                for ox in 0..p.out_w() {
                    lo.push(
                        p.window(oy, ox)
                            .map(|i| l[i])
                            .fold(f32::NEG_INFINITY, f32::max),
                    );
                    hi.push(
                        p.window(oy, ox)
                            .map(|i| u[i])
                            .fold(f32::NEG_INFINITY, f32::max),
                    );
                }
            }
            (lo, hi)
        }
        Layer::Flatten(_) => (l.to_vec(), u.to_vec()),
        Layer::Tanh(_) => (
            l.iter().map(|&v| tanh_sat(v as f64)).collect(),
            u.iter().map(|&v| tanh_sat(v as f64)).collect(),
        ),
    };
    IntervalTensor::from_parts(
        Tensor::from_parts(shape.clone(), lo),
        Tensor::from_parts(shape, hi),
    )
}

#[inline]
fn lower_term(w: f32, l: f32, u: f32) -> f64 {
    w as f64 * if w >= 0.0 { l } else { u } as f64
}

#[inline]
fn upper_term(w: f32, l: f32, u: f32) -> f64 {
    w as f64 * if w >= 0.0 { u } else { l } as f64
}
