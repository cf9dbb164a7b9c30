//! Helpers shared by the integration tests: an f64 reference forward pass
//! written directly from the layer definitions, and small random networks.

#![allow(dead_code)]

use trackverify::netcore::{Conv2d, Layer, Linear, MaxPool2d, Network};
use trackverify::rng::Rng;
use trackverify::tensor::Tensor;

/// Output of the f64 reference pass plus the activation pattern (ReLU signs
/// and pooling winners) it went through.
pub struct Reference {
    pub output: Vec<f64>,
    pub pattern: Vec<usize>,
}

/// Reference forward pass. `params` lists weight then bias for each
/// parameterized layer, in layer order.
pub fn reference_forward(layers: &[Layer], params: &[Vec<f64>], input: &[f64]) -> Reference {
    let mut x = input.to_vec();
    let mut pattern = Vec::new();
    let mut p = params.iter();
    for layer in layers {
        x = match layer {
            Layer::Conv2d(c) => {
                let (w, b) = (p.next().unwrap(), p.next().unwrap());
                let (oh, ow) = (c.out_h(), c.out_w());
                let mut y = vec![b[0]; oh * ow];
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ky in 0..c.kernel {
                            for kx in 0..c.kernel {
                                let iy = (oy * c.stride + ky) as isize - c.padding as isize;
                                let ix = (ox * c.stride + kx) as isize - c.padding as isize;
                                if iy < 0
                                    || ix < 0
                                    || iy >= c.in_h as isize
                                    || ix >= c.in_w as isize
                                {
                                    continue;
                                }
                                y[oy * ow + ox] +=
                                    w[ky * c.kernel + kx] * x[iy as usize * c.in_w + ix as usize];
                            }
                        }
                    }
                }
                y
            }
            Layer::Linear(_) => {
                let (w, b) = (p.next().unwrap(), p.next().unwrap());
                let n = x.len();
                (0..b.len())
                    .map(|r| b[r] + (0..n).map(|j| w[r * n + j] * x[j]).sum::<f64>())
                    .collect()
            }
            Layer::Relu(_) => x
                .iter()
                .map(|&v| {
                    pattern.push((v > 0.0) as usize);
                    v.max(0.0)
                })
                .collect(),
            Layer::MaxPool2d(m) => {
                let mut y = Vec::new();
                for oy in 0..m.out_h() {
                    for ox in 0..m.out_w() {
                        let mut best = (usize::MAX, f64::NEG_INFINITY);
                        for dy in 0..m.size {
                            for dx in 0..m.size {
                                let i = (oy * m.stride + dy) * m.in_w + ox * m.stride + dx;
                                if x[i] > best.1 {
                                    best = (i, x[i]);
                                }
                            }
                        }
                        pattern.push(best.0);
                        y.push(best.1);
                    }
                }
                y
            }
            Layer::Flatten(_) => x,
            Layer::Tanh(_) => x.iter().map(|v| v.tanh()).collect(),
        };
    }
    Reference { output: x, pattern }
}

fn uniform(rng: &mut Rng, shape: &[usize], bound: f32) -> Tensor {
    Tensor::from_fn(shape, |_| rng.uniform_f32(-bound, bound))
}

/// The canonical layer pattern on an 8x8 input with narrow dense layers
/// (574 parameters) and non-zero biases.
pub fn reduced_network(seed: u64) -> Network {
    let mut rng = Rng::new(seed);
    let conv = |rng: &mut Rng, side: usize| {
        Layer::Conv2d(Conv2d {
            in_h: side,
            in_w: side,
            kernel: 3,
            stride: 1,
            padding: 1,
            weight: uniform(rng, &[3, 3], 0.6),
            bias: uniform(rng, &[1], 0.2),
        })
    };
    let pool = |side: usize| {
        Layer::MaxPool2d(MaxPool2d {
            in_h: side,
            in_w: side,
            size: 2,
            stride: 2,
        })
    };
    let linear = |rng: &mut Rng, i: usize, o: usize| {
        Layer::Linear(Linear {
            weight: uniform(rng, &[o, i], (3.0 / i as f32).sqrt()),
            bias: uniform(rng, &[o], 0.2),
        })
    };
    let layers = vec![
        conv(&mut rng, 8),
        Layer::Relu(vec![8, 8]),
        pool(8),
        conv(&mut rng, 4),
        Layer::Relu(vec![4, 4]),
        pool(4),
        Layer::Flatten(vec![2, 2]),
        linear(&mut rng, 4, 24),
        Layer::Relu(vec![24]),
        linear(&mut rng, 24, 16),
        Layer::Relu(vec![16]),
        linear(&mut rng, 16, 2),
        Layer::Tanh(vec![2]),
    ];
    Network::from_layers(layers).unwrap()
}

/// Largest relative error between analytic and central-difference
/// gradients of `u . N(x)`, over parameters whose perturbation keeps the
/// activation pattern fixed. Returns `(max error, checked, skipped)`.
pub fn gradient_check(net: &Network, x: &Tensor, u: &[f64], h: f64) -> (f64, usize, usize) {
    let trace = net.forward_trace(x).unwrap();
    let (grads, _) = net.backward(&trace, u).unwrap();
    let mut params: Vec<Vec<f64>> = net
        .parameters()
        .iter()
        .map(|t| t.data().iter().map(|&v| v as f64).collect())
        .collect();
    let input: Vec<f64> = x.data().iter().map(|&v| v as f64).collect();
    let objective = |r: &Reference| r.output.iter().zip(u).map(|(y, w)| y * w).sum::<f64>();
    let base = reference_forward(net.layers(), &params, &input).pattern;
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    for t in 0..params.len() {
        for i in 0..params[t].len() {
            let orig = params[t][i];
            params[t][i] = orig + h;
            let up = reference_forward(net.layers(), &params, &input);
            params[t][i] = orig - h;
            let down = reference_forward(net.layers(), &params, &input);
            params[t][i] = orig;
            if up.pattern != base || down.pattern != base {
                skipped += 1;
                continue;
            }
            let numeric = (objective(&up) - objective(&down)) / (2.0 * h);
            let analytic = grads.tensors[t].data()[i] as f64;
            let scale = numeric.abs().max(analytic.abs());
            if scale < 1e-8 {
                checked += 1;
                continue;
            }
            worst = worst.max((numeric - analytic).abs() / scale);
            checked += 1;
        }
    }
    (worst, checked, skipped)
}
