use thiserror::Error;

use super::layer::{Conv2d, Layer, Linear, MaxPool2d};
use crate::rng::Rng;
use crate::tensor::{ShapeError, Tensor};

/// Input side of the canonical network.
pub const CANONICAL_SIDE: usize = 112;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network has no layers")]
    Empty,
    #[error("layer {index} ({kind}) expects input {expected:?} but receives {actual:?}")]
    Composition {
        index: usize,
        kind: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("layer {index} ({kind}): {reason}")]
    InvalidLayer {
        index: usize,
        kind: &'static str,
        reason: String,
    },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// A feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Activations recorded by [`Network::forward_trace`]; `activations[0]` is
/// the input and `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds the input")
    }
}

/// One gradient tensor per parameter tensor, in [`Network::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            tensors: net
                .parameters()
                .into_iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect(),
        }
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, other: &Gradients, factor: f32) {
        assert_eq!(self.tensors.len(), other.tensors.len());
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            assert_eq!(a.shape(), b.shape());
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += factor * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f32) {
        for t in &mut self.tensors {
            for x in t.data_mut() {
                *x *= factor;
            }
        }
    }

    /// L2 norm of one parameter's gradient, accumulated in `f64`.
    pub fn norm_of(&self, index: usize) -> f64 {
        self.tensors[index]
            .data()
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data().iter().all(|&v| v == 0.0))
    }
}

impl Network {
    /// Validates that adjacent layer shapes compose and parameters are sane.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Empty);
        }
        for (index, layer) in layers.iter().enumerate() {
            validate_layer(index, layer)?;
            if index > 0 {
                let actual = layers[index - 1].output_shape();
                let expected = layer.input_shape();
                if actual != expected {
                    return Err(NetError::Composition {
                        index,
                        kind: layer.kind().name(),
                        expected,
                        actual,
                    });
                }
            }
        }
        Ok(Self { layers })
    }

    /// The canonical 112x112 network with seeded initialization.
    pub fn canonical(seed: u64) -> Self {
        Self::with_side(seed, CANONICAL_SIDE)
    }

    /// The canonical layer stack for a square input of `side` pixels
    /// (`side` divisible by 4). Weights are uniform in
    /// `+-sqrt(1 / fan_in)`, biases zero.
    pub fn with_side(seed: u64, side: usize) -> Self {
        assert!(
            side >= 4 && side % 4 == 0,
            "input side must be a multiple of 4"
        );
        let mut rng = Rng::new(seed);
        let half = side / 2;
        let quarter = side / 4;
        let flat = quarter * quarter;
        let layers = vec![
            Layer::Conv2d(init_conv(&mut rng, side)),
            Layer::Relu(vec![side, side]),
            Layer::MaxPool2d(pool(side)),
            Layer::Conv2d(init_conv(&mut rng, half)),
            Layer::Relu(vec![half, half]),
            Layer::MaxPool2d(pool(half)),
            Layer::Flatten(vec![quarter, quarter]),
            Layer::Linear(init_linear(&mut rng, flat, 256)),
            Layer::Relu(vec![256]),
            Layer::Linear(init_linear(&mut rng, 256, 128)),
            Layer::Relu(vec![128]),
            Layer::Linear(init_linear(&mut rng, 128, 2)),
            Layer::Tanh(vec![2]),
        ];
        Self::from_layers(layers).expect("canonical stack composes")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> Vec<usize> {
        self.layers[0].input_shape()
    }

    pub fn output_len(&self) -> usize {
        self.layers
            .last()
            .expect("non-empty")
            .output_shape()
            .iter()
            .product()
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    /// Trainable parameter count of every parameterized layer, in order.
    pub fn trainable_counts(&self) -> Vec<usize> {
        self.layers
            .iter()
            .map(Layer::param_count)
            .filter(|&n| n > 0)
            .collect()
    }

    pub fn total_params(&self) -> usize {
        self.trainable_counts().iter().sum()
    }

    /// Index into [`Network::parameters`] of the last linear layer's weight.
    pub fn last_linear_weight_index(&self) -> Option<usize> {
        let mut idx = 0;
        let mut found = None;
        for layer in &self.layers {
            if matches!(layer, Layer::Linear(_)) {
                found = Some(idx);
            }
            idx += layer.params().len();
        }
        found
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NetError> {
        input.expect_shape(&self.input_shape())?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &Tensor) -> Result<Trace, NetError> {
        input.expect_shape(&self.input_shape())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap());
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    /// Gradient of `upstream . output` with respect to every parameter and
    /// to the input.
    pub fn backward(
        &self,
        trace: &Trace,
        upstream: &[f64],
    ) -> Result<(Gradients, Vec<f64>), NetError> {
        self.check_upstream(trace, upstream)?;
        let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let mut g = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward(
                &trace.activations[i],
                &trace.activations[i + 1],
                &g,
                Some(&mut per_layer[i]),
            );
        }
        let tensors = per_layer.into_iter().flatten().collect();
        Ok((Gradients { tensors }, g))
    }

    /// Input gradient only; skips the parameter outer products.
    pub fn input_gradient(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_upstream(trace, upstream)?;
        let mut g = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward(&trace.activations[i], &trace.activations[i + 1], &g, None);
        }
        Ok(g)
    }

    fn check_upstream(&self, trace: &Trace, upstream: &[f64]) -> Result<(), NetError> {
        if trace.activations.len() != self.layers.len() + 1 {
            return Err(ShapeError::Length {
                shape: vec![self.layers.len() + 1],
                expected: self.layers.len() + 1,
                actual: trace.activations.len(),
            }
            .into());
        }
        if upstream.len() != self.output_len() || upstream.iter().any(|v| !v.is_finite()) {
            return Err(ShapeError::Mismatch {
                expected: vec![self.output_len()],
                actual: vec![upstream.len()],
            }
            .into());
        }
        Ok(())
    }
}

fn validate_layer(index: usize, layer: &Layer) -> Result<(), NetError> {
    let invalid = |reason: String| NetError::InvalidLayer {
        index,
        kind: layer.kind().name(),
        reason,
    };
    match layer {
        Layer::Conv2d(c) => {
            if c.kernel == 0 || c.stride == 0 {
                return Err(invalid("kernel and stride must be positive".into()));
            }
            if c.in_h + 2 * c.padding < c.kernel || c.in_w + 2 * c.padding < c.kernel {
                return Err(invalid("kernel larger than padded input".into()));
            }
            c.weight.expect_shape(&[c.kernel, c.kernel])?;
            c.bias.expect_shape(&[1])?;
        }
        Layer::MaxPool2d(p) => {
            if p.size == 0 || p.stride == 0 || p.size > p.in_h || p.size > p.in_w {
                return Err(invalid("pool window must fit the input".into()));
            }
        }
        Layer::Linear(l) => {
            if l.weight.shape().len() != 2 {
                return Err(invalid("weight must be rank 2".into()));
            }
            l.bias.expect_shape(&[l.out_dim()])?;
        }
        Layer::Flatten(s) => {
            if s.len() != 2 {
                return Err(invalid("flatten expects a 2-D input".into()));
            }
        }
        Layer::Relu(s) | Layer::Tanh(s) => {
            if s.is_empty() || s.len() > 2 || s.contains(&0) {
                return Err(invalid(format!("bad activation shape {s:?}")));
            }
        }
    }
    Ok(())
}

fn uniform_tensor(rng: &mut Rng, shape: &[usize], bound: f32) -> Tensor {
    Tensor::from_fn(shape, |_| rng.uniform_f32(-bound, bound))
}

fn init_conv(rng: &mut Rng, side: usize) -> Conv2d {
    let bound = (1.0f32 / 9.0).sqrt();
    Conv2d {
        in_h: side,
        in_w: side,
        kernel: 3,
        stride: 1,
        padding: 1,
        weight: uniform_tensor(rng, &[3, 3], bound),
        bias: Tensor::zeros(&[1]),
    }
}

fn pool(side: usize) -> MaxPool2d {
    MaxPool2d {
        in_h: side,
        in_w: side,
        size: 2,
        stride: 2,
    }
}

pub(crate) fn init_linear(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Linear {
    let bound = (1.0 / fan_in as f32).sqrt();
    Linear {
        weight: uniform_tensor(rng, &[fan_out, fan_in], bound),
        bias: Tensor::zeros(&[fan_out]),
    }
}
