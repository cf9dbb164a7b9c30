//! Layer records and their forward/backward rules.
//!
//! Affine layers accumulate in `f64` and round once to `f32` per output. The
//! accumulation order is fixed by [`Conv2d::accumulate`] and
//! [`Linear::accumulate`]; interval propagation reuses the same iterators so
//! its bounds round exactly like the forward pass.

use crate::tensor::Tensor;

/// Largest `f32` strictly below one; tanh outputs saturate here.
pub const TANH_LIMIT: f32 = 1.0 - f32::EPSILON / 2.0;

/// Saturating tanh as used by the forward pass. Monotone non-decreasing.
pub fn tanh_sat(v: f64) -> f32 {
    (v.tanh() as f32).clamp(-TANH_LIMIT, TANH_LIMIT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum LayerKind {
    Conv2d = 0,
    Relu = 1,
    MaxPool2d = 2,
    Flatten = 3,
    Linear = 4,
    Tanh = 5,
}

impl LayerKind {
    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Self::Conv2d,
            1 => Self::Relu,
            2 => Self::MaxPool2d,
            3 => Self::Flatten,
            4 => Self::Linear,
            5 => Self::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Conv2d => "Conv2D",
            Self::Relu => "ReLU",
            Self::MaxPool2d => "MaxPool2D",
            Self::Flatten => "Flatten",
            Self::Linear => "Linear",
            Self::Tanh => "Tanh",
        }
    }
}

/// Single-channel 2-D convolution with a square kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[kernel, kernel]`
    pub weight: Tensor,
    /// `[1]`
    pub bias: Tensor,
}

impl Conv2d {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.padding - self.kernel) / self.stride + 1
    }

    /// Folds `bias + sum term(weight, input_index)` for output `(oy, ox)` in
    /// the canonical order: bias first, then the kernel in row-major order,
    /// skipping taps that fall into the zero padding.
    #[inline]
    pub fn accumulate(&self, oy: usize, ox: usize, mut term: impl FnMut(f32, usize) -> f64) -> f64 {
        let k = self.kernel;
        let w = self.weight.data();
        let (ky0, ky1, y0) = self.tap_range(oy, self.in_h);
        let (kx0, kx1, x0) = self.tap_range(ox, self.in_w);
        let mut acc = self.bias.data()[0] as f64;
        for ky in ky0..ky1 {
            let row = (y0 + ky - ky0) * self.in_w + x0;
            for (d, &wk) in w[ky * k + kx0..ky * k + kx1].iter().enumerate() {
                acc += term(wk, row + d);
            }
        }
        acc
    }

    /// `tap_range` for every output coordinate along one axis.
    fn tap_table(&self, outputs: usize, extent: usize) -> Vec<(usize, usize, usize)> {
        (0..outputs).map(|o| self.tap_range(o, extent)).collect()
    }

    /// For each kernel column `kx`, the outputs `[lo, hi)` whose tap at `kx`
    /// lands inside the input.
    fn col_spans(&self, ow: usize) -> Vec<(usize, usize)> {
        (0..self.kernel)
            .map(|kx| {
                let lo = self.padding.saturating_sub(kx).div_ceil(self.stride);
                let hi = (self.in_w + self.padding - kx)
                    .div_ceil(self.stride)
                    .min(ow);
                (lo, hi.max(lo))
            })
            .collect()
    }

    /// Valid kernel offsets `[k0, k1)` along one axis for output coordinate
    /// `o`, and the input coordinate at offset `k0`.
    #[inline]
    fn tap_range(&self, o: usize, extent: usize) -> (usize, usize, usize) {
        let start = (o * self.stride) as isize - self.padding as isize;
        let k1 = (extent as isize - start).clamp(0, self.kernel as isize) as usize;
        let k0 = ((-start).max(0) as usize).min(k1);
        (k0, k1, (start + k0 as isize).max(0) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool2d {
    pub in_h: usize,
    pub in_w: usize,
    pub size: usize,
    pub stride: usize,
}

impl MaxPool2d {
    pub fn out_h(&self) -> usize {
        (self.in_h - self.size) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.size) / self.stride + 1
    }

    /// Input indices of window `(oy, ox)` in row-major order.
    #[inline]
    pub fn window(&self, oy: usize, ox: usize) -> impl Iterator<Item = usize> + '_ {
        let (y0, x0) = (oy * self.stride, ox * self.stride);
        (0..self.size)
            .flat_map(move |dy| (0..self.size).map(move |dx| (y0 + dy) * self.in_w + x0 + dx))
    }

    /// First index holding the window maximum.
    fn argmax(&self, x: &[f32], oy: usize, ox: usize) -> usize {
        let first = oy * self.stride * self.in_w + ox * self.stride;
        let (mut best, mut best_v) = (first, x[first]);
        for dy in 0..self.size {
            let row = first + dy * self.in_w;
            for (dx, &v) in x[row..row + self.size].iter().enumerate() {
                if v > best_v {
                    best = row + dx;
                    best_v = v;
                }
            }
        }
        best
    }
}

/// Fully connected layer, `weight` is `[out, in]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Folds `bias[row] + sum_j term(weight[row, j], j)`. Columns are summed
    /// into four lanes by `j % 4`, combined as `bias + ((l0 + l1) + (l2 + l3))`.
    #[inline]
    pub fn accumulate(&self, row: usize, mut term: impl FnMut(f32, usize) -> f64) -> f64 {
        let n = self.in_dim();
        let w = &self.weight.data()[row * n..(row + 1) * n];
        let mut lanes = [0.0f64; 4];
        let mut chunks = w.chunks_exact(4);
        let mut j = 0;
        for c in &mut chunks {
            lanes[0] += term(c[0], j);
            lanes[1] += term(c[1], j + 1);
            lanes[2] += term(c[2], j + 2);
            lanes[3] += term(c[3], j + 3);
            j += 4;
        }
        for (d, &wj) in chunks.remainder().iter().enumerate() {
            lanes[d] += term(wj, j + d);
        }
        self.bias.data()[row] as f64 + ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
    }

    /// Plain forward, bitwise equal to `accumulate` with `w * x` terms. Rows
    /// are taken in pairs to keep more independent sums in flight.
    fn forward_rows(&self, x: &[f64]) -> Vec<f32> {
        let n = self.in_dim();
        let w = self.weight.data();
        let b = self.bias.data();
        let full = n - n % 4;
        let finish = |row: usize, mut lanes: [f64; 4]| {
            for (d, j) in (full..n).enumerate() {
                lanes[d] += w[row * n + j] as f64 * x[j];
            }
            (b[row] as f64 + ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))) as f32
        };
        let mut out = Vec::with_capacity(self.out_dim());
        let mut pairs = w.chunks_exact(2 * n);
        for (p, rows) in (&mut pairs).enumerate() {
            let (wa, wb) = rows.split_at(n);
            let (mut la, mut lb) = ([0.0f64; 4], [0.0f64; 4]);
            for ((ca, cb), cx) in wa[..full]
                .chunks_exact(4)
                .zip(wb[..full].chunks_exact(4))
                .zip(x[..full].chunks_exact(4))
            {
                for d in 0..4 {
                    la[d] += ca[d] as f64 * cx[d];
                    lb[d] += cb[d] as f64 * cx[d];
                }
            }
            out.push(finish(2 * p, la));
            out.push(finish(2 * p + 1, lb));
        }
        if !pairs.remainder().is_empty() {
            let row = self.out_dim() - 1;
            let mut lanes = [0.0f64; 4];
            for (cw, cx) in pairs.remainder()[..full]
                .chunks_exact(4)
                .zip(x[..full].chunks_exact(4))
            {
                for d in 0..4 {
                    lanes[d] += cw[d] as f64 * cx[d];
                }
            }
            out.push(finish(row, lanes));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    /// Elementwise; carries its input shape.
    Relu(Vec<usize>),
    MaxPool2d(MaxPool2d),
    /// Carries the `[h, w]` shape it flattens.
    Flatten(Vec<usize>),
    Linear(Linear),
    Tanh(Vec<usize>),
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::Relu(_) => LayerKind::Relu,
            Layer::MaxPool2d(_) => LayerKind::MaxPool2d,
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::Linear(_) => LayerKind::Linear,
            Layer::Tanh(_) => LayerKind::Tanh,
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            Layer::Conv2d(c) => vec![c.in_h, c.in_w],
            Layer::MaxPool2d(p) => vec![p.in_h, p.in_w],
            Layer::Linear(l) => vec![l.in_dim()],
            Layer::Relu(s) | Layer::Flatten(s) | Layer::Tanh(s) => s.clone(),
        }
    }

    pub fn output_shape(&self) -> Vec<usize> {
        match self {
            Layer::Conv2d(c) => vec![c.out_h(), c.out_w()],
            Layer::MaxPool2d(p) => vec![p.out_h(), p.out_w()],
            Layer::Linear(l) => vec![l.out_dim()],
            Layer::Flatten(s) => vec![s.iter().product()],
            Layer::Relu(s) | Layer::Tanh(s) => s.clone(),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2d(c) => vec![&c.weight, &c.bias],
            Layer::Linear(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Linear(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Forward rule. The input shape must already match `input_shape()`.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let xd = x.data();
        match self {
            Layer::Conv2d(c) => {
                // Per output this is the order of `accumulate` (bias, then taps
                // row-major); the column loop is innermost so outputs interleave.
                let (oh, ow, k, st) = (c.out_h(), c.out_w(), c.kernel, c.stride);
                let w = to_f64(c.weight.data());
                let x = to_f64(xd);
                let rows = c.tap_table(oh, c.in_h);
                let cols = c.col_spans(ow);
                let bias = c.bias.data()[0] as f64;
                let mut out = Vec::with_capacity(oh * ow);
                let mut acc = vec![0.0f64; ow];
                for &(ky0, ky1, y0) in &rows {
                    acc.fill(bias);
                    for ky in ky0..ky1 {
                        let row = (y0 + ky - ky0) * c.in_w;
                        for (kx, &(lo, hi)) in cols.iter().enumerate() {
                            let wk = w[ky * k + kx];
                            // input column of output `ox` is ox * st + kx - padding
                            let base = row + kx;
                            if st == 1 {
                                let xs = &x[base + lo - c.padding..base + hi - c.padding];
                                for (a, xv) in acc[lo..hi].iter_mut().zip(xs) {
                                    *a += wk * xv;
                                }
                            } else {
                                for (ox, a) in acc.iter_mut().enumerate().take(hi).skip(lo) {
                                    *a += wk * x[base + ox * st - c.padding];
                                }
                            }
                        }
                    }
                    out.extend(acc.iter().map(|&a| a as f32));
                }
                Tensor::from_parts(vec![oh, ow], out)
            }
            Layer::Relu(s) => {
                Tensor::from_parts(s.clone(), xd.iter().map(|v| v.max(0.0)).collect())
            }
            Layer::MaxPool2d(p) => {
                let (oh, ow) = (p.out_h(), p.out_w());
                let mut out = Vec::with_capacity(oh * ow);
                for oy in 0..oh {
                    for ox in 0..ow {
                        out.push(xd[p.argmax(xd, oy, ox)]);
                    }
                }
                Tensor::from_parts(vec![oh, ow], out)
            }
            Layer::Flatten(s) => Tensor::from_parts(vec![s.iter().product()], xd.to_vec()),
            Layer::Linear(l) => Tensor::from_parts(vec![l.out_dim()], l.forward_rows(&to_f64(xd))),
            Layer::Tanh(s) => {
                Tensor::from_parts(s.clone(), xd.iter().map(|&v| tanh_sat(v as f64)).collect())
            }
        }
    }

    /// Backward rule. Given the layer's input and output and the gradient of
    /// a scalar with respect to the output, returns the gradient with respect
    /// to the input. When `param_grads` is given, parameter gradients
    /// (weight, bias) are pushed onto it.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_out: &[f64],
        param_grads: Option<&mut Vec<Tensor>>,
    ) -> Vec<f64> {
        let xd = input.data();
        match self {
            Layer::Conv2d(c) => {
                let (oh, ow, k, st) = (c.out_h(), c.out_w(), c.kernel, c.stride);
                let w = to_f64(c.weight.data());
                let x = to_f64(xd);
                let rows = c.tap_table(oh, c.in_h);
                let cols = c.col_spans(ow);
                let mut gx = vec![0.0f64; xd.len()];
                let want = param_grads.is_some();
                let mut gw = vec![0.0f64; w.len()];
                let gb: f64 = grad_out.iter().sum();
                for (oy, &(ky0, ky1, y0)) in rows.iter().enumerate() {
                    let g = &grad_out[oy * ow..(oy + 1) * ow];
                    if g.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for ky in ky0..ky1 {
                        let row = (y0 + ky - ky0) * c.in_w;
                        for (kx, &(lo, hi)) in cols.iter().enumerate() {
                            let wi = ky * k + kx;
                            let base = row + kx;
                            if st == 1 {
                                let span = base + lo - c.padding..base + hi - c.padding;
                                for (gxi, gv) in gx[span.clone()].iter_mut().zip(&g[lo..hi]) {
                                    *gxi += gv * w[wi];
                                }
                                if want {
                                    gw[wi] += g[lo..hi]
                                        .iter()
                                        .zip(&x[span])
                                        .map(|(gv, xv)| gv * xv)
                                        .sum::<f64>();
                                }
                            } else {
                                for ox in lo..hi {
                                    let xi = base + ox * st - c.padding;
                                    gx[xi] += g[ox] * w[wi];
                                    if want {
                                        gw[wi] += g[ox] * x[xi];
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(pg) = param_grads {
                    pg.push(to_tensor(c.weight.shape(), &gw));
                    pg.push(to_tensor(&[1], &[gb]));
                }
                gx
            }
            Layer::Relu(_) => xd
                .iter()
                .zip(grad_out)
                .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                .collect(),
            Layer::MaxPool2d(p) => {
                let ow = p.out_w();
                let mut gx = vec![0.0f64; xd.len()];
                for oy in 0..p.out_h() {
                    for ox in 0..ow {
                        gx[p.argmax(xd, oy, ox)] += grad_out[oy * ow + ox];
                    }
                }
                gx
            }
            Layer::Flatten(_) => grad_out.to_vec(),
            Layer::Linear(l) => {
                let (n_out, n_in) = (l.out_dim(), l.in_dim());
                let w = l.weight.data();
                let mut gx = vec![0.0f64; n_in];
                for (r, &g) in grad_out.iter().enumerate().take(n_out) {
                    if g == 0.0 {
                        continue;
                    }
                    for (gxj, &wj) in gx.iter_mut().zip(&w[r * n_in..(r + 1) * n_in]) {
                        *gxj += g * wj as f64;
                    }
                }
                if let Some(pg) = param_grads {
                    let mut gw = Vec::with_capacity(n_out * n_in);
                    for &g in grad_out.iter().take(n_out) {
                        gw.extend(xd.iter().map(|&x| (g * x as f64) as f32));
                    }
                    pg.push(Tensor::from_parts(vec![n_out, n_in], gw));
                    pg.push(to_tensor(&[n_out], grad_out));
                }
                gx
            }
            Layer::Tanh(_) => output
                .data()
                .iter()
                .zip(grad_out)
                .map(|(&y, &g)| {
                    let y = y as f64;
                    g * (1.0 - y * y)
                })
                .collect(),
        }
    }
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn to_tensor(shape: &[usize], v: &[f64]) -> Tensor {
    Tensor::from_parts(shape.to_vec(), v.iter().map(|&x| x as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(in_side: usize, w: Vec<f32>, b: f32) -> Conv2d {
        Conv2d {
            in_h: in_side,
            in_w: in_side,
            kernel: 3,
            stride: 1,
            padding: 1,
            weight: Tensor::new(vec![3, 3], w).unwrap(),
            bias: Tensor::new(vec![1], vec![b]).unwrap(),
        }
    }

    #[test]
    fn conv_identity_kernel_is_identity() {
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let layer = Layer::Conv2d(conv(4, w, 0.0));
        let x = Tensor::from_fn(&[4, 4], |i| i as f32 * 0.1);
        let y = layer.forward(&x);
        assert_eq!(y.shape(), &[4, 4]);
        assert!(y.max_abs_diff(&x) < 1e-7);
    }

    #[test]
    fn conv_zero_padding_at_corner() {
        let layer = Layer::Conv2d(conv(3, vec![1.0; 9], 0.5));
        let x = Tensor::filled(&[3, 3], 1.0);
        let y = layer.forward(&x);
        // corner sees a 2x2 patch, edge 2x3, centre 3x3
        assert_eq!(y.data()[0], 4.5);
        assert_eq!(y.data()[1], 6.5);
        assert_eq!(y.data()[4], 9.5);
    }

    #[test]
    fn maxpool_routes_gradient_to_first_max() {
        let p = Layer::MaxPool2d(MaxPool2d {
            in_h: 2,
            in_w: 2,
            size: 2,
            stride: 2,
        });
        let x = Tensor::new(vec![2, 2], vec![0.3, 0.7, 0.7, 0.1]).unwrap();
        let y = p.forward(&x);
        assert_eq!(y.data(), &[0.7]);
        let g = p.backward(&x, &y, &[2.0], None);
        assert_eq!(g, vec![0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_backward_masks_non_positive() {
        let r = Layer::Relu(vec![3]);
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        let y = r.forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        assert_eq!(
            r.backward(&x, &y, &[1.0, 1.0, 1.0], None),
            vec![0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn tanh_stays_inside_open_interval() {
        for v in [-1e6, -40.0, -10.0, 0.0, 10.0, 40.0, 1e6] {
            let y = tanh_sat(v);
            assert!(y > -1.0 && y < 1.0, "{v} -> {y}");
        }
        assert_eq!(tanh_sat(0.0), 0.0);
    }

    #[test]
    fn linear_param_grads_are_outer_products() {
        let l = Layer::Linear(Linear {
            weight: Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            bias: Tensor::new(vec![2], vec![0.5, -0.5]).unwrap(),
        });
        let x = Tensor::new(vec![3], vec![1.0, 0.0, -1.0]).unwrap();
        let y = l.forward(&x);
        assert_eq!(y.data(), &[-1.5, -2.5]);
        let mut pg = Vec::new();
        let gx = l.backward(&x, &y, &[1.0, 2.0], Some(&mut pg));
        assert_eq!(gx, vec![9.0, 12.0, 15.0]);
        assert_eq!(pg[0].data(), &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
        assert_eq!(pg[1].data(), &[1.0, 2.0]);
    }

    fn random_conv(side: usize, kernel: usize, stride: usize, padding: usize, seed: u64) -> Conv2d {
        let v = |i: usize| ((i as u64 * 2654435761 + seed) % 1000) as f32 / 500.0 - 1.0;
        Conv2d {
            in_h: side,
            in_w: side + 1,
            kernel,
            stride,
            padding,
            weight: Tensor::from_fn(&[kernel, kernel], v),
            bias: Tensor::new(vec![1], vec![v(99)]).unwrap(),
        }
    }

    proptest::proptest! {
        #[test]
        fn conv_matches_accumulate_and_naive_backward(
            side in 3usize..9, kernel in 1usize..4, stride in 1usize..3,
            padding in 0usize..3, seed in 0u64..1000,
        ) {
            let c = random_conv(side, kernel, stride, padding, seed);
            let x = Tensor::from_fn(&[c.in_h, c.in_w], |i| ((i * 7 + seed as usize) % 11) as f32 / 11.0);
            let xd = x.data();
            let layer = Layer::Conv2d(c.clone());
            let y = layer.forward(&x);
            let (oh, ow) = (c.out_h(), c.out_w());
            for oy in 0..oh {
                for ox in 0..ow {
                    let want = c.accumulate(oy, ox, |w, i| w as f64 * xd[i] as f64) as f32;
                    proptest::prop_assert_eq!(y.data()[oy * ow + ox].to_bits(), want.to_bits());
                }
            }
            let g: Vec<f64> = (0..oh * ow).map(|i| (i % 5) as f64 - 2.0).collect();
            let mut pg = Vec::new();
            let gx = layer.backward(&x, &y, &g, Some(&mut pg));
            let (mut ngx, mut ngw) = (vec![0.0f64; xd.len()], vec![0.0f64; kernel * kernel]);
            for oy in 0..oh {
                for ox in 0..ow {
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if iy < 0 || ix < 0 || iy >= c.in_h as isize || ix >= c.in_w as isize {
                                continue;
                            }
                            let xi = iy as usize * c.in_w + ix as usize;
                            let wi = ky * kernel + kx;
                            ngx[xi] += g[oy * ow + ox] * c.weight.data()[wi] as f64;
                            ngw[wi] += g[oy * ow + ox] * xd[xi] as f64;
                        }
                    }
                }
            }
            for (a, b) in gx.iter().zip(&ngx) {
                proptest::prop_assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in pg[0].data().iter().zip(&ngw) {
                proptest::prop_assert!((*a as f64 - b).abs() < 1e-4 * (1.0 + b.abs()));
            }
            proptest::prop_assert!((pg[1].data()[0] as f64 - g.iter().sum::<f64>()).abs() < 1e-6);
        }

        #[test]
        fn linear_forward_matches_accumulate(n_in in 1usize..19, n_out in 1usize..6, seed in 0u64..1000) {
            let v = |i: usize| ((i as u64 * 40503 + seed) % 997) as f32 / 498.0 - 1.0;
            let l = Linear {
                weight: Tensor::from_fn(&[n_out, n_in], v),
                bias: Tensor::from_fn(&[n_out], |i| v(i + 500)),
            };
            let x = Tensor::from_fn(&[n_in], |i| v(i + 1000));
            let y = Layer::Linear(l.clone()).forward(&x);
            for r in 0..n_out {
                let want = l.accumulate(r, |w, j| w as f64 * x.data()[j] as f64) as f32;
                proptest::prop_assert_eq!(y.data()[r].to_bits(), want.to_bits());
            }
        }

        #[test]
        fn maxpool_picks_first_window_max(side in 2usize..9, size in 1usize..3, stride in 1usize..3, seed in 0usize..100) {
            let p = MaxPool2d { in_h: side, in_w: side, size, stride };
            let x: Vec<f32> = (0..side * side).map(|i| ((i * 13 + seed) % 5) as f32).collect();
            for oy in 0..p.out_h() {
                for ox in 0..p.out_w() {
                    let mut best = None::<usize>;
                    for i in p.window(oy, ox) {
                        if best.is_none_or(|b| x[i] > x[b]) {
                            best = Some(i);
                        }
                    }
                    proptest::prop_assert_eq!(p.argmax(&x, oy, ox), best.unwrap());
                }
            }
        }
    }
}
