//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation in execution order. Node ids grow
//! monotonically, so the tape is topologically sorted by construction and
//! [`Graph::backward`] is a single reverse sweep that visits each recorded
//! operation once.

use crate::error::{Error, Result};
use crate::nn::conv::{
    batch_to_channel_major, channel_to_batch_major, col2im, im2col, ConvGeom,
};
use crate::nn::element::{matmul, Element};
use crate::nn::params::ParamSet;
use crate::nn::rng::RngStream;
use rand::RngCore;
use crate::nn::tensor::{numel, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// Derivative at exactly zero is taken from the positive side (1.0).
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Softmax { axis: usize },
}

/// Running per-channel statistics of a batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T = f32> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Element> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        }
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    OneMinus(Var),
    Relu(Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    Softmax {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    Linear {
        x: Var,
        w: Var,
        b: Var,
        batch: usize,
        fan_in: usize,
        fan_out: usize,
    },
    Conv2d {
        x: Var,
        k: Var,
        geom: ConvGeom,
        n: usize,
        filters: usize,
        cols: Vec<T>,
    },
    TransposedConv2d {
        x: Var,
        k: Var,
        geom: ConvGeom,
        n: usize,
        in_channels: usize,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        channels: usize,
        spatial: usize,
        batch_stats: bool,
    },
    ChannelBias {
        x: Var,
        b: Var,
        channels: usize,
        spatial: usize,
    },
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
    /// Gradient flows through unchanged (reshape, additive noise).
    Identity(Var),
    SliceCols {
        x: Var,
        cols: usize,
        start: usize,
        end: usize,
    },
    ClampedLog {
        x: Var,
        lo: T,
        hi: T,
    },
    Gather {
        x: Var,
        cols: usize,
        index: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Ordered record of executed differentiable operations.
#[derive(Debug)]
pub struct Graph<T = f32> {
    nodes: Vec<Node<T>>,
    bindings: Vec<(String, Var)>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Element> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape(a: &[usize], b: &[usize], op: &str) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("{op}: shapes {a:?} and {b:?} differ")));
    }
    Ok(())
}

fn add_into<T: Element>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

impl<T: Element> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            bindings: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    /// Copies a recorded value out as a tensor.
    pub fn tensor(&self, v: Var) -> Tensor<T> {
        let n = self.node(v);
        Tensor::new(&n.shape, n.value.clone()).expect("graph node shape is consistent")
    }

    /// Constant input; no gradient is computed for it.
    pub fn input(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, false)
    }

    pub fn input_owned(&mut self, t: Tensor<T>) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf, false)
    }

    /// Leaf whose gradient is retained after `backward`.
    pub fn variable(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, true)
    }

    /// Records parameter `name` of `params` as a gradient-tracked leaf.
    pub fn param(&mut self, params: &ParamSet<T>, name: &str) -> Result<Var> {
        if let Some((_, v)) = self.bindings.iter().find(|(n, _)| n == name) {
            return Ok(*v);
        }
        let t = params.get(name)?;
        let needs = t.requires_grad();
        let v = self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, needs);
        self.bindings.push((name.to_string(), v));
        Ok(v)
    }

    /// Records parameter `name` as a constant: it takes part in the forward
    /// computation but receives no gradient.
    pub fn param_frozen(&mut self, params: &ParamSet<T>, name: &str) -> Result<Var> {
        let t = params.get(name)?;
        Ok(self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, false))
    }

    // ---- elementwise -------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.shape(a), self.shape(b), "add")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x + y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), value, Op::Add(a, b), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.shape(a), self.shape(b), "sub")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x - y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), value, Op::Sub(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.shape(a), self.shape(b), "mul")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x * y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), value, Op::Mul(a, b), needs))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let s = T::of(s);
        let value = self.value(a).iter().map(|&x| x * s).collect();
        let needs = self.needs(a);
        self.push(self.shape(a).to_vec(), value, Op::Scale(a, s), needs)
    }

    /// `1 − x`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|&x| T::one() - x).collect();
        let needs = self.needs(a);
        self.push(self.shape(a).to_vec(), value, Op::OneMinus(a), needs)
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        if !self.value(x).iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("{kind:?} input")));
        }
        let shape = self.shape(x).to_vec();
        let needs = self.needs(x);
        let src = self.value(x);
        let (value, op) = match kind {
            Activation::Identity => return Ok(x),
            Activation::Relu => (
                src.iter().map(|&v| v.max(T::zero())).collect(),
                Op::Relu(x),
            ),
            Activation::LeakyRelu(slope) => {
                let s = T::of(slope);
                (
                    src.iter()
                        .map(|&v| if v >= T::zero() { v } else { v * s })
                        .collect(),
                    Op::LeakyRelu(x, s),
                )
            }
            Activation::Tanh => (src.iter().map(|v| v.tanh()).collect(), Op::Tanh(x)),
            Activation::Sigmoid => (
                src.iter().map(|&v| sigmoid(v)).collect(),
                Op::Sigmoid(x),
            ),
            Activation::Softmax { axis } => {
                if axis >= shape.len() {
                    return Err(Error::invalid(format!(
                        "softmax axis {axis} invalid for shape {shape:?}"
                    )));
                }
                let outer: usize = shape[..axis].iter().product();
                let len = shape[axis];
                let inner: usize = shape[axis + 1..].iter().product();
                let mut out = vec![T::zero(); src.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * len + j) * inner + i;
                        let mut m = T::neg_infinity();
                        for j in 0..len {
                            m = m.max(src[at(j)]);
                        }
                        let mut total = T::zero();
                        for j in 0..len {
                            let e = (src[at(j)] - m).exp();
                            out[at(j)] = e;
                            total = total + e;
                        }
                        for j in 0..len {
                            out[at(j)] = out[at(j)] / total;
                        }
                    }
                }
                (
                    out,
                    Op::Softmax {
                        x,
                        outer,
                        len,
                        inner,
                    },
                )
            }
        };
        Ok(self.push(shape, value, op, needs))
    }

    // ---- layers --------------------------------------------------------

    /// `x · weight + bias` for `x: [batch, in]`, `weight: [in, out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || bs[0] != ws[1] {
            return Err(Error::shape(format!(
                "linear: x {xs:?}, weight {ws:?}, bias {bs:?} do not conform"
            )));
        }
        let (batch, fan_in, fan_out) = (xs[0], ws[0], ws[1]);
        let mut value = matmul(batch, fan_in, fan_out, self.value(x), self.value(w));
        let bias = self.value(b);
        for row in value.chunks_mut(fan_out) {
            add_into(row, bias);
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(
            vec![batch, fan_out],
            value,
            Op::Linear {
                x,
                w,
                b,
                batch,
                fan_in,
                fan_out,
            },
            needs,
        ))
    }

    /// Cross-correlation of `x: [N, C, H, W]` with `kernel: [F, C, kh, kw]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        k: Var,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Var> {
        let (xs, ks) = (self.shape(x).to_vec(), self.shape(k).to_vec());
        if xs.len() != 4 || ks.len() != 4 || xs[1] != ks[1] {
            return Err(Error::shape(format!(
                "conv2d: input {xs:?} and kernel {ks:?} do not conform"
            )));
        }
        let geom = ConvGeom::forward(xs[1], (xs[2], xs[3]), (ks[2], ks[3]), stride, padding)?;
        let (n, filters) = (xs[0], ks[0]);
        let cols = im2col(self.value(x), n, &geom);
        let grid = n * geom.grid_len();
        let out_cm = matmul(filters, geom.patch_len(), grid, self.value(k), &cols);
        let value = channel_to_batch_major(&out_cm, n, filters, geom.grid_len());
        let needs = self.needs(x) || self.needs(k);
        Ok(self.push(
            vec![n, filters, geom.oh, geom.ow],
            value,
            Op::Conv2d {
                x,
                k,
                geom,
                n,
                filters,
                cols,
            },
            needs,
        ))
    }

    /// Adjoint of [`Graph::conv2d`] for `x: [N, C, H, W]`, `kernel: [C, F, kh, kw]`.
    ///
    /// The output is `(H−1)·s − 2p + k + output_padding` on each side.
    pub fn transposed_conv2d(
        &mut self,
        x: Var,
        k: Var,
        stride: (usize, usize),
        padding: (usize, usize),
        output_padding: (usize, usize),
    ) -> Result<Var> {
        let (xs, ks) = (self.shape(x).to_vec(), self.shape(k).to_vec());
        if xs.len() != 4 || ks.len() != 4 || xs[1] != ks[0] {
            return Err(Error::shape(format!(
                "transposed_conv2d: input {xs:?} and kernel {ks:?} do not conform"
            )));
        }
        let (n, in_channels, filters) = (xs[0], xs[1], ks[1]);
        let geom = ConvGeom::transposed(
            filters,
            (xs[2], xs[3]),
            (ks[2], ks[3]),
            stride,
            padding,
            output_padding,
        )?;
        let x_cm = batch_to_channel_major(self.value(x), n, in_channels, geom.grid_len());
        let grid = n * geom.grid_len();
        let mut cols = vec![T::zero(); geom.patch_len() * grid];
        // cols = kernelᵀ · x, kernel viewed as [C, F·kh·kw]
        T::gemm(
            geom.patch_len(),
            in_channels,
            grid,
            T::one(),
            self.value(k),
            (1, geom.patch_len() as isize),
            &x_cm,
            (grid as isize, 1),
            T::zero(),
            &mut cols,
            (grid as isize, 1),
        );
        let value = col2im(&cols, n, &geom);
        let needs = self.needs(x) || self.needs(k);
        Ok(self.push(
            vec![n, filters, geom.h, geom.w],
            value,
            Op::TransposedConv2d {
                x,
                k,
                geom,
                n,
                in_channels,
            },
            needs,
        ))
    }

    /// Adds `bias[c]` to every element of channel `c` of `x: [N, C, ...]`.
    pub fn add_channel_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() < 2 || self.shape(b) != [xs[1]] {
            return Err(Error::shape(format!(
                "channel bias {:?} does not match input {xs:?}",
                self.shape(b)
            )));
        }
        let channels = xs[1];
        let spatial: usize = xs[2..].iter().product();
        let bias = self.value(b);
        let mut value = self.value(x).to_vec();
        for (i, chunk) in value.chunks_mut(spatial).enumerate() {
            let c = bias[i % channels];
            chunk.iter_mut().for_each(|v| *v = *v + c);
        }
        let needs = self.needs(x) || self.needs(b);
        Ok(self.push(
            xs,
            value,
            Op::ChannelBias {
                x,
                b,
                channels,
                spatial,
            },
            needs,
        ))
    }

    /// Per-channel normalization of `x: [N, C, ...]`.
    ///
    /// Train mode normalizes with biased batch statistics, differentiates
    /// through them, and folds them into `stats` (running variance uses the
    /// unbiased estimate). Eval mode normalizes with `stats`.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: Mode,
        stats: &mut RunningStats<T>,
        momentum: f64,
        eps: f64,
    ) -> Result<Var> {
        if eps <= 0.0 {
            return Err(Error::invalid("batch_norm eps must be positive"));
        }
        let xs = self.shape(x).to_vec();
        if xs.len() < 2 {
            return Err(Error::shape(format!("batch_norm on shape {xs:?}")));
        }
        let (n, channels) = (xs[0], xs[1]);
        let spatial: usize = xs[2..].iter().product();
        if self.shape(gamma) != [channels]
            || self.shape(beta) != [channels]
            || stats.mean.len() != channels
            || stats.var.len() != channels
        {
            return Err(Error::shape("batch_norm parameter shapes do not match channels"));
        }
        if mode == Mode::Train && n < 2 {
            return Err(Error::invalid(format!(
                "batch_norm needs at least 2 samples in train mode, got {n}"
            )));
        }
        let src = self.value(x);
        let count = n * spatial;
        let eps_t = T::of(eps);
        let (mean, inv_std): (Vec<T>, Vec<T>) = match mode {
            Mode::Train => {
                let mut mean = vec![T::zero(); channels];
                let mut var = vec![T::zero(); channels];
                for c in 0..channels {
                    let mut s = 0.0f64;
                    for b in 0..n {
                        s += src[(b * channels + c) * spatial..][..spatial]
                            .iter()
                            .map(|v| v.as_f64())
                            .sum::<f64>();
                    }
                    let m = s / count as f64;
                    let mut ss = 0.0f64;
                    for b in 0..n {
                        ss += src[(b * channels + c) * spatial..][..spatial]
                            .iter()
                            .map(|v| (v.as_f64() - m).powi(2))
                            .sum::<f64>();
                    }
                    mean[c] = T::of(m);
                    var[c] = T::of(ss / count as f64);
                }
                let mom = T::of(momentum);
                let unbias = T::of(count as f64 / (count as f64 - 1.0).max(1.0));
                for c in 0..channels {
                    stats.mean[c] = (T::one() - mom) * stats.mean[c] + mom * mean[c];
                    stats.var[c] = (T::one() - mom) * stats.var[c] + mom * var[c] * unbias;
                }
                let inv: Vec<T> = var.iter().map(|&v| T::one() / (v + eps_t).sqrt()).collect();
                (mean, inv)
            }
            Mode::Eval => (
                stats.mean.clone(),
                stats
                    .var
                    .iter()
                    .map(|&v| T::one() / (v + eps_t).sqrt())
                    .collect(),
            ),
        };
        let (g, bt) = (self.value(gamma), self.value(beta));
        let mut xhat = vec![T::zero(); src.len()];
        let mut value = vec![T::zero(); src.len()];
        for b in 0..n {
            for c in 0..channels {
                let off = (b * channels + c) * spatial;
                for i in off..off + spatial {
                    let h = (src[i] - mean[c]) * inv_std[c];
                    xhat[i] = h;
                    value[i] = g[c] * h + bt[c];
                }
            }
        }
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            xs,
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                channels,
                spatial,
                batch_stats: mode == Mode::Train,
            },
            needs,
        ))
    }

    /// Inverted dropout: in train mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1/(1−rate)`.
    pub fn dropout(&mut self, x: Var, rate: f64, mode: Mode, rng: &mut RngStream) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let keep = T::of(1.0 / (1.0 - rate));
        // a 32-bit draw below rate·2³² drops the element
        let cut = (rate * 4_294_967_296.0) as u64;
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if (rng.next_u32() as u64) < cut { T::zero() } else { keep })
            .collect();
        let value = self
            .value(x)
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let needs = self.needs(x);
        Ok(self.push(self.shape(x).to_vec(), value, Op::Dropout { x, mask }, needs))
    }

    /// Additive `N(0, sigma²)` noise in train mode; identity in eval mode.
    pub fn gaussian_noise(
        &mut self,
        x: Var,
        sigma: f64,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<Var> {
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::invalid(format!("noise sigma {sigma} must be >= 0")));
        }
        if mode == Mode::Eval || sigma == 0.0 {
            return Ok(x);
        }
        let value = self
            .value(x)
            .iter()
            .map(|&v| v + T::of(sigma * rng.normal()))
            .collect();
        let needs = self.needs(x);
        Ok(self.push(self.shape(x).to_vec(), value, Op::Identity(x), needs))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != self.value(x).len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape(x)
            )));
        }
        let value = self.value(x).to_vec();
        let needs = self.needs(x);
        Ok(self.push(shape.to_vec(), value, Op::Identity(x), needs))
    }

    /// Columns `[start, end)` of a 2-D value.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 2 || start >= end || end > xs[1] {
            return Err(Error::shape(format!(
                "slice_cols {start}..{end} invalid for {xs:?}"
            )));
        }
        let cols = xs[1];
        let value: Vec<T> = self
            .value(x)
            .chunks(cols)
            .flat_map(|row| row[start..end].iter().copied())
            .collect();
        let needs = self.needs(x);
        Ok(self.push(
            vec![xs[0], end - start],
            value,
            Op::SliceCols {
                x,
                cols,
                start,
                end,
            },
            needs,
        ))
    }

    /// `ln(clamp(x, lo, hi))`; the gradient is zero where the clamp is active.
    pub fn clamped_log(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let (lo, hi) = (T::of(lo), T::of(hi));
        let value = self
            .value(x)
            .iter()
            .map(|&v| v.max(lo).min(hi).ln())
            .collect();
        let needs = self.needs(x);
        self.push(self.shape(x).to_vec(), value, Op::ClampedLog { x, lo, hi }, needs)
    }

    /// Picks `x[i, index[i]]` from a 2-D value.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 2 || xs[0] != index.len() {
            return Err(Error::shape(format!(
                "gather of {} indices from {xs:?}",
                index.len()
            )));
        }
        let cols = xs[1];
        if let Some(bad) = index.iter().find(|&&i| i >= cols) {
            return Err(Error::invalid(format!("gather index {bad} >= {cols}")));
        }
        let value = index
            .iter()
            .enumerate()
            .map(|(r, &c)| self.value(x)[r * cols + c])
            .collect();
        let needs = self.needs(x);
        Ok(self.push(
            vec![xs[0]],
            value,
            Op::Gather {
                x,
                cols,
                index: index.to_vec(),
            },
            needs,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().copied().sum();
        let needs = self.needs(x);
        self.push(Vec::new(), vec![s], Op::Sum(x), needs)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.iter().copied().sum::<T>() / T::of(v.len() as f64);
        let needs = self.needs(x);
        self.push(Vec::new(), vec![s], Op::Mean(x), needs)
    }

    // ---- reverse sweep -----------------------------------------------

    /// Propagates `d(loss)/d(node)` to every gradient-tracked node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.node(loss).value.len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let Some(gy) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &gy, &mut grads);
            grads[id] = Some(gy);
        }
        self.grads = grads;
        Ok(())
    }

    /// Gradient of the last `backward` loss w.r.t. `v`; zeros when `v` was
    /// not reachable from the loss.
    pub fn grad(&self, v: Var) -> Vec<T> {
        self.grads
            .get(v.0)
            .and_then(|g| g.clone())
            .unwrap_or_else(|| vec![T::zero(); self.node(v).value.len()])
    }

    /// Writes gradients of every gradient-tracked parameter in `params`;
    /// parameters not recorded on this graph receive zeros.
    pub fn write_param_grads(&self, params: &mut ParamSet<T>) -> Result<()> {
        params.zero_grads();
        for (name, v) in &self.bindings {
            if !self.needs(*v) {
                continue;
            }
            let g = self.grad(*v);
            let t = params.get_mut(name)?;
            match t.grad_mut() {
                Some(dst) => dst.copy_from_slice(&g),
                None => {
                    return Err(Error::invalid(format!(
                        "parameter {name} does not track gradients"
                    )))
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, id: usize, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[id];
        let mut acc = |v: Var, contribution: Vec<T>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match grads[v.0].as_mut() {
                Some(g) => add_into(g, &contribution),
                None => grads[v.0] = Some(contribution),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, gy.to_vec());
                acc(*b, gy.to_vec());
            }
            Op::Sub(a, b) => {
                acc(*a, gy.to_vec());
                acc(*b, gy.iter().map(|&g| -g).collect());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    acc(*a, gy.iter().zip(vb).map(|(&g, &y)| g * y).collect());
                }
                if self.needs(*b) {
                    acc(*b, gy.iter().zip(va).map(|(&g, &x)| g * x).collect());
                }
            }
            Op::Scale(a, s) => acc(*a, gy.iter().map(|&g| g * *s).collect()),
            Op::OneMinus(a) => acc(*a, gy.iter().map(|&g| -g).collect()),
            Op::Relu(x) => {
                let xv = self.value(*x);
                acc(
                    *x,
                    gy.iter()
                        .zip(xv)
                        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                        .collect(),
                );
            }
            Op::LeakyRelu(x, s) => {
                let xv = self.value(*x);
                acc(
                    *x,
                    gy.iter()
                        .zip(xv)
                        .map(|(&g, &v)| if v >= T::zero() { g } else { g * *s })
                        .collect(),
                );
            }
            Op::Tanh(x) => acc(
                *x,
                gy.iter()
                    .zip(&node.value)
                    .map(|(&g, &y)| g * (T::one() - y * y))
                    .collect(),
            ),
            Op::Sigmoid(x) => acc(
                *x,
                gy.iter()
                    .zip(&node.value)
                    .map(|(&g, &y)| g * y * (T::one() - y))
                    .collect(),
            ),
            Op::Softmax {
                x,
                outer,
                len,
                inner,
            } => {
                let y = &node.value;
                let mut gx = vec![T::zero(); y.len()];
                for o in 0..*outer {
                    for i in 0..*inner {
                        let at = |j: usize| (o * len + j) * inner + i;
                        let dot: T = (0..*len).map(|j| gy[at(j)] * y[at(j)]).sum();
                        for j in 0..*len {
                            gx[at(j)] = y[at(j)] * (gy[at(j)] - dot);
                        }
                    }
                }
                acc(*x, gx);
            }
            Op::Linear {
                x,
                w,
                b,
                batch,
                fan_in,
                fan_out,
            } => {
                let (batch, fan_in, fan_out) = (*batch, *fan_in, *fan_out);
                if self.needs(*x) {
                    // dx = dy · wᵀ
                    let mut gx = vec![T::zero(); batch * fan_in];
                    T::gemm(
                        batch,
                        fan_out,
                        fan_in,
                        T::one(),
                        gy,
                        (fan_out as isize, 1),
                        self.value(*w),
                        (1, fan_out as isize),
                        T::zero(),
                        &mut gx,
                        (fan_in as isize, 1),
                    );
                    acc(*x, gx);
                }
                if self.needs(*w) {
                    // dw = xᵀ · dy
                    let mut gw = vec![T::zero(); fan_in * fan_out];
                    T::gemm(
                        fan_in,
                        batch,
                        fan_out,
                        T::one(),
                        self.value(*x),
                        (1, fan_in as isize),
                        gy,
                        (fan_out as isize, 1),
                        T::zero(),
                        &mut gw,
                        (fan_out as isize, 1),
                    );
                    acc(*w, gw);
                }
                if self.needs(*b) {
                    let mut gb = vec![T::zero(); fan_out];
                    for row in gy.chunks(fan_out) {
                        add_into(&mut gb, row);
                    }
                    acc(*b, gb);
                }
            }
            Op::Conv2d {
                x,
                k,
                geom,
                n,
                filters,
                cols,
            } => {
                let grid = n * geom.grid_len();
                let patch = geom.patch_len();
                let gy_cm = batch_to_channel_major(gy, *n, *filters, geom.grid_len());
                if self.needs(*k) {
                    // dk = dy · colsᵀ
                    let mut gk = vec![T::zero(); filters * patch];
                    T::gemm(
                        *filters,
                        grid,
                        patch,
                        T::one(),
                        &gy_cm,
                        (grid as isize, 1),
                        cols,
                        (1, grid as isize),
                        T::zero(),
                        &mut gk,
                        (patch as isize, 1),
                    );
                    acc(*k, gk);
                }
                if self.needs(*x) {
                    // dcols = kᵀ · dy
                    let mut gcols = vec![T::zero(); patch * grid];
                    T::gemm(
                        patch,
                        *filters,
                        grid,
                        T::one(),
                        self.value(*k),
                        (1, patch as isize),
                        &gy_cm,
                        (grid as isize, 1),
                        T::zero(),
                        &mut gcols,
                        (grid as isize, 1),
                    );
                    acc(*x, col2im(&gcols, *n, geom));
                }
            }
            Op::TransposedConv2d {
                x,
                k,
                geom,
                n,
                in_channels,
            } => {
                let grid = n * geom.grid_len();
                let patch = geom.patch_len();
                let gcols = im2col(gy, *n, geom);
                if self.needs(*x) {
                    // dx = k · dcols, k viewed as [C, F·kh·kw]
                    let mut gx_cm = vec![T::zero(); in_channels * grid];
                    T::gemm(
                        *in_channels,
                        patch,
                        grid,
                        T::one(),
                        self.value(*k),
                        (patch as isize, 1),
                        &gcols,
                        (grid as isize, 1),
                        T::zero(),
                        &mut gx_cm,
                        (grid as isize, 1),
                    );
                    acc(
                        *x,
                        channel_to_batch_major(&gx_cm, *n, *in_channels, geom.grid_len()),
                    );
                }
                if self.needs(*k) {
                    // dk = x · dcolsᵀ
                    let x_cm =
                        batch_to_channel_major(self.value(*x), *n, *in_channels, geom.grid_len());
                    let mut gk = vec![T::zero(); in_channels * patch];
                    T::gemm(
                        *in_channels,
                        grid,
                        patch,
                        T::one(),
                        &x_cm,
                        (grid as isize, 1),
                        &gcols,
                        (1, grid as isize),
                        T::zero(),
                        &mut gk,
                        (patch as isize, 1),
                    );
                    acc(*k, gk);
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                channels,
                spatial,
                batch_stats,
            } => {
                let (channels, spatial) = (*channels, *spatial);
                let n = gy.len() / (channels * spatial);
                let count = T::of((n * spatial) as f64);
                let mut sum_g = vec![T::zero(); channels];
                let mut sum_gx = vec![T::zero(); channels];
                for b in 0..n {
                    for c in 0..channels {
                        let off = (b * channels + c) * spatial;
                        for i in off..off + spatial {
                            sum_g[c] = sum_g[c] + gy[i];
                            sum_gx[c] = sum_gx[c] + gy[i] * xhat[i];
                        }
                    }
                }
                if self.needs(*x) {
                    let g = self.value(*gamma);
                    let mut gx = vec![T::zero(); gy.len()];
                    for b in 0..n {
                        for c in 0..channels {
                            let off = (b * channels + c) * spatial;
                            let scale = g[c] * inv_std[c];
                            for i in off..off + spatial {
                                gx[i] = if *batch_stats {
                                    scale * (gy[i] - sum_g[c] / count - xhat[i] * sum_gx[c] / count)
                                } else {
                                    scale * gy[i]
                                };
                            }
                        }
                    }
                    acc(*x, gx);
                }
                acc(*gamma, sum_gx);
                acc(*beta, sum_g);
            }
            Op::ChannelBias {
                x,
                b,
                channels,
                spatial,
            } => {
                acc(*x, gy.to_vec());
                if self.needs(*b) {
                    let mut gb = vec![T::zero(); *channels];
                    for (i, chunk) in gy.chunks(*spatial).enumerate() {
                        gb[i % channels] = gb[i % channels] + chunk.iter().copied().sum::<T>();
                    }
                    acc(*b, gb);
                }
            }
            Op::Dropout { x, mask } => {
                acc(*x, gy.iter().zip(mask).map(|(&g, &m)| g * m).collect())
            }
            Op::Identity(x) => acc(*x, gy.to_vec()),
            Op::SliceCols {
                x,
                cols,
                start,
                end,
            } => {
                let width = end - start;
                let rows = gy.len() / width;
                let mut gx = vec![T::zero(); rows * cols];
                for r in 0..rows {
                    gx[r * cols + start..r * cols + end]
                        .copy_from_slice(&gy[r * width..(r + 1) * width]);
                }
                acc(*x, gx);
            }
            Op::ClampedLog { x, lo, hi } => {
                let xv = self.value(*x);
                acc(
                    *x,
                    gy.iter()
                        .zip(xv)
                        .map(|(&g, &v)| {
                            if v < *lo || v > *hi {
                                T::zero()
                            } else {
                                g / v
                            }
                        })
                        .collect(),
                );
            }
            Op::Gather { x, cols, index } => {
                let mut gx = vec![T::zero(); index.len() * cols];
                for (r, &c) in index.iter().enumerate() {
                    gx[r * cols + c] = gy[r];
                }
                acc(*x, gx);
            }
            Op::Sum(x) => acc(*x, vec![gy[0]; self.value(*x).len()]),
            Op::Mean(x) => {
                let len = self.value(*x).len();
                acc(*x, vec![gy[0] / T::of(len as f64); len]);
            }
        }
    }
}

fn sigmoid<T: Element>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}
