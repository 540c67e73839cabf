//! Layer stacks described row by row, the way the architecture tables list
//! them: operation, kernel, stride, feature maps, batch norm, dropout and
//! nonlinearity.

use crate::error::{Error, Result};
use crate::nn::{
    init_params, Activation, BufferSet, Element, Graph, Mode, ParamKind, ParamSet, ParamSpec,
    RngStream, RunningStats, Var,
};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerOp {
    /// Dense layer over the flattened input. With `size > 0` the output is
    /// reshaped to `[features, size, size]` maps, otherwise it is `[features]`.
    Linear { features: usize, size: usize },
    /// "Same"-style padded convolution (`padding = kernel / 2`).
    Conv {
        features: usize,
        kernel: usize,
        stride: usize,
    },
    /// Transposed convolution multiplying the spatial size by `stride`
    /// (`padding = kernel / 2`, `output_padding = stride − 1`).
    TransposedConv {
        features: usize,
        kernel: usize,
        stride: usize,
    },
}

impl LayerOp {
    pub fn features(&self) -> usize {
        match *self {
            LayerOp::Linear { features, .. }
            | LayerOp::Conv { features, .. }
            | LayerOp::TransposedConv { features, .. } => features,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub op: LayerOp,
    pub batch_norm: bool,
    pub dropout: f64,
    pub activation: Activation,
    /// Add activation noise to this layer's input in train mode.
    pub input_noise: bool,
}

impl LayerSpec {
    pub fn new(op: LayerOp, batch_norm: bool, dropout: f64, activation: Activation) -> Self {
        Self {
            op,
            batch_norm,
            dropout,
            activation,
            input_noise: false,
        }
    }

    pub fn with_input_noise(mut self) -> Self {
        self.input_noise = true;
        self
    }
}

/// Per-sample input shape plus an ordered list of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct StackSpec {
    pub input: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

/// How parameters enter the graph for one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    /// Parameters receive gradients.
    Tracked,
    /// Parameters are constants for this pass.
    Frozen,
}

/// Per-pass settings for [`Network::forward`].
#[derive(Debug)]
pub struct Pass<'a> {
    pub mode: Mode,
    pub binding: Binding,
    pub noise_sigma: f64,
    pub rng: &'a mut RngStream,
}

fn layer_name(prefix: &str, i: usize) -> String {
    format!("{prefix}.l{i:02}")
}

impl StackSpec {
    /// Per-sample output shape of every layer.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut cur = self.input.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = match layer.op {
                LayerOp::Linear { features, size } => {
                    if size > 0 {
                        vec![features, size, size]
                    } else {
                        vec![features]
                    }
                }
                LayerOp::Conv {
                    features,
                    kernel,
                    stride,
                } => {
                    let [_, h, w] = spatial(&cur, i)?;
                    let pad = kernel / 2;
                    if h + 2 * pad < kernel || w + 2 * pad < kernel || stride == 0 {
                        return Err(Error::shape(format!(
                            "layer {i}: {kernel}x{kernel} kernel does not fit {h}x{w}"
                        )));
                    }
                    vec![
                        features,
                        (h + 2 * pad - kernel) / stride + 1,
                        (w + 2 * pad - kernel) / stride + 1,
                    ]
                }
                LayerOp::TransposedConv {
                    features, stride, ..
                } => {
                    let [_, h, w] = spatial(&cur, i)?;
                    vec![features, h * stride, w * stride]
                }
            };
            out.push(next.clone());
            cur = next;
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self
            .shapes()?
            .pop()
            .unwrap_or_else(|| self.input.clone()))
    }

    pub fn param_specs(&self, prefix: &str) -> Result<Vec<ParamSpec>> {
        let shapes = self.shapes()?;
        let mut specs = Vec::new();
        let mut cur = self.input.clone();
        for (i, (layer, out)) in self.layers.iter().zip(&shapes).enumerate() {
            let name = layer_name(prefix, i);
            let fan_in: usize = cur.iter().product();
            let cin = cur[0];
            let features = layer.op.features();
            let weight = match layer.op {
                LayerOp::Linear { .. } => vec![fan_in, out.iter().product()],
                LayerOp::Conv { kernel, .. } => vec![features, cin, kernel, kernel],
                LayerOp::TransposedConv { kernel, .. } => vec![cin, features, kernel, kernel],
            };
            specs.push(ParamSpec::new(format!("{name}.weight"), &weight, ParamKind::Weight));
            if layer.batch_norm {
                specs.push(ParamSpec::new(format!("{name}.bn.beta"), &[features], ParamKind::Beta));
                specs.push(ParamSpec::new(
                    format!("{name}.bn.gamma"),
                    &[features],
                    ParamKind::Gamma,
                ));
            } else {
                // A bias ahead of batch norm is cancelled by the mean subtraction.
                let bias_len = match layer.op {
                    LayerOp::Linear { .. } => out.iter().product(),
                    _ => features,
                };
                specs.push(ParamSpec::new(format!("{name}.bias"), &[bias_len], ParamKind::Bias));
            }
            cur = out.clone();
        }
        Ok(specs)
    }
}

fn spatial(shape: &[usize], layer: usize) -> Result<[usize; 3]> {
    match shape {
        [c, h, w] => Ok([*c, *h, *w]),
        _ => Err(Error::shape(format!(
            "layer {layer} needs [C, H, W] input, got {shape:?}"
        ))),
    }
}

/// A layer stack together with its parameters and batch-norm statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    pub spec: StackSpec,
    pub prefix: String,
    pub params: ParamSet<T>,
    pub buffers: BufferSet<T>,
}

impl<T: Element> Network<T> {
    pub fn new(spec: StackSpec, prefix: &str, rng: &mut RngStream) -> Result<Self> {
        let specs = spec.param_specs(prefix)?;
        let params = init_params(&specs, rng)?;
        let buffers = Self::fresh_buffers(&spec, prefix)?;
        Ok(Self {
            spec,
            prefix: prefix.to_string(),
            params,
            buffers,
        })
    }

    fn fresh_buffers(spec: &StackSpec, prefix: &str) -> Result<BufferSet<T>> {
        Ok(spec
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.batch_norm)
            .map(|(i, l)| (format!("{}.bn", layer_name(prefix, i)), RunningStats::new(l.op.features())))
            .collect())
    }

    pub fn cast<U: Element>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            prefix: self.prefix.clone(),
            params: self.params.cast(),
            buffers: self
                .buffers
                .iter()
                .map(|(k, s)| {
                    (
                        k.clone(),
                        RunningStats {
                            mean: s.mean.iter().map(|v| U::of(v.as_f64())).collect(),
                            var: s.var.iter().map(|v| U::of(v.as_f64())).collect(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Runs the stack on `x: [N, ...input]`. Batch-norm statistics are
    /// folded into `buffers` in train mode; pass a scratch copy to leave the
    /// network's own statistics untouched.
    pub fn forward_with(
        &self,
        g: &mut Graph<T>,
        x: Var,
        buffers: &mut BufferSet<T>,
        pass: &mut Pass<'_>,
    ) -> Result<Var> {
        self.forward_using(&self.params, g, x, buffers, pass)
    }

    /// [`Network::forward_with`] reading weights from `params` instead of
    /// the network's own set. `params` must have the same names and shapes.
    pub fn forward_using(
        &self,
        params: &ParamSet<T>,
        g: &mut Graph<T>,
        x: Var,
        buffers: &mut BufferSet<T>,
        pass: &mut Pass<'_>,
    ) -> Result<Var> {
        let n = g.shape(x)[0];
        if g.shape(x)[1..] != self.spec.input[..] {
            return Err(Error::shape(format!(
                "{} expects per-sample input {:?}, got {:?}",
                self.prefix,
                self.spec.input,
                &g.shape(x)[1..]
            )));
        }
        let shapes = self.spec.shapes()?;
        let mut h = x;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let name = layer_name(&self.prefix, i);
            let bind = |g: &mut Graph<T>, suffix: &str| -> Result<Var> {
                let full = format!("{name}.{suffix}");
                match pass.binding {
                    Binding::Tracked => g.param(params, &full),
                    Binding::Frozen => g.param_frozen(params, &full),
                }
            };
            let w = bind(g, "weight")?;
            let bias = if layer.batch_norm {
                None
            } else {
                Some(bind(g, "bias")?)
            };
            let bn = if layer.batch_norm {
                Some((bind(g, "bn.gamma")?, bind(g, "bn.beta")?))
            } else {
                None
            };
            if layer.input_noise {
                h = g.gaussian_noise(h, pass.noise_sigma, pass.mode, pass.rng)?;
            }
            h = match layer.op {
                LayerOp::Linear { .. } => {
                    let flat: usize = g.shape(h)[1..].iter().product();
                    let h2 = g.reshape(h, &[n, flat])?;
                    let y = match bias {
                        Some(b) => g.linear(h2, w, b)?,
                        None => {
                            let width = g.shape(w)[1];
                            let zero = g.input(&crate::nn::Tensor::zeros(&[width]));
                            g.linear(h2, w, zero)?
                        }
                    };
                    let mut full = vec![n];
                    full.extend_from_slice(&shapes[i]);
                    g.reshape(y, &full)?
                }
                LayerOp::Conv { kernel, stride, .. } => {
                    let pad = kernel / 2;
                    let y = g.conv2d(h, w, (stride, stride), (pad, pad))?;
                    match bias {
                        Some(b) => g.add_channel_bias(y, b)?,
                        None => y,
                    }
                }
                LayerOp::TransposedConv { kernel, stride, .. } => {
                    let pad = kernel / 2;
                    let y = g.transposed_conv2d(
                        h,
                        w,
                        (stride, stride),
                        (pad, pad),
                        (stride - 1, stride - 1),
                    )?;
                    match bias {
                        Some(b) => g.add_channel_bias(y, b)?,
                        None => y,
                    }
                }
            };
            if let Some((gamma, beta)) = bn {
                let stats = buffers
                    .get_mut(&format!("{name}.bn"))
                    .ok_or_else(|| Error::invalid(format!("missing batch-norm stats for {name}")))?;
                h = g.batch_norm(h, gamma, beta, pass.mode, stats, BN_MOMENTUM, BN_EPS)?;
            }
            h = g.activation(h, layer.activation)?;
            h = g.dropout(h, layer.dropout, pass.mode, pass.rng)?;
        }
        Ok(h)
    }

    /// [`Network::forward_with`] updating the network's own statistics.
    pub fn forward(&mut self, g: &mut Graph<T>, x: Var, pass: &mut Pass<'_>) -> Result<Var> {
        let mut buffers = std::mem::take(&mut self.buffers);
        let out = self.forward_with(g, x, &mut buffers, pass);
        self.buffers = buffers;
        out
    }
}
