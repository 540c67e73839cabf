use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{LayerOp, LayerSpec, StackSpec};
use crate::nn::Activation;

pub const LEAKY_SLOPE: f64 = 0.2;
pub const DISCRIMINATOR_DROPOUT: f64 = 0.5;
const GENERATOR_KERNEL: usize = 5;
const DISCRIMINATOR_KERNEL: usize = 3;

/// Named layer-width presets.
///
/// `Compact` upsamples three times from a 384-map linear projection and is
/// meant for 32×32 images; `Large` upsamples four times from 768 maps and
/// is meant for 128×128. Both share the six-convolution discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Compact,
    Large,
}

impl Arch {
    pub fn generator_widths(self) -> &'static [usize] {
        match self {
            Arch::Compact => &[384, 192, 96],
            Arch::Large => &[768, 384, 256, 192],
        }
    }

    pub fn discriminator_widths(self) -> &'static [usize] {
        &[16, 32, 64, 128, 256, 512]
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Compact => "compact",
            Arch::Large => "large",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(Arch::Compact),
            "large" => Ok(Arch::Large),
            _ => Err(Error::Config(format!("unknown architecture `{s}`"))),
        }
    }
}

/// Divides a hidden width, rounding up and never reaching zero.
pub fn scaled_width(width: usize, divisor: usize) -> usize {
    width.div_ceil(divisor.max(1)).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub z_dim: usize,
    pub num_classes: usize,
    pub channels: usize,
    pub resolution: usize,
    pub stack: StackSpec,
}

impl GeneratorSpec {
    /// `widths[0]` maps come out of the linear projection, the remaining
    /// entries are hidden transposed convolutions, and a final transposed
    /// convolution produces `channels` maps through tanh. Every transposed
    /// convolution doubles the side, so `resolution` must be
    /// `start · 2^widths.len()` for a whole `start ≥ 1`.
    pub fn new(
        z_dim: usize,
        num_classes: usize,
        channels: usize,
        resolution: usize,
        widths: &[usize],
    ) -> Result<Self> {
        if z_dim == 0 || num_classes == 0 || channels == 0 || widths.is_empty() {
            return Err(Error::invalid("generator needs z_dim, classes, channels and widths"));
        }
        let ups = widths.len() as u32;
        let start = resolution >> ups;
        if start == 0 || start << ups != resolution {
            return Err(Error::Config(format!(
                "resolution {resolution} is not reachable with {ups} doubling stages"
            )));
        }
        let relu_bn = |op| LayerSpec::new(op, true, 0.0, Activation::Relu);
        let mut layers = vec![LayerSpec::new(
            LayerOp::Linear {
                features: widths[0],
                size: start,
            },
            false,
            0.0,
            Activation::Relu,
        )];
        for &w in &widths[1..] {
            layers.push(relu_bn(LayerOp::TransposedConv {
                features: w,
                kernel: GENERATOR_KERNEL,
                stride: 2,
            }));
        }
        layers.push(LayerSpec::new(
            LayerOp::TransposedConv {
                features: channels,
                kernel: GENERATOR_KERNEL,
                stride: 2,
            },
            false,
            0.0,
            Activation::Tanh,
        ));
        Ok(Self {
            z_dim,
            num_classes,
            channels,
            resolution,
            stack: StackSpec {
                input: vec![z_dim + num_classes],
                layers,
            },
        })
    }

    pub fn from_arch(
        arch: Arch,
        width_divisor: usize,
        z_dim: usize,
        num_classes: usize,
        channels: usize,
        resolution: usize,
    ) -> Result<Self> {
        let widths: Vec<usize> = arch
            .generator_widths()
            .iter()
            .map(|&w| scaled_width(w, width_divisor))
            .collect();
        Self::new(z_dim, num_classes, channels, resolution, &widths)
    }

    pub fn input_width(&self) -> usize {
        self.z_dim + self.num_classes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorSpec {
    pub num_classes: usize,
    pub channels: usize,
    pub resolution: usize,
    pub stack: StackSpec,
}

impl DiscriminatorSpec {
    /// 3×3 convolutions alternating stride 2 and 1, leaky ReLU, dropout and
    /// batch norm on all but the first, then a linear layer of
    /// `outputs` units. Activation noise is added to the input of every
    /// layer during training.
    pub fn with_outputs(
        outputs: usize,
        num_classes: usize,
        channels: usize,
        resolution: usize,
        widths: &[usize],
    ) -> Result<Self> {
        if num_classes == 0 || channels == 0 || resolution == 0 || widths.is_empty() {
            return Err(Error::invalid("discriminator needs classes, channels, resolution and widths"));
        }
        let mut layers: Vec<LayerSpec> = widths
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                LayerSpec::new(
                    LayerOp::Conv {
                        features: w,
                        kernel: DISCRIMINATOR_KERNEL,
                        stride: if i % 2 == 0 { 2 } else { 1 },
                    },
                    i > 0,
                    DISCRIMINATOR_DROPOUT,
                    Activation::LeakyRelu(LEAKY_SLOPE),
                )
                .with_input_noise()
            })
            .collect();
        layers.push(
            LayerSpec::new(
                LayerOp::Linear {
                    features: outputs,
                    size: 0,
                },
                false,
                0.0,
                Activation::Identity,
            )
            .with_input_noise(),
        );
        let stack = StackSpec {
            input: vec![channels, resolution, resolution],
            layers,
        };
        stack.shapes()?;
        Ok(Self {
            num_classes,
            channels,
            resolution,
            stack,
        })
    }

    /// Discriminator with the `K + 1`-unit soft-sigmoid head.
    pub fn new(num_classes: usize, channels: usize, resolution: usize, widths: &[usize]) -> Result<Self> {
        Self::with_outputs(num_classes + 1, num_classes, channels, resolution, widths)
    }

    pub fn from_arch(
        arch: Arch,
        width_divisor: usize,
        num_classes: usize,
        channels: usize,
        resolution: usize,
    ) -> Result<Self> {
        let widths: Vec<usize> = arch
            .discriminator_widths()
            .iter()
            .map(|&w| scaled_width(w, width_divisor))
            .collect();
        Self::new(num_classes, channels, resolution, &widths)
    }

    pub fn output_width(&self) -> usize {
        match self.stack.layers.last().map(|l| l.op) {
            Some(LayerOp::Linear { features, .. }) => features,
            _ => 0,
        }
    }
}
