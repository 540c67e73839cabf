use std::fmt;
use std::str::FromStr;

use crate::acgan::spec::Arch;
use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::nn::AdamConfig;

/// Objective the generator ascends on generated samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorLoss {
    /// `mean ln P(real | G(z)) + mean ln P(c | G(z))`.
    NonSaturating,
    /// `−mean ln P(fake | G(z)) + mean ln P(c | G(z))`.
    Minimax,
}

impl fmt::Display for GeneratorLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorLoss::NonSaturating => "non_saturating",
            GeneratorLoss::Minimax => "minimax",
        })
    }
}

impl FromStr for GeneratorLoss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non_saturating" => Ok(GeneratorLoss::NonSaturating),
            "minimax" => Ok(GeneratorLoss::Minimax),
            _ => Err(Error::Config(format!("unknown generator loss `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: Arch,
    /// Hidden layer widths are divided by this (rounded up).
    pub width_divisor: usize,
    pub resolution: usize,
    pub channels: usize,
    pub num_classes: usize,
    pub z_dim: usize,
    pub batch_size: usize,
    pub iterations: u64,
    pub g_adam: AdamConfig,
    pub d_adam: AdamConfig,
    pub noise_sigma: f64,
    pub generator_loss: GeneratorLoss,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub metrics_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Compact,
            width_divisor: 1,
            resolution: 32,
            channels: 3,
            num_classes: 10,
            z_dim: 100,
            batch_size: 100,
            iterations: 50_000,
            g_adam: AdamConfig::default(),
            d_adam: AdamConfig::default(),
            noise_sigma: 0.1,
            generator_loss: GeneratorLoss::NonSaturating,
            d_steps: 1,
            seed: 0,
            checkpoint_every: 1000,
            metrics_every: 500,
        }
    }
}

pub const TRAIN_KEYS: &[&str] = &[
    "arch",
    "width_divisor",
    "resolution",
    "channels",
    "classes",
    "z_dim",
    "batch_size",
    "iterations",
    "g_alpha",
    "g_beta1",
    "g_beta2",
    "d_alpha",
    "d_beta1",
    "d_beta2",
    "noise_sigma",
    "g_loss",
    "d_steps",
    "seed",
    "checkpoint_every",
    "metrics_every",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.batch_size < 2 {
            return fail(format!("batch_size {} < 2 (batch norm)", self.batch_size));
        }
        if self.width_divisor == 0 || self.d_steps == 0 {
            return fail("width_divisor and d_steps must be positive".into());
        }
        if self.num_classes == 0 || self.z_dim == 0 || self.channels == 0 {
            return fail("classes, z_dim and channels must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        if self.checkpoint_every == 0 || self.metrics_every == 0 {
            return fail("checkpoint_every and metrics_every must be positive".into());
        }
        self.g_adam.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.d_adam.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Reads `{prefix}{key}` entries; absent keys keep their defaults.
    pub fn from_kv(kv: &KvMap, prefix: &str) -> Result<Self> {
        let d = Self::default();
        let key = |k: &str| format!("{prefix}{k}");
        let adam = |side: &str, base: AdamConfig| -> Result<AdamConfig> {
            Ok(AdamConfig {
                alpha: kv.get_or(&key(&format!("{side}_alpha")), base.alpha)?,
                beta1: kv.get_or(&key(&format!("{side}_beta1")), base.beta1)?,
                beta2: kv.get_or(&key(&format!("{side}_beta2")), base.beta2)?,
                epsilon: base.epsilon,
            })
        };
        let cfg = Self {
            arch: kv.get_or(&key("arch"), d.arch)?,
            width_divisor: kv.get_or(&key("width_divisor"), d.width_divisor)?,
            resolution: kv.get_or(&key("resolution"), d.resolution)?,
            channels: kv.get_or(&key("channels"), d.channels)?,
            num_classes: kv.get_or(&key("classes"), d.num_classes)?,
            z_dim: kv.get_or(&key("z_dim"), d.z_dim)?,
            batch_size: kv.get_or(&key("batch_size"), d.batch_size)?,
            iterations: kv.get_or(&key("iterations"), d.iterations)?,
            g_adam: adam("g", d.g_adam)?,
            d_adam: adam("d", d.d_adam)?,
            noise_sigma: kv.get_or(&key("noise_sigma"), d.noise_sigma)?,
            generator_loss: kv.get_or(&key("g_loss"), d.generator_loss)?,
            d_steps: kv.get_or(&key("d_steps"), d.d_steps)?,
            seed: kv.get_or(&key("seed"), d.seed)?,
            checkpoint_every: kv.get_or(&key("checkpoint_every"), d.checkpoint_every)?,
            metrics_every: kv.get_or(&key("metrics_every"), d.metrics_every)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut kv = KvMap::new();
        let mut set = |k: &str, v: String| kv.set(format!("{prefix}{k}"), v);
        set("arch", self.arch.to_string());
        set("width_divisor", self.width_divisor.to_string());
        set("resolution", self.resolution.to_string());
        set("channels", self.channels.to_string());
        set("classes", self.num_classes.to_string());
        set("z_dim", self.z_dim.to_string());
        set("batch_size", self.batch_size.to_string());
        set("iterations", self.iterations.to_string());
        set("g_alpha", self.g_adam.alpha.to_string());
        set("g_beta1", self.g_adam.beta1.to_string());
        set("g_beta2", self.g_adam.beta2.to_string());
        set("d_alpha", self.d_adam.alpha.to_string());
        set("d_beta1", self.d_adam.beta1.to_string());
        set("d_beta2", self.d_adam.beta2.to_string());
        set("noise_sigma", self.noise_sigma.to_string());
        set("g_loss", self.generator_loss.to_string());
        set("d_steps", self.d_steps.to_string());
        set("seed", self.seed.to_string());
        set("checkpoint_every", self.checkpoint_every.to_string());
        set("metrics_every", self.metrics_every.to_string());
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let cfg = TrainConfig {
            arch: Arch::Large,
            width_divisor: 3,
            noise_sigma: 0.2,
            generator_loss: GeneratorLoss::Minimax,
            g_adam: AdamConfig {
                alpha: 0.0003,
                ..AdamConfig::default()
            },
            seed: 99,
            ..TrainConfig::default()
        };
        let kv = cfg.to_kv("acgan.");
        assert_eq!(kv.len(), TRAIN_KEYS.len());
        assert_eq!(TrainConfig::from_kv(&kv, "acgan.").unwrap(), cfg);
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = TrainConfig::from_kv(&KvMap::new(), "").unwrap();
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!(cfg.g_adam.alpha, 0.0002);
        let kv = KvMap::parse("batch_size = 1").unwrap();
        assert!(matches!(TrainConfig::from_kv(&kv, ""), Err(Error::Config(_))));
        let kv = KvMap::parse("g_loss = wasserstein").unwrap();
        assert!(TrainConfig::from_kv(&kv, "").is_err());
    }
}
