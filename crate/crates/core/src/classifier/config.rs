use crate::acgan::Arch;
use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::nn::AdamConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    /// Only the discriminator widths of the preset are used.
    pub arch: Arch,
    pub width_divisor: usize,
    pub resolution: usize,
    pub channels: usize,
    pub num_classes: usize,
    pub batch_size: usize,
    pub iterations: u64,
    pub adam: AdamConfig,
    /// Activation noise during training; zero disables it.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Compact,
            width_divisor: 4,
            resolution: 32,
            channels: 3,
            num_classes: 10,
            batch_size: 64,
            iterations: 800,
            adam: AdamConfig {
                alpha: 0.001,
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

pub const CLASSIFIER_KEYS: &[&str] = &[
    "arch",
    "width_divisor",
    "resolution",
    "channels",
    "classes",
    "batch_size",
    "iterations",
    "alpha",
    "beta1",
    "beta2",
    "noise_sigma",
    "seed",
];

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_classes < 2 {
            return fail(format!("a classifier needs at least 2 classes, got {}", self.num_classes));
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size {} < 2 (batch norm)", self.batch_size));
        }
        if self.width_divisor == 0 || self.channels == 0 || self.resolution == 0 {
            return fail("width_divisor, channels and resolution must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        self.adam.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `{prefix}{key}` entries; absent keys keep their defaults.
    pub fn from_kv(kv: &KvMap, prefix: &str) -> Result<Self> {
        let d = Self::default();
        let key = |k: &str| format!("{prefix}{k}");
        let cfg = Self {
            arch: kv.get_or(&key("arch"), d.arch)?,
            width_divisor: kv.get_or(&key("width_divisor"), d.width_divisor)?,
            resolution: kv.get_or(&key("resolution"), d.resolution)?,
            channels: kv.get_or(&key("channels"), d.channels)?,
            num_classes: kv.get_or(&key("classes"), d.num_classes)?,
            batch_size: kv.get_or(&key("batch_size"), d.batch_size)?,
            iterations: kv.get_or(&key("iterations"), d.iterations)?,
            adam: AdamConfig {
                alpha: kv.get_or(&key("alpha"), d.adam.alpha)?,
                beta1: kv.get_or(&key("beta1"), d.adam.beta1)?,
                beta2: kv.get_or(&key("beta2"), d.adam.beta2)?,
                epsilon: d.adam.epsilon,
            },
            noise_sigma: kv.get_or(&key("noise_sigma"), d.noise_sigma)?,
            seed: kv.get_or(&key("seed"), d.seed)?,
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
        set("batch_size", self.batch_size.to_string());
        set("iterations", self.iterations.to_string());
        set("alpha", self.adam.alpha.to_string());
        set("beta1", self.adam.beta1.to_string());
        set("beta2", self.adam.beta2.to_string());
        set("noise_sigma", self.noise_sigma.to_string());
        set("seed", self.seed.to_string());
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let cfg = ClassifierConfig {
            width_divisor: 2,
            num_classes: 4,
            iterations: 7,
            noise_sigma: 0.05,
            ..Default::default()
        };
        let back = ClassifierConfig::from_kv(&cfg.to_kv("c."), "c.").unwrap();
        assert_eq!(back, cfg);
        let keys: Vec<String> = cfg.to_kv("").keys().map(str::to_string).collect();
        let mut expected: Vec<String> = CLASSIFIER_KEYS.iter().map(|s| s.to_string()).collect();
        expected.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, expected);
    }

    #[test]
    fn single_class_rejected() {
        let cfg = ClassifierConfig {
            num_classes: 1,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
