use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::element::Element;
use crate::nn::params::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    /// `alpha = 0.0002, beta1 = 0.5, beta2 = 0.999`.
    fn default() -> Self {
        Self {
            alpha: 0.0002,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..1.0;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("adam alpha {} must be >= 0", self.alpha)));
        }
        if !unit.contains(&self.beta1) || !unit.contains(&self.beta2) {
            return Err(Error::invalid("adam betas must lie in [0, 1)"));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::invalid("adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// First/second moment buffers and step count for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: BTreeMap<String, Vec<T>>,
    pub v: BTreeMap<String, Vec<T>>,
}

impl<T: Element> AdamState<T> {
    pub fn new(config: AdamConfig, params: &ParamSet<T>) -> Result<Self> {
        config.validate()?;
        let zeros = |t: &crate::nn::tensor::Tensor<T>| vec![T::zero(); t.numel()];
        Ok(Self {
            config,
            step: 0,
            m: params.iter().map(|(k, t)| (k.clone(), zeros(t))).collect(),
            v: params.iter().map(|(k, t)| (k.clone(), zeros(t))).collect(),
        })
    }
}

/// One bias-corrected Adam descent step using the gradients stored in
/// `params`.
pub fn adam_step<T: Element>(params: &mut ParamSet<T>, state: &mut AdamState<T>) -> Result<()> {
    let cfg = state.config;
    cfg.validate()?;
    if state.m.len() != params.len() {
        return Err(Error::shape("adam state does not match parameter set"));
    }
    for (name, t) in params.iter() {
        let m = state
            .m
            .get(name)
            .ok_or_else(|| Error::shape(format!("adam state missing {name}")))?;
        let v = &state.v[name];
        if m.len() != t.numel() || v.len() != t.numel() {
            return Err(Error::shape(format!("adam moment shape mismatch for {name}")));
        }
        if t.grad().is_none() {
            return Err(Error::invalid(format!("parameter {name} has no gradient")));
        }
    }
    state.step += 1;
    let t_step = state.step as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::of(1.0 - cfg.beta1.powi(t_step));
    let c2 = T::of(1.0 - cfg.beta2.powi(t_step));
    let (alpha, eps) = (T::of(cfg.alpha), T::of(cfg.epsilon));
    for (name, t) in params.iter_mut() {
        let m = state.m.get_mut(name).expect("checked above");
        let v = state.v.get_mut(name).expect("checked above");
        let grad = t.grad().expect("checked above").to_vec();
        for (((p, g), mi), vi) in t.data_mut().iter_mut().zip(grad).zip(m).zip(v) {
            *mi = b1 * *mi + (T::one() - b1) * g;
            *vi = b2 * *vi + (T::one() - b2) * g * g;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *p = *p - alpha * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn scalar_set(v: f64) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::from_f64(&[1], &[v]).unwrap()).unwrap();
        p
    }

    fn set_grad(p: &mut ParamSet<f64>, g: f64) {
        p.get_mut("w").unwrap().grad_mut().unwrap()[0] = g;
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_set(0.7);
        let mut st = AdamState::new(AdamConfig::default(), &p).unwrap();
        for _ in 0..3 {
            adam_step(&mut p, &mut st).unwrap();
        }
        assert_eq!(p.get("w").unwrap().data(), &[0.7]);
        assert_eq!(st.step, 3);
    }

    #[test]
    fn first_step_moves_by_alpha() {
        let mut p = scalar_set(1.0);
        let cfg = AdamConfig {
            alpha: 0.1,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(cfg, &p).unwrap();
        set_grad(&mut p, 1.0);
        adam_step(&mut p, &mut st).unwrap();
        assert!((p.get("w").unwrap().data()[0] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn matches_scalar_oracle_on_quadratic() {
        // f(w) = (w - 3)^2
        let cfg = AdamConfig {
            alpha: 0.05,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        };
        let mut p = scalar_set(-1.0);
        let mut st = AdamState::new(cfg, &p).unwrap();
        let (mut w, mut m, mut v) = (-1.0f64, 0.0f64, 0.0f64);
        for t in 1..=5 {
            let g = 2.0 * (w - 3.0);
            m = 0.9 * m + 0.1 * g;
            v = 0.99 * v + 0.01 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.99f64.powi(t));
            w -= 0.05 * mh / (vh.sqrt() + 1e-8);

            let cur = p.get("w").unwrap().data()[0];
            set_grad(&mut p, 2.0 * (cur - 3.0));
            adam_step(&mut p, &mut st).unwrap();
            assert!((p.get("w").unwrap().data()[0] - w).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_config_and_missing_grad() {
        let p = scalar_set(1.0);
        let bad = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(bad, &p).is_err());
        let mut p2 = p.clone();
        let mut st = AdamState::new(AdamConfig::default(), &p).unwrap();
        p2.get_mut("w").unwrap().set_requires_grad(false);
        assert!(adam_step(&mut p2, &mut st).is_err());
    }
}
