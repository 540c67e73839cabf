use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::element::Element;
use crate::nn::graph::RunningStats;
use crate::nn::rng::RngStream;
use crate::nn::tensor::Tensor;

/// Standard deviation of the isotropic Gaussian weight initializer.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// `N(0, 0.02²)`
    Weight,
    /// Constant 0.
    Bias,
    /// Batch-norm scale, constant 1.
    Gamma,
    /// Batch-norm shift, constant 0.
    Beta,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], kind: ParamKind) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            kind,
        }
    }
}

/// Named, gradient-tracked parameters in lexicographic name order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T = f32> {
    tensors: BTreeMap<String, Tensor<T>>,
}

/// Batch-norm running statistics keyed by layer path.
pub type BufferSet<T = f32> = BTreeMap<String, RunningStats<T>>;

impl<T: Element> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, mut t: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate parameter {name}")));
        }
        t.set_requires_grad(true);
        self.tensors.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn zero_grads(&mut self) {
        self.tensors.values_mut().for_each(Tensor::zero_grad);
    }

    pub fn cast<U: Element>(&self) -> ParamSet<U> {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Bitwise equality of all parameter values (gradients ignored).
    pub fn same_values(&self, other: &Self) -> bool {
        self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| {
                a.0 == b.0
                    && a.1.shape() == b.1.shape()
                    && a.1
                        .data()
                        .iter()
                        .zip(b.1.data())
                        .all(|(x, y)| x.to_bits_eq(y))
            })
    }
}

trait BitsEq {
    fn to_bits_eq(&self, other: &Self) -> bool;
}

impl<T: Element> BitsEq for T {
    fn to_bits_eq(&self, other: &Self) -> bool {
        self.as_f64().to_bits() == other.as_f64().to_bits()
    }
}

/// Creates parameters: weights `N(0, 0.02²)`, biases 0, batch-norm gamma 1
/// and beta 0. Weights are drawn in spec order from `rng`.
pub fn init_params<T: Element>(specs: &[ParamSpec], rng: &mut RngStream) -> Result<ParamSet<T>> {
    let mut set = ParamSet::new();
    for spec in specs {
        let n: usize = spec.shape.iter().product();
        let data = match spec.kind {
            ParamKind::Weight => (0..n).map(|_| T::of(INIT_STD * rng.normal())).collect(),
            ParamKind::Bias | ParamKind::Beta => vec![T::zero(); n],
            ParamKind::Gamma => vec![T::one(); n],
        };
        set.insert(spec.name.clone(), Tensor::new(&spec.shape, data)?)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("l0.weight", &[200, 100], ParamKind::Weight),
            ParamSpec::new("l0.bias", &[100], ParamKind::Bias),
            ParamSpec::new("bn.gamma", &[8], ParamKind::Gamma),
            ParamSpec::new("bn.beta", &[8], ParamKind::Beta),
        ]
    }

    #[test]
    fn init_constants_and_moments() {
        let p: ParamSet<f32> = init_params(&specs(), &mut RngStream::new(1)).unwrap();
        assert!(p.get("l0.bias").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(p.get("bn.beta").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(p.get("bn.gamma").unwrap().data().iter().all(|&v| v == 1.0));
        let w = p.get("l0.weight").unwrap().data();
        let n = w.len() as f64;
        let mean = w.iter().map(|&v| v as f64).sum::<f64>() / n;
        let std = (w.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.019..=0.021).contains(&std), "std {std}");
        assert!(p.iter().all(|(_, t)| t.requires_grad()));
    }

    #[test]
    fn init_is_deterministic() {
        let a: ParamSet<f32> = init_params(&specs(), &mut RngStream::new(9)).unwrap();
        let b: ParamSet<f32> = init_params(&specs(), &mut RngStream::new(9)).unwrap();
        assert!(a.same_values(&b));
        let c: ParamSet<f32> = init_params(&specs(), &mut RngStream::new(10)).unwrap();
        assert!(!a.same_values(&c));
    }

    #[test]
    fn names_unique_and_sorted() {
        let mut p = ParamSet::<f32>::new();
        p.insert("b", Tensor::zeros(&[1])).unwrap();
        p.insert("a", Tensor::zeros(&[1])).unwrap();
        assert!(p.insert("a", Tensor::zeros(&[1])).is_err());
        assert_eq!(p.names().collect::<Vec<_>>(), vec!["a", "b"]);
    }
}
