use crate::error::{Error, Result};
use crate::nn::{Element, RngStream, Tensor};

/// Noise and class code for one generator batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    /// `[N, z_dim]`
    pub z: Tensor<f32>,
    pub labels: Vec<usize>,
    /// `[N, K]`
    pub one_hot: Tensor<f32>,
}

impl LatentBatch {
    pub fn new(z: Tensor<f32>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if z.shape().len() != 2 || z.shape()[0] != labels.len() {
            return Err(Error::shape(format!(
                "z {:?} does not match {} labels",
                z.shape(),
                labels.len()
            )));
        }
        let mut one_hot = vec![0.0f32; labels.len() * num_classes];
        for (i, &c) in labels.iter().enumerate() {
            if c >= num_classes {
                return Err(Error::invalid(format!("label {c} outside 0..{num_classes}")));
            }
            one_hot[i * num_classes + c] = 1.0;
        }
        let one_hot = Tensor::new(&[labels.len(), num_classes], one_hot)?;
        Ok(Self { z, labels, one_hot })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn z_dim(&self) -> usize {
        self.z.shape()[1]
    }

    pub fn num_classes(&self) -> usize {
        self.one_hot.shape()[1]
    }

    /// `[N, z_dim + K]`: each row is `z` followed by the one-hot code.
    pub fn generator_input<T: Element>(&self) -> Tensor<T> {
        let (zd, k) = (self.z_dim(), self.num_classes());
        let mut data = Vec::with_capacity(self.len() * (zd + k));
        for i in 0..self.len() {
            data.extend(self.z.data()[i * zd..][..zd].iter().map(|&v| T::of(v as f64)));
            data.extend(self.one_hot.data()[i * k..][..k].iter().map(|&v| T::of(v as f64)));
        }
        Tensor::new(&[self.len(), zd + k], data).expect("shape from parts")
    }
}

/// Draws `n` standard-normal noise rows and class labels; labels are uniform
/// over `0..num_classes` unless given.
pub fn sample_latent(
    n: usize,
    num_classes: usize,
    z_dim: usize,
    labels: Option<&[usize]>,
    rng: &mut RngStream,
) -> Result<LatentBatch> {
    if n == 0 || num_classes == 0 || z_dim == 0 {
        return Err(Error::invalid("latent batch needs n, classes and z_dim > 0"));
    }
    let labels = match labels {
        Some(l) if l.len() != n => {
            return Err(Error::shape(format!("{} labels for {n} rows", l.len())))
        }
        Some(l) => l.to_vec(),
        None => (0..n).map(|_| rng.below(num_classes)).collect(),
    };
    let z: Vec<f32> = (0..n * z_dim).map(|_| rng.normal() as f32).collect();
    LatentBatch::new(Tensor::new(&[n, z_dim], z)?, labels, num_classes)
}
