use crate::error::{Error, Result};
use crate::nn::Tensor;

/// For each sample, the training image with the smallest sum of absolute
/// pixel differences and that distance. Ties go to the lower index.
pub fn nearest_neighbor_l1(samples: &Tensor<f32>, training: &Tensor<f32>) -> Result<Vec<(usize, f64)>> {
    let (s, t) = (samples.shape(), training.shape());
    if s.len() < 2 || t.len() != s.len() || s[1..] != t[1..] {
        return Err(Error::shape(format!("samples {s:?} and training set {t:?} differ in image shape")));
    }
    let size: usize = s[1..].iter().product();
    let train: Vec<&[f32]> = training.data().chunks(size).collect();
    Ok(samples
        .data()
        .chunks(size)
        .map(|x| {
            let mut best = (0, f64::INFINITY);
            for (j, y) in train.iter().enumerate() {
                let mut d = 0.0;
                for (a, b) in x.iter().zip(y.iter()) {
                    d += (*a as f64 - *b as f64).abs();
                    if d >= best.1 {
                        break;
                    }
                }
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect())
}
