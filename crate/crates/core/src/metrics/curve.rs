use crate::classifier::{accuracy_from_dist, Classifier};
use crate::error::{Error, Result};
use crate::metrics::resize::resize_batch;
use crate::nn::{RngStream, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub resolution: usize,
    /// Mean and population standard deviation of the accuracy over the
    /// equal-size subsets.
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    /// Accuracy over all images.
    pub overall: f64,
    pub per_class: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminabilityCurve {
    pub native: usize,
    pub subsets: usize,
    /// Images per subset; the remainder of a random order is left out of
    /// the subset statistics.
    pub subset_size: usize,
    /// Sorted by resolution, strictly increasing.
    pub points: Vec<CurvePoint>,
}

impl DiscriminabilityCurve {
    pub fn at(&self, resolution: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.resolution == resolution)
    }
}

/// Classifier accuracy after degrading `images` to each resolution and
/// restoring them to native size. At the native resolution images are
/// scored untouched. The subset partition is drawn once from
/// `rng.split("subsets")`, so points do not depend on evaluation order.
pub fn discriminability_curve(
    images: &Tensor<f32>,
    labels: &[usize],
    classifier: &Classifier,
    resolutions: &[usize],
    subsets: usize,
    rng: &RngStream,
) -> Result<DiscriminabilityCurve> {
    let &[n, _, h, w] = images.shape() else {
        return Err(Error::shape(format!("expected [N, C, H, W], got {:?}", images.shape())));
    };
    if h != w || h != classifier.config.resolution {
        return Err(Error::Config(format!(
            "images are {h}x{w}, classifier expects {0}x{0}",
            classifier.config.resolution
        )));
    }
    if n != labels.len() {
        return Err(Error::shape(format!("{n} images for {} labels", labels.len())));
    }
    if subsets == 0 || subsets > n {
        return Err(Error::invalid(format!("{subsets} subsets of {n} images")));
    }
    let mut sorted = resolutions.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != resolutions.len() || sorted.is_empty() {
        return Err(Error::invalid("evaluation resolutions must be distinct and non-empty"));
    }
    if let Some(&r) = sorted.iter().find(|&&r| r == 0 || r > h) {
        return Err(Error::invalid(format!("evaluation resolution {r} outside 1..={h}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.split("subsets").shuffle(&mut order);
    let size = n / subsets;
    let k = classifier.num_classes();
    let mut points = Vec::with_capacity(sorted.len());
    for &r in &sorted {
        let degraded = resize_batch(images, r)?;
        let dist = classifier.predict_dist(&degraded)?;
        let full = accuracy_from_dist(&dist, labels)?;
        let accs: Vec<f64> = order
            .chunks_exact(size)
            .take(subsets)
            .map(|idx| {
                let d = dist.select_outer(idx)?;
                let l: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                Ok(accuracy_from_dist(&d, &l)?.overall)
            })
            .collect::<Result<_>>()?;
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let std = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64).sqrt();
        debug_assert_eq!(full.per_class.len(), k);
        points.push(CurvePoint {
            resolution: r,
            accuracy_mean: mean,
            accuracy_std: std,
            overall: full.overall,
            per_class: full.per_class,
        });
    }
    Ok(DiscriminabilityCurve {
        native: h,
        subsets,
        subset_size: size,
        points,
    })
}
