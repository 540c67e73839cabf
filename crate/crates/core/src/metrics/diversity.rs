use rand::seq::index;

use crate::error::{Error, Result};
use crate::metrics::ssim::{ms_ssim, ms_ssim_depth, to_luma, Luma, SsimParams};
use crate::nn::{RngStream, Tensor};

/// Highest mean intra-class MS-SSIM observed on real training data in the
/// reference experiments; classes at or above it are flagged.
pub const DIVERSITY_CEILING: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDiversity {
    pub class: usize,
    pub mean: f64,
    /// Population standard deviation over the scored pairs.
    pub std: f64,
    pub pairs: usize,
    /// `mean >= DIVERSITY_CEILING`.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityReport {
    pub rows: Vec<ClassDiversity>,
    /// MS-SSIM scales used at this resolution.
    pub scales: usize,
    pub threshold: f64,
}

impl DiversityReport {
    pub fn row(&self, class: usize) -> Option<&ClassDiversity> {
        self.rows.iter().find(|r| r.class == class)
    }
}

/// `count` distinct unordered index pairs `i < j` below `n`, drawn
/// uniformly without replacement and returned in lexicographic order. All
/// pairs are returned when there are at most `count`.
pub fn sample_pairs(n: usize, count: usize, rng: &mut RngStream) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    let mut picks: Vec<usize> = if count >= total {
        (0..total).collect()
    } else {
        index::sample(rng, total, count).into_vec()
    };
    picks.sort_unstable();
    // pair p enumerates (0,1), (0,2), …, (0,n−1), (1,2), …
    let mut out = Vec::with_capacity(picks.len());
    let (mut i, mut row_start) = (0, 0);
    for p in picks {
        while p >= row_start + (n - 1 - i) {
            row_start += n - 1 - i;
            i += 1;
        }
        out.push((i, i + 1 + (p - row_start)));
    }
    out
}

fn lumas(images: &Tensor<f32>) -> Result<Vec<Luma>> {
    let shape = images.shape();
    if shape.len() != 4 {
        return Err(Error::shape(format!("expected [N, C, H, W] images, got {shape:?}")));
    }
    let size: usize = shape[1..].iter().product();
    images
        .data()
        .chunks(size)
        .map(|c| to_luma(&Tensor::new(&shape[1..], c.to_vec())?))
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// MS-SSIM of `pairs` random distinct pairs from an `[N, C, H, W]` batch.
pub fn pairwise_scores(
    images: &Tensor<f32>,
    pairs: usize,
    params: &SsimParams,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let ls = lumas(images)?;
    if ls.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 images for pairs, got {}", ls.len())));
    }
    sample_pairs(ls.len(), pairs, rng)
        .into_iter()
        .map(|(i, j)| ms_ssim(&ls[i], &ls[j], params))
        .collect()
}

/// Mean MS-SSIM over `pairs` random distinct pairs of the batch.
pub fn mean_pairwise_ms_ssim(
    images: &Tensor<f32>,
    pairs: usize,
    params: &SsimParams,
    rng: &mut RngStream,
) -> Result<f64> {
    Ok(mean_std(&pairwise_scores(images, pairs, params, rng)?).0)
}

/// Per-class mean and spread of pairwise MS-SSIM. Entry `c` of
/// `images_by_class` holds the `[N_c, C, H, W]` images of class `c`; each
/// class draws its pairs from `rng.split("class/{c}")`.
pub fn intra_class_diversity(
    images_by_class: &[Tensor<f32>],
    pairs_per_class: usize,
    params: &SsimParams,
    rng: &RngStream,
) -> Result<DiversityReport> {
    let first = images_by_class
        .first()
        .ok_or_else(|| Error::invalid("no classes to evaluate"))?;
    let shape = first.shape();
    if shape.len() != 4 {
        return Err(Error::shape(format!("expected [N, C, H, W] images, got {shape:?}")));
    }
    let scales = ms_ssim_depth(shape[2], shape[3], params)?;
    let mut rows = Vec::with_capacity(images_by_class.len());
    for (class, images) in images_by_class.iter().enumerate() {
        if images.shape()[0] < 2 {
            return Err(Error::invalid(format!(
                "class {class} has {} image(s), pairs need at least 2",
                images.shape()[0]
            )));
        }
        let scores = pairwise_scores(images, pairs_per_class, params, &mut rng.split(&format!("class/{class}")))?;
        let (mean, std) = mean_std(&scores);
        rows.push(ClassDiversity {
            class,
            mean,
            std,
            pairs: scores.len(),
            flagged: mean >= DIVERSITY_CEILING,
        });
    }
    Ok(DiversityReport {
        rows,
        scales,
        threshold: DIVERSITY_CEILING,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_decoding_enumerates_in_order() {
        let all = sample_pairs(4, 100, &mut RngStream::new(0));
        assert_eq!(all, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn sampled_pairs_are_distinct_and_valid() {
        let ps = sample_pairs(30, 100, &mut RngStream::new(3));
        assert_eq!(ps.len(), 100);
        let mut dedup = ps.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 100);
        assert!(ps.iter().all(|&(i, j)| i < j && j < 30));
    }
}
