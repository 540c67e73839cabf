use crate::acgan::{sample_latent, AcGan};
use crate::error::{Error, Result};
use crate::metrics::diversity::mean_pairwise_ms_ssim;
use crate::metrics::ssim::SsimParams;
use crate::nn::{Mode, RngStream, Tensor};

/// Minimum sustained rise in mean MS-SSIM that counts as collapse.
pub const COLLAPSE_RISE: f64 = 0.2;

// Dips smaller than this do not break a rising run.
const RUN_TOLERANCE: f64 = 0.01;

/// Anything that can draw `n` images of one class.
pub trait ClassSampler {
    fn sample_class(&self, class: usize, n: usize, rng: &mut RngStream) -> Result<Tensor<f32>>;
}

impl ClassSampler for AcGan {
    fn sample_class(&self, class: usize, n: usize, rng: &mut RngStream) -> Result<Tensor<f32>> {
        let c = &self.config;
        let labels = vec![class; n];
        let latent = sample_latent(n, c.num_classes, c.z_dim, Some(&labels), rng)?;
        self.sample(&latent, Mode::Eval)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseTrajectory {
    pub class: usize,
    /// Mean pairwise MS-SSIM per checkpoint, in series order.
    pub scores: Vec<f64>,
    /// Checkpoint index where collapse is suspected to begin.
    pub collapse_at: Option<usize>,
}

/// Onset of a collapse in a series of mean MS-SSIM values.
///
/// Looks at the run of non-decreasing values (dips up to 0.01 allowed)
/// that ends the series. If that run climbs by at least `min_rise`, the
/// onset is the point reached by the run's steepest single step (the
/// earliest on ties). A collapse the series later recovers from is not
/// reported.
pub fn detect_collapse(scores: &[f64], min_rise: f64) -> Option<usize> {
    if scores.len() < 2 {
        return None;
    }
    let mut start = scores.len() - 1;
    while start > 0 && scores[start - 1] <= scores[start] + RUN_TOLERANCE {
        start -= 1;
    }
    if scores[scores.len() - 1] - scores[start] < min_rise {
        return None;
    }
    let mut onset = start + 1;
    for i in start + 2..scores.len() {
        if scores[i] - scores[i - 1] > scores[onset] - scores[onset - 1] {
            onset = i;
        }
    }
    Some(onset)
}

/// Mean intra-class MS-SSIM of `class` for each model in `series`. Every
/// checkpoint sees the same latent draws and the same pairs.
pub fn collapse_trajectory<S: ClassSampler>(
    series: &[S],
    class: usize,
    n_samples: usize,
    pairs: usize,
    params: &SsimParams,
    rng: &RngStream,
) -> Result<CollapseTrajectory> {
    if series.is_empty() {
        return Err(Error::invalid("collapse trajectory of an empty checkpoint series"));
    }
    let scores = series
        .iter()
        .map(|model| {
            let images = model.sample_class(class, n_samples, &mut rng.split("samples"))?;
            mean_pairwise_ms_ssim(&images, pairs, params, &mut rng.split("pairs"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CollapseTrajectory {
        class,
        collapse_at: detect_collapse(&scores, COLLAPSE_RISE),
        scores,
    })
}
