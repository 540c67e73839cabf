use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Per-scale exponents of the five-scale MS-SSIM.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Window and stabilizer settings for SSIM.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimParams {
    /// Side of the square Gaussian window.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the pixel values.
    pub dynamic_range: f64,
    /// Exponent per scale, finest first. Only the first `depth` entries are
    /// used and they are renormalized to sum to 1.
    pub weights: Vec<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
            weights: MS_SSIM_WEIGHTS.to_vec(),
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalized 1-D Gaussian; its outer product is the 2-D window.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window as f64 - 1.0) / 2.0;
        let k: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.into_iter().map(|v| v / s).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || !(self.sigma > 0.0) || self.weights.is_empty() {
            return Err(Error::invalid("SSIM needs a window, a positive sigma and weights"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("SSIM scale weights must be non-negative with a positive sum"));
        }
        Ok(())
    }
}

/// Single-channel image in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Luma {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Luma {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height * width != data.len() || data.is_empty() {
            return Err(Error::shape(format!("{height}x{width} luma image with {} values", data.len())));
        }
        Ok(Self { height, width, data })
    }

    /// 2×2 mean pooling; an odd trailing row or column is dropped.
    fn halve(&self) -> Self {
        let (h, w) = (self.height / 2, self.width / 2);
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let at = |dy: usize, dx: usize| self.data[(2 * y + dy) * self.width + 2 * x + dx];
                data.push((at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1)) / 4.0);
            }
        }
        Self { height: h, width: w, data }
    }
}

/// Maps a `[C, H, W]` image in `[−1, 1]` to `[0, 255]` and, for three
/// channels, to luma `0.299 R + 0.587 G + 0.114 B`. One channel passes
/// through.
pub fn to_luma(image: &Tensor<f32>) -> Result<Luma> {
    let &[c, h, w] = image.shape() else {
        return Err(Error::shape(format!("expected a [C, H, W] image, got {:?}", image.shape())));
    };
    let px = |v: f32| (v as f64 + 1.0) * 127.5;
    let d = image.data();
    let data = match c {
        1 => d.iter().map(|&v| px(v)).collect(),
        3 => {
            let n = h * w;
            (0..n)
                .map(|i| 0.299 * px(d[i]) + 0.587 * px(d[n + i]) + 0.114 * px(d[2 * n + i]))
                .collect()
        }
        _ => return Err(Error::shape(format!("luma needs 1 or 3 channels, got {c}"))),
    };
    Luma::new(h, w, data)
}

// Valid-mode separable filtering of one plane.
fn filter(img: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * img[y * w + x + i];
            }
            rows[y * ow + x] = s;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * rows[(y + i) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term over valid windows.
fn ssim_cs(x: &Luma, y: &Luma, p: &SsimParams) -> Result<(f64, f64)> {
    if (x.height, x.width) != (y.height, y.width) {
        return Err(Error::shape(format!(
            "SSIM of {}x{} and {}x{} images",
            x.height, x.width, y.height, y.width
        )));
    }
    if x.height < p.window || x.width < p.window {
        return Err(Error::invalid(format!(
            "{}x{} image is smaller than the {} pixel window",
            x.height, x.width, p.window
        )));
    }
    let (h, w) = (x.height, x.width);
    let k = p.kernel();
    let xx: Vec<f64> = x.data.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.data.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect();
    let mx = filter(&x.data, h, w, &k);
    let my = filter(&y.data, h, w, &k);
    let sxx = filter(&xx, h, w, &k);
    let syy = filter(&yy, h, w, &k);
    let sxy = filter(&xy, h, w, &k);
    let (c1, c2) = (p.c1(), p.c2());
    let (mut s_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mx.len() {
        let (a, b) = (mx[i], my[i]);
        let vx = sxx[i] - a * a;
        let vy = syy[i] - b * b;
        let cov = sxy[i] - a * b;
        let cs = (2.0 * cov + c2) / (vx + vy + c2);
        s_sum += (2.0 * a * b + c1) / (a * a + b * b + c1) * cs;
        cs_sum += cs;
    }
    let n = mx.len() as f64;
    Ok((s_sum / n, cs_sum / n))
}

/// Mean local SSIM over every valid window position.
pub fn ssim(x: &Luma, y: &Luma, params: &SsimParams) -> Result<f64> {
    params.validate()?;
    Ok(ssim_cs(x, y, params)?.0)
}

/// Number of scales used for an `h × w` image: the most (up to the number
/// of weights) for which the coarsest level still holds a whole window.
pub fn ms_ssim_depth(height: usize, width: usize, params: &SsimParams) -> Result<usize> {
    let side = height.min(width);
    let depth = (1..=params.weights.len())
        .take_while(|&s| side >= params.window << (s - 1))
        .last();
    depth.ok_or_else(|| {
        Error::invalid(format!(
            "{height}x{width} image is smaller than the {} pixel window",
            params.window
        ))
    })
}

/// Multi-scale SSIM in `[0, 1]`: contrast-structure terms at the finer
/// scales and full SSIM at the coarsest, each raised to its renormalized
/// weight. Negative per-scale terms are clamped to 0.
pub fn ms_ssim(x: &Luma, y: &Luma, params: &SsimParams) -> Result<f64> {
    params.validate()?;
    if (x.height, x.width) != (y.height, y.width) {
        return Err(Error::shape("MS-SSIM of differently sized images"));
    }
    let depth = ms_ssim_depth(x.height, x.width, params)?;
    let total: f64 = params.weights[..depth].iter().sum();
    let (mut a, mut b) = (x.clone(), y.clone());
    let mut score = 1.0;
    for s in 0..depth {
        let (full, cs) = ssim_cs(&a, &b, params)?;
        let term = if s + 1 == depth { full } else { cs };
        score *= term.max(0.0).powf(params.weights[s] / total);
        if s + 1 < depth {
            a = a.halve();
            b = b.halve();
        }
    }
    Ok(score.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_sums_to_one_and_is_symmetric() {
        let k = SsimParams::default().kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[10]);
        assert!(k[5] > k[4]);
    }

    #[test]
    fn depth_at_desk_resolutions() {
        let p = SsimParams::default();
        assert_eq!(ms_ssim_depth(32, 32, &p).unwrap(), 2);
        assert_eq!(ms_ssim_depth(176, 200, &p).unwrap(), 5);
        assert_eq!(ms_ssim_depth(11, 11, &p).unwrap(), 1);
        assert!(ms_ssim_depth(10, 32, &p).is_err());
    }

    #[test]
    fn luma_weights() {
        let img = Tensor::new(&[3, 1, 1], vec![1.0f32, -1.0, -1.0]).unwrap();
        assert!((to_luma(&img).unwrap().data[0] - 0.299 * 255.0).abs() < 1e-9);
    }
}
