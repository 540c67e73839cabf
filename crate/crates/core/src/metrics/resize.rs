use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Source sample positions and weights for one axis under half-pixel
/// alignment: output `o` reads input coordinate `(o + 0.5)·in/out − 0.5`,
/// clamped to the image.
fn taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

// a + t·(b − a), kept inside [min(a, b), max(a, b)] despite rounding.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (a + t * (b - a)).clamp(a.min(b), a.max(b))
}

fn resize_plane(src: &[f32], h: usize, w: usize, oh: usize, ow: usize, out: &mut Vec<f32>) {
    let tx = taps(w, ow);
    let ty = taps(h, oh);
    let mut rows = vec![0f64; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (x, &(lo, hi, t)) in tx.iter().enumerate() {
            rows[y * ow + x] = lerp(row[lo] as f64, row[hi] as f64, t);
        }
    }
    for &(lo, hi, t) in &ty {
        for x in 0..ow {
            out.push(lerp(rows[lo * ow + x], rows[hi * ow + x], t) as f32);
        }
    }
}

/// Separable bilinear resize of a `[C, H, W]` image with half-pixel
/// centers and edge clamping. A same-size target returns an exact copy.
pub fn bilinear_resize(image: &Tensor<f32>, target: (usize, usize)) -> Result<Tensor<f32>> {
    let &[c, h, w] = image.shape() else {
        return Err(Error::shape(format!("expected a [C, H, W] image, got {:?}", image.shape())));
    };
    let (oh, ow) = target;
    if oh == 0 || ow == 0 {
        return Err(Error::invalid(format!("resize target {oh}x{ow} has a zero side")));
    }
    if (oh, ow) == (h, w) {
        return Ok(image.detach());
    }
    let mut out = Vec::with_capacity(c * oh * ow);
    for plane in image.data().chunks(h * w) {
        resize_plane(plane, h, w, oh, ow, &mut out);
    }
    Tensor::new(&[c, oh, ow], out)
}

/// Bilinear down to `low_res × low_res`, then back up to
/// `final_res × final_res`.
pub fn reduce_then_restore(image: &Tensor<f32>, low_res: usize, final_res: usize) -> Result<Tensor<f32>> {
    if low_res == 0 || low_res > final_res {
        return Err(Error::invalid(format!(
            "need 1 <= low_res <= final_res, got {low_res} and {final_res}"
        )));
    }
    let low = bilinear_resize(image, (low_res, low_res))?;
    bilinear_resize(&low, (final_res, final_res))
}

/// [`reduce_then_restore`] applied to every image of an `[N, C, H, W]`
/// batch, restoring to the batch's own (square) side.
pub fn resize_batch(images: &Tensor<f32>, low_res: usize) -> Result<Tensor<f32>> {
    let &[n, c, h, w] = images.shape() else {
        return Err(Error::shape(format!("expected [N, C, H, W], got {:?}", images.shape())));
    };
    if h != w {
        return Err(Error::shape(format!("images must be square, got {h}x{w}")));
    }
    if low_res == h {
        return Ok(images.detach());
    }
    let size = c * h * w;
    let mut data = Vec::with_capacity(n * size);
    for chunk in images.data().chunks(size) {
        let img = Tensor::new(&[c, h, w], chunk.to_vec())?;
        data.extend_from_slice(reduce_then_restore(&img, low_res, h)?.data());
    }
    Tensor::new(&[n, c, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_at_identity_hit_pixel_centers() {
        for (i, &(lo, _, t)) in taps(7, 7).iter().enumerate() {
            assert_eq!((lo, t), (i, 0.0));
        }
    }

    #[test]
    fn halving_averages_neighbours() {
        let img = Tensor::new(&[1, 1, 4], vec![0.0f32, 1.0, 2.0, 3.0]).unwrap();
        let out = bilinear_resize(&img, (1, 2)).unwrap();
        assert_eq!(out.data(), &[0.5, 2.5]);
    }

    #[test]
    fn zero_target_rejected() {
        let img = Tensor::new(&[1, 2, 2], vec![0.0f32; 4]).unwrap();
        assert!(bilinear_resize(&img, (0, 2)).is_err());
        assert!(reduce_then_restore(&img, 3, 2).is_err());
    }
}
