//! Patch extraction for convolutions.
//!
//! Both `conv2d` and `transposed_conv2d` are expressed through one pair of
//! mutually adjoint maps: `im2col` gathers kernel-sized patches of an image
//! into columns, `col2im` scatter-adds columns back into an image. A
//! convolution is `kernel · im2col(x)`; a transposed convolution is
//! `col2im(kernelᵀ · x)` with the same geometry, which makes the two ops
//! exact adjoints of each other.

use crate::error::{Error, Result};
use crate::nn::element::Element;

/// Geometry of a strided, zero-padded 2-D correlation.
///
/// `(h, w)` is the image side (conv input, transposed-conv output) and
/// `(oh, ow)` the patch-grid side (conv output, transposed-conv input).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    /// Geometry of a forward convolution over an `h×w` image.
    pub fn forward(
        channels: usize,
        (h, w): (usize, usize),
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
        (ph, pw): (usize, usize),
    ) -> Result<Self> {
        if sh == 0 || sw == 0 || kh == 0 || kw == 0 {
            return Err(Error::invalid("stride and kernel must be positive"));
        }
        if h + 2 * ph < kh || w + 2 * pw < kw {
            return Err(Error::shape(format!(
                "kernel {kh}x{kw} larger than padded input {}x{}",
                h + 2 * ph,
                w + 2 * pw
            )));
        }
        Ok(Self {
            channels,
            h,
            w,
            kh,
            kw,
            sh,
            sw,
            ph,
            pw,
            oh: (h + 2 * ph - kh) / sh + 1,
            ow: (w + 2 * pw - kw) / sw + 1,
        })
    }

    /// Geometry of a transposed convolution taking an `h×w` input to
    /// `(h−1)·s − 2p + k + output_padding`.
    pub fn transposed(
        channels: usize,
        (h, w): (usize, usize),
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
        (ph, pw): (usize, usize),
        (oph, opw): (usize, usize),
    ) -> Result<Self> {
        if sh == 0 || sw == 0 || kh == 0 || kw == 0 {
            return Err(Error::invalid("stride and kernel must be positive"));
        }
        if oph >= sh || opw >= sw {
            return Err(Error::invalid("output padding must be smaller than stride"));
        }
        let out = |n: usize, s: usize, p: usize, k: usize, op: usize| -> Result<usize> {
            let size = ((n as isize - 1) * s as isize) - 2 * p as isize + k as isize + op as isize;
            if size <= 0 {
                Err(Error::shape(format!(
                    "transposed convolution output size {size} is not positive"
                )))
            } else {
                Ok(size as usize)
            }
        };
        let big_h = out(h, sh, ph, kh, oph)?;
        let big_w = out(w, sw, pw, kw, opw)?;
        let g = Self::forward(channels, (big_h, big_w), (kh, kw), (sh, sw), (ph, pw))?;
        debug_assert_eq!((g.oh, g.ow), (h, w));
        Ok(g)
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn grid_len(&self) -> usize {
        self.oh * self.ow
    }
}

/// `[N, C, H, W]` image batch → `[C·kh·kw, N·oh·ow]` patch matrix.
pub fn im2col<T: Element>(x: &[T], n: usize, g: &ConvGeom) -> Vec<T> {
    let grid = g.grid_len();
    let ncols = n * grid;
    let mut out = vec![T::zero(); g.patch_len() * ncols];
    for b in 0..n {
        for c in 0..g.channels {
            let plane = &x[(b * g.channels + c) * g.h * g.w..][..g.h * g.w];
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let row = (c * g.kh + ky) * g.kw + kx;
                    let dst = &mut out[row * ncols + b * grid..][..grid];
                    for oy in 0..g.oh {
                        let iy = (oy * g.sh + ky) as isize - g.ph as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * g.w..][..g.w];
                        let drow = &mut dst[oy * g.ow..][..g.ow];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            let ix = (ox * g.sw + kx) as isize - g.pw as isize;
                            if ix >= 0 && ix < g.w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatter-adds patch columns into an image batch.
pub fn col2im<T: Element>(cols: &[T], n: usize, g: &ConvGeom) -> Vec<T> {
    let grid = g.grid_len();
    let ncols = n * grid;
    let mut out = vec![T::zero(); n * g.channels * g.h * g.w];
    for b in 0..n {
        for c in 0..g.channels {
            let plane = &mut out[(b * g.channels + c) * g.h * g.w..][..g.h * g.w];
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let row = (c * g.kh + ky) * g.kw + kx;
                    let src = &cols[row * ncols + b * grid..][..grid];
                    for oy in 0..g.oh {
                        let iy = (oy * g.sh + ky) as isize - g.ph as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * g.w..][..g.w];
                        let srow = &src[oy * g.ow..][..g.ow];
                        for (ox, &s) in srow.iter().enumerate() {
                            let ix = (ox * g.sw + kx) as isize - g.pw as isize;
                            if ix >= 0 && ix < g.w as isize {
                                dst[ix as usize] = dst[ix as usize] + s;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `[N, C, S]` → `[C, N·S]`.
pub fn batch_to_channel_major<T: Element>(x: &[T], n: usize, c: usize, s: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            out[ch * n * s + b * s..][..s].copy_from_slice(&x[(b * c + ch) * s..][..s]);
        }
    }
    out
}

/// `[C, N·S]` → `[N, C, S]`.
pub fn channel_to_batch_major<T: Element>(x: &[T], n: usize, c: usize, s: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            out[(b * c + ch) * s..][..s].copy_from_slice(&x[ch * n * s + b * s..][..s]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_sizes() {
        let g = ConvGeom::forward(3, (32, 32), (3, 3), (2, 2), (1, 1)).unwrap();
        assert_eq!((g.oh, g.ow), (16, 16));
        let g = ConvGeom::forward(3, (16, 16), (3, 3), (1, 1), (1, 1)).unwrap();
        assert_eq!((g.oh, g.ow), (16, 16));
        let t = ConvGeom::transposed(8, (8, 8), (5, 5), (2, 2), (2, 2), (1, 1)).unwrap();
        assert_eq!((t.h, t.w), (16, 16));
        assert_eq!((t.oh, t.ow), (8, 8));
    }

    #[test]
    fn kernel_larger_than_input_rejected() {
        assert!(ConvGeom::forward(1, (2, 2), (3, 3), (1, 1), (0, 0)).is_err());
        assert!(ConvGeom::forward(1, (2, 2), (3, 3), (1, 1), (1, 1)).is_ok());
    }

    #[test]
    fn negative_transposed_size_rejected() {
        assert!(ConvGeom::transposed(1, (1, 1), (1, 1), (1, 1), (1, 1), (0, 0)).is_err());
    }

    #[test]
    fn im2col_col2im_adjoint() {
        let g = ConvGeom::forward(2, (5, 4), (3, 2), (2, 1), (1, 1)).unwrap();
        let n = 2;
        let x: Vec<f64> = (0..n * 2 * 5 * 4).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let cols = im2col(&x, n, &g);
        let y: Vec<f64> = (0..cols.len()).map(|i| ((i * 5) % 13) as f64 - 6.0).collect();
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let back = col2im(&y, n, &g);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn layout_round_trip() {
        let x: Vec<f32> = (0..24).map(|i| i as f32).collect();
        let cm = batch_to_channel_major(&x, 2, 3, 4);
        assert_eq!(channel_to_batch_major(&cm, 2, 3, 4), x);
    }
}
