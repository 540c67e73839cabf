use acgan_core::classifier::{accuracy_from_dist, argmax_rows, AccuracyReport, Classifier, ClassifierConfig};
use acgan_core::data::{generate_shapes, ShapesConfig};
use acgan_core::metrics::*;
use acgan_core::nn::{RngStream, Tensor};
use acgan_core::Error;

fn random_image(c: usize, h: usize, w: usize, rng: &mut RngStream) -> Tensor<f32> {
    let data = (0..c * h * w).map(|_| (rng.uniform() * 2.0 - 1.0) as f32).collect();
    Tensor::new(&[c, h, w], data).unwrap()
}

fn random_luma(h: usize, w: usize, rng: &mut RngStream) -> Luma {
    Luma::new(h, w, (0..h * w).map(|_| rng.uniform() * 255.0).collect()).unwrap()
}

// Smooth random texture: a few random sinusoids plus a little pixel noise.
fn textured(h: usize, w: usize, rng: &mut RngStream) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.uniform() * 0.8, rng.uniform() * 0.8, rng.uniform() * 6.28))
        .collect();
    (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as f64, (i % w) as f64);
            let s: f64 = waves.iter().map(|(a, b, p)| (a * y + b * x + p).sin()).sum();
            (s / 4.0 * 0.8 + 0.1 * (rng.uniform() - 0.5)).clamp(-1.0, 1.0)
        })
        .collect()
}

fn channel_variances(t: &Tensor<f32>) -> Vec<f64> {
    let &[_, h, w] = t.shape() else { panic!() };
    t.data()
        .chunks(h * w)
        .map(|p| {
            let m = p.iter().map(|&v| v as f64).sum::<f64>() / p.len() as f64;
            p.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / p.len() as f64
        })
        .collect()
}

// ---------------------------------------------------------------- resize

#[test]
fn resize_constant_image_stays_constant() {
    let img = Tensor::full(&[3, 7, 5], 0.3f32);
    for target in [(1, 1), (3, 9), (14, 10), (7, 5)] {
        let out = bilinear_resize(&img, target).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.3));
    }
}

#[test]
fn resize_identity_is_bit_identical() {
    let img = random_image(3, 9, 6, &mut RngStream::new(1));
    assert_eq!(bilinear_resize(&img, (9, 6)).unwrap().data(), img.data());
    assert_eq!(reduce_then_restore(&random_image(1, 8, 8, &mut RngStream::new(2)), 8, 8).unwrap().shape(), &[1, 8, 8]);
    let sq = random_image(2, 8, 8, &mut RngStream::new(3));
    assert_eq!(reduce_then_restore(&sq, 8, 8).unwrap().data(), sq.data());
}

#[test]
fn upsample_matches_per_pixel_oracle() {
    let src = [0.1f64, -0.7, 0.9, 0.25];
    let img = Tensor::new(&[1, 2, 2], src.iter().map(|&v| v as f32).collect()).unwrap();
    let out = bilinear_resize(&img, (4, 4)).unwrap();
    for oy in 0..4 {
        for ox in 0..4 {
            let sy = ((oy as f64 + 0.5) * 0.5 - 0.5).clamp(0.0, 1.0);
            let sx = ((ox as f64 + 0.5) * 0.5 - 0.5).clamp(0.0, 1.0);
            let v = src[0] * (1.0 - sy) * (1.0 - sx)
                + src[1] * (1.0 - sy) * sx
                + src[2] * sy * (1.0 - sx)
                + src[3] * sy * sx;
            assert!((out.data()[oy * 4 + ox] as f64 - v).abs() < 1e-6, "({oy},{ox})");
        }
    }
}

#[test]
fn reduce_then_restore_smooths_checkerboard() {
    let n = 32;
    let data = (0..n * n).map(|i| if (i / n + i % n) % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let img = Tensor::new(&[1, n, n], data).unwrap();
    let out = reduce_then_restore(&img, n / 4, n).unwrap();
    assert!(channel_variances(&out)[0] < channel_variances(&img)[0]);
}

#[test]
fn reduce_then_restore_never_raises_variance_on_random_images() {
    let mut rng = RngStream::new(4);
    for trial in 0..50 {
        let img = random_image(3, 32, 32, &mut rng);
        for low in [4, 8, 16, 31] {
            let out = reduce_then_restore(&img, low, 32).unwrap();
            for (a, b) in channel_variances(&out).iter().zip(channel_variances(&img)) {
                assert!(*a <= b, "trial {trial} low {low}: {a} > {b}");
            }
        }
    }
}

#[test]
fn resize_rejects_zero_sizes() {
    let img = random_image(1, 4, 4, &mut RngStream::new(5));
    assert!(matches!(bilinear_resize(&img, (4, 0)), Err(Error::InvalidArgument(_))));
    assert!(reduce_then_restore(&img, 0, 4).is_err());
    assert!(reduce_then_restore(&img, 5, 4).is_err());
}

// ------------------------------------------------------------------ SSIM

fn gauss2d(p: &SsimParams) -> Vec<f64> {
    let r = (p.window as f64 - 1.0) / 2.0;
    let mut w = Vec::new();
    for i in 0..p.window {
        for j in 0..p.window {
            let d2 = (i as f64 - r).powi(2) + (j as f64 - r).powi(2);
            w.push((-d2 / (2.0 * p.sigma * p.sigma)).exp());
        }
    }
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

// Direct windowed statistics: (mean ssim, mean cs).
fn ssim_oracle(x: &Luma, y: &Luma, p: &SsimParams) -> (f64, f64) {
    let win = gauss2d(p);
    let n = p.window;
    let (c1, c2) = ((p.k1 * p.dynamic_range).powi(2), (p.k2 * p.dynamic_range).powi(2));
    let (mut s, mut cs, mut count) = (0.0, 0.0, 0.0);
    for top in 0..=x.height - n {
        for left in 0..=x.width - n {
            let at = |img: &Luma, i: usize, j: usize| img.data[(top + i) * img.width + left + j];
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    mx += win[i * n + j] * at(x, i, j);
                    my += win[i * n + j] * at(y, i, j);
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let (dx, dy) = (at(x, i, j) - mx, at(y, i, j) - my);
                    vx += win[i * n + j] * dx * dx;
                    vy += win[i * n + j] * dy * dy;
                    cov += win[i * n + j] * dx * dy;
                }
            }
            let c = (2.0 * cov + c2) / (vx + vy + c2);
            s += (2.0 * mx * my + c1) / (mx * mx + my * my + c1) * c;
            cs += c;
            count += 1.0;
        }
    }
    (s / count, cs / count)
}

fn pool(img: &Luma) -> Luma {
    let (h, w) = (img.height / 2, img.width / 2);
    let mut d = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                s += img.data[(2 * y + dy) * img.width + 2 * x + dx];
            }
            d.push(s * 0.25);
        }
    }
    Luma::new(h, w, d).unwrap()
}

fn ms_ssim_oracle(x: &Luma, y: &Luma, p: &SsimParams, depth: usize) -> f64 {
    let total: f64 = p.weights[..depth].iter().sum();
    let (mut a, mut b) = (x.clone(), y.clone());
    let mut out = 1.0;
    for s in 0..depth {
        let (full, cs) = ssim_oracle(&a, &b, p);
        let term = if s == depth - 1 { full } else { cs };
        out *= term.max(0.0).powf(p.weights[s] / total);
        a = pool(&a);
        b = pool(&b);
    }
    out.clamp(0.0, 1.0)
}

fn correlated_pair(h: usize, w: usize, rng: &mut RngStream) -> (Luma, Luma) {
    let base = textured(h, w, rng);
    let x: Vec<f64> = base.iter().map(|v| (v + 1.0) * 127.5).collect();
    let y: Vec<f64> = x.iter().map(|v| (v + 40.0 * (rng.uniform() - 0.5)).clamp(0.0, 255.0)).collect();
    (Luma::new(h, w, x).unwrap(), Luma::new(h, w, y).unwrap())
}

#[test]
fn ssim_reflexive_and_symmetric() {
    let p = SsimParams::default();
    let mut rng = RngStream::new(6);
    for _ in 0..5 {
        let x = random_luma(20, 17, &mut rng);
        let y = random_luma(20, 17, &mut rng);
        assert!((ssim(&x, &x, &p).unwrap() - 1.0).abs() <= 1e-9);
        assert_eq!(ssim(&x, &y, &p).unwrap(), ssim(&y, &x, &p).unwrap());
        assert!((ms_ssim(&x, &x, &p).unwrap() - 1.0).abs() <= 1e-9);
        assert_eq!(ms_ssim(&x, &y, &p).unwrap(), ms_ssim(&y, &x, &p).unwrap());
    }
}

#[test]
fn ssim_matches_direct_oracle() {
    let p = SsimParams::default();
    let mut rng = RngStream::new(7);
    for (h, w) in [(11, 11), (16, 23), (32, 32)] {
        let (x, y) = correlated_pair(h, w, &mut rng);
        let got = ssim(&x, &y, &p).unwrap();
        let want = ssim_oracle(&x, &y, &p).0;
        assert!((got - want).abs() < 1e-8, "{h}x{w}: {got} vs {want}");
        let (u, v) = (random_luma(h, w, &mut rng), random_luma(h, w, &mut rng));
        assert!((ssim(&u, &v, &p).unwrap() - ssim_oracle(&u, &v, &p).0).abs() < 1e-8);
    }
}

#[test]
fn ms_ssim_matches_direct_oracle() {
    let p = SsimParams::default();
    let mut rng = RngStream::new(8);
    for (side, depth) in [(32, 2), (48, 3), (90, 4)] {
        assert_eq!(ms_ssim_depth(side, side, &p).unwrap(), depth);
        let (x, y) = correlated_pair(side, side, &mut rng);
        let got = ms_ssim(&x, &y, &p).unwrap();
        let want = ms_ssim_oracle(&x, &y, &p, depth);
        assert!((got - want).abs() < 1e-8, "{side}: {got} vs {want}");
        assert!(got > 0.0 && got < 1.0);
    }
}

#[test]
fn ms_ssim_decreases_with_noise() {
    let p = SsimParams::default();
    let mut rng = RngStream::new(9);
    let mut means = [0.0; 3];
    for _ in 0..100 {
        let base = textured(32, 32, &mut rng);
        let clean = Luma::new(32, 32, base.iter().map(|v| (v + 1.0) * 127.5).collect()).unwrap();
        for (m, sigma) in means.iter_mut().zip([0.05, 0.1, 0.2]) {
            let noisy: Vec<f64> = base
                .iter()
                .map(|v| ((v + sigma * rng.normal()).clamp(-1.0, 1.0) + 1.0) * 127.5)
                .collect();
            *m += ms_ssim(&clean, &Luma::new(32, 32, noisy).unwrap(), &p).unwrap() / 100.0;
        }
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn ms_ssim_is_clamped_to_unit_interval() {
    let p = SsimParams::default();
    let mut rng = RngStream::new(10);
    let x = random_luma(32, 32, &mut rng);
    let inv = Luma::new(32, 32, x.data.iter().map(|v| 255.0 - v).collect()).unwrap();
    let s = ms_ssim(&x, &inv, &p).unwrap();
    assert!((0.0..=1.0).contains(&s));
    assert_eq!(s, 0.0);
}

#[test]
fn ssim_errors() {
    let p = SsimParams::default();
    let mut rng = RngStream::new(11);
    let a = random_luma(12, 12, &mut rng);
    assert!(matches!(ssim(&a, &random_luma(12, 13, &mut rng), &p), Err(Error::Shape(_))));
    let small = random_luma(10, 10, &mut rng);
    assert!(ssim(&small, &small, &p).is_err());
    assert!(ms_ssim(&small, &small, &p).is_err());
}

// -------------------------------------------------------------- diversity

fn batch(images: &[Tensor<f32>]) -> Tensor<f32> {
    let parts: Vec<Tensor<f32>> = images
        .iter()
        .map(|t| {
            let mut s = vec![1];
            s.extend_from_slice(t.shape());
            t.clone().reshape(&s).unwrap()
        })
        .collect();
    Tensor::stack_outer(&parts).unwrap()
}

#[test]
fn identical_class_scores_one() {
    let mut rng = RngStream::new(12);
    let img = random_image(3, 16, 16, &mut rng);
    let same = batch(&vec![img; 6]);
    let r = intra_class_diversity(&[same], 10, &SsimParams::default(), &rng).unwrap();
    assert_eq!(r.rows[0].mean, 1.0);
    assert_eq!(r.rows[0].std, 0.0);
    assert!(r.rows[0].flagged);
    assert_eq!(r.threshold, 0.25);
}

#[test]
fn zero_jitter_shapes_have_unit_diversity() {
    let ds = generate_shapes(&ShapesConfig::new(4, 32, 5, 3).without_jitter()).unwrap();
    let by_class: Vec<Tensor<f32>> = (0..4).map(|c| ds.images(&ds.indices_of_class(c))).collect();
    let r = intra_class_diversity(&by_class, 100, &SsimParams::default(), &RngStream::new(0)).unwrap();
    assert_eq!(r.scales, 2);
    for row in &r.rows {
        assert_eq!(row.mean, 1.0, "class {}", row.class);
        assert_eq!(row.pairs, 10);
    }
}

#[test]
fn three_images_use_every_pair() {
    let p = SsimParams::default();
    let mut rng = RngStream::new(13);
    let imgs: Vec<Tensor<f32>> = (0..3).map(|_| random_image(1, 16, 16, &mut rng)).collect();
    let r = intra_class_diversity(&[batch(&imgs)], 3, &p, &rng).unwrap();
    let lumas: Vec<Luma> = imgs.iter().map(|t| to_luma(t).unwrap()).collect();
    let scores: Vec<f64> = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| ms_ssim(&lumas[i], &lumas[j], &p).unwrap())
        .collect();
    let mean = scores.iter().sum::<f64>() / 3.0;
    let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert_eq!(r.rows[0].pairs, 3);
    assert!((r.rows[0].mean - mean).abs() < 1e-15);
    assert!((r.rows[0].std - std).abs() < 1e-15);
}

#[test]
fn diversity_needs_two_images() {
    let img = random_image(3, 16, 16, &mut RngStream::new(14));
    let one = batch(&[img]);
    assert!(intra_class_diversity(&[one], 5, &SsimParams::default(), &RngStream::new(0)).is_err());
}

// --------------------------------------------------------------- collapse

struct Constant(Tensor<f32>);

impl ClassSampler for Constant {
    fn sample_class(&self, _: usize, n: usize, _: &mut RngStream) -> acgan_core::Result<Tensor<f32>> {
        Ok(batch(&vec![self.0.clone(); n]))
    }
}

struct Jittered(u64);

impl ClassSampler for Jittered {
    fn sample_class(&self, class: usize, n: usize, rng: &mut RngStream) -> acgan_core::Result<Tensor<f32>> {
        let mut cfg = ShapesConfig::new(4, 32, n, rng.below(1 << 30) as u64 ^ self.0);
        cfg.num_classes = 4;
        let ds = generate_shapes(&cfg)?;
        Ok(ds.images(&ds.indices_of_class(class)))
    }
}

enum Fixture {
    Diverse(Jittered),
    Collapsed(Constant),
}

impl ClassSampler for Fixture {
    fn sample_class(&self, class: usize, n: usize, rng: &mut RngStream) -> acgan_core::Result<Tensor<f32>> {
        match self {
            Fixture::Diverse(s) => s.sample_class(class, n, rng),
            Fixture::Collapsed(s) => s.sample_class(class, n, rng),
        }
    }
}

#[test]
fn constant_generator_is_pinned_at_one() {
    let img = random_image(3, 32, 32, &mut RngStream::new(15));
    let series = vec![Constant(img.clone()), Constant(img)];
    let t = collapse_trajectory(&series, 0, 6, 10, &SsimParams::default(), &RngStream::new(1)).unwrap();
    assert_eq!(t.scores, vec![1.0, 1.0]);
    assert_eq!(t.collapse_at, None);
}

#[test]
fn single_checkpoint_is_never_flagged() {
    let t = collapse_trajectory(&[Jittered(1)], 2, 8, 10, &SsimParams::default(), &RngStream::new(2)).unwrap();
    assert_eq!(t.scores.len(), 1);
    assert_eq!(t.collapse_at, None);
    let empty: Vec<Jittered> = Vec::new();
    assert!(collapse_trajectory(&empty, 0, 8, 10, &SsimParams::default(), &RngStream::new(2)).is_err());
}

#[test]
fn injected_collapse_is_located() {
    for f in 0..4u64 {
        let switch = 2 + f as usize;
        let mut rng = RngStream::new(100 + f);
        let constant = random_image(3, 32, 32, &mut rng);
        let series: Vec<Fixture> = (0..8)
            .map(|i| {
                if i < switch {
                    Fixture::Diverse(Jittered(f * 31 + i as u64))
                } else {
                    Fixture::Collapsed(Constant(constant.clone()))
                }
            })
            .collect();
        let t = collapse_trajectory(&series, (f % 4) as usize, 16, 30, &SsimParams::default(), &rng).unwrap();
        assert_eq!(t.collapse_at, Some(switch), "fixture {f}: {:?}", t.scores);
    }
}

// ------------------------------------------------------------------ curve

fn small_classifier() -> Classifier {
    Classifier::new(ClassifierConfig {
        num_classes: 4,
        width_divisor: 16,
        batch_size: 8,
        iterations: 0,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn curve_at_native_equals_plain_accuracy() {
    let clf = small_classifier();
    let ds = generate_shapes(&ShapesConfig::new(4, 32, 10, 4)).unwrap();
    let images = ds.all_images();
    let labels = ds.labels_usize();
    let plain = clf.top1_accuracy(&images, &labels).unwrap();
    let c = discriminability_curve(&images, &labels, &clf, &[32], 4, &RngStream::new(0)).unwrap();
    assert_eq!(c.points.len(), 1);
    assert_eq!(c.points[0].overall, plain.overall);
    assert_eq!(c.points[0].per_class, plain.per_class);

    let own = argmax_rows(&clf.predict_dist(&images).unwrap()).unwrap();
    let perfect = discriminability_curve(&images, &own, &clf, &[8, 32], 5, &RngStream::new(0)).unwrap();
    let top = perfect.at(32).unwrap();
    assert_eq!((top.overall, top.accuracy_mean, top.accuracy_std), (1.0, 1.0, 0.0));
}

#[test]
fn curve_is_independent_of_resolution_order() {
    let clf = small_classifier();
    let ds = generate_shapes(&ShapesConfig::new(4, 32, 6, 5)).unwrap();
    let (images, labels) = (ds.all_images(), ds.labels_usize());
    let a = discriminability_curve(&images, &labels, &clf, &[4, 16, 32], 3, &RngStream::new(9)).unwrap();
    let b = discriminability_curve(&images, &labels, &clf, &[32, 4, 16], 3, &RngStream::new(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points.iter().map(|p| p.resolution).collect::<Vec<_>>(), vec![4, 16, 32]);
    assert!(discriminability_curve(&images, &labels, &clf, &[64], 3, &RngStream::new(9)).is_err());
    assert!(discriminability_curve(&images, &labels, &clf, &[8, 8], 3, &RngStream::new(9)).is_err());
}

// -------------------------------------------------------- inception score

fn is_oracle(rows: &[Vec<f64>]) -> f64 {
    let k = rows[0].len();
    let n = rows.len() as f64;
    let mut py = vec![0.0; k];
    for r in rows {
        for j in 0..k {
            py[j] += r[j] / n;
        }
    }
    let mut total = 0.0;
    for r in rows {
        let mut kl = 0.0;
        for j in 0..k {
            if r[j] > 0.0 {
                kl += r[j] * (r[j] / py[j]).ln();
            }
        }
        total += kl;
    }
    (total / n).exp()
}

#[test]
fn inception_score_extremes() {
    let k = 10;
    let mut onehot = vec![0.0f64; 100 * k];
    for i in 0..100 {
        onehot[i * k + i % k] = 1.0;
    }
    let d = Tensor::new(&[100, k], onehot).unwrap();
    let r = inception_score(&d, 1, &mut RngStream::new(0)).unwrap();
    assert!((r.mean - 10.0).abs() < 1e-6);

    let row = [0.1f64, 0.3, 0.6];
    let same = Tensor::new(&[20, 3], row.iter().cycle().take(60).cloned().collect()).unwrap();
    let r = inception_score(&same, 4, &mut RngStream::new(1)).unwrap();
    assert!(r.scores.iter().all(|&s| s == 1.0));
    assert_eq!(r.std, 0.0);
}

#[test]
fn inception_score_matches_double_loop_oracle() {
    let mut rng = RngStream::new(16);
    let (n, k) = (60, 7);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.uniform().powi(3)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let d = Tensor::new(&[n, k], rows.concat()).unwrap();
    let one = inception_score(&d, 1, &mut RngStream::new(2)).unwrap();
    assert!((one.mean - is_oracle(&rows)).abs() < 1e-8);
    assert!(one.mean >= 1.0 && one.mean <= k as f64);

    let mut reversed = rows.clone();
    reversed.reverse();
    let d2 = Tensor::new(&[n, k], reversed.concat()).unwrap();
    assert!((inception_score(&d2, 1, &mut RngStream::new(3)).unwrap().mean - one.mean).abs() < 1e-12);

    let grouped = inception_score(&d, 7, &mut RngStream::new(4)).unwrap();
    assert_eq!((grouped.groups, grouped.samples, grouped.dropped), (7, 56, 4));
    assert!(grouped.scores.iter().all(|&s| (1.0..=k as f64).contains(&s)));
}

#[test]
fn inception_score_rejects_bad_rows() {
    let d = Tensor::new(&[2, 2], vec![0.5f64, 0.6, 0.5, 0.5]).unwrap();
    assert!(inception_score(&d, 1, &mut RngStream::new(0)).is_err());
    let ok = Tensor::new(&[2, 2], vec![0.5f64, 0.5, 0.5, 0.5]).unwrap();
    assert!(inception_score(&ok, 3, &mut RngStream::new(0)).is_err());
}

// -------------------------------------------------------- nearest neighbour

fn nn_scan(samples: &Tensor<f32>, train: &Tensor<f32>) -> Vec<(usize, f64)> {
    let size: usize = samples.shape()[1..].iter().product();
    let t: Vec<&[f32]> = train.data().chunks(size).collect();
    samples
        .data()
        .chunks(size)
        .map(|x| {
            let dists: Vec<f64> = t
                .iter()
                .map(|y| x.iter().zip(y.iter()).fold(0.0, |acc, (a, b)| acc + (*a as f64 - *b as f64).abs()))
                .collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            (dists.iter().position(|&d| d == min).unwrap(), min)
        })
        .collect()
}

#[test]
fn nearest_neighbor_finds_copies_and_prefers_low_index() {
    let mut rng = RngStream::new(17);
    let train = batch(&(0..5).map(|_| random_image(3, 4, 4, &mut rng)).collect::<Vec<_>>());
    let copy = train.select_outer(&[3]).unwrap();
    assert_eq!(nearest_neighbor_l1(&copy, &train).unwrap(), vec![(3, 0.0)]);

    let twins = Tensor::new(&[3, 1, 1, 2], vec![0.0f32, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
    let probe = Tensor::new(&[1, 1, 1, 2], vec![0.5f32, 0.5]).unwrap();
    assert_eq!(nearest_neighbor_l1(&probe, &twins).unwrap(), vec![(0, 1.0)]);
    let mid = Tensor::new(&[1, 1, 1, 2], vec![1.0f32, 1.0]).unwrap();
    assert_eq!(nearest_neighbor_l1(&mid, &twins).unwrap(), vec![(1, 0.0)]);
    assert!(nearest_neighbor_l1(&probe, &train).is_err());
}

#[test]
fn nearest_neighbor_matches_exhaustive_scan() {
    let mut rng = RngStream::new(18);
    for _ in 0..5 {
        let train = batch(&(0..10).map(|_| random_image(1, 10, 10, &mut rng)).collect::<Vec<_>>());
        let samples = batch(&(0..10).map(|_| random_image(1, 10, 10, &mut rng)).collect::<Vec<_>>());
        assert_eq!(nearest_neighbor_l1(&samples, &train).unwrap(), nn_scan(&samples, &train));
    }
}

// ------------------------------------------------------------------ joint

fn diversity_report(means: &[f64]) -> DiversityReport {
    DiversityReport {
        rows: means
            .iter()
            .enumerate()
            .map(|(class, &mean)| ClassDiversity {
                class,
                mean,
                std: 0.0,
                pairs: 100,
                flagged: mean >= DIVERSITY_CEILING,
            })
            .collect(),
        scales: 2,
        threshold: DIVERSITY_CEILING,
    }
}

fn accuracy_report(acc: &[f64]) -> AccuracyReport {
    let correct = acc.iter().map(|a| (a * 1000.0).round() as usize).collect();
    AccuracyReport::from_counts(correct, vec![1000; acc.len()])
}

#[test]
fn joint_constant_accuracy_is_degenerate() {
    let j = diversity_vs_discriminability(&diversity_report(&[0.1, 0.2, 0.3]), &accuracy_report(&[0.5; 3])).unwrap();
    assert!(j.degenerate);
    assert_eq!((j.pearson_r, j.r_squared), (0.0, 0.0));
}

#[test]
fn joint_anticorrelated_gives_minus_one() {
    let div = [0.05, 0.15, 0.3, 0.45];
    let acc: Vec<f64> = div.iter().map(|d| 0.9 - 2.0 * d).collect();
    let j = diversity_vs_discriminability(&diversity_report(&div), &accuracy_report(&acc)).unwrap();
    assert!((j.pearson_r + 1.0).abs() < 1e-9);
    assert!(!j.degenerate);
    assert_eq!(j.low_diversity_low_accuracy, Some(0.5));
    assert_eq!(j.high_diversity_high_accuracy, Some(1.0));
}

#[test]
fn joint_matches_covariance_oracle() {
    let mut rng = RngStream::new(19);
    let div: Vec<f64> = (0..12).map(|_| rng.uniform() * 0.5).collect();
    let acc: Vec<f64> = (0..12).map(|_| (rng.uniform() * 1000.0).round() / 1000.0).collect();
    let j = diversity_vs_discriminability(&diversity_report(&div), &accuracy_report(&acc)).unwrap();
    let n = 12.0;
    let (mx, my) = (div.iter().sum::<f64>() / n, acc.iter().sum::<f64>() / n);
    let cov: f64 = div.iter().zip(&acc).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
    let sx = (div.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (acc.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n).sqrt();
    assert!((j.pearson_r - cov / (sx * sy)).abs() < 1e-10);
    assert!((j.r_squared - j.pearson_r.powi(2)).abs() < 1e-15);
}

#[test]
fn joint_requires_same_classes() {
    let r = diversity_vs_discriminability(&diversity_report(&[0.1, 0.2]), &accuracy_report(&[0.5, 0.5, 0.5]));
    assert!(matches!(r, Err(Error::Mismatch(_))));
}

// -------------------------------------------------------------------- csv

#[test]
fn csv_headers_are_versioned() {
    let d = diversity_csv(&diversity_report(&[0.1, 0.3]), &[("seed", "4".into())]);
    let lines: Vec<&str> = d.lines().collect();
    assert_eq!(lines[0], "# schema=diversity/1 seed=4 scales=2");
    assert_eq!(lines[1], "class,mean_msssim,std_msssim,pairs,flag_ge_0.25");
    assert_eq!(lines[3], "1,0.30000000,0.00000000,100,1");
    let nn = nn_csv(&[(3, 0.0)], &[]);
    assert_eq!(nn, "# schema=nn/1\nsample_id,train_index,l1_distance\n0,3,0.00000000\n");
    let acc = accuracy_from_dist(&Tensor::new(&[1, 2], vec![0.2f32, 0.8]).unwrap(), &[1]).unwrap();
    assert_eq!(acc.overall, 1.0);
}
