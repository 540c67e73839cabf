use crate::data::{LabeledImageDataset, SplitTag};
use crate::error::{Error, Result};
use crate::nn::RngStream;

/// Silhouettes used as classes. Each is an indicator over local
/// coordinates in `[-1, 1]²` (y up), scaled to the sample's radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
    Plus,
    Ring,
    Diamond,
    HorizontalBar,
    VerticalBar,
    Saltire,
    HollowSquare,
    HalfDisk,
    Ellipse,
    InvertedTriangle,
    TwoDots,
    Corner,
    Checker,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 16] = [
        ShapeKind::Circle,
        ShapeKind::Square,
        ShapeKind::Triangle,
        ShapeKind::Plus,
        ShapeKind::Ring,
        ShapeKind::Diamond,
        ShapeKind::HorizontalBar,
        ShapeKind::VerticalBar,
        ShapeKind::Saltire,
        ShapeKind::HollowSquare,
        ShapeKind::HalfDisk,
        ShapeKind::Ellipse,
        ShapeKind::InvertedTriangle,
        ShapeKind::TwoDots,
        ShapeKind::Corner,
        ShapeKind::Checker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Square => "square",
            ShapeKind::Triangle => "triangle",
            ShapeKind::Plus => "plus",
            ShapeKind::Ring => "ring",
            ShapeKind::Diamond => "diamond",
            ShapeKind::HorizontalBar => "hbar",
            ShapeKind::VerticalBar => "vbar",
            ShapeKind::Saltire => "saltire",
            ShapeKind::HollowSquare => "hollow_square",
            ShapeKind::HalfDisk => "half_disk",
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::InvertedTriangle => "inverted_triangle",
            ShapeKind::TwoDots => "two_dots",
            ShapeKind::Corner => "corner",
            ShapeKind::Checker => "checker",
        }
    }

    fn contains(self, x: f64, y: f64) -> bool {
        let (ax, ay) = (x.abs(), y.abs());
        let r2 = x * x + y * y;
        match self {
            ShapeKind::Circle => r2 <= 0.9 * 0.9,
            ShapeKind::Square => ax <= 0.75 && ay <= 0.75,
            ShapeKind::Triangle => y >= -0.75 && y <= 0.9 - 1.8 * ax,
            ShapeKind::Plus => (ax <= 0.28 && ay <= 0.95) || (ay <= 0.28 && ax <= 0.95),
            ShapeKind::Ring => (0.5 * 0.5..=0.95 * 0.95).contains(&r2),
            ShapeKind::Diamond => ax + ay <= 0.95,
            ShapeKind::HorizontalBar => ax <= 0.95 && ay <= 0.3,
            ShapeKind::VerticalBar => ax <= 0.3 && ay <= 0.95,
            ShapeKind::Saltire => {
                let (u, v) = ((x + y).abs() / 2f64.sqrt(), (x - y).abs() / 2f64.sqrt());
                (u <= 0.22 && v <= 0.95) || (v <= 0.22 && u <= 0.95)
            }
            ShapeKind::HollowSquare => (0.45..=0.85).contains(&ax.max(ay)),
            ShapeKind::HalfDisk => r2 <= 0.95 * 0.95 && y >= -0.2,
            ShapeKind::Ellipse => x * x + (y / 0.45).powi(2) <= 0.95 * 0.95,
            ShapeKind::InvertedTriangle => y <= 0.75 && y >= -0.9 + 1.8 * ax,
            ShapeKind::TwoDots => {
                let d = |cx: f64| (x - cx).powi(2) + y * y <= 0.38 * 0.38;
                d(-0.5) || d(0.5)
            }
            ShapeKind::Corner => {
                (ax <= 0.85 && (-0.85..=-0.45).contains(&y))
                    || ((-0.85..=-0.45).contains(&x) && ay <= 0.85)
            }
            ShapeKind::Checker => x * y >= 0.0 && ax.max(ay) <= 0.85,
        }
    }
}

/// Parameters of the synthetic shapes dataset.
///
/// Jitters are fractions: `position_jitter` of the free margin around the
/// shape, `scale_jitter` of half the base radius (shapes only shrink), and
/// `color_jitter` of the full color range around the base color.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapesConfig {
    pub num_classes: usize,
    pub resolution: usize,
    pub samples_per_class: usize,
    pub kinds: Vec<ShapeKind>,
    pub position_jitter: f64,
    pub scale_jitter: f64,
    pub color_jitter: f64,
    pub seed: u64,
}

impl ShapesConfig {
    pub fn new(num_classes: usize, resolution: usize, samples_per_class: usize, seed: u64) -> Self {
        Self {
            num_classes,
            resolution,
            samples_per_class,
            kinds: Vec::new(),
            position_jitter: 1.0,
            scale_jitter: 0.35,
            color_jitter: 0.6,
            seed,
        }
    }

    pub fn without_jitter(mut self) -> Self {
        self.position_jitter = 0.0;
        self.scale_jitter = 0.0;
        self.color_jitter = 0.0;
        self
    }

    fn resolved_kinds(&self) -> Result<Vec<ShapeKind>> {
        if self.kinds.is_empty() {
            if self.num_classes > ShapeKind::ALL.len() {
                return Err(Error::invalid(format!(
                    "{} classes requested, only {} shape kinds exist",
                    self.num_classes,
                    ShapeKind::ALL.len()
                )));
            }
            Ok(ShapeKind::ALL[..self.num_classes].to_vec())
        } else if self.kinds.len() != self.num_classes {
            Err(Error::invalid("shape kind list does not match class count"))
        } else {
            Ok(self.kinds.clone())
        }
    }
}

const BASE_RADIUS: f64 = 0.36;
const BASE_COLOR: [f64; 3] = [0.85, 0.7, 0.3];
const SUPERSAMPLE: usize = 4;

/// Renders `samples_per_class` jittered RGB images of each class' shape on
/// a black background, grouped by class.
pub fn generate_shapes(cfg: &ShapesConfig) -> Result<LabeledImageDataset> {
    let kinds = cfg.resolved_kinds()?;
    if cfg.num_classes == 0 || cfg.samples_per_class == 0 {
        return Err(Error::invalid("class count and samples per class must be positive"));
    }
    if cfg.resolution < 4 {
        return Err(Error::invalid("resolution must be at least 4"));
    }
    for (name, j) in [
        ("position", cfg.position_jitter),
        ("scale", cfg.scale_jitter),
        ("color", cfg.color_jitter),
    ] {
        if !(0.0..=1.0).contains(&j) {
            return Err(Error::invalid(format!("{name} jitter {j} outside [0, 1]")));
        }
    }
    let res = cfg.resolution;
    let plane = res * res;
    let n = cfg.num_classes * cfg.samples_per_class;
    let mut pixels = Vec::with_capacity(n * 3 * plane);
    let mut labels = Vec::with_capacity(n);
    let root = RngStream::new(cfg.seed).split("shapes");
    for (class, &kind) in kinds.iter().enumerate() {
        let mut rng = root.split(&format!("class/{class}"));
        for _ in 0..cfg.samples_per_class {
            let mut sym = |j: f64| j * (2.0 * rng.uniform() - 1.0);
            let shrink = 0.5 * (1.0 + sym(1.0));
            let radius = BASE_RADIUS * res as f64 * (1.0 - 0.5 * cfg.scale_jitter * shrink);
            // the shape's bounding square never leaves the frame
            let margin = (res as f64 / 2.0 - radius - 1.0).max(0.0);
            let cx = res as f64 / 2.0 + sym(cfg.position_jitter) * margin;
            let cy = res as f64 / 2.0 + sym(cfg.position_jitter) * margin;
            let color: Vec<f64> = BASE_COLOR
                .iter()
                .map(|&c| (c + sym(cfg.color_jitter) * 0.5).clamp(0.15, 1.0))
                .collect();
            let mut img = vec![0u8; 3 * plane];
            for py in 0..res {
                for px in 0..res {
                    let mut hits = 0usize;
                    for sy in 0..SUPERSAMPLE {
                        for sx in 0..SUPERSAMPLE {
                            let fx = px as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                            let fy = py as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                            let lx = (fx - cx) / radius;
                            let ly = (cy - fy) / radius;
                            if kind.contains(lx, ly) {
                                hits += 1;
                            }
                        }
                    }
                    let coverage = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
                    for (ch, &c) in color.iter().enumerate() {
                        img[ch * plane + py * res + px] = (coverage * c * 255.0).round() as u8;
                    }
                }
            }
            pixels.extend_from_slice(&img);
            labels.push(class as u16);
        }
    }
    LabeledImageDataset::new(
        (3, res, res),
        pixels,
        labels,
        kinds.iter().map(|k| k.name().to_string()).collect(),
        SplitTag::Train,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_jitter_images_identical_within_class() {
        let ds = generate_shapes(&ShapesConfig::new(3, 16, 5, 1).without_jitter()).unwrap();
        for class in 0..3 {
            let idx = ds.indices_of_class(class);
            for &i in &idx[1..] {
                assert_eq!(ds.image_bytes(i), ds.image_bytes(idx[0]));
            }
        }
        assert_ne!(ds.image_bytes(0), ds.image_bytes(5));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = ShapesConfig::new(4, 16, 6, 11);
        assert_eq!(generate_shapes(&cfg).unwrap(), generate_shapes(&cfg).unwrap());
        let other = ShapesConfig { seed: 12, ..cfg.clone() };
        assert_ne!(generate_shapes(&cfg).unwrap(), generate_shapes(&other).unwrap());
    }

    #[test]
    fn balanced_labels() {
        let ds = generate_shapes(&ShapesConfig::new(4, 8, 1000, 2)).unwrap();
        assert_eq!(ds.len(), 4000);
        for c in 0..4 {
            assert_eq!(ds.indices_of_class(c).len(), 1000);
        }
    }

    #[test]
    fn too_many_classes() {
        assert!(generate_shapes(&ShapesConfig::new(17, 16, 1, 0)).is_err());
        assert!(generate_shapes(&ShapesConfig::new(16, 16, 1, 0)).is_ok());
    }

    #[test]
    fn shapes_stay_inside_frame() {
        // border pixels stay background even with maximal jitter
        let mut cfg = ShapesConfig::new(16, 32, 20, 3);
        cfg.position_jitter = 1.0;
        cfg.scale_jitter = 1.0;
        let ds = generate_shapes(&cfg).unwrap();
        for i in 0..ds.len() {
            let img = ds.image_bytes(i);
            for ch in 0..3 {
                for t in 0..32 {
                    let p = |y: usize, x: usize| img[ch * 1024 + y * 32 + x];
                    assert_eq!(p(0, t), 0);
                    assert_eq!(p(31, t), 0);
                    assert_eq!(p(t, 0), 0);
                    assert_eq!(p(t, 31), 0);
                }
            }
        }
    }
}
