use crate::classifier::AccuracyReport;
use crate::error::{Error, Result};
use crate::metrics::diversity::{DiversityReport, DIVERSITY_CEILING};

/// Accuracy at or below this counts as "not discriminable" in the
/// conditional fractions.
pub const LOW_ACCURACY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointRow {
    pub class: usize,
    pub msssim: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointReport {
    pub rows: Vec<JointRow>,
    /// Signed Pearson correlation; 0 when `degenerate`.
    pub pearson_r: f64,
    pub r_squared: f64,
    /// One of the two columns has zero variance.
    pub degenerate: bool,
    /// Among classes with `msssim >= DIVERSITY_CEILING`, the fraction with
    /// accuracy `<= LOW_ACCURACY`; `None` without such classes.
    pub low_diversity_low_accuracy: Option<f64>,
    /// Among classes with `msssim < DIVERSITY_CEILING`, the fraction with
    /// accuracy `> LOW_ACCURACY`.
    pub high_diversity_high_accuracy: Option<f64>,
}

/// Pearson correlation of two equally long series. Returns `None` when
/// either has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn fraction(rows: &[&JointRow], hit: impl Fn(&JointRow) -> bool) -> Option<f64> {
    if rows.is_empty() {
        None
    } else {
        Some(rows.iter().filter(|r| hit(r)).count() as f64 / rows.len() as f64)
    }
}

/// Per-class pairing of mean MS-SSIM with classifier accuracy. Both
/// reports must cover the same classes.
pub fn diversity_vs_discriminability(
    diversity: &DiversityReport,
    accuracy: &AccuracyReport,
) -> Result<JointReport> {
    let mut classes: Vec<usize> = diversity.rows.iter().map(|r| r.class).collect();
    classes.sort_unstable();
    if classes != (0..accuracy.num_classes()).collect::<Vec<_>>() {
        return Err(Error::Mismatch(format!(
            "diversity covers classes {classes:?}, accuracy covers 0..{}",
            accuracy.num_classes()
        )));
    }
    let rows: Vec<JointRow> = classes
        .iter()
        .map(|&c| JointRow {
            class: c,
            msssim: diversity.row(c).expect("class listed").mean,
            accuracy: accuracy.per_class[c],
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.msssim).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    let r = pearson(&xs, &ys);
    let low: Vec<&JointRow> = rows.iter().filter(|r| r.msssim >= DIVERSITY_CEILING).collect();
    let high: Vec<&JointRow> = rows.iter().filter(|r| r.msssim < DIVERSITY_CEILING).collect();
    Ok(JointReport {
        pearson_r: r.unwrap_or(0.0),
        r_squared: r.map_or(0.0, |r| r * r),
        degenerate: r.is_none(),
        low_diversity_low_accuracy: fraction(&low, |r| r.accuracy <= LOW_ACCURACY),
        high_diversity_high_accuracy: fraction(&high, |r| r.accuracy > LOW_ACCURACY),
        rows,
    })
}
