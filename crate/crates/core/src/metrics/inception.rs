use crate::error::{Error, Result};
use crate::nn::{Element, RngStream, Tensor};

/// Probabilities are clamped to at least this inside logarithms.
pub const IS_PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct InceptionScoreReport {
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across groups.
    pub std: f64,
    pub groups: usize,
    /// Rows scored; `dropped` rows did not fill a whole group.
    pub samples: usize,
    pub dropped: usize,
}

fn group_score(rows: &[&[f64]], k: usize) -> f64 {
    let n = rows.len() as f64;
    let mut marginal = vec![0.0; k];
    for r in rows {
        for (m, p) in marginal.iter_mut().zip(r.iter()) {
            *m += p;
        }
    }
    let log_marginal: Vec<f64> = marginal.iter().map(|m| (m / n).max(IS_PROB_FLOOR).ln()).collect();
    let mut kl = 0.0;
    for r in rows {
        for (p, lm) in r.iter().zip(&log_marginal) {
            if *p > 0.0 {
                kl += p * (p.max(IS_PROB_FLOOR).ln() - lm);
            }
        }
    }
    (kl / n).exp().clamp(1.0, k as f64)
}

/// `exp(E_x KL(p(y|x) ‖ p(y)))` of `[N, K]` class distributions, computed
/// per group of a random row order. The marginal `p(y)` is the mean row of
/// each group. When `N` is not a multiple of `groups` the last
/// `N mod groups` rows of the order are dropped.
pub fn inception_score<T: Element>(
    dist: &Tensor<T>,
    groups: usize,
    rng: &mut RngStream,
) -> Result<InceptionScoreReport> {
    let &[n, k] = dist.shape() else {
        return Err(Error::shape(format!("expected [N, K] distributions, got {:?}", dist.shape())));
    };
    if groups == 0 || groups > n {
        return Err(Error::invalid(format!("{groups} groups for {n} rows")));
    }
    let data: Vec<f64> = dist.data().iter().map(|v| v.as_f64()).collect();
    for (i, row) in data.chunks(k).enumerate() {
        let s: f64 = row.iter().sum();
        if row.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-4 {
            return Err(Error::invalid(format!("row {i} is not a probability distribution (sum {s})")));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let size = n / groups;
    let scores: Vec<f64> = order
        .chunks_exact(size)
        .take(groups)
        .map(|idx| {
            let rows: Vec<&[f64]> = idx.iter().map(|&i| &data[i * k..(i + 1) * k]).collect();
            group_score(&rows, k)
        })
        .collect();
    let mean = scores.iter().sum::<f64>() / groups as f64;
    let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / groups as f64).sqrt();
    Ok(InceptionScoreReport {
        scores,
        mean,
        std,
        groups,
        samples: size * groups,
        dropped: n - size * groups,
    })
}
