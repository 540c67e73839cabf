use crate::error::{Error, Result};
use crate::nn::{Element, Tensor};

/// Top-1 accuracy broken down by true class.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    /// Fraction correct per class; 0 for classes with no samples.
    pub per_class: Vec<f64>,
    pub counts: Vec<usize>,
    pub correct: Vec<usize>,
    /// Correct over total, which equals the count-weighted mean of
    /// `per_class`.
    pub overall: f64,
}

impl AccuracyReport {
    pub fn from_counts(correct: Vec<usize>, counts: Vec<usize>) -> Self {
        let per_class = correct
            .iter()
            .zip(&counts)
            .map(|(&c, &n)| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect();
        let total: usize = counts.iter().sum();
        let hits: usize = correct.iter().sum();
        Self {
            per_class,
            overall: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
            counts,
            correct,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Index of the largest entry of each row of `[N, K]`. Ties go to the
/// lowest index.
pub fn argmax_rows<T: Element>(dist: &Tensor<T>) -> Result<Vec<usize>> {
    let shape = dist.shape();
    if shape.len() != 2 || shape[1] == 0 {
        return Err(Error::shape(format!("expected [N, K] distributions, got {shape:?}")));
    }
    Ok(dist
        .data()
        .chunks(shape[1])
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate().skip(1) {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Scores `[N, K]` class distributions against `labels`.
pub fn accuracy_from_dist<T: Element>(dist: &Tensor<T>, labels: &[usize]) -> Result<AccuracyReport> {
    let predicted = argmax_rows(dist)?;
    if predicted.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} distributions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let k = dist.shape()[1];
    let mut counts = vec![0; k];
    let mut correct = vec![0; k];
    for (&p, &y) in predicted.iter().zip(labels) {
        if y >= k {
            return Err(Error::invalid(format!("label {y} outside [0, {k})")));
        }
        counts[y] += 1;
        correct[y] += (p == y) as usize;
    }
    Ok(AccuracyReport::from_counts(correct, counts))
}
