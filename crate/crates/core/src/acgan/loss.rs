use crate::error::{Error, Result};
use crate::nn::{Activation, Element, Graph, Tensor, Var};

/// Log arguments are clamped to `[PROB_FLOOR, PROB_CEIL]`.
pub const PROB_FLOOR: f64 = 1e-7;
pub const PROB_CEIL: f64 = 1.0 - 1e-7;

/// Graph handles for the two heads of a discriminator pass.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    /// `[N]` probability that each image is real.
    pub source: Var,
    /// `[N, K]` class distribution.
    pub class: Var,
}

/// Softmax over the first `K` logits, sigmoid on the last.
pub fn soft_sigmoid<T: Element>(g: &mut Graph<T>, logits: Var) -> Result<HeadVars> {
    let shape = g.shape(logits).to_vec();
    if shape.len() != 2 || shape[1] < 2 {
        return Err(Error::shape(format!("soft-sigmoid head needs [N, K+1], got {shape:?}")));
    }
    let (n, k) = (shape[0], shape[1] - 1);
    let class_logits = g.slice_cols(logits, 0, k)?;
    let class = g.activation(class_logits, Activation::Softmax { axis: 1 })?;
    let src_logit = g.slice_cols(logits, k, k + 1)?;
    let src = g.activation(src_logit, Activation::Sigmoid)?;
    let source = g.reshape(src, &[n])?;
    Ok(HeadVars { source, class })
}

/// Values of the discriminator heads for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorOutput<T = f32> {
    /// `[N]`
    pub source_prob: Tensor<T>,
    /// `[N, K]`
    pub class_dist: Tensor<T>,
}

impl<T: Element> DiscriminatorOutput<T> {
    pub fn from_graph(g: &Graph<T>, head: HeadVars) -> Self {
        Self {
            source_prob: g.tensor(head.source),
            class_dist: g.tensor(head.class),
        }
    }

    pub fn len(&self) -> usize {
        self.source_prob.numel()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.class_dist.shape()[1]
    }

    fn check(&self) -> Result<()> {
        let ok = |v: &T| v.is_finite() && *v >= T::zero() && *v <= T::one();
        if !self.source_prob.data().iter().all(ok) || !self.class_dist.data().iter().all(ok) {
            return Err(Error::invalid("discriminator probabilities outside [0, 1]"));
        }
        if self.class_dist.shape().len() != 2 || self.class_dist.shape()[0] != self.len() {
            return Err(Error::shape("class_dist rows do not match source_prob"));
        }
        Ok(())
    }
}

fn clamped_ln(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, PROB_CEIL).ln()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// `mean ln P(real | X_real) + mean ln P(fake | X_fake)`.
pub fn source_loss<T: Element>(real: &DiscriminatorOutput<T>, fake: &DiscriminatorOutput<T>) -> Result<f64> {
    real.check()?;
    fake.check()?;
    let r = mean(real.source_prob.data().iter().map(|p| clamped_ln(p.as_f64())));
    let f = mean(fake.source_prob.data().iter().map(|p| clamped_ln(1.0 - p.as_f64())));
    Ok(r + f)
}

fn class_term<T: Element>(out: &DiscriminatorOutput<T>, labels: &[usize]) -> Result<f64> {
    out.check()?;
    let k = out.num_classes();
    if labels.len() != out.len() {
        return Err(Error::shape(format!("{} labels for {} outputs", labels.len(), out.len())));
    }
    if let Some(bad) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::invalid(format!("label {bad} outside 0..{k}")));
    }
    Ok(mean(
        labels
            .iter()
            .enumerate()
            .map(|(i, &c)| clamped_ln(out.class_dist.data()[i * k + c].as_f64())),
    ))
}

/// `mean ln P(c | X_real) + mean ln P(c | X_fake)`.
pub fn class_loss<T: Element>(
    real: &DiscriminatorOutput<T>,
    real_labels: &[usize],
    fake: &DiscriminatorOutput<T>,
    fake_labels: &[usize],
) -> Result<f64> {
    Ok(class_term(real, real_labels)? + class_term(fake, fake_labels)?)
}

/// Graph form of the real-data source term, `mean ln P(real | X)`.
pub fn source_real_term<T: Element>(g: &mut Graph<T>, source: Var) -> Var {
    let l = g.clamped_log(source, PROB_FLOOR, PROB_CEIL);
    g.mean(l)
}

/// Graph form of the generated-data source term, `mean ln P(fake | X)`.
pub fn source_fake_term<T: Element>(g: &mut Graph<T>, source: Var) -> Var {
    let q = g.one_minus(source);
    let l = g.clamped_log(q, PROB_FLOOR, PROB_CEIL);
    g.mean(l)
}

/// Graph form of one class term, `mean ln P(c | X)`.
pub fn class_term_var<T: Element>(g: &mut Graph<T>, class: Var, labels: &[usize]) -> Result<Var> {
    let picked = g.gather(class, labels)?;
    let l = g.clamped_log(picked, PROB_FLOOR, PROB_CEIL);
    Ok(g.mean(l))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out(src: &[f64], cls: &[f64], k: usize) -> DiscriminatorOutput<f64> {
        DiscriminatorOutput {
            source_prob: Tensor::new(&[src.len()], src.to_vec()).unwrap(),
            class_dist: Tensor::new(&[src.len(), k], cls.to_vec()).unwrap(),
        }
    }

    #[test]
    fn half_probabilities() {
        let o = out(&[0.5, 0.5], &[0.5, 0.5, 0.5, 0.5], 2);
        let ls = source_loss(&o, &o).unwrap();
        assert!((ls - 2.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_discriminator_is_near_zero() {
        let real = out(&[1.0, 1.0], &[1.0, 0.0, 0.0, 1.0], 2);
        let fake = out(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0], 2);
        let ls = source_loss(&real, &fake).unwrap();
        assert!(ls <= 0.0 && ls > -1e-6);
        let lc = class_loss(&real, &[0, 1], &fake, &[0, 1]).unwrap();
        assert!(lc <= 0.0 && lc > -1e-6);
    }

    #[test]
    fn uniform_classes() {
        let k = 10;
        let o = out(&[0.3], &vec![0.1; k], k);
        let lc = class_loss(&o, &[3], &o, &[7]).unwrap();
        assert!((lc - 2.0 * 0.1f64.ln()).abs() < 1e-12);
        assert!(class_loss(&o, &[10], &o, &[0]).is_err());
    }

    #[test]
    fn graph_terms_match_values() {
        let k = 3;
        let src = [0.2, 0.9, 0.55];
        let cls = [0.2, 0.3, 0.5, 0.7, 0.2, 0.1, 0.1, 0.1, 0.8];
        let labels = [2, 0, 1];
        let o = out(&src, &cls, k);
        let mut g = Graph::<f64>::new();
        let s = g.input(&o.source_prob);
        let c = g.input(&o.class_dist);
        let r = source_real_term(&mut g, s);
        let f = source_fake_term(&mut g, s);
        let ct = class_term_var(&mut g, c, &labels).unwrap();
        let ls = g.value(r)[0] + g.value(f)[0];
        assert!((ls - source_loss(&o, &o).unwrap()).abs() < 1e-12);
        let lc = 2.0 * g.value(ct)[0];
        assert!((lc - class_loss(&o, &labels, &o, &labels).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_logits_give_half_and_uniform() {
        let mut g = Graph::<f64>::new();
        let logits = g.input(&Tensor::zeros(&[2, 5]));
        let h = soft_sigmoid(&mut g, logits).unwrap();
        assert_eq!(g.value(h.source), &[0.5, 0.5]);
        assert!(g.value(h.class).iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }
}
