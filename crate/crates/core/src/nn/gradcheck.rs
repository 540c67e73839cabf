use crate::error::{Error, Result};
use crate::nn::graph::{Graph, Var};
use crate::nn::params::ParamSet;
use crate::nn::tensor::Tensor;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn scalar_value(g: &Graph<f64>, v: Var) -> Result<f64> {
    let val = g.value(v);
    if val.len() != 1 {
        return Err(Error::shape(format!(
            "grad_check needs a scalar function, got shape {:?}",
            g.shape(v)
        )));
    }
    Ok(val[0])
}

/// Maximum relative error between the reverse-mode gradient of `f` at `x`
/// and central finite differences with step `eps`.
///
/// `f` must be deterministic: it is re-evaluated on a fresh graph for every
/// perturbed coordinate.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let xv = g.variable(x);
    let y = f(&mut g, xv)?;
    scalar_value(&g, y)?;
    g.backward(y)?;
    let analytic = g.grad(xv);

    let eval = |point: &Tensor<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let xv = g.variable(point);
        let y = f(&mut g, xv)?;
        scalar_value(&g, y)
    };
    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let minus = eval(&probe)?;
        probe.data_mut()[i] = orig;
        worst = worst.max(relative_error(analytic[i], (plus - minus) / (2.0 * eps)));
    }
    Ok(worst)
}

/// Like [`grad_check`], but differentiates w.r.t. every scalar of every
/// parameter in `params`.
pub fn grad_check_params<F>(f: F, params: &ParamSet<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &ParamSet<f64>) -> Result<Var>,
{
    let mut g = Graph::new();
    let y = f(&mut g, params)?;
    scalar_value(&g, y)?;
    g.backward(y)?;
    let mut with_grads = params.clone();
    g.write_param_grads(&mut with_grads)?;

    let eval = |p: &ParamSet<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let y = f(&mut g, p)?;
        scalar_value(&g, y)
    };
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let analytic = with_grads.get(name)?.grad().unwrap_or(&[]).to_vec();
        for (i, &a) in analytic.iter().enumerate() {
            let orig = params.get(name)?.data()[i];
            probe.get_mut(name)?.data_mut()[i] = orig + eps;
            let plus = eval(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = orig - eps;
            let minus = eval(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = orig;
            worst = worst.max(relative_error(a, (plus - minus) / (2.0 * eps)));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::Activation;

    #[test]
    fn sum_is_exact() {
        let x = Tensor::from_f64(&[3], &[0.3, -1.2, 4.0]).unwrap();
        let err = grad_check(|g, x| Ok(g.sum(x)), &x, 1e-3).unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn leaky_relu_away_from_zero() {
        let x = Tensor::from_f64(&[4], &[0.5, -0.7, 2.0, -3.0]).unwrap();
        let err = grad_check(
            |g, x| {
                let y = g.activation(x, Activation::LeakyRelu(0.2))?;
                Ok(g.sum(y))
            },
            &x,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn non_scalar_rejected() {
        let x = Tensor::from_f64(&[2], &[1.0, 2.0]).unwrap();
        assert!(grad_check(|_, x| Ok(x), &x, 1e-6).is_err());
    }
}
