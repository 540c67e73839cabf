use acgan_core::nn::{
    grad_check, grad_check_params, Activation, Graph, Mode, ParamSet, RngStream, RunningStats, Tensor, Var,
};

const SEEDS: u64 = 10;
const EPS: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn randn(shape: &[usize], scale: f64, rng: &mut RngStream) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_f64(shape, &(0..n).map(|_| rng.normal() * scale).collect::<Vec<_>>()).unwrap()
}

/// Scalar `sum(y ⊙ r)` for a fixed random `r`, so no gradient is trivially
/// constant.
fn project(g: &mut Graph<f64>, y: Var, seed: u64) -> acgan_core::Result<Var> {
    let r = randn(g.shape(y), 1.0, &mut RngStream::new(seed).split("projection"));
    let rv = g.input(&r);
    let p = g.mul(y, rv)?;
    Ok(g.sum(p))
}

/// Checks `op` against finite differences w.r.t. its input and every
/// parameter in `params`, for ten seeds. `op` receives the parameters in
/// name order.
fn check_op<P, F>(name: &str, input: &[usize], params: P, op: F)
where
    P: Fn(&mut RngStream) -> ParamSet<f64>,
    F: Fn(&mut Graph<f64>, Var, &[Var], u64) -> acgan_core::Result<Var>,
{
    for seed in 0..SEEDS {
        let mut rng = RngStream::new(seed);
        let x = randn(input, 1.0, &mut rng);
        let p = params(&mut rng);
        let names: Vec<String> = p.names().map(str::to_string).collect();
        let by_input = grad_check(
            |g, xv| {
                let vars = names.iter().map(|n| g.param_frozen(&p, n)).collect::<Result<Vec<_>, _>>()?;
                let y = op(g, xv, &vars, seed)?;
                project(g, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(by_input < TOL, "{name} seed {seed}: input error {by_input}");
        if names.is_empty() {
            continue;
        }
        let by_params = grad_check_params(
            |g, ps| {
                let xv = g.input(&x);
                let vars = names.iter().map(|n| g.param(ps, n)).collect::<Result<Vec<_>, _>>()?;
                let y = op(g, xv, &vars, seed)?;
                project(g, y, seed)
            },
            &p,
            EPS,
        )
        .unwrap();
        assert!(by_params < TOL, "{name} seed {seed}: parameter error {by_params}");
    }
}

fn params(entries: &[(&str, &[usize], f64)], rng: &mut RngStream) -> ParamSet<f64> {
    let mut p = ParamSet::new();
    for (name, shape, scale) in entries {
        p.insert(*name, randn(shape, *scale, rng).with_grad()).unwrap();
    }
    p
}

#[test]
fn linear_gradients() {
    check_op(
        "linear",
        &[3, 5],
        |r| params(&[("w", &[5, 4], 0.5), ("b", &[4], 0.5)], r),
        |g, x, v, _| g.linear(x, v[1], v[0]),
    );
}

#[test]
fn conv_gradients() {
    for (stride, pad) in [(1, 1), (2, 1), (2, 0)] {
        check_op(
            "conv2d",
            &[2, 2, 5, 5],
            |r| params(&[("k", &[3, 2, 3, 3], 0.4)], r),
            |g, x, v, _| g.conv2d(x, v[0], (stride, stride), (pad, pad)),
        );
    }
}

#[test]
fn transposed_conv_gradients() {
    for (kernel, stride, pad, out_pad) in [(5, 2, 2, 1), (3, 2, 1, 1), (3, 1, 1, 0)] {
        check_op(
            "transposed_conv2d",
            &[2, 3, 3, 3],
            |r| params(&[("k", &[3, 2, kernel, kernel], 0.4)], r),
            |g, x, v, _| g.transposed_conv2d(x, v[0], (stride, stride), (pad, pad), (out_pad, out_pad)),
        );
    }
}

#[test]
fn channel_bias_gradients() {
    check_op(
        "channel bias",
        &[2, 3, 2, 2],
        |r| params(&[("b", &[3], 1.0)], r),
        |g, x, v, _| g.add_channel_bias(x, v[0]),
    );
}

#[test]
fn batch_norm_gradients() {
    for shape in [&[4, 3][..], &[3, 2, 2, 2][..]] {
        check_op(
            "batch_norm",
            shape,
            |r| params(&[("gamma", &[shape[1]], 1.0), ("beta", &[shape[1]], 1.0)], r),
            |g, x, v, _| {
                let mut stats = RunningStats::new(shape[1]);
                g.batch_norm(x, v[1], v[0], Mode::Train, &mut stats, 0.1, 1e-5)
            },
        );
    }
}

#[test]
fn activation_gradients() {
    for act in [
        Activation::Relu,
        Activation::LeakyRelu(0.2),
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Softmax { axis: 1 },
    ] {
        check_op(&format!("{act:?}"), &[3, 4], |_| ParamSet::new(), |g, x, _, _| g.activation(x, act));
    }
}

#[test]
fn dropout_and_noise_gradients() {
    check_op("dropout", &[4, 6], |_| ParamSet::new(), |g, x, _, seed| {
        g.dropout(x, 0.5, Mode::Train, &mut RngStream::new(seed).split("mask"))
    });
    check_op("noise", &[4, 6], |_| ParamSet::new(), |g, x, _, seed| {
        g.gaussian_noise(x, 0.3, Mode::Train, &mut RngStream::new(seed).split("noise"))
    });
}

#[test]
fn log_and_gather_gradients() {
    check_op("gather log", &[4, 3], |_| ParamSet::new(), |g, x, _, _| {
        let p = g.activation(x, Activation::Softmax { axis: 1 })?;
        let picked = g.gather(p, &[2, 0, 1, 1])?;
        Ok(g.clamped_log(picked, 1e-12, 1.0))
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn conv_and_transposed_conv_are_adjoint() {
    let mut rng = RngStream::new(40);
    for trial in 0..20 {
        let (n, cin, cout) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3));
        let (h, kernel, stride) = (3 + rng.below(5), 1 + 2 * rng.below(3), 1 + rng.below(2));
        let pad = kernel / 2;
        let x = randn(&[n, cin, h, h], 1.0, &mut rng);
        let k = randn(&[cout, cin, kernel, kernel], 1.0, &mut rng);
        let mut g = Graph::new();
        let (xv, kv) = (g.input(&x), g.input(&k));
        let fwd = g.conv2d(xv, kv, (stride, stride), (pad, pad)).unwrap();
        let oh = g.shape(fwd)[2];
        let out_pad = h - ((oh - 1) * stride + kernel - 2 * pad);
        let y = randn(g.shape(fwd), 1.0, &mut rng);
        let yv = g.input(&y);
        let back = g.transposed_conv2d(yv, kv, (stride, stride), (pad, pad), (out_pad, out_pad)).unwrap();
        assert_eq!(g.shape(back), x.shape());
        let lhs = dot(g.value(fwd), y.data());
        let rhs = dot(x.data(), g.value(back));
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "trial {trial}: {lhs} vs {rhs}");
    }
}
