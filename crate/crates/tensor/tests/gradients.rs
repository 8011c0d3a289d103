//! Finite-difference checks for every differentiable operation, over
//! randomized small shapes and many seeds.

use dagr_tensor::{grad_check, Graph, PoolKind, Result, RngState, Tensor, Var};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;
const SEEDS: u64 = 20;

/// Weighted sum so every output element gets a distinct upstream gradient.
fn weighted_sum(g: &mut Graph, y: Var, rng: &mut RngState) -> Result<Var> {
    let shape = g.shape(y).to_vec();
    let w = g.constant(Tensor::randn(shape, rng));
    let p = g.mul(y, w)?;
    g.sum(p)
}

fn check<F>(name: &str, params: Vec<Tensor>, seed: u64, f: F)
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let report = grad_check(
        |g, p| {
            let y = f(g, p)?;
            let mut rng = RngState::new(seed ^ 0xABCD);
            weighted_sum(g, y, &mut rng)
        },
        &params,
        EPS,
    )
    .unwrap_or_else(|e| panic!("{name} seed {seed}: {e}"));
    assert!(
        report.max_relative_error < TOL,
        "{name} seed {seed}: {report:?}"
    );
}

fn dim(rng: &mut RngState, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

#[test]
fn binary_ops_with_broadcast() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(seed);
        let (m, n) = (dim(&mut rng, 1, 4), dim(&mut rng, 1, 4));
        let a = Tensor::randn([m, n], &mut rng);
        let b = Tensor::randn([1, n], &mut rng);
        let pos = Tensor::rand_uniform([m, n], 0.5, 2.0, &mut rng);
        check("add", vec![a.clone(), b.clone()], seed, |g, p| g.add(p[0], p[1]));
        check("sub", vec![a.clone(), b.clone()], seed, |g, p| g.sub(p[0], p[1]));
        check("mul", vec![a.clone(), b.clone()], seed, |g, p| g.mul(p[0], p[1]));
        check("div", vec![a.clone(), pos], seed, |g, p| g.div(p[0], p[1]));
        check("scale", vec![a.clone()], seed, |g, p| g.scale(p[0], -1.7));
        check("add_scalar", vec![a], seed, |g, p| g.add_scalar(p[0], 0.3));
    }
}

#[test]
fn unary_ops() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(100 + seed);
        let n = dim(&mut rng, 2, 6);
        let x = Tensor::randn([n], &mut rng);
        // keep relu/abs away from the kink
        let away = x.map(|v| if v.abs() < 0.05 { v + 0.2 } else { v });
        let pos = Tensor::rand_uniform([n], 0.2, 3.0, &mut rng);
        check("sigmoid", vec![x.clone()], seed, |g, p| g.sigmoid(p[0]));
        check("tanh", vec![x.clone()], seed, |g, p| g.tanh(p[0]));
        check("exp", vec![x], seed, |g, p| g.exp(p[0]));
        check("relu", vec![away.clone()], seed, |g, p| g.relu(p[0]));
        check("abs", vec![away], seed, |g, p| g.abs(p[0]));
        check("ln", vec![pos.clone()], seed, |g, p| g.ln(p[0]));
        check("sqrt", vec![pos], seed, |g, p| g.sqrt(p[0]));
    }
}

#[test]
fn reductions_and_shapes() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(200 + seed);
        let s = [dim(&mut rng, 1, 3), dim(&mut rng, 2, 4), dim(&mut rng, 1, 3)];
        let x = Tensor::randn(s, &mut rng);
        check("sum_axes", vec![x.clone()], seed, |g, p| g.sum_axes(p[0], &[0, 2], false));
        check("mean_axes", vec![x.clone()], seed, |g, p| g.mean_axes(p[0], &[1], true));
        check("reshape", vec![x.clone()], seed, |g, p| {
            g.reshape(p[0], [s[0] * s[1], s[2]])
        });
        check("permute", vec![x.clone()], seed, |g, p| g.permute(p[0], &[2, 0, 1]));
        check("narrow", vec![x.clone()], seed, |g, p| g.narrow(p[0], 1, 1, s[1] - 1));
        check("broadcast_to", vec![x.clone()], seed, |g, p| {
            let r = g.sum_axes(p[0], &[1], true)?;
            g.broadcast_to(r, [2, s[0], 3, s[2]])
        });
        let y = Tensor::randn([s[0], 2, s[2]], &mut rng);
        check("concat", vec![x, y], seed, |g, p| g.concat(&[p[0], p[1]], 1));
    }
}

#[test]
fn dense_layers() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(300 + seed);
        let (m, k, n) = (dim(&mut rng, 1, 4), dim(&mut rng, 1, 4), dim(&mut rng, 1, 4));
        let a = Tensor::randn([m, k], &mut rng);
        let b = Tensor::randn([k, n], &mut rng);
        check("matmul", vec![a.clone(), b], seed, |g, p| g.matmul(p[0], p[1]));
        let w = Tensor::randn([n, k], &mut rng);
        let bias = Tensor::randn([n], &mut rng);
        check("linear", vec![a.clone(), w, bias], seed, |g, p| {
            g.linear(p[0], p[1], Some(p[2]))
        });
        let x = Tensor::randn([m, k + 1], &mut rng);
        check("softmax", vec![x.clone()], seed, |g, p| g.softmax(p[0], 1));
        check("softmax_axis0", vec![x.clone()], seed, |g, p| g.softmax(p[0], 0));
        check("layernorm", vec![x], seed, |g, p| g.layernorm(p[0], 1, 1e-5));
    }
}

#[test]
fn convolutions() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(400 + seed);
        let c = dim(&mut rng, 1, 2);
        let o = dim(&mut rng, 1, 2);
        let stride = [1, dim(&mut rng, 1, 2), 1];
        let x = Tensor::randn([1, c, 2, 4, 3], &mut rng);
        let w = Tensor::randn([o, c, 2, 3, 2], &mut rng);
        let b = Tensor::randn([o], &mut rng);
        check("conv3d", vec![x, w, b], seed, |g, p| {
            g.conv3d(p[0], p[1], Some(p[2]), stride, [1, 1, 0])
        });
        let x2 = Tensor::randn([2, c, 4, 4], &mut rng);
        let w2 = Tensor::randn([o, c, 3, 3], &mut rng);
        let b2 = Tensor::randn([o], &mut rng);
        check("conv2d", vec![x2, w2, b2], seed, |g, p| {
            g.conv2d(p[0], p[1], Some(p[2]), [stride[1], 1], [1, 1])
        });
    }
}

#[test]
fn conv3d_sigmoid_sum() {
    let mut rng = RngState::new(77);
    let x = Tensor::randn([1, 2, 2, 3, 3], &mut rng);
    let w = Tensor::randn([2, 2, 3, 3, 3], &mut rng);
    let b = Tensor::randn([2], &mut rng);
    let r = grad_check(
        |g, p| {
            let y = g.conv3d(p[0], p[1], Some(p[2]), [1; 3], [1; 3])?;
            let s = g.sigmoid(y)?;
            g.sum(s)
        },
        &[x, w, b],
        EPS,
    )
    .unwrap();
    assert!(r.max_relative_error < TOL, "{r:?}");
}

#[test]
fn pooling_and_interpolation() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(500 + seed);
        let x = Tensor::randn([1, 2, 3, 4, 6], &mut rng);
        check("max_pool", vec![x.clone()], seed, |g, p| {
            g.pool(p[0], PoolKind::Max, &[1, 2, 2], &[1, 2, 2])
        });
        check("avg_pool", vec![x.clone()], seed, |g, p| {
            g.pool(p[0], PoolKind::Avg, &[2, 2, 3], &[1, 2, 2])
        });
        check("global_avg", vec![x.clone()], seed, |g, p| g.global_avg(p[0], 3));
        check("adaptive_avg", vec![x.clone()], seed, |g, p| g.adaptive_avg(p[0], &[2, 3, 4]));
        check("resize_bilinear", vec![x.clone()], seed, |g, p| {
            g.resize_bilinear(p[0], [7, 5])
        });
        check("upsample_trilinear", vec![x], seed, |g, p| {
            g.upsample_trilinear(p[0], [5, 8, 9])
        });
    }
}

#[test]
fn reused_node_accumulates() {
    let mut g = Graph::new();
    let x = g.param(Tensor::from_vec(vec![3.0]));
    let y = g.mul(x, x).unwrap();
    let z = g.add(y, x).unwrap();
    let s = g.sum(z).unwrap();
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[7.0]);
}

#[test]
fn constants_receive_no_gradient() {
    let mut g = Graph::new();
    let x = g.param(Tensor::from_vec(vec![1.0, 2.0]));
    let c = g.constant(Tensor::from_vec(vec![5.0, 6.0]));
    let y = g.mul(x, c).unwrap();
    let s = g.sum(y).unwrap();
    let grads = g.backward(s).unwrap();
    assert!(grads.get(c).is_none());
    assert_eq!(grads.get(x).unwrap().data(), &[5.0, 6.0]);
    assert!(g.backward(y).is_err());
}
