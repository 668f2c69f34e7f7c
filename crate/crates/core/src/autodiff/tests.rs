// SPDX-License-Identifier: MIT OR Apache-2.0

use super::*;
use crate::rng::{self, StreamRng};

fn rand_tensor(rng: &mut StreamRng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng::uniform(rng, lo, hi)).collect()).unwrap()
}

/// Random linear functional so every output coordinate matters.
fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let mut rng = rng::stream(seed, 99);
    let w = rand_tensor(&mut rng, g.shape(y), -1.0, 1.0);
    let p = g.mul_const(y, w)?;
    g.sum(p)
}

#[test]
fn exp_at_zero() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::scalar(0.0));
    let y = g.exp(x).unwrap();
    assert_eq!(g.value(y).item().unwrap(), 1.0);
    assert_eq!(g.backward(y).unwrap().wrt(&g, x).item().unwrap(), 1.0);
}

#[test]
fn relu_mask() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::vector(vec![-1.0, 2.0]));
    let y = g.relu(x).unwrap();
    assert_eq!(g.value(y).data(), &[0.0, 2.0]);
    let s = g.sum(y).unwrap();
    assert_eq!(g.backward(s).unwrap().wrt(&g, x).data(), &[0.0, 1.0]);
}

#[test]
fn log_of_exp() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::scalar(0.7));
    let e = g.exp(x).unwrap();
    let y = g.log(e).unwrap();
    assert!((g.value(y).item().unwrap() - 0.7).abs() < 1e-15);
    assert!((g.backward(y).unwrap().wrt(&g, x).item().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn domain_errors() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::vector(vec![1.0, 0.0]));
    assert!(matches!(g.log(x), Err(Error::Domain { op: "log", .. })));
    let one = g.leaf(Tensor::vector(vec![1.0, 1.0]));
    assert!(matches!(g.div(one, x), Err(Error::Domain { op: "div", .. })));
    let big = g.leaf(Tensor::scalar(1000.0));
    assert!(g.exp(big).is_err());
    let m = g.leaf(Tensor::zeros(&[2, 3]));
    assert!(g.logsumexp(m, 2).is_err());
    let v = g.leaf(Tensor::zeros(&[3]));
    assert!(matches!(g.add(m, v), Err(Error::Shape(_))));
}

#[test]
fn logsumexp_values() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![0.0, 0.0]));
    let l = g.logsumexp(x, 0).unwrap();
    assert!((g.value(l).item().unwrap() - 2f64.ln()).abs() < 1e-15);
    let x = g.constant(Tensor::vector(vec![1000.0, 1000.0]));
    let l = g.logsumexp(x, 0).unwrap();
    assert!((g.value(l).item().unwrap() - (1000.0 + 2f64.ln())).abs() < 1e-12);
}

#[test]
fn sum_gradient_is_ones() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::zeros(&[2, 3]));
    let s = g.sum(x).unwrap();
    assert_eq!(g.backward(s).unwrap().wrt(&g, x), Tensor::ones(&[2, 3]));
}

#[test]
fn product_rule() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::scalar(2.0));
    let y = g.leaf(Tensor::scalar(3.0));
    let p = g.mul(x, y).unwrap();
    let grads = g.backward(p).unwrap();
    assert_eq!(grads.wrt(&g, x).item().unwrap(), 3.0);
    assert_eq!(grads.wrt(&g, y).item().unwrap(), 2.0);
}

#[test]
fn backward_requires_scalar_root() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::zeros(&[2]));
    assert!(matches!(g.backward(x), Err(Error::Shape(_))));
}

#[test]
fn matmul_identity_and_scalar_case() {
    let mut g = Graph::new();
    let m = g.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let i = g.constant(Tensor::eye(2));
    let p = g.matmul(i, m).unwrap();
    assert_eq!(g.value(p), g.value(m));
    let a = g.constant(Tensor::matrix(1, 1, vec![3.0]).unwrap());
    let b = g.constant(Tensor::matrix(1, 1, vec![-2.5]).unwrap());
    let p = g.matmul(a, b).unwrap();
    assert_eq!(g.value(p).item().unwrap(), -7.5);
    let bad = g.constant(Tensor::zeros(&[3, 1]));
    assert!(g.matmul(m, bad).is_err());
}

#[test]
fn matmul_gradients_match_finite_differences() {
    let mut rng = rng::stream(11, 0);
    let a = rand_tensor(&mut rng, &[3, 4], -1.0, 1.0);
    let b = rand_tensor(&mut rng, &[4, 2], -1.0, 1.0);
    let bb = b.clone();
    let err = grad_check(
        |g, x| {
            let bv = g.constant(bb.clone());
            let p = g.matmul(x, bv)?;
            weighted_sum(g, p, 1)
        },
        &a,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "dA error {err}");
    let err = grad_check(
        |g, x| {
            let av = g.constant(a.clone());
            let p = g.matmul(av, x)?;
            weighted_sum(g, p, 2)
        },
        &b,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "dB error {err}");
}

#[test]
fn grad_check_trivial_cases() {
    let x = Tensor::vector(vec![1.0, 2.0]);
    let err = grad_check(
        |g, x| {
            let sq = g.mul(x, x)?;
            g.sum(sq)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-8, "{err}");
    let err = grad_check(|g, _| Ok(g.scalar(4.0)), &x, 1e-5).unwrap();
    assert_eq!(err, 0.0);
}

type UnaryCase = (&'static str, f64, f64, fn(&mut Graph, Var) -> Result<Var>);

#[test]
fn every_elementwise_and_reduction_rule_passes_grad_check() {
    let cases: Vec<UnaryCase> = vec![
        ("exp", -2.0, 2.0, |g, x| g.exp(x)),
        ("log", 0.2, 3.0, |g, x| g.log(x)),
        ("neg", -2.0, 2.0, |g, x| g.neg(x)),
        ("relu", -2.0, 2.0, |g, x| g.relu(x)),
        ("sigmoid", -4.0, 4.0, |g, x| g.sigmoid(x)),
        ("sqrt", 0.2, 3.0, |g, x| g.sqrt(x)),
        ("softplus", -6.0, 6.0, |g, x| g.softplus(x)),
        ("clamp_min", -2.0, 2.0, |g, x| g.clamp_min(x, 0.3)),
        ("square", -2.0, 2.0, |g, x| g.mul(x, x)),
        ("add_self", -2.0, 2.0, |g, x| g.add(x, x)),
        ("sub_scalar", -2.0, 2.0, |g, x| {
            let s = g.scalar(0.7);
            g.sub(s, x)
        }),
        ("div", 0.5, 2.0, |g, x| {
            let e = g.exp(x)?;
            g.div(e, x)
        }),
        ("div_by_scalar_var", 0.5, 2.0, |g, x| {
            let s = g.sum(x)?;
            g.div(x, s)
        }),
        ("sum_axis0", -2.0, 2.0, |g, x| {
            let r = g.reshape(x, &[2, 3])?;
            g.sum_axis(r, 0)
        }),
        ("sum_axis1", -2.0, 2.0, |g, x| {
            let r = g.reshape(x, &[2, 3])?;
            g.sum_axis(r, 1)
        }),
        ("logsumexp", -3.0, 3.0, |g, x| {
            let r = g.reshape(x, &[2, 3])?;
            g.logsumexp(r, 1)
        }),
        ("mean", -2.0, 2.0, |g, x| {
            let sq = g.mul(x, x)?;
            g.mean(sq)
        }),
        ("transpose", -2.0, 2.0, |g, x| {
            let r = g.reshape(x, &[2, 3])?;
            g.transpose(r)
        }),
        ("gather", -2.0, 2.0, |g, x| g.gather(x, vec![0, 5, 5, 2])),
        ("log_softmax", -3.0, 3.0, |g, x| {
            let r = g.reshape(x, &[2, 3])?;
            g.log_softmax(r)
        }),
        ("add_bias", -2.0, 2.0, |g, x| {
            let r = g.reshape(x, &[3, 2])?;
            let b = g.gather(x, vec![1, 4])?;
            g.add_bias(r, b)
        }),
    ];
    for (name, lo, hi, op) in cases {
        let mut rng = rng::stream(5, name.len() as u64);
        let mut worst: f64 = 0.0;
        for trial in 0..20 {
            let x = rand_tensor(&mut rng, &[6], lo, hi);
            let err = grad_check(
                |g, v| {
                    let y = op(g, v)?;
                    weighted_sum(g, y, trial)
                },
                &x,
                1e-5,
            )
            .unwrap();
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "{name}: worst relative error {worst}");
    }
}

#[test]
fn adjoints_are_linear() {
    // backward(f + h) == backward(f) + backward(h)
    let x0 = Tensor::vector(vec![0.3, -1.1, 0.8]);
    let build = |g: &mut Graph, x: Var, which: u8| -> Result<Var> {
        let e = g.exp(x)?;
        let f = g.sum(e)?;
        let sq = g.mul(x, x)?;
        let h = g.sum(sq)?;
        match which {
            0 => Ok(f),
            1 => Ok(h),
            _ => g.add(f, h),
        }
    };
    let grad = |which| {
        let mut g = Graph::new();
        let x = g.leaf(x0.clone());
        let r = build(&mut g, x, which).unwrap();
        g.backward(r).unwrap().wrt(&g, x)
    };
    let (gf, gh, gs) = (grad(0), grad(1), grad(2));
    for i in 0..3 {
        assert!((gf.data()[i] + gh.data()[i] - gs.data()[i]).abs() < 1e-12);
    }
}

#[test]
fn conv2d_matches_direct_sum_and_grad_checks() {
    let mut rng = rng::stream(21, 0);
    let x = rand_tensor(&mut rng, &[2, 2, 5, 4], -1.0, 1.0);
    let w = rand_tensor(&mut rng, &[3, 2, 3, 3], -1.0, 1.0);
    let b = rand_tensor(&mut rng, &[3], -1.0, 1.0);

    let mut g = Graph::new();
    let (xv, wv, bv) = (g.constant(x.clone()), g.constant(w.clone()), g.constant(b.clone()));
    let y = g.conv2d(xv, wv, bv).unwrap();
    assert_eq!(g.shape(y), &[2, 3, 3, 2]);
    // direct evaluation at one output coordinate
    let (n, o, yy, xx) = (1, 2, 1, 1);
    let mut direct = b.data()[o];
    for c in 0..2 {
        for ky in 0..3 {
            for kx in 0..3 {
                direct += x.data()[((n * 2 + c) * 5 + yy + ky) * 4 + xx + kx]
                    * w.data()[((o * 2 + c) * 3 + ky) * 3 + kx];
            }
        }
    }
    let got = g.value(y).data()[((n * 3 + o) * 3 + yy) * 2 + xx];
    assert!((got - direct).abs() < 1e-12);

    let (wc, bc, xc) = (w.clone(), b.clone(), x.clone());
    let err = grad_check(
        |g, v| {
            let (wv, bv) = (g.constant(wc.clone()), g.constant(bc.clone()));
            let y = g.conv2d(v, wv, bv)?;
            weighted_sum(g, y, 3)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "input grad {err}");
    let err = grad_check(
        |g, v| {
            let (xv, bv) = (g.constant(xc.clone()), g.constant(bc.clone()));
            let y = g.conv2d(xv, v, bv)?;
            weighted_sum(g, y, 4)
        },
        &w,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "weight grad {err}");
    let err = grad_check(
        |g, v| {
            let (xv, wv) = (g.constant(x.clone()), g.constant(w.clone()));
            let y = g.conv2d(xv, wv, v)?;
            weighted_sum(g, y, 5)
        },
        &b,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "bias grad {err}");
}

#[test]
fn max_pool_forward_ties_and_grad() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::new(vec![1, 1, 2, 2], vec![5.0, 5.0, 1.0, 5.0]).unwrap());
    let y = g.max_pool2d(x).unwrap();
    assert_eq!(g.value(y).data(), &[5.0]);
    let s = g.sum(y).unwrap();
    assert_eq!(g.backward(s).unwrap().wrt(&g, x).data(), &[1.0, 0.0, 0.0, 0.0]);

    let mut rng = rng::stream(31, 0);
    let x = rand_tensor(&mut rng, &[2, 2, 5, 4], -1.0, 1.0);
    let err = grad_check(
        |g, v| {
            let y = g.max_pool2d(v)?;
            weighted_sum(g, y, 6)
        },
        &x,
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
    assert_eq!(
        {
            let mut g = Graph::new();
            let v = g.constant(x);
            let y = g.max_pool2d(v).unwrap();
            g.shape(y).to_vec()
        },
        vec![2, 2, 2, 2]
    );
}

#[test]
fn batch_norm_train_and_eval_grad_check() {
    let mut rng = rng::stream(41, 0);
    let x = rand_tensor(&mut rng, &[5, 3], -2.0, 2.0);
    let gamma = rand_tensor(&mut rng, &[3], 0.5, 1.5);
    let beta = rand_tensor(&mut rng, &[3], -0.5, 0.5);
    let (gc, bc) = (gamma.clone(), beta.clone());
    let err = grad_check(
        |g, v| {
            let (gm, bt) = (g.constant(gc.clone()), g.constant(bc.clone()));
            let (y, _) = g.batch_norm(v, gm, bt, BatchNormMode::Batch { eps: 1e-5 })?;
            weighted_sum(g, y, 7)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "train input grad {err}");
    let xc = x.clone();
    let err = grad_check(
        |g, v| {
            let (xv, bt) = (g.constant(xc.clone()), g.constant(bc.clone()));
            let (y, _) = g.batch_norm(xv, v, bt, BatchNormMode::Batch { eps: 1e-5 })?;
            weighted_sum(g, y, 8)
        },
        &gamma,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "gamma grad {err}");
    let (mean, var) = ([0.1, -0.2, 0.3], [1.5, 0.5, 2.0]);
    let err = grad_check(
        |g, v| {
            let (gm, bt) = (g.constant(gamma.clone()), g.constant(beta.clone()));
            let (y, _) = g.batch_norm(v, gm, bt, BatchNormMode::Running { mean: &mean, var: &var, eps: 1e-5 })?;
            weighted_sum(g, y, 9)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "eval input grad {err}");
}

#[test]
fn batch_norm_reports_unbiased_batch_statistics() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::matrix(2, 1, vec![1.0, 3.0]).unwrap());
    let gm = g.constant(Tensor::ones(&[1]));
    let bt = g.constant(Tensor::zeros(&[1]));
    let (y, stats) = g.batch_norm(x, gm, bt, BatchNormMode::Batch { eps: 0.0 }).unwrap();
    let stats = stats.unwrap();
    assert_eq!(stats.mean, vec![2.0]);
    assert_eq!(stats.var, vec![2.0]);
    assert_eq!(g.value(y).data(), &[-1.0, 1.0]);
}

#[test]
fn evaluation_is_deterministic() {
    let run = || {
        let mut rng = rng::stream(51, 0);
        let x = rand_tensor(&mut rng, &[4, 3], -1.0, 1.0);
        let mut g = Graph::new();
        let v = g.leaf(x);
        let l = g.log_softmax(v).unwrap();
        let s = weighted_sum(&mut g, l, 1).unwrap();
        let grads = g.backward(s).unwrap();
        (g.value(s).item().unwrap().to_bits(), grads.wrt(&g, v))
    };
    assert_eq!(run(), run());
}

#[test]
fn max_shift_treats_the_shift_as_constant() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::matrix(2, 2, vec![1.0, 3.0, -2.0, 0.0]).unwrap());
    let y = g.max_const_shift(x, 1).unwrap();
    assert_eq!(g.value(y).data(), &[-2.0, 0.0, -2.0, 0.0]);
    let s = weighted_sum(&mut g, y, 10).unwrap();
    let got = g.backward(s).unwrap().wrt(&g, x);
    let mut rng = rng::stream(10, 99);
    let w = rand_tensor(&mut rng, &[2, 2], -1.0, 1.0);
    assert_eq!(got, w);
}
