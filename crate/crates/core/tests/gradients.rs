//! Tape gradients against central finite differences.

mod common;

use std::sync::Arc;

use bitbcnn::encoder::{conv_windows, record_encoding, EncoderNodes};
use bitbcnn::numeric::{Mode, RngStream, Tensor};
use common::{
    model_gradient_error, op_gradient_error, random_pair, random_tensor, random_tree, small_model,
};

const TOL: f64 = 1e-4;
const TRIALS: u64 = 100;

fn check<F>(name: &str, mut case: F)
where
    F: FnMut(&mut RngStream) -> f64,
{
    let mut worst = 0.0f64;
    for t in 0..TRIALS {
        let mut rng = RngStream::new(1000 + t);
        worst = worst.max(case(&mut rng));
    }
    assert!(worst < TOL, "{name}: worst relative error {worst:e}");
}

fn dims(rng: &mut RngStream) -> (usize, usize, usize) {
    (
        rng.range_inclusive(1, 4),
        rng.range_inclusive(1, 4),
        rng.range_inclusive(1, 4),
    )
}

#[test]
fn gather() {
    check("gather", |rng| {
        let (v, e, n) = dims(rng);
        let rows: Vec<usize> = (0..n + 1).map(|_| rng.below(v)).collect();
        let table = random_tensor(&[v, e], 1.0, rng);
        op_gradient_error(&[table], |t, x| t.gather(x[0], &rows), rng)
    });
}

#[test]
fn matmul_nt_matrix_and_vector() {
    check("matmul_nt", |rng| {
        let (n, m, k) = dims(rng);
        let x = if rng.bernoulli(0.5) {
            random_tensor(&[n, k], 1.0, rng)
        } else {
            random_tensor(&[k], 1.0, rng)
        };
        let w = random_tensor(&[m, k], 1.0, rng);
        op_gradient_error(&[x, w], |t, p| t.matmul_nt(p[0], p[1]), rng)
    });
}

#[test]
fn affine_with_and_without_bias() {
    check("affine", |rng| {
        let (m, n, _) = dims(rng);
        let w = random_tensor(&[m, n], 1.0, rng);
        let x = random_tensor(&[n], 1.0, rng);
        let b = random_tensor(&[m], 1.0, rng);
        let with_bias = rng.bernoulli(0.5);
        op_gradient_error(
            &[w, x, b],
            |t, p| t.affine(p[0], p[1], with_bias.then_some(p[2])),
            rng,
        )
    });
}

#[test]
fn window_sum() {
    check("window_sum", |rng| {
        let n = rng.range_inclusive(1, 8);
        let c = rng.range_inclusive(1, 3);
        let plan = Arc::new(conv_windows(&random_tree("cpp", n, 3, rng)));
        let ins: Vec<Tensor> = (0..3).map(|_| random_tensor(&[n, c], 1.0, rng)).collect();
        op_gradient_error(
            &ins,
            |t, p| t.window_sum(p[0], p[1], p[2], Arc::clone(&plan)),
            rng,
        )
    });
}

#[test]
fn add_row_bias() {
    check("add_row_bias", |rng| {
        let (n, c, _) = dims(rng);
        let x = random_tensor(&[n, c], 1.0, rng);
        let b = random_tensor(&[c], 1.0, rng);
        op_gradient_error(&[x, b], |t, p| t.add_row_bias(p[0], p[1]), rng)
    });
}

#[test]
fn elementwise_binary() {
    check("add/mul", |rng| {
        let (n, c, _) = dims(rng);
        let a = random_tensor(&[n, c], 1.0, rng);
        let b = random_tensor(&[n, c], 1.0, rng);
        let use_mul = rng.bernoulli(0.5);
        op_gradient_error(
            &[a, b],
            |t, p| {
                if use_mul {
                    t.mul(p[0], p[1])
                } else {
                    t.add(p[0], p[1])
                }
            },
            rng,
        )
    });
}

#[test]
fn mul_const_and_scale() {
    check("mul_const/scale", |rng| {
        let (n, _, _) = dims(rng);
        let x = random_tensor(&[n], 1.0, rng);
        let mask = random_tensor(&[n], 2.0, rng);
        let c = rng.uniform_range(-3.0, 3.0);
        op_gradient_error(
            &[x],
            |t, p| {
                let m = t.mul_const(p[0], mask.clone())?;
                t.scale(m, c)
            },
            rng,
        )
    });
}

#[test]
fn tanh() {
    check("tanh", |rng| {
        let (n, c, _) = dims(rng);
        let x = random_tensor(&[n, c], 2.5, rng);
        op_gradient_error(&[x], |t, p| t.tanh(p[0]), rng)
    });
}

#[test]
fn max_pool_rows() {
    check("max_pool_rows", |rng| {
        let (n, c, _) = dims(rng);
        let x = random_tensor(&[n, c], 1.0, rng);
        op_gradient_error(&[x], |t, p| t.max_pool_rows(p[0]), rng)
    });
}

#[test]
fn concat_reshape_sum() {
    check("concat/reshape/sum", |rng| {
        let (n, c, k) = dims(rng);
        let a = random_tensor(&[n, c], 1.0, rng);
        let b = random_tensor(&[k], 1.0, rng);
        op_gradient_error(
            &[a, b],
            |t, p| {
                let r = t.reshape(p[0], vec![n * c])?;
                let j = t.concat(r, p[1])?;
                let s = t.sum(j)?;
                let sq = t.mul(s, s)?;
                t.add(sq, s)
            },
            rng,
        )
    });
}

#[test]
fn softmax_cross_entropy() {
    check("softmax/cross_entropy", |rng| {
        let k = rng.range_inclusive(2, 5);
        let label = rng.below(k);
        let z = random_tensor(&[k], 3.0, rng);
        op_gradient_error(
            &[z],
            |t, p| {
                let s = t.softmax(p[0])?;
                t.cross_entropy(s, label)
            },
            rng,
        )
    });
}

#[test]
fn softmax_alone() {
    check("softmax", |rng| {
        let k = rng.range_inclusive(2, 5);
        let z = random_tensor(&[k], 3.0, rng);
        op_gradient_error(&[z], |t, p| t.softmax(p[0]), rng)
    });
}

#[test]
fn encoder_on_random_trees() {
    check("encode_tree", |rng| {
        let (e, c) = (rng.range_inclusive(2, 4), rng.range_inclusive(2, 4));
        let v = 4;
        let tree = random_tree("cpp", rng.range_inclusive(3, 10), v, rng);
        let ins = vec![
            random_tensor(&[v, e], 1.0, rng),
            random_tensor(&[c, e], 1.0, rng),
            random_tensor(&[c, e], 1.0, rng),
            random_tensor(&[c, e], 1.0, rng),
            random_tensor(&[c], 0.5, rng),
        ];
        op_gradient_error(
            &ins,
            |t, p| {
                record_encoding(
                    t,
                    &tree,
                    EncoderNodes {
                        embedding: p[0],
                        w_top: p[1],
                        w_left: p[2],
                        w_right: p[3],
                        bias: p[4],
                    },
                )
            },
            rng,
        )
    });
}

#[test]
fn full_model_in_both_modes() {
    let mut worst = 0.0f64;
    for t in 0..25u64 {
        let model = small_model(4, 4, 4, 4, 5, 50 + t);
        let mut rng = RngStream::new(900 + t);
        let sample = random_pair(&model, 3, 8, &mut rng);
        let mode = if t % 2 == 0 { Mode::Train } else { Mode::Infer };
        worst = worst.max(model_gradient_error(&model, &sample, mode, 77 + t));
    }
    assert!(worst < TOL, "worst relative error {worst:e}");
}

#[test]
fn frozen_embeddings_receive_no_update() {
    let mut model = small_model(3, 3, 3, 3, 4, 8);
    model.freeze_embeddings(true);
    let sample = random_pair(&model, 3, 6, &mut RngStream::new(2));
    let before = model.params().clone();
    let out = model
        .loss_and_gradients(&sample, Mode::Infer, &mut RngStream::new(0))
        .unwrap();
    model.params_mut().zero_grad();
    model.params_mut().accumulate(&out.grads);
    bitbcnn::numeric::sgd_step(model.params_mut(), 0.5).unwrap();
    for ((_, a), (_, b)) in before.iter().zip(model.params().iter()) {
        if a.name.ends_with("embedding") {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
    }
}
