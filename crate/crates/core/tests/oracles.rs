//! Hand-computed values, exhaustive sweeps and brute-force counts.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use bitbcnn::ast::IndexedAst;
use bitbcnn::corpus::count_pairs;
use bitbcnn::encoder::{
    compute_eta, dynamic_max_pool, encode_tree, tree_convolution, EtaInputs, TbcnnParams,
};
use bitbcnn::model::PairSample;
use bitbcnn::numeric::{Mode, RngStream, Tensor};
use common::{random_tensor, random_tree, small_model};

fn m(rows: &[[f64; 2]]) -> Tensor {
    Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
    }
}

#[test]
fn eta_sweep() {
    for d in 1..=4 {
        for d_i in 1..=d {
            for n in 1..=8 {
                for p in 1..=n {
                    let w = compute_eta(EtaInputs::new(d_i, d, p, n).unwrap());
                    assert!(
                        w.top >= 0.0 && w.left >= 0.0 && w.right >= 0.0,
                        "{d_i} {d} {p} {n}: {w:?}"
                    );
                    assert!(
                        (w.top + w.left + w.right - 1.0).abs() <= 1e-12,
                        "{d_i} {d} {p} {n}: {w:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn eta_boundaries_are_exact() {
    let w = |d_i, d, p, n| {
        let e = compute_eta(EtaInputs::new(d_i, d, p, n).unwrap());
        (e.top, e.left, e.right)
    };
    assert_eq!(w(2, 2, 1, 1), (1.0, 0.0, 0.0));
    assert_eq!(w(1, 2, 1, 3), (0.0, 1.0, 0.0));
    assert_eq!(w(1, 2, 3, 3), (0.0, 0.0, 1.0));
    assert_eq!(w(1, 2, 2, 3), (0.0, 0.5, 0.5));
    assert_eq!(w(1, 2, 1, 1), (0.0, 0.5, 0.5));
    assert_eq!(w(1, 1, 1, 1).0, 1.0);
}

fn three_node_params() -> (Tensor, TbcnnParams) {
    let emb = m(&[[0.2, -0.1], [0.4, 0.3], [-0.5, 0.6]]);
    let params = TbcnnParams {
        w_top: m(&[[1.0, 0.5], [-0.5, 1.0]]),
        w_left: m(&[[0.3, -0.2], [0.1, 0.4]]),
        w_right: m(&[[-0.1, 0.2], [0.6, -0.3]]),
        bias: Tensor::vector(vec![0.1, -0.1]),
    };
    (emb, params)
}

#[test]
fn three_node_tree_against_hand_values() {
    // root type 0 with children of types 1 and 2; values from a separate
    // step-by-step script
    let tree =
        IndexedAst::from_parts("cpp", vec![0, 1, 2], vec![vec![1, 2], vec![], vec![]]).unwrap();
    let (emb, params) = three_node_params();
    let conv = tree_convolution(&tree, &emb, &params).unwrap();
    close(
        conv.row(0),
        &[0.4462436102487797, -0.5511280285381469],
        1e-12,
    );
    close(conv.row(1), &[0.5716699660851173, 0.0], 1e-12);
    close(
        conv.row(2),
        &[-0.09966799462495582, 0.6351489523872873],
        1e-12,
    );
    let enc = encode_tree(&tree, &emb, &params).unwrap();
    close(enc.data(), &[0.5716699660851173, 0.6351489523872873], 1e-12);
}

#[test]
fn tiny_model_forward_against_hand_values() {
    let mut model = small_model(2, 2, 2, 2, 2, 1);
    let set = |model: &mut bitbcnn::model::BiTbcnnModel, name: &str, t: Tensor| {
        model.set_param(name, t).unwrap()
    };
    set(
        &mut model,
        "left.embedding",
        m(&[[0.1, -0.2], [0.3, 0.4], [0.0, 0.0]]),
    );
    set(&mut model, "left.conv.w_top", m(&[[0.5, -0.1], [0.2, 0.3]]));
    set(
        &mut model,
        "left.conv.w_left",
        m(&[[0.1, 0.2], [-0.3, 0.4]]),
    );
    set(
        &mut model,
        "left.conv.w_right",
        m(&[[-0.2, 0.1], [0.05, -0.15]]),
    );
    set(
        &mut model,
        "left.conv.bias",
        Tensor::vector(vec![0.01, -0.02]),
    );
    set(
        &mut model,
        "right.embedding",
        m(&[[-0.3, 0.2], [0.25, -0.1], [0.0, 0.0]]),
    );
    set(
        &mut model,
        "right.conv.w_top",
        m(&[[0.3, 0.2], [-0.1, 0.4]]),
    );
    set(
        &mut model,
        "right.conv.w_left",
        m(&[[0.2, -0.2], [0.1, 0.1]]),
    );
    set(
        &mut model,
        "right.conv.w_right",
        m(&[[0.15, 0.05], [-0.25, 0.3]]),
    );
    set(
        &mut model,
        "right.conv.bias",
        Tensor::vector(vec![0.0, 0.03]),
    );
    set(
        &mut model,
        "fc1.weight",
        Tensor::from_rows(&[vec![0.1, -0.2, 0.3, 0.4], vec![-0.5, 0.2, 0.1, -0.1]]).unwrap(),
    );
    set(&mut model, "fc1.bias", Tensor::vector(vec![0.05, -0.05]));
    set(&mut model, "fc2.weight", m(&[[0.6, -0.4], [0.3, 0.8]]));
    set(&mut model, "fc2.bias", Tensor::vector(vec![0.0, 0.1]));
    set(&mut model, "out.weight", m(&[[0.7, -0.3], [-0.5, 0.9]]));
    set(&mut model, "out.bias", Tensor::vector(vec![0.02, -0.01]));

    let left = IndexedAst::from_parts("cpp", vec![0, 1], vec![vec![1], vec![]]).unwrap();
    let right = IndexedAst::from_parts("java", vec![1, 0], vec![vec![1], vec![]]).unwrap();
    let p = model
        .forward_pair(&left, &right, Mode::Infer, &mut RngStream::new(0))
        .unwrap();
    close(&p, &[0.5191651964051082, 0.48083480359489195], 1e-12);
    assert_eq!(model.predict_similarity(&left, &right).unwrap(), (0, p[1]));

    let sample = PairSample::new(Arc::new(left), Arc::new(right), 1).unwrap();
    let loss = model
        .pair_loss(&sample, Mode::Infer, &mut RngStream::new(0))
        .unwrap();
    assert!((loss + 0.48083480359489195f64.ln()).abs() < 1e-12);
}

#[test]
fn pooling_is_permutation_invariant() {
    let mut rng = RngStream::new(31);
    for _ in 0..1000 {
        let n = rng.range_inclusive(1, 12);
        let c = rng.range_inclusive(1, 6);
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| random_tensor(&[c], 5.0, &mut rng).into_data())
            .collect();
        let a = dynamic_max_pool(&rows).unwrap();
        rng.shuffle(&mut rows);
        assert_eq!(a, dynamic_max_pool(&rows).unwrap());
        for r in &rows {
            assert!(r.iter().zip(&a).all(|(x, m)| x <= m));
        }
    }
}

#[test]
fn pooling_single_node_identity() {
    let mut rng = RngStream::new(32);
    for _ in 0..1000 {
        let c = rng.range_inclusive(1, 6);
        let row = random_tensor(&[c], 5.0, &mut rng).into_data();
        assert_eq!(dynamic_max_pool(std::slice::from_ref(&row)).unwrap(), row);
    }
    assert!(dynamic_max_pool(&[]).is_err());
}

#[test]
fn encoder_output_in_tanh_range_and_shape() {
    let mut rng = RngStream::new(33);
    for _ in 0..200 {
        let (e, c) = (rng.range_inclusive(1, 5), rng.range_inclusive(1, 5));
        let tree = random_tree("cpp", rng.range_inclusive(1, 15), 4, &mut rng);
        let emb = random_tensor(&[4, e], 3.0, &mut rng);
        let params = TbcnnParams {
            w_top: random_tensor(&[c, e], 3.0, &mut rng),
            w_left: random_tensor(&[c, e], 3.0, &mut rng),
            w_right: random_tensor(&[c, e], 3.0, &mut rng),
            bias: random_tensor(&[c], 1.0, &mut rng),
        };
        let v = encode_tree(&tree, &emb, &params).unwrap();
        assert_eq!(v.shape(), &[c]);
        assert!(v.data().iter().all(|x| (-1.0..=1.0).contains(x)));
        assert_eq!(v, encode_tree(&tree.clone(), &emb, &params).unwrap());
    }
}

#[test]
fn dominated_child_leaves_pool_unchanged() {
    // all-zero W_left/W_right keep parents independent of children; a new
    // leaf whose own output is elementwise below the pool changes nothing
    let (emb, mut params) = three_node_params();
    params.w_left = Tensor::zeros(&[2, 2]);
    params.w_right = Tensor::zeros(&[2, 2]);
    let base = IndexedAst::from_parts("cpp", vec![1, 2], vec![vec![1], vec![]]).unwrap();
    let pooled = encode_tree(&base, &emb, &params).unwrap();
    let leaf = tree_convolution(
        &IndexedAst::from_parts("cpp", vec![0], vec![vec![]]).unwrap(),
        &emb,
        &params,
    )
    .unwrap();
    assert!(leaf.data().iter().zip(pooled.data()).all(|(x, p)| x <= p));
    let grown =
        IndexedAst::from_parts("cpp", vec![1, 2, 0], vec![vec![1, 2], vec![], vec![]]).unwrap();
    assert_eq!(encode_tree(&grown, &emb, &params).unwrap(), pooled);
}

fn brute_force(left: &[usize], right: &[usize]) -> (u128, u128) {
    let (mut total, mut similar) = (0u128, 0u128);
    for a in left {
        for b in right {
            total += 1;
            similar += u128::from(a == b);
        }
    }
    (total, similar)
}

#[test]
fn pair_counts_match_enumeration() {
    let mut rng = RngStream::new(34);
    for _ in 0..100 {
        let labels = rng.range_inclusive(1, 6);
        let l: Vec<usize> = (0..rng.range_inclusive(0, 50))
            .map(|_| rng.below(labels))
            .collect();
        let r: Vec<usize> = (0..rng.range_inclusive(0, 50))
            .map(|_| rng.below(labels))
            .collect();
        let hist = |v: &[usize]| {
            let mut h: BTreeMap<String, u64> = BTreeMap::new();
            for x in v {
                *h.entry(format!("l{x}")).or_default() += 1;
            }
            h
        };
        let c = count_pairs(&hist(&l), &hist(&r));
        let (total, similar) = brute_force(&l, &r);
        assert_eq!(
            (c.total, c.similar, c.dissimilar),
            (total, similar, total - similar)
        );
    }
}

#[test]
fn full_scale_pair_total() {
    let six = |n: u64| -> BTreeMap<String, u64> {
        ["ms", "bs", "qs", "ll", "bfs", "kns"]
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), n / 6 + u64::from((i as u64) < n % 6)))
            .collect()
    };
    let c = count_pairs(&six(2500), &six(2500));
    assert_eq!(c.total, 6_250_000);
    // about 417 per label and side
    assert!(
        (1_030_000..=1_050_000).contains(&c.similar),
        "{}",
        c.similar
    );
}
