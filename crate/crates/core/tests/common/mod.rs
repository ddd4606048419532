//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::sync::Arc;

use bitbcnn::ast::{IndexedAst, Vocabulary};
use bitbcnn::model::{BiTbcnnModel, ModelConfig, PairSample, SideInit};
use bitbcnn::numeric::{
    finite_difference_gradient, max_relative_error, Mode, NodeId, ParamId, ParamStore, RngStream,
    Tape, Tensor, DEFAULT_STEP,
};
use bitbcnn::Result;

pub fn random_tensor(shape: &[usize], scale: f64, rng: &mut RngStream) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.uniform_range(-scale, scale)).collect(),
    )
    .unwrap()
}

/// Random tree with `n` nodes: node `i > 0` hangs under a uniformly chosen
/// earlier node, then ids are renumbered into preorder.
pub fn random_tree(language: &str, n: usize, types: usize, rng: &mut RngStream) -> IndexedAst {
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let p = rng.below(i);
        kids[p].push(i);
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(kids[v].iter().rev());
    }
    let mut new_id = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        new_id[v] = k;
    }
    let type_of: Vec<usize> = (0..n).map(|_| rng.below(types)).collect();
    let t: Vec<usize> = order.iter().map(|&v| type_of[v]).collect();
    let c: Vec<Vec<usize>> = order
        .iter()
        .map(|&v| kids[v].iter().map(|&k| new_id[k]).collect())
        .collect();
    IndexedAst::from_parts(language, t, c).unwrap()
}

pub fn vocab(language: &str, known: usize) -> Vocabulary {
    Vocabulary::from_names(language, (0..known).map(|i| format!("t{i}")))
}

pub fn small_model(
    e: usize,
    c: usize,
    h1: usize,
    h2: usize,
    known: usize,
    seed: u64,
) -> BiTbcnnModel {
    let config = ModelConfig {
        embedding_dim: e,
        conv_dim: c,
        hidden1: h1,
        hidden2: h2,
        ..ModelConfig::default()
    };
    BiTbcnnModel::init(
        config,
        SideInit::Random(vocab("cpp", known)),
        SideInit::Random(vocab("java", known)),
        &mut RngStream::new(seed),
    )
    .unwrap()
}

pub fn random_pair(
    model: &BiTbcnnModel,
    min: usize,
    max: usize,
    rng: &mut RngStream,
) -> PairSample {
    let v = model.vocab(bitbcnn::model::Side::Left).size();
    let l = random_tree("cpp", rng.range_inclusive(min, max), v, rng);
    let r = random_tree("java", rng.range_inclusive(min, max), v, rng);
    PairSample::new(Arc::new(l), Arc::new(r), rng.below(2)).unwrap()
}

/// Worst relative error between tape gradients and central differences of
/// the full pair loss. Train mode replays the same dropout masks by
/// reseeding the stream for every evaluation.
pub fn model_gradient_error(
    model: &BiTbcnnModel,
    sample: &PairSample,
    mode: Mode,
    seed: u64,
) -> f64 {
    let analytic = model
        .loss_and_gradients(sample, mode, &mut RngStream::new(seed))
        .unwrap()
        .grads;
    let numeric = finite_difference_gradient(
        |store| model.pair_loss_with(store, sample, mode, &mut RngStream::new(seed)),
        model.params(),
        DEFAULT_STEP,
    )
    .unwrap();
    max_relative_error(model.params(), &analytic, &numeric)
}

/// Gradient check for a tape program over `inputs`. The program's output is
/// reduced to a scalar by a fixed random weighting so every output entry
/// contributes.
pub fn op_gradient_error<F>(inputs: &[Tensor], program: F, rng: &mut RngStream) -> f64
where
    F: Fn(&mut Tape<'_>, &[NodeId]) -> Result<NodeId>,
{
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| store.insert(format!("in{i}"), t.clone()).unwrap())
        .collect();
    let weights = {
        let mut tape = Tape::new(&store);
        let nodes: Vec<NodeId> = ids.iter().map(|&id| tape.param(id)).collect();
        let out = program(&mut tape, &nodes).unwrap();
        random_tensor(tape.value(out).shape(), 1.0, rng)
    };
    let loss = |store: &ParamStore| -> Result<(f64, bitbcnn::numeric::Gradients)> {
        let mut tape = Tape::new(store);
        let nodes: Vec<NodeId> = ids.iter().map(|&id| tape.param(id)).collect();
        let out = program(&mut tape, &nodes)?;
        let out = if tape.value(out).is_scalar() {
            out
        } else {
            let w = tape.constant(weights.clone())?;
            let m = tape.mul(out, w)?;
            tape.sum(m)?
        };
        Ok((tape.value(out).data()[0], tape.backward(out)?))
    };
    let analytic = loss(&store).unwrap().1;
    let numeric =
        finite_difference_gradient(|s| loss(s).map(|x| x.0), &store, DEFAULT_STEP).unwrap();
    max_relative_error(&store, &analytic, &numeric)
}
