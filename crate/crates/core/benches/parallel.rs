//! Sequential against rayon-backed evaluation of the same pair set.

use std::hint::black_box;
use std::sync::Arc;

use bitbcnn::ast::{build_vocabulary, index_tree, IndexedAst};
use bitbcnn::model::{BiTbcnnModel, ModelConfig, PairSample, SideInit};
use bitbcnn::numeric::RngStream;
use bitbcnn::par::Parallelism;
use bitbcnn::pipeline::{evaluate_binary, sample_epoch};
use bitbcnn::synth::{generate_corpus, SynthGrammar, DEFAULT_GRAMMAR};
use criterion::{criterion_group, criterion_main, Criterion};

fn setup() -> (BiTbcnnModel, Vec<PairSample>) {
    let grammar = SynthGrammar::parse(DEFAULT_GRAMMAR).unwrap();
    let corpus = generate_corpus(&grammar, 10, &RngStream::new(1)).unwrap();
    let side = |lang: &str| {
        let asts: Vec<_> = corpus
            .iter()
            .filter(|a| a.language == lang)
            .cloned()
            .collect();
        let vocab = build_vocabulary(&asts, lang).unwrap();
        let trees: Vec<Arc<IndexedAst>> = asts
            .iter()
            .map(|a| Arc::new(index_tree(a, &vocab).unwrap()))
            .collect();
        (vocab, trees)
    };
    let (lv, lt) = side("cpp");
    let (rv, rt) = side("java");
    let model = BiTbcnnModel::init(
        ModelConfig::default(),
        SideInit::Random(lv),
        SideInit::Random(rv),
        &mut RngStream::new(2),
    )
    .unwrap();
    let pairs = sample_epoch(&lt, &rt, 100, 100, &mut RngStream::new(3)).unwrap();
    (model, pairs)
}

fn bench(c: &mut Criterion) {
    let (model, pairs) = setup();
    let mut g = c.benchmark_group("evaluate_binary_200_pairs");
    g.sample_size(10);
    for (name, mode) in [
        ("sequential", Parallelism::Sequential),
        ("parallel", Parallelism::Parallel),
    ] {
        g.bench_function(name, |b| {
            b.iter(|| black_box(evaluate_binary(&model, &pairs, mode).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
