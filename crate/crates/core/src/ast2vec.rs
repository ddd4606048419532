//! Node-type embeddings learned skip-gram style: a parent type predicts its
//! child types through a full softmax over the vocabulary.
//!
//! Embedding file layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "AST2VEC\0"
//! version   u32      1
//! language  u32 length + UTF-8
//! V         u64      rows, including the unknown slot
//! E         u64      columns
//! vectors   V·E f64  row-major
//! names     u64 count (= V-1), then u32 length + UTF-8 per known name
//! ```

use std::path::Path;

use crate::ast::{IndexedAst, Vocabulary};
use crate::binfmt::{Reader, Writer};
use crate::error::{Error, Result};
use crate::numeric::{NodeId, ParamId, ParamStore, RngStream, Sgd, Tape, Tensor};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"AST2VEC\0";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextPair {
    pub parent: usize,
    pub child: usize,
}

/// One pair per parent→child edge, in preorder.
pub fn emit_context_pairs(tree: &IndexedAst) -> Vec<ContextPair> {
    let mut out = Vec::with_capacity(tree.node_count().saturating_sub(1));
    for v in 0..tree.node_count() {
        for &c in tree.children(v) {
            out.push(ContextPair {
                parent: tree.type_of(v),
                child: tree.type_of(c),
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkipGramConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 0.05,
        }
    }
}

/// Input and output projections of a trained skip-gram model. Only the input
/// rows become the embedding table; the output rows exist for training.
#[derive(Clone, Debug)]
pub struct SkipGram {
    pub input: Tensor,
    pub output: Tensor,
    /// Mean cross-entropy over all pairs: entry 0 at initialization, entry
    /// `k` after epoch `k`.
    pub history: Vec<f64>,
}

struct SkipGramParams {
    store: ParamStore,
    input: ParamId,
    output: ParamId,
}

fn record_pair_loss(
    tape: &mut Tape<'_>,
    input: ParamId,
    output: ParamId,
    pair: ContextPair,
) -> Result<NodeId> {
    let inp = tape.param(input);
    let out = tape.param(output);
    let row = tape.gather(inp, &[pair.parent])?;
    let logits = tape.matmul_nt(row, out)?;
    let v = tape.value(logits).numel();
    let logits = tape.reshape(logits, vec![v])?;
    let probs = tape.softmax(logits)?;
    tape.cross_entropy(probs, pair.child)
}

/// Cross-entropy of one pair, with gradients, against explicit matrices.
pub fn pair_loss_with_grad(
    input: &Tensor,
    output: &Tensor,
    pair: ContextPair,
) -> Result<(f64, Tensor, Tensor)> {
    let mut store = ParamStore::new();
    let i = store.insert("input", input.clone())?;
    let o = store.insert("output", output.clone())?;
    let mut tape = Tape::new(&store);
    let loss = record_pair_loss(&mut tape, i, o, pair)?;
    let g = tape.backward(loss)?;
    let value = tape.value(loss).data()[0];
    let gi = g
        .get(i)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(input.shape()));
    let go = g
        .get(o)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(output.shape()));
    Ok((value, gi, go))
}

/// Mean cross-entropy of `pairs` under the given projections. Evaluated
/// directly, without recording a tape.
pub fn mean_pair_loss(input: &Tensor, output: &Tensor, pairs: &[ContextPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|p| {
            let h = input.row(p.parent);
            let logits: Vec<f64> = (0..output.shape()[0])
                .map(|c| crate::numeric::dot(h, output.row(c)))
                .collect();
            let probs = crate::numeric::softmax_slice(&logits);
            -probs[p.child].max(crate::numeric::PROB_FLOOR).ln()
        })
        .sum();
    total / pairs.len() as f64
}

fn init_params(v: usize, e: usize, rng: &mut RngStream) -> Result<SkipGramParams> {
    let r = 0.5 / e as f64;
    let draw = |rng: &mut RngStream| -> Result<Tensor> {
        Tensor::matrix(v, e, (0..v * e).map(|_| rng.uniform_range(-r, r)).collect())
    };
    let input_t = draw(rng)?;
    let output_t = draw(rng)?;
    let mut store = ParamStore::new();
    let input = store.insert("input", input_t)?;
    let output = store.insert("output", output_t)?;
    Ok(SkipGramParams {
        store,
        input,
        output,
    })
}

/// Trains input/output projections over `pairs` with plain SGD, visiting the
/// pairs in a freshly shuffled order every epoch.
pub fn train_embeddings(
    pairs: &[ContextPair],
    vocab_size: usize,
    dim: usize,
    config: SkipGramConfig,
    rng: &mut RngStream,
) -> Result<SkipGram> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "no context pairs to train on".into(),
        ));
    }
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "embedding width must be at least 2, got {dim}"
        )));
    }
    if let Some(p) = pairs
        .iter()
        .find(|p| p.parent >= vocab_size || p.child >= vocab_size)
    {
        return Err(Error::InvalidArgument(format!(
            "pair {p:?} outside vocabulary of size {vocab_size}"
        )));
    }
    let mut params = init_params(vocab_size, dim, rng)?;
    let mut opt = Sgd::new(config.lr, None)?;
    let mut history = Vec::with_capacity(config.epochs + 1);
    history.push(mean_pair_loss(
        params.store.value(params.input),
        params.store.value(params.output),
        pairs,
    ));

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for &k in &order {
            let grads = {
                let mut tape = Tape::new(&params.store);
                let loss = record_pair_loss(&mut tape, params.input, params.output, pairs[k])?;
                tape.backward(loss)?
            };
            params.store.zero_grad();
            params.store.accumulate(&grads);
            opt.step(&mut params.store)?;
        }
        history.push(mean_pair_loss(
            params.store.value(params.input),
            params.store.value(params.output),
            pairs,
        ));
    }
    Ok(SkipGram {
        input: params.store.value(params.input).clone(),
        output: params.store.value(params.output).clone(),
        history,
    })
}

/// Pre-trained vectors for one language's node types.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    vectors: Tensor,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, vectors: Tensor) -> Result<Self> {
        let (v, e) = vectors.dims2()?;
        if v != vocab.size() {
            return Err(Error::dim("embedding rows", vocab.size(), v));
        }
        if e < 2 {
            return Err(Error::InvalidArgument(format!(
                "embedding width must be at least 2, got {e}"
            )));
        }
        vectors.ensure_finite("embedding table")?;
        Ok(Self { vocab, vectors })
    }

    pub fn language(&self) -> &str {
        self.vocab.language()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(EMBEDDING_MAGIC);
        w.u32(EMBEDDING_VERSION);
        w.str(self.vocab.language());
        w.u64(self.vocab.size() as u64);
        w.u64(self.dim() as u64);
        w.f64s(self.vectors.data());
        w.u64(self.vocab.known_count() as u64);
        for n in self.vocab.names() {
            w.str(n);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "embedding file");
        if r.take(8)? != EMBEDDING_MAGIC {
            return Err(r.fail("bad magic"));
        }
        let version = r.u32()?;
        if version != EMBEDDING_VERSION {
            return Err(r.fail(format!("unsupported version {version}")));
        }
        let language = r.str()?;
        let v = r.usize()?;
        let e = r.usize()?;
        let data = r.f64s(v.checked_mul(e).ok_or_else(|| r.fail("size overflow"))?)?;
        let count = r.usize()?;
        if count + 1 != v {
            return Err(r.fail(format!("{count} names for {v} rows")));
        }
        let names = (0..count).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        r.expect_end()?;
        if names.windows(2).any(|w| w[0] >= w[1]) {
            return Err(r.fail("vocabulary names not strictly sorted"));
        }
        let vocab = Vocabulary::from_names(language, names);
        let vectors = Tensor::matrix(v, e, data).map_err(|err| r.fail(err.to_string()))?;
        Self::new(vocab, vectors).map_err(|err| r.fail(err.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

/// The `k` rows most cosine-similar to `query`, most similar first, ties by
/// ascending index. The query row and zero-norm rows are excluded.
pub fn nearest_types(vectors: &Tensor, query: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let (v, _) = vectors.dims2()?;
    if query >= v {
        return Err(Error::InvalidArgument(format!(
            "type index {query} out of range {v}"
        )));
    }
    if k >= v {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be below V = {v}"
        )));
    }
    let norm = |i: usize| crate::numeric::dot(vectors.row(i), vectors.row(i)).sqrt();
    let qn = norm(query);
    if qn == 0.0 {
        return Ok(Vec::new());
    }
    let mut scored: Vec<(usize, f64)> = (0..v)
        .filter(|&i| i != query)
        .filter_map(|i| {
            let n = norm(i);
            (n > 0.0).then(|| {
                (
                    i,
                    crate::numeric::dot(vectors.row(query), vectors.row(i)) / (qn * n),
                )
            })
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}
