//! Two tree encoders, one per language, joined by two fully connected
//! layers and a two-way softmax (index 1 = same algorithm).
//!
//! Model file layout (little-endian):
//!
//! ```text
//! magic      8 bytes  "BITBCNN\0"
//! version    u32      1
//! config     u32 length + JSON
//! metadata   u32 length + JSON
//! vocab x2   language, u64 name count, names (left side first)
//! tensors    u64 count, then per tensor: name, rank u32, dims u64, f64 data
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ast::{validate_tag, IndexedAst, Vocabulary};
use crate::ast2vec::EmbeddingTable;
use crate::binfmt::{Reader, Writer};
use crate::encoder::{glorot_range, record_encoding, uniform_matrix, EncoderNodes, TbcnnParams};
use crate::error::{Error, Result};
use crate::numeric::{
    dropout_mask, Gradients, Mode, NodeId, ParamId, ParamStore, RngStream, Tape, Tensor,
};

pub const MODEL_MAGIC: &[u8; 8] = b"BITBCNN\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub conv_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub keep_prob: f64,
    pub left_language: String,
    pub right_language: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 30,
            conv_dim: 100,
            hidden1: 200,
            hidden2: 200,
            keep_prob: 0.7,
            left_language: "cpp".into(),
            right_language: "java".into(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("conv_dim", self.conv_dim),
            ("hidden1", self.hidden1),
            ("hidden2", self.hidden2),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.embedding_dim < 2 {
            return Err(Error::Config("embedding_dim must be at least 2".into()));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config(format!(
                "keep_prob must lie in (0, 1], got {}",
                self.keep_prob
            )));
        }
        validate_tag("language", &self.left_language).map_err(|e| Error::Config(e.to_string()))?;
        validate_tag("language", &self.right_language).map_err(|e| Error::Config(e.to_string()))?;
        if self.left_language == self.right_language {
            return Err(Error::Config(format!(
                "left and right languages must differ, both are `{}`",
                self.left_language
            )));
        }
        Ok(())
    }
}

/// Provenance stored next to the weights.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub config_digest: String,
    pub corpus_digest: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn prefix(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// One labelled cross-language pair. Trees are shared so that many samples
/// can point at the same program.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub left: Arc<IndexedAst>,
    pub right: Arc<IndexedAst>,
    /// 1 when both programs implement the same algorithm, else 0.
    pub label: usize,
}

impl PairSample {
    pub fn new(left: Arc<IndexedAst>, right: Arc<IndexedAst>, label: usize) -> Result<Self> {
        if label > 1 {
            return Err(Error::InvalidArgument(format!(
                "pair label must be 0 or 1, got {label}"
            )));
        }
        Ok(Self { left, right, label })
    }
}

#[derive(Clone, Copy, Debug)]
struct EncoderIds {
    embedding: ParamId,
    w_top: ParamId,
    w_left: ParamId,
    w_right: ParamId,
    bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct Ids {
    left: EncoderIds,
    right: EncoderIds,
    fc1_w: ParamId,
    fc1_b: ParamId,
    fc2_w: ParamId,
    fc2_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

/// Canonical parameter names, in store order.
pub fn parameter_names() -> Vec<String> {
    let mut names = Vec::new();
    for side in [Side::Left, Side::Right] {
        let p = side.prefix();
        names.push(format!("{p}.embedding"));
        for w in ["w_top", "w_left", "w_right", "bias"] {
            names.push(format!("{p}.conv.{w}"));
        }
    }
    for layer in ["fc1", "fc2", "out"] {
        names.push(format!("{layer}.weight"));
        names.push(format!("{layer}.bias"));
    }
    names
}

#[derive(Clone, Debug)]
pub struct BiTbcnnModel {
    config: ModelConfig,
    left_vocab: Vocabulary,
    right_vocab: Vocabulary,
    store: ParamStore,
    ids: Ids,
    pub metadata: ModelMetadata,
}

impl BiTbcnnModel {
    /// Fresh model. Missing embedding tables get the same Glorot range as the
    /// other layers (fan-in V, fan-out E); given tables must match the
    /// configured width and languages.
    pub fn init(
        config: ModelConfig,
        left: SideInit,
        right: SideInit,
        rng: &mut RngStream,
    ) -> Result<Self> {
        config.validate()?;
        let e = config.embedding_dim;
        let (left_vocab, left_emb) = left.resolve(&config.left_language, e, &mut rng.fork(1))?;
        let (right_vocab, right_emb) =
            right.resolve(&config.right_language, e, &mut rng.fork(2))?;
        let left_conv = TbcnnParams::init(e, config.conv_dim, &mut rng.fork(3));
        let right_conv = TbcnnParams::init(e, config.conv_dim, &mut rng.fork(4));
        let mut head = rng.fork(5);
        let dense = |rows: usize, cols: usize, rng: &mut RngStream| {
            uniform_matrix(rows, cols, glorot_range(cols, rows), rng)
        };
        let fc1 = dense(config.hidden1, 2 * config.conv_dim, &mut head);
        let fc2 = dense(config.hidden2, config.hidden1, &mut head);
        let out = dense(2, config.hidden2, &mut head);

        let tensors = vec![
            left_emb,
            left_conv.w_top,
            left_conv.w_left,
            left_conv.w_right,
            left_conv.bias,
            right_emb,
            right_conv.w_top,
            right_conv.w_left,
            right_conv.w_right,
            right_conv.bias,
            fc1,
            Tensor::zeros(&[config.hidden1]),
            fc2,
            Tensor::zeros(&[config.hidden2]),
            out,
            Tensor::zeros(&[2]),
        ];
        Self::assemble(
            config,
            left_vocab,
            right_vocab,
            tensors,
            ModelMetadata::default(),
        )
    }

    fn assemble(
        config: ModelConfig,
        left_vocab: Vocabulary,
        right_vocab: Vocabulary,
        tensors: Vec<Tensor>,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        config.validate()?;
        for (vocab, lang) in [
            (&left_vocab, &config.left_language),
            (&right_vocab, &config.right_language),
        ] {
            if vocab.language() != lang {
                return Err(Error::LanguageMismatch {
                    expected: lang.clone(),
                    got: vocab.language().into(),
                });
            }
        }
        let (e, c, h1, h2) = (
            config.embedding_dim,
            config.conv_dim,
            config.hidden1,
            config.hidden2,
        );
        let names = parameter_names();
        let expected: Vec<Vec<usize>> = vec![
            vec![left_vocab.size(), e],
            vec![c, e],
            vec![c, e],
            vec![c, e],
            vec![c],
            vec![right_vocab.size(), e],
            vec![c, e],
            vec![c, e],
            vec![c, e],
            vec![c],
            vec![h1, 2 * c],
            vec![h1],
            vec![h2, h1],
            vec![h2],
            vec![2, h2],
            vec![2],
        ];
        if tensors.len() != names.len() {
            return Err(Error::dim("model tensors", names.len(), tensors.len()));
        }
        let mut store = ParamStore::new();
        let mut ids = Vec::with_capacity(names.len());
        for ((name, t), shape) in names.iter().zip(tensors).zip(&expected) {
            if t.shape() != shape.as_slice() {
                return Err(Error::dim(
                    "model tensor shape",
                    format!("{name} {shape:?}"),
                    format!("{:?}", t.shape()),
                ));
            }
            ids.push(store.insert(name.clone(), t)?);
        }
        let enc = |o: usize| EncoderIds {
            embedding: ids[o],
            w_top: ids[o + 1],
            w_left: ids[o + 2],
            w_right: ids[o + 3],
            bias: ids[o + 4],
        };
        let ids = Ids {
            left: enc(0),
            right: enc(5),
            fc1_w: ids[10],
            fc1_b: ids[11],
            fc2_w: ids[12],
            fc2_b: ids[13],
            out_w: ids[14],
            out_b: ids[15],
        };
        Ok(Self {
            config,
            left_vocab,
            right_vocab,
            store,
            ids,
            metadata,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self, side: Side) -> &Vocabulary {
        match side {
            Side::Left => &self.left_vocab,
            Side::Right => &self.right_vocab,
        }
    }

    pub fn language(&self, side: Side) -> &str {
        self.vocab(side).language()
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Sets one named tensor, keeping its shape.
    pub fn set_param(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self
            .store
            .id(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named `{name}`")))?;
        self.store.set_value(id, value)
    }

    fn encoder_ids(&self, side: Side) -> EncoderIds {
        match side {
            Side::Left => self.ids.left,
            Side::Right => self.ids.right,
        }
    }

    pub fn embedding_table(&self, side: Side) -> EmbeddingTable {
        let id = self.encoder_ids(side).embedding;
        EmbeddingTable::new(self.vocab(side).clone(), self.store.value(id).clone())
            .expect("model embedding shape is validated on construction")
    }

    pub fn encoder_params(&self, side: Side) -> TbcnnParams {
        let ids = self.encoder_ids(side);
        TbcnnParams {
            w_top: self.store.value(ids.w_top).clone(),
            w_left: self.store.value(ids.w_left).clone(),
            w_right: self.store.value(ids.w_right).clone(),
            bias: self.store.value(ids.bias).clone(),
        }
    }

    /// Marks both embedding tables as fixed (or trainable again).
    pub fn freeze_embeddings(&mut self, frozen: bool) {
        for side in [Side::Left, Side::Right] {
            let id = self.encoder_ids(side).embedding;
            self.store.set_trainable(id, !frozen);
        }
    }

    fn check_languages(&self, left: &IndexedAst, right: &IndexedAst) -> Result<()> {
        for (tree, side) in [(left, Side::Left), (right, Side::Right)] {
            if tree.language != self.language(side) {
                return Err(Error::LanguageMismatch {
                    expected: self.language(side).into(),
                    got: tree.language.clone(),
                });
            }
        }
        Ok(())
    }

    /// Records the forward pass on `tape` and returns the probability node.
    /// `tape` must be built over this model's store or one with the same
    /// layout. Train mode draws the first hidden layer's mask, then the
    /// second's.
    pub fn record_forward(
        &self,
        tape: &mut Tape<'_>,
        left: &IndexedAst,
        right: &IndexedAst,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<NodeId> {
        self.check_languages(left, right)?;
        let enc = |tape: &mut Tape<'_>, ids: EncoderIds, tree: &IndexedAst| {
            let nodes = EncoderNodes {
                embedding: tape.param(ids.embedding),
                w_top: tape.param(ids.w_top),
                w_left: tape.param(ids.w_left),
                w_right: tape.param(ids.w_right),
                bias: tape.param(ids.bias),
            };
            record_encoding(tape, tree, nodes)
        };
        let lv = enc(tape, self.ids.left, left)?;
        let rv = enc(tape, self.ids.right, right)?;
        let joint = tape.concat(lv, rv)?;
        let h1 = self.hidden(tape, joint, self.ids.fc1_w, self.ids.fc1_b, mode, rng)?;
        let h2 = self.hidden(tape, h1, self.ids.fc2_w, self.ids.fc2_b, mode, rng)?;
        let (w, b) = (tape.param(self.ids.out_w), tape.param(self.ids.out_b));
        let logits = tape.affine(w, h2, Some(b))?;
        tape.softmax(logits)
    }

    fn hidden(
        &self,
        tape: &mut Tape<'_>,
        x: NodeId,
        w: ParamId,
        b: ParamId,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<NodeId> {
        let (w, b) = (tape.param(w), tape.param(b));
        let z = tape.affine(w, x, Some(b))?;
        let h = tape.tanh(z)?;
        if mode == Mode::Infer || self.config.keep_prob >= 1.0 {
            return Ok(h);
        }
        let mask = dropout_mask(tape.value(h).shape(), self.config.keep_prob, rng, mode)?;
        tape.mul_const(h, mask)
    }

    /// Class probabilities `[p_dissimilar, p_similar]`.
    pub fn forward_pair(
        &self,
        left: &IndexedAst,
        right: &IndexedAst,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<[f64; 2]> {
        let mut tape = Tape::new(&self.store);
        let p = self.record_forward(&mut tape, left, right, mode, rng)?;
        let d = tape.value(p).data();
        Ok([d[0], d[1]])
    }

    /// Cross-entropy of the sample under parameters `params`, which must
    /// share this model's layout. Used for finite-difference checks.
    pub fn pair_loss_with(
        &self,
        params: &ParamStore,
        sample: &PairSample,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<f64> {
        if params.len() != self.store.len() {
            return Err(Error::dim(
                "parameter store",
                self.store.len(),
                params.len(),
            ));
        }
        let mut tape = Tape::new(params);
        let p = self.record_forward(&mut tape, &sample.left, &sample.right, mode, rng)?;
        let loss = tape.cross_entropy(p, sample.label)?;
        Ok(tape.value(loss).data()[0])
    }

    pub fn pair_loss(&self, sample: &PairSample, mode: Mode, rng: &mut RngStream) -> Result<f64> {
        self.pair_loss_with(&self.store, sample, mode, rng)
    }

    /// Loss, class probabilities and parameter gradients for one sample.
    pub fn loss_and_gradients(
        &self,
        sample: &PairSample,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<SampleOutcome> {
        let mut tape = Tape::new(&self.store);
        let p = self.record_forward(&mut tape, &sample.left, &sample.right, mode, rng)?;
        let loss = tape.cross_entropy(p, sample.label)?;
        let grads = tape.backward(loss)?;
        let probs = tape.value(p).data();
        Ok(SampleOutcome {
            loss: tape.value(loss).data()[0],
            probs: [probs[0], probs[1]],
            grads,
        })
    }

    /// `(label, p_similar)` in inference mode.
    pub fn predict_similarity(
        &self,
        left: &IndexedAst,
        right: &IndexedAst,
    ) -> Result<(usize, f64)> {
        // inference never draws from the stream
        let mut rng = RngStream::new(0);
        let p = self.forward_pair(left, right, Mode::Infer, &mut rng)?;
        Ok(decide(p))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        w.str(&serde_json::to_string(&self.config).expect("config serializes"));
        w.str(&serde_json::to_string(&self.metadata).expect("metadata serializes"));
        for vocab in [&self.left_vocab, &self.right_vocab] {
            w.str(vocab.language());
            w.u64(vocab.known_count() as u64);
            for n in vocab.names() {
                w.str(n);
            }
        }
        w.u64(self.store.len() as u64);
        for (_, p) in self.store.iter() {
            w.str(&p.name);
            w.tensor(&p.value);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "model file");
        if r.take(8)? != MODEL_MAGIC {
            return Err(r.fail("bad magic"));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(r.fail(format!("unsupported version {version}")));
        }
        let config: ModelConfig =
            serde_json::from_str(&r.str()?).map_err(|e| r.fail(format!("config: {e}")))?;
        let metadata: ModelMetadata =
            serde_json::from_str(&r.str()?).map_err(|e| r.fail(format!("metadata: {e}")))?;
        let mut vocabs = Vec::with_capacity(2);
        for _ in 0..2 {
            let language = r.str()?;
            let count = r.usize()?;
            let names = (0..count).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
            if names.windows(2).any(|w| w[0] >= w[1]) {
                return Err(r.fail("vocabulary names not strictly sorted"));
            }
            vocabs.push(Vocabulary::from_names(language, names));
        }
        let count = r.usize()?;
        let expected = parameter_names();
        if count != expected.len() {
            return Err(r.fail(format!(
                "expected {} tensors, found {count}",
                expected.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for name in &expected {
            let got = r.str()?;
            if &got != name {
                return Err(r.fail(format!("expected tensor `{name}`, found `{got}`")));
            }
            tensors.push(r.tensor()?);
        }
        r.expect_end()?;
        let right = vocabs.pop().expect("two vocabularies");
        let left = vocabs.pop().expect("two vocabularies");
        Self::assemble(config, left, right, tensors, metadata).map_err(|e| r.fail(e.to_string()))
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

#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub loss: f64,
    pub probs: [f64; 2],
    pub grads: Gradients,
}

/// Label 1 only when the similar class is strictly more probable.
pub fn decide(p: [f64; 2]) -> (usize, f64) {
    (usize::from(p[1] > p[0]), p[1])
}

/// Where one side's vocabulary and embeddings come from.
#[derive(Clone, Debug)]
pub enum SideInit {
    /// Random embeddings over this vocabulary.
    Random(Vocabulary),
    /// Pre-trained vectors.
    Pretrained(EmbeddingTable),
}

impl SideInit {
    fn resolve(
        self,
        language: &str,
        dim: usize,
        rng: &mut RngStream,
    ) -> Result<(Vocabulary, Tensor)> {
        let (vocab, emb) = match self {
            SideInit::Random(vocab) => {
                let emb = uniform_matrix(vocab.size(), dim, glorot_range(vocab.size(), dim), rng);
                (vocab, emb)
            }
            SideInit::Pretrained(table) => {
                if table.dim() != dim {
                    return Err(Error::dim("pre-trained embedding width", dim, table.dim()));
                }
                (table.vocab().clone(), table.vectors().clone())
            }
        };
        if vocab.language() != language {
            return Err(Error::LanguageMismatch {
                expected: language.into(),
                got: vocab.language().into(),
            });
        }
        Ok((vocab, emb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{build_vocabulary, index_tree, parse_canonical_tree, Ast};

    fn tree(text: &str, lang: &str, vocab: &Vocabulary) -> Arc<IndexedAst> {
        let a = Ast::new(parse_canonical_tree(text).unwrap(), lang, "t");
        Arc::new(index_tree(&a, vocab).unwrap())
    }

    fn small() -> (BiTbcnnModel, PairSample) {
        let la = Ast::new(
            parse_canonical_tree("(unit (while (expr)) (decl))").unwrap(),
            "cpp",
            "l",
        );
        let ra = Ast::new(
            parse_canonical_tree("(cu (loop (cond)))").unwrap(),
            "java",
            "r",
        );
        let lv = build_vocabulary(std::slice::from_ref(&la), "cpp").unwrap();
        let rv = build_vocabulary(std::slice::from_ref(&ra), "java").unwrap();
        let config = ModelConfig {
            embedding_dim: 4,
            conv_dim: 3,
            hidden1: 5,
            hidden2: 4,
            ..ModelConfig::default()
        };
        let model = BiTbcnnModel::init(
            config,
            SideInit::Random(lv.clone()),
            SideInit::Random(rv.clone()),
            &mut RngStream::new(5),
        )
        .unwrap();
        let s = PairSample::new(
            tree("(unit (while (expr)) (decl))", "cpp", &lv),
            tree("(cu (loop (cond)))", "java", &rv),
            1,
        )
        .unwrap();
        (model, s)
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let (mut m, s) = small();
        m.set_param("out.weight", Tensor::zeros(&[2, 4])).unwrap();
        m.set_param("out.bias", Tensor::zeros(&[2])).unwrap();
        let mut rng = RngStream::new(1);
        assert_eq!(
            m.forward_pair(&s.left, &s.right, Mode::Train, &mut rng)
                .unwrap(),
            [0.5, 0.5]
        );
        let loss = m.pair_loss(&s, Mode::Infer, &mut rng).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(m.predict_similarity(&s.left, &s.right).unwrap(), (0, 0.5));
    }

    #[test]
    fn inference_is_deterministic_and_normalized() {
        let (m, s) = small();
        let a = m
            .forward_pair(&s.left, &s.right, Mode::Infer, &mut RngStream::new(1))
            .unwrap();
        let b = m
            .forward_pair(&s.left, &s.right, Mode::Infer, &mut RngStream::new(2))
            .unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&p| p > 0.0));
        assert!((a[0] + a[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decision_rule() {
        assert_eq!(decide([0.2, 0.8]), (1, 0.8));
        assert_eq!(decide([0.8, 0.2]), (0, 0.2));
        assert_eq!(decide([0.5, 0.5]), (0, 0.5));
    }

    #[test]
    fn swapped_sides_are_rejected() {
        let (m, s) = small();
        let err = m
            .forward_pair(&s.right, &s.left, Mode::Infer, &mut RngStream::new(0))
            .unwrap_err();
        assert!(matches!(err, Error::LanguageMismatch { .. }));
    }

    #[test]
    fn same_language_on_both_sides_is_invalid() {
        let c = ModelConfig {
            right_language: "cpp".into(),
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_round_trip() {
        let (mut m, s) = small();
        m.metadata.seed = 9;
        m.freeze_embeddings(true);
        let bytes = m.to_bytes();
        let back = BiTbcnnModel::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.metadata.seed, 9);
        assert_eq!(
            back.predict_similarity(&s.left, &s.right).unwrap(),
            m.predict_similarity(&s.left, &s.right).unwrap()
        );
        let mut bad = bytes.clone();
        bad.truncate(bad.len() - 3);
        assert!(BiTbcnnModel::from_bytes(&bad).is_err());
    }

    #[test]
    fn pretrained_width_must_match() {
        let v = Vocabulary::from_names("cpp", ["a"]);
        let t = EmbeddingTable::new(v, Tensor::zeros(&[2, 3])).unwrap();
        let rv = Vocabulary::from_names("java", ["b"]);
        let cfg = ModelConfig {
            embedding_dim: 4,
            ..ModelConfig::default()
        };
        assert!(BiTbcnnModel::init(
            cfg,
            SideInit::Pretrained(t),
            SideInit::Random(rv),
            &mut RngStream::new(0)
        )
        .is_err());
    }
}
