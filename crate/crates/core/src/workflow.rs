//! End-to-end runs over a manifest: split, vocabularies, embedding
//! pre-training, classifier training, evaluation and artifact output.
//!
//! Every random choice derives from `RunConfig::seed` through a fixed
//! stream tag, so a run is a pure function of its inputs and config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::ast::{build_vocabulary, index_tree, to_canonical, Ast, IndexedAst};
use crate::ast2vec::{emit_context_pairs, train_embeddings, EmbeddingTable};
use crate::config::RunConfig;
use crate::corpus::{
    empty_cells, load_programs, resolve_path, split_corpus, CorpusManifest, Program, Split,
};
use crate::error::{Error, Result};
use crate::model::{BiTbcnnModel, ModelMetadata, Side, SideInit};
use crate::numeric::RngStream;
use crate::par::Parallelism;
use crate::pipeline::{
    evaluate_binary, evaluate_detection, history_tsv, sample_distinct, sample_epoch, train,
    DetectionReport, EpochRecord, MetricsReport, ReferenceSampler,
};

const TAG_SPLIT: u64 = 10;
const TAG_EMBED: u64 = 11;
const TAG_INIT: u64 = 13;
const TAG_TRAIN: u64 = 14;
const TAG_EVAL_PAIRS: u64 = 15;
const TAG_DETECT: u64 = 16;

/// Assigns a split to every unassigned entry; entries that already carry
/// one keep it.
pub fn assign_splits(
    manifest: &CorpusManifest,
    ratio: f64,
    rng: &mut RngStream,
) -> Result<CorpusManifest> {
    let pending: Vec<_> = manifest
        .entries()
        .iter()
        .filter(|e| e.split == Split::Unassigned)
        .cloned()
        .collect();
    if pending.is_empty() {
        return Ok(manifest.clone());
    }
    let decided = split_corpus(&CorpusManifest::new(pending)?, ratio, rng)?;
    let by_id: BTreeMap<&str, Split> = decided
        .entries()
        .iter()
        .map(|e| (e.source_id.as_str(), e.split))
        .collect();
    let mut entries = manifest.entries().to_vec();
    for e in &mut entries {
        if let Some(&s) = by_id.get(e.source_id.as_str()) {
            e.split = s;
        }
    }
    CorpusManifest::new(entries)
}

/// Hex SHA-256 over each program's id, language, label, split and
/// canonical tree, in manifest order. File locations do not enter.
pub fn corpus_digest(programs: &[Program]) -> String {
    let mut h = Sha256::new();
    for p in programs {
        let e = &p.entry;
        let line = format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.source_id,
            e.language,
            e.algorithm_label.as_deref().unwrap_or("-"),
            e.split,
            to_canonical(&p.ast.root)
        );
        h.update(line.as_bytes());
    }
    hex::encode(h.finalize())
}

fn asts_of(programs: &[Program], language: &str, split: Split) -> Vec<Ast> {
    programs
        .iter()
        .filter(|p| p.entry.language == language && p.entry.split == split)
        .map(|p| p.ast.clone())
        .collect()
}

/// Indexes one language's programs of one split against a model side.
pub fn index_side(
    model: &BiTbcnnModel,
    side: Side,
    programs: &[Program],
    split: Split,
) -> Result<Vec<Arc<IndexedAst>>> {
    let vocab = model.vocab(side);
    programs
        .iter()
        .filter(|p| p.entry.language == vocab.language() && p.entry.split == split)
        .map(|p| index_tree(&p.ast, vocab).map(Arc::new))
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub model: BiTbcnnModel,
    pub history: Vec<EpochRecord>,
    /// The input manifest with every split assigned.
    pub manifest: CorpusManifest,
    pub programs: Vec<Program>,
    /// Pre-trained tables, left side first; empty when pre-training is off.
    pub embeddings: Vec<EmbeddingTable>,
    /// `(language, label)` cells without any program.
    pub empty_cells: Vec<(String, String)>,
}

/// Trains a model from a manifest whose relative paths resolve against
/// `manifest_dir`.
pub fn train_from_manifest(
    manifest: &CorpusManifest,
    manifest_dir: &Path,
    config: &RunConfig,
    par: Parallelism,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainArtifacts> {
    config.validate()?;
    manifest.check_labels(&config.labels)?;
    let langs = [
        config.model.left_language.clone(),
        config.model.right_language.clone(),
    ];
    let root = RngStream::new(config.seed);
    let manifest = assign_splits(manifest, config.train_ratio, &mut root.fork(TAG_SPLIT))?;
    let empty = empty_cells(&manifest, &langs, &config.labels);
    let programs = load_programs(&manifest, manifest_dir)?;

    let mut sides = Vec::with_capacity(2);
    let mut embeddings = Vec::new();
    for (k, lang) in langs.iter().enumerate() {
        let train_asts = asts_of(&programs, lang, Split::Train);
        if train_asts.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no `{lang}` programs in the training split"
            )));
        }
        let vocab = build_vocabulary(&train_asts, lang)?;
        if config.embeddings.pretrain {
            let mut pairs = Vec::new();
            for a in &train_asts {
                pairs.extend(emit_context_pairs(&index_tree(a, &vocab)?));
            }
            let sg = train_embeddings(
                &pairs,
                vocab.size(),
                config.model.embedding_dim,
                config.embeddings.skip_gram(),
                &mut root.fork(TAG_EMBED + k as u64),
            )?;
            let table = EmbeddingTable::new(vocab, sg.input)?;
            embeddings.push(table.clone());
            sides.push(SideInit::Pretrained(table));
        } else {
            sides.push(SideInit::Random(vocab));
        }
    }
    let right = sides.pop().expect("two sides");
    let left = sides.pop().expect("two sides");
    let mut model =
        BiTbcnnModel::init(config.model.clone(), left, right, &mut root.fork(TAG_INIT))?;
    model.freeze_embeddings(config.embeddings.freeze);
    model.metadata = ModelMetadata {
        seed: config.seed,
        config_digest: config.digest(),
        corpus_digest: corpus_digest(&programs),
    };

    let left_train = index_side(&model, Side::Left, &programs, Split::Train)?;
    let right_train = index_side(&model, Side::Right, &programs, Split::Train)?;
    let history = train(
        &mut model,
        &left_train,
        &right_train,
        &config.train,
        &root.fork(TAG_TRAIN),
        par,
        on_epoch,
    )?;
    Ok(TrainArtifacts {
        model,
        history,
        manifest,
        programs,
        embeddings,
        empty_cells: empty,
    })
}

pub const MODEL_FILE: &str = "model.bin";
pub const HISTORY_FILE: &str = "history.tsv";
pub const SPLIT_FILE: &str = "split.tsv";
pub const CONFIG_FILE: &str = "config.json";

/// Writes the model, history, split manifest, config and embedding tables
/// into `out_dir`. Paths in the split file are resolved against
/// `manifest_dir` so it can be read from anywhere.
pub fn write_artifacts(
    artifacts: &TrainArtifacts,
    config: &RunConfig,
    manifest_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = out_dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    put(MODEL_FILE, &artifacts.model.to_bytes())?;
    put(HISTORY_FILE, history_tsv(&artifacts.history).as_bytes())?;
    let mut entries = artifacts.manifest.entries().to_vec();
    for e in &mut entries {
        e.path = resolve_path(manifest_dir, &e.path);
    }
    put(
        SPLIT_FILE,
        CorpusManifest::new(entries)?.to_tsv().as_bytes(),
    )?;
    put(CONFIG_FILE, config.to_json().as_bytes())?;
    for t in &artifacts.embeddings {
        put(&format!("{}.emb", t.language()), &t.to_bytes())?;
    }
    Ok(written)
}

/// Test-split programs of both model sides.
pub struct EvalSet {
    pub left: Vec<Arc<IndexedAst>>,
    pub right: Vec<Arc<IndexedAst>>,
    /// Right-side training programs, the reference pool for detection.
    pub references: Vec<Arc<IndexedAst>>,
}

impl EvalSet {
    /// The manifest must already carry splits (as written by training).
    pub fn load(
        model: &BiTbcnnModel,
        manifest: &CorpusManifest,
        manifest_dir: &Path,
    ) -> Result<Self> {
        if manifest
            .entries()
            .iter()
            .any(|e| e.split == Split::Unassigned)
        {
            return Err(Error::InvalidArgument(
                "manifest has unassigned entries; evaluate against the split written by training"
                    .into(),
            ));
        }
        let programs = load_programs(manifest, manifest_dir)?;
        Self::from_programs(model, &programs)
    }

    pub fn from_programs(model: &BiTbcnnModel, programs: &[Program]) -> Result<Self> {
        Ok(Self {
            left: index_side(model, Side::Left, programs, Split::Test)?,
            right: index_side(model, Side::Right, programs, Split::Test)?,
            references: index_side(model, Side::Right, programs, Split::Train)?,
        })
    }
}

/// Binary metrics on a seeded draw of balanced test pairs.
pub fn run_binary_eval(
    model: &BiTbcnnModel,
    set: &EvalSet,
    config: &RunConfig,
    par: Parallelism,
) -> Result<MetricsReport> {
    let mut rng = RngStream::new(config.seed).fork(TAG_EVAL_PAIRS);
    let pairs = sample_epoch(
        &set.left,
        &set.right,
        config.eval.n_similar,
        config.eval.n_dissimilar,
        &mut rng,
    )?;
    evaluate_binary(model, &pairs, par)
}

/// Detection accuracy of left-side test queries against right-side
/// training references. At most `detection_queries` queries are used,
/// chosen by a seeded draw when there are more.
pub fn run_detection_eval(
    model: &BiTbcnnModel,
    set: &EvalSet,
    config: &RunConfig,
    par: Parallelism,
) -> Result<DetectionReport> {
    let rng = RngStream::new(config.seed).fork(TAG_DETECT);
    let n = config.eval.detection_queries;
    let queries: Vec<Arc<IndexedAst>> = if n >= set.left.len() {
        set.left.clone()
    } else {
        let mut picks = sample_distinct(set.left.len() as u64, n, &mut rng.fork(0));
        picks.sort_unstable();
        picks
            .into_iter()
            .map(|i| Arc::clone(&set.left[i as usize]))
            .collect()
    };
    if queries.is_empty() {
        return Err(Error::InvalidArgument("no detection queries".into()));
    }
    let sampler = ReferenceSampler::new(
        ReferenceSampler::group(&set.references),
        config.eval.references_per_label,
        &config.labels,
    )?;
    evaluate_detection(model, &queries, &sampler, &rng.fork(1), par)
}
