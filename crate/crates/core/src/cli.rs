//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 on success, 2 when the
//! user's input breaks the contract (bad files, language or label
//! mismatches), 1 for validation and internal failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ast::{
    convert_srcml, corpus_stats, index_tree, parse_canonical_tree, to_canonical, Ast, SrcmlOptions,
};
use crate::config::RunConfig;
use crate::corpus::{count_pairs, load_programs, CorpusManifest, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::model::{BiTbcnnModel, Side};
use crate::numeric::RngStream;
use crate::par::Parallelism;
use crate::pipeline::{detect_algorithm, ReferenceSampler};
use crate::synth::{baseline_accuracy, generate_corpus, SynthGrammar, DEFAULT_GRAMMAR};
use crate::workflow::{
    run_binary_eval, run_detection_eval, train_from_manifest, write_artifacts, EvalSet,
};

#[derive(Debug, Parser)]
#[command(
    name = "bitbcnn",
    version,
    about = "Cross-language program classification over syntax trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert source trees into the canonical store and append manifest rows
    Ingest(IngestArgs),
    /// Split, pre-train embeddings and train a model from a manifest
    Train(TrainArgs),
    /// Score one left/right pair of trees
    ClassifyPair(ClassifyArgs),
    /// Label a left-language tree by comparing it with one reference per label
    Detect(DetectArgs),
    /// Precision, recall and F1 on seeded test pairs
    EvalBinary(EvalBinaryArgs),
    /// Detection accuracy over test-split queries
    EvalDetect(EvalDetectArgs),
    /// Generate a labelled two-language corpus from a tree grammar
    Synth(SynthArgs),
    /// Tree size, depth and label summaries of a manifest
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Canonical,
    Srcml,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input files
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub language: String,
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: InputFormat,
    /// Directory receiving one canonical tree per input
    #[arg(long)]
    pub store: PathBuf,
    /// Manifest to append to; created when missing
    #[arg(long)]
    pub manifest: PathBuf,
    /// Algorithm label for every input
    #[arg(long)]
    pub label: Option<String>,
    /// srcML element names dropped with their subtrees
    #[arg(long, value_delimiter = ',')]
    pub prune: Vec<String>,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// JSON run configuration; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub left_language: Option<String>,
    #[arg(long)]
    pub right_language: Option<String>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub conv_dim: Option<usize>,
    #[arg(long)]
    pub hidden1: Option<usize>,
    #[arg(long)]
    pub hidden2: Option<usize>,
    #[arg(long)]
    pub keep_prob: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub n_similar: Option<usize>,
    #[arg(long)]
    pub n_dissimilar: Option<usize>,
    /// Use random embeddings instead of skip-gram pre-training
    #[arg(long)]
    pub no_pretrain: bool,
    #[arg(long)]
    pub embedding_epochs: Option<usize>,
    #[arg(long)]
    pub embedding_lr: Option<f64>,
    /// Keep embeddings fixed during classifier training
    #[arg(long)]
    pub freeze_embeddings: bool,
    #[arg(long)]
    pub eval_similar: Option<usize>,
    #[arg(long)]
    pub eval_dissimilar: Option<usize>,
    #[arg(long)]
    pub detection_queries: Option<usize>,
    #[arg(long)]
    pub references_per_label: Option<usize>,
}

impl Overrides {
    fn apply(&self, mut c: RunConfig) -> RunConfig {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$src { c.$($dst).+ = v.clone(); })*
            };
        }
        set!(
            labels => labels,
            train_ratio => train_ratio,
            left_language => model.left_language,
            right_language => model.right_language,
            embedding_dim => model.embedding_dim,
            conv_dim => model.conv_dim,
            hidden1 => model.hidden1,
            hidden2 => model.hidden2,
            keep_prob => model.keep_prob,
            epochs => train.epochs,
            lr => train.lr,
            batch_size => train.batch_size,
            n_similar => train.n_similar,
            n_dissimilar => train.n_dissimilar,
            embedding_epochs => embeddings.epochs,
            embedding_lr => embeddings.lr,
            eval_similar => eval.n_similar,
            eval_dissimilar => eval.n_dissimilar,
            detection_queries => eval.detection_queries,
            references_per_label => eval.references_per_label,
        );
        if self.momentum.is_some() {
            c.train.momentum = self.momentum;
        }
        if self.no_pretrain {
            c.embeddings.pretrain = false;
        }
        if self.freeze_embeddings {
            c.embeddings.freeze = true;
        }
        c
    }

    fn resolve(&self, base: RunConfig, seed: Option<u64>) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => base,
        };
        let mut c = self.apply(base);
        if let Some(s) = seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for model, history, split, config and embeddings
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Run on one thread
    #[arg(long)]
    pub sequential: bool,
    /// Suppress per-epoch progress on stderr
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Canonical tree for the model's left language
    pub left: PathBuf,
    /// Canonical tree for the model's right language
    pub right: PathBuf,
    /// Language of the left file; otherwise taken from a `<name>.<language>.tree`
    /// file name, falling back to the model's left language
    #[arg(long)]
    pub left_language: Option<String>,
    #[arg(long)]
    pub right_language: Option<String>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Canonical tree in the model's left language
    #[arg(long)]
    pub query: PathBuf,
    /// Manifest with train-split programs of the right language
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long)]
    pub query_language: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Manifest with assigned splits, e.g. the split file written by `train`
    #[arg(long)]
    pub manifest: PathBuf,
    /// Defaults to the seed stored in the model
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct EvalBinaryArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct EvalDetectArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub per_label: usize,
    #[arg(long)]
    pub seed: u64,
    /// Grammar file; the bundled grammar otherwise
    #[arg(long)]
    pub grammar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Restrict to one split
    #[arg(long)]
    pub split: Option<String>,
}

/// Parses `args` (program name first) and runs the command, writing
/// results to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Ingest(a) => ingest(a, out),
        Command::Train(a) => train(a, out, err),
        Command::ClassifyPair(a) => classify_pair(a, out),
        Command::Detect(a) => detect(a, out),
        Command::EvalBinary(a) => eval_binary(a.eval, out),
        Command::EvalDetect(a) => eval_detect(a.eval, out),
        Command::Synth(a) => synth(a, out),
        Command::Stats(a) => stats(a, out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn emit(out: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    out.write_all(text.as_ref().as_bytes())
        .map_err(io_err(Path::new("<stdout>")))
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(io_err(p))
}

fn parent_dir(p: &Path) -> Result<PathBuf> {
    Ok(absolute(p)?
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default())
}

fn read_text(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(io_err(p))
}

/// `name.lang.tree` → `name`; otherwise the stem before the first dot.
fn source_id_of(p: &Path) -> Option<String> {
    let name = p.file_name()?.to_str()?;
    let id = name.split('.').next()?;
    (!id.is_empty()).then(|| id.to_string())
}

/// Language encoded as the second-to-last dot component of the file name.
fn language_of(p: &Path) -> Option<String> {
    let name = p.file_name()?.to_str()?;
    let parts: Vec<&str> = name.split('.').collect();
    if parts.len() >= 3 {
        Some(parts[parts.len() - 2].to_string())
    } else {
        None
    }
}

fn read_tree(path: &Path, language: &str) -> Result<Ast> {
    let text = read_text(path)?;
    let id = source_id_of(path).unwrap_or_else(|| "query".into());
    Ast::from_canonical(&text, language, &id).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    crate::ast::validate_tag("language", &a.language)?;
    if let Some(l) = &a.label {
        crate::ast::validate_tag("label", l)?;
    }
    let mut manifest = if a.manifest.exists() {
        CorpusManifest::read(&a.manifest)?
    } else {
        CorpusManifest::default()
    };
    std::fs::create_dir_all(&a.store).map_err(io_err(&a.store))?;
    let manifest_dir = parent_dir(&a.manifest)?;
    let store = absolute(&a.store)?;
    let options = SrcmlOptions::pruning(a.prune.iter().cloned());
    let mut failures = Vec::new();
    let mut added = 0usize;
    for input in &a.inputs {
        let result = (|| -> Result<()> {
            let id = source_id_of(input).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "cannot derive a source id from {}",
                    input.display()
                ))
            })?;
            let text = read_text(input)?;
            let root = match a.format {
                InputFormat::Canonical => parse_canonical_tree(&text),
                InputFormat::Srcml => convert_srcml(&text, &options),
            }
            .map_err(|e| Error::Format {
                path: input.clone(),
                message: e.to_string(),
            })?;
            let file = store.join(format!("{id}.{}.tree", a.language));
            let path = file
                .strip_prefix(&manifest_dir)
                .map(Path::to_path_buf)
                .unwrap_or(file.clone());
            manifest.push(ManifestEntry {
                source_id: id,
                language: a.language.clone(),
                algorithm_label: a.label.clone(),
                path,
                split: Split::Unassigned,
            })?;
            std::fs::write(&file, to_canonical(&root) + "\n").map_err(io_err(&file))?;
            Ok(())
        })();
        match result {
            Ok(()) => added += 1,
            Err(e) => failures.push(format!("  {}: {e}", input.display())),
        }
    }
    manifest.write(&a.manifest)?;
    emit(
        out,
        format!("ingested {added} of {} input(s)\n", a.inputs.len()),
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Batch {
            failed: failures.len(),
            details: failures.join("\n"),
        })
    }
}

fn parallelism(sequential: bool) -> Parallelism {
    if sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

fn train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let config = a.overrides.resolve(RunConfig::default(), Some(a.seed))?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let manifest_dir = parent_dir(&a.manifest)?;
    let quiet = a.quiet;
    let artifacts = train_from_manifest(
        &manifest,
        &manifest_dir,
        &config,
        parallelism(a.sequential),
        |r| {
            if !quiet {
                let _ = writeln!(
                    err,
                    "epoch {}\tloss {:.6}\taccuracy {:.4}",
                    r.epoch, r.mean_loss, r.accuracy
                );
            }
        },
    )?;
    for (lang, label) in &artifacts.empty_cells {
        let _ = writeln!(err, "warning: no `{lang}` programs labelled `{label}`");
    }
    let files = write_artifacts(&artifacts, &config, &manifest_dir, &a.out)?;
    for f in files {
        emit(out, format!("wrote {}\n", f.display()))?;
    }
    if let (Some(first), Some(last)) = (artifacts.history.first(), artifacts.history.last()) {
        emit(
            out,
            format!(
                "loss {:.6} -> {:.6} over {} epoch(s)\n",
                first.mean_loss, last.mean_loss, last.epoch
            ),
        )?;
    }
    Ok(())
}

fn side_language(
    explicit: &Option<String>,
    path: &Path,
    model: &BiTbcnnModel,
    side: Side,
) -> String {
    explicit
        .clone()
        .or_else(|| language_of(path))
        .unwrap_or_else(|| model.language(side).to_string())
}

fn check_side(model: &BiTbcnnModel, side: Side, language: &str) -> Result<()> {
    if model.language(side) != language {
        return Err(Error::LanguageMismatch {
            expected: model.language(side).into(),
            got: language.into(),
        });
    }
    Ok(())
}

fn classify_pair(a: ClassifyArgs, out: &mut dyn Write) -> Result<()> {
    let model = BiTbcnnModel::load(&a.model)?;
    let ll = side_language(&a.left_language, &a.left, &model, Side::Left);
    let rl = side_language(&a.right_language, &a.right, &model, Side::Right);
    check_side(&model, Side::Left, &ll)?;
    check_side(&model, Side::Right, &rl)?;
    let left = index_tree(&read_tree(&a.left, &ll)?, model.vocab(Side::Left))?;
    let right = index_tree(&read_tree(&a.right, &rl)?, model.vocab(Side::Right))?;
    let (label, p) = model.predict_similarity(&left, &right)?;
    emit(out, format!("{label}\t{p:.6}\n"))
}

fn detect(a: DetectArgs, out: &mut dyn Write) -> Result<()> {
    let model = BiTbcnnModel::load(&a.model)?;
    let lang = side_language(&a.query_language, &a.query, &model, Side::Left);
    check_side(&model, Side::Left, &lang)?;
    let query = index_tree(&read_tree(&a.query, &lang)?, model.vocab(Side::Left))?;
    let labels = a.labels.unwrap_or_else(|| RunConfig::default().labels);
    let manifest = CorpusManifest::read(&a.manifest)?;
    let right_lang = model.language(Side::Right).to_string();
    let refs = CorpusManifest::new(
        manifest
            .entries()
            .iter()
            .filter(|e| e.language == right_lang && e.split == Split::Train)
            .cloned()
            .collect(),
    )?;
    let programs = load_programs(&refs, &parent_dir(&a.manifest)?)?;
    let pool = programs
        .iter()
        .map(|p| index_tree(&p.ast, model.vocab(Side::Right)).map(std::sync::Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let sampler = ReferenceSampler::new(ReferenceSampler::group(&pool), 1, &labels)?;
    let chosen = sampler.draw(&mut RngStream::new(a.seed));
    let d = detect_algorithm(&model, &query, &chosen)?;
    let mut text = String::new();
    for (label, score) in &d.scores {
        let ids: Vec<&str> = chosen[label].iter().map(|r| r.source_id.as_str()).collect();
        text.push_str(&format!("{label}\t{score:.6}\t{}\n", ids.join(",")));
    }
    text.push_str(&format!("winner\t{}\n", d.label));
    emit(out, text)
}

fn eval_setup(a: &EvalArgs) -> Result<(BiTbcnnModel, EvalSet, RunConfig)> {
    let model = BiTbcnnModel::load(&a.model)?;
    let base = RunConfig {
        model: model.config().clone(),
        seed: model.metadata.seed,
        ..RunConfig::default()
    };
    let config = a.overrides.resolve(base, a.seed)?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let set = EvalSet::load(&model, &manifest, &parent_dir(&a.manifest)?)?;
    Ok((model, set, config))
}

fn eval_binary(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (model, set, config) = eval_setup(&a)?;
    let report = run_binary_eval(&model, &set, &config, parallelism(a.sequential))?;
    emit(out, format!("{}{report}\n", report.to_tsv()))
}

fn eval_detect(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (model, set, config) = eval_setup(&a)?;
    let report = run_detection_eval(&model, &set, &config, parallelism(a.sequential))?;
    emit(
        out,
        format!(
            "{}detection accuracy {:.4} over {} queries\n",
            report.to_tsv(),
            report.accuracy,
            report.total
        ),
    )
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let text = match &a.grammar {
        Some(p) => read_text(p)?,
        None => DEFAULT_GRAMMAR.to_string(),
    };
    let grammar = SynthGrammar::parse(&text)?;
    if a.per_label == 0 {
        return Err(Error::InvalidArgument(
            "per-label count must be positive".into(),
        ));
    }
    let rng = RngStream::new(a.seed);
    let corpus = generate_corpus(&grammar, a.per_label, &rng.fork(0))?;
    let trees = a.out.join("trees");
    std::fs::create_dir_all(&trees).map_err(io_err(&trees))?;
    let mut entries = Vec::with_capacity(corpus.len());
    for t in &corpus {
        let rel = PathBuf::from("trees").join(format!("{}.{}.tree", t.source_id, t.language));
        let file = a.out.join(&rel);
        std::fs::write(&file, to_canonical(&t.root) + "\n").map_err(io_err(&file))?;
        entries.push(ManifestEntry {
            source_id: t.source_id.clone(),
            language: t.language.clone(),
            algorithm_label: t.algorithm_label.clone(),
            path: rel,
            split: Split::Unassigned,
        });
    }
    let manifest_path = a.out.join("manifest.tsv");
    CorpusManifest::new(entries)?.write(&manifest_path)?;
    let mut text = format!(
        "wrote {} trees and {}\n",
        corpus.len(),
        manifest_path.display()
    );
    for (lang, acc) in baseline_accuracy(&corpus, 0.7, &rng.fork(1))? {
        text.push_str(&format!(
            "node-count baseline\t{lang}\t{acc:.4}\t(chance {:.4})\n",
            1.0 / grammar.labels().len() as f64
        ));
    }
    emit(out, text)
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let manifest = CorpusManifest::read(&a.manifest)?;
    let split: Option<Split> = a.split.as_deref().map(str::parse).transpose()?;
    let programs = load_programs(&manifest, &parent_dir(&a.manifest)?)?;
    let mut by_lang: BTreeMap<&str, Vec<&Ast>> = BTreeMap::new();
    for p in &programs {
        if split.is_none_or(|s| p.entry.split == s) {
            by_lang
                .entry(p.entry.language.as_str())
                .or_default()
                .push(&p.ast);
        }
    }
    let mut text = String::new();
    for (lang, asts) in &by_lang {
        let names = asts
            .iter()
            .flat_map(|a| a.root.preorder().map(|n| n.type_name.clone()));
        let vocab = crate::ast::Vocabulary::from_names(*lang, names);
        let indexed = asts
            .iter()
            .map(|a| index_tree(a, &vocab))
            .collect::<Result<Vec<_>>>()?;
        text.push_str(&format!(
            "[{lang}]\nnode types\t{}\n{}",
            vocab.known_count(),
            corpus_stats(&indexed)
        ));
    }
    let langs: Vec<&str> = by_lang.keys().copied().collect();
    if langs.len() == 2 {
        let s = split.unwrap_or(Split::Train);
        let counts = count_pairs(
            &manifest.label_counts(langs[0], s),
            &manifest.label_counts(langs[1], s),
        );
        text.push_str(&format!(
            "[pairs {s}]\ntotal\t{}\nsimilar\t{}\ndissimilar\t{}\n",
            counts.total, counts.similar, counts.dissimilar
        ));
    }
    emit(out, text)
}
