//! Pair sampling, the training loop, and the two evaluations: binary
//! same/different classification and algorithm detection against one
//! reference program per label.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ast::IndexedAst;
use crate::error::{Error, Result};
use crate::model::{decide, BiTbcnnModel, PairSample};
use crate::numeric::{Mode, RngStream, Sgd};
use crate::par::{map_indexed, Parallelism};

// stream tags for RngStream::fork_path
const TAG_SAMPLE: u64 = 1;
const TAG_DROPOUT: u64 = 2;
const TAG_QUERY: u64 = 3;

fn label_of(t: &IndexedAst) -> Result<&str> {
    t.algorithm_label.as_deref().ok_or_else(|| {
        Error::InvalidArgument(format!("program `{}` has no algorithm label", t.source_id))
    })
}

/// Index space over all left × right pairs, split into same-label and
/// different-label parts, each addressable by a flat integer.
struct PairSpace<'a> {
    left: &'a [Arc<IndexedAst>],
    right: &'a [Arc<IndexedAst>],
    left_labels: Vec<&'a str>,
    /// right indices grouped by label
    right_order: Vec<usize>,
    ranges: BTreeMap<&'a str, (usize, usize)>,
    similar_prefix: Vec<u64>,
    dissimilar_prefix: Vec<u64>,
}

impl<'a> PairSpace<'a> {
    fn new(left: &'a [Arc<IndexedAst>], right: &'a [Arc<IndexedAst>]) -> Result<Self> {
        let left_labels = left
            .iter()
            .map(|t| label_of(t))
            .collect::<Result<Vec<_>>>()?;
        let right_labels = right
            .iter()
            .map(|t| label_of(t))
            .collect::<Result<Vec<_>>>()?;
        let mut right_order: Vec<usize> = (0..right.len()).collect();
        right_order.sort_by(|&a, &b| right_labels[a].cmp(right_labels[b]).then(a.cmp(&b)));
        let mut ranges: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (pos, &i) in right_order.iter().enumerate() {
            let r = ranges.entry(right_labels[i]).or_insert((pos, pos));
            r.1 = pos + 1;
        }
        let mut similar_prefix = vec![0u64];
        let mut dissimilar_prefix = vec![0u64];
        for l in &left_labels {
            let same = ranges.get(l).map_or(0, |r| r.1 - r.0) as u64;
            similar_prefix.push(similar_prefix.last().unwrap() + same);
            dissimilar_prefix.push(dissimilar_prefix.last().unwrap() + right.len() as u64 - same);
        }
        Ok(Self {
            left,
            right,
            left_labels,
            right_order,
            ranges,
            similar_prefix,
            dissimilar_prefix,
        })
    }

    fn similar(&self) -> u64 {
        *self.similar_prefix.last().unwrap()
    }

    fn dissimilar(&self) -> u64 {
        *self.dissimilar_prefix.last().unwrap()
    }

    fn pair(&self, index: u64, same: bool) -> PairSample {
        let prefix = if same {
            &self.similar_prefix
        } else {
            &self.dissimilar_prefix
        };
        let i = prefix.partition_point(|&p| p <= index) - 1;
        let k = (index - prefix[i]) as usize;
        let (s, e) = self
            .ranges
            .get(self.left_labels[i])
            .copied()
            .unwrap_or((0, 0));
        let pos = if same {
            s + k
        } else if k < s {
            k
        } else {
            k + (e - s)
        };
        PairSample {
            left: Arc::clone(&self.left[i]),
            right: Arc::clone(&self.right[self.right_order[pos]]),
            label: usize::from(same),
        }
    }
}

/// `n` distinct integers from `0..space`, by Floyd's method, in draw order.
pub fn sample_distinct(space: u64, n: usize, rng: &mut RngStream) -> Vec<u64> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for j in space - n as u64..space {
        let t = rng.below(j as usize + 1) as u64;
        let pick = if seen.contains(&t) { j } else { t };
        seen.insert(pick);
        out.push(pick);
    }
    out
}

/// Draws `n_similar` same-label and `n_dissimilar` different-label pairs,
/// each uniformly without replacement, then shuffles them together.
pub fn sample_epoch(
    left: &[Arc<IndexedAst>],
    right: &[Arc<IndexedAst>],
    n_similar: usize,
    n_dissimilar: usize,
    rng: &mut RngStream,
) -> Result<Vec<PairSample>> {
    let space = PairSpace::new(left, right)?;
    for (want, have, kind) in [
        (n_similar, space.similar(), "similar"),
        (n_dissimilar, space.dissimilar(), "dissimilar"),
    ] {
        if want as u64 > have {
            return Err(Error::InsufficientPairs(format!(
                "requested {want} {kind} pairs but only {have} exist (short by {})",
                want as u64 - have
            )));
        }
    }
    let mut out = Vec::with_capacity(n_similar + n_dissimilar);
    for k in sample_distinct(space.similar(), n_similar, rng) {
        out.push(space.pair(k, true));
    }
    for k in sample_distinct(space.dissimilar(), n_dissimilar, rng) {
        out.push(space.pair(k, false));
    }
    rng.shuffle(&mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: Option<f64>,
    pub batch_size: usize,
    pub n_similar: usize,
    pub n_dissimilar: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.01,
            momentum: None,
            batch_size: 1,
            n_similar: 1000,
            n_dissimilar: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if let Some(m) = self.momentum {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::Config(format!(
                    "momentum must lie in [0, 1), got {m}"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.n_similar + self.n_dissimilar == 0 {
            return Err(Error::Config("an epoch needs at least one pair".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based
    pub epoch: usize,
    pub mean_loss: f64,
    /// Fraction of the epoch's samples classified correctly in the forward
    /// pass used for the update, dropout included.
    pub accuracy: f64,
}

pub fn history_tsv(history: &[EpochRecord]) -> String {
    let mut s = String::from("#epoch\tmean_loss\taccuracy\n");
    for r in history {
        s.push_str(&format!("{}\t{}\t{}\n", r.epoch, r.mean_loss, r.accuracy));
    }
    s
}

/// Runs `config.epochs` epochs of SGD over samples produced by `sampler`,
/// which receives the epoch number and a stream dedicated to that epoch.
/// `on_epoch` sees each record as it is produced.
pub fn fit<S, P>(
    model: &mut BiTbcnnModel,
    config: &TrainConfig,
    rng: &RngStream,
    par: Parallelism,
    mut sampler: S,
    mut on_epoch: P,
) -> Result<Vec<EpochRecord>>
where
    S: FnMut(usize, &mut RngStream) -> Result<Vec<PairSample>>,
    P: FnMut(&EpochRecord),
{
    config.validate()?;
    let mut opt = Sgd::new(config.lr, config.momentum)?;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let samples = sampler(epoch, &mut rng.fork_path(&[TAG_SAMPLE, epoch as u64]))?;
        if samples.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "epoch {epoch} has no samples"
            )));
        }
        let mut total_loss = 0.0;
        let mut correct = 0usize;
        for (b, batch) in samples.chunks(config.batch_size).enumerate() {
            let start = b * config.batch_size;
            let model_ref: &BiTbcnnModel = model;
            let outcomes = map_indexed(batch.len(), par, |j| {
                let mut drop_rng = rng.fork_path(&[TAG_DROPOUT, epoch as u64, (start + j) as u64]);
                model_ref.loss_and_gradients(&batch[j], Mode::Train, &mut drop_rng)
            });
            let mut grads = None;
            for (j, o) in outcomes.into_iter().enumerate() {
                let o = o.map_err(|e| match e {
                    Error::NonFinite(what) => {
                        Error::NonFinite(format!("{what} (epoch {epoch}, sample {})", start + j))
                    }
                    other => other,
                })?;
                if !o.loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss (epoch {epoch}, sample {})",
                        start + j
                    )));
                }
                total_loss += o.loss;
                correct += usize::from(decide(o.probs).0 == batch[j].label);
                match &mut grads {
                    None => grads = Some(o.grads),
                    Some(g) => g.merge(o.grads),
                }
            }
            let mut grads = grads.expect("non-empty batch");
            if batch.len() > 1 {
                grads.scale(1.0 / batch.len() as f64);
            }
            model.params_mut().zero_grad();
            model.params_mut().accumulate(&grads);
            opt.step(model.params_mut()).map_err(|e| match e {
                Error::NonFinite(what) => {
                    Error::NonFinite(format!("{what} (epoch {epoch}, batch {b})"))
                }
                other => other,
            })?;
        }
        let rec = EpochRecord {
            epoch,
            mean_loss: total_loss / samples.len() as f64,
            accuracy: correct as f64 / samples.len() as f64,
        };
        on_epoch(&rec);
        history.push(rec);
    }
    Ok(history)
}

/// Trains on freshly sampled balanced pairs every epoch.
pub fn train(
    model: &mut BiTbcnnModel,
    left: &[Arc<IndexedAst>],
    right: &[Arc<IndexedAst>],
    config: &TrainConfig,
    rng: &RngStream,
    par: Parallelism,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    let (ns, nd) = (config.n_similar, config.n_dissimilar);
    fit(
        model,
        config,
        rng,
        par,
        |_, r| sample_epoch(left, right, ns, nd, r),
        on_epoch,
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    /// `confusion[actual][predicted]`
    pub confusion: [[u64; 2]; 2],
    pub classes: [ClassMetrics; 2],
}

impl MetricsReport {
    pub fn from_confusion(confusion: [[u64; 2]; 2]) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let class = |k: usize| {
            let tp = confusion[k][k];
            let predicted = confusion[0][k] + confusion[1][k];
            let support = confusion[k][0] + confusion[k][1];
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            }
        };
        Self {
            confusion,
            classes: [class(0), class(1)],
        }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            (self.confusion[0][0] + self.confusion[1][1]) as f64 / t as f64
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("#class\tprecision\trecall\tf1\tsupport\n");
        for (k, c) in self.classes.iter().enumerate() {
            s.push_str(&format!(
                "{k}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                c.precision, c.recall, c.f1, c.support
            ));
        }
        for (a, row) in self.confusion.iter().enumerate() {
            s.push_str(&format!("confusion\t{a}\t{}\t{}\n", row[0], row[1]));
        }
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "class  precision  recall  f1     support")?;
        for (k, c) in self.classes.iter().enumerate() {
            writeln!(
                f,
                "{k}      {:.3}      {:.3}   {:.3}  {}",
                c.precision, c.recall, c.f1, c.support
            )?;
        }
        write!(
            f,
            "accuracy {:.4} over {} pairs",
            self.accuracy(),
            self.total()
        )
    }
}

pub fn evaluate_binary(
    model: &BiTbcnnModel,
    pairs: &[PairSample],
    par: Parallelism,
) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no pairs to evaluate".into()));
    }
    let predictions = map_indexed(pairs.len(), par, |i| {
        model.predict_similarity(&pairs[i].left, &pairs[i].right)
    });
    let mut confusion = [[0u64; 2]; 2];
    for (p, pred) in pairs.iter().zip(predictions) {
        confusion[p.label][pred?.0] += 1;
    }
    Ok(MetricsReport::from_confusion(confusion))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub label: String,
    /// label → mean similarity probability against that label's references
    pub scores: BTreeMap<String, f64>,
}

/// Picks the label whose reference programs look most similar to `query`.
/// Ties go to the lexicographically first label.
pub fn detect_algorithm(
    model: &BiTbcnnModel,
    query: &IndexedAst,
    references: &BTreeMap<String, Vec<Arc<IndexedAst>>>,
) -> Result<Detection> {
    if references.is_empty() {
        return Err(Error::InvalidArgument("no reference programs".into()));
    }
    let mut scores = BTreeMap::new();
    for (label, refs) in references {
        if refs.is_empty() {
            return Err(Error::MissingLabel(label.clone()));
        }
        let mut sum = 0.0;
        for r in refs {
            sum += model.predict_similarity(query, r)?.1;
        }
        scores.insert(label.clone(), sum / refs.len() as f64);
    }
    Ok(Detection {
        label: argmax_label(&scores).to_string(),
        scores,
    })
}

/// First label with the strictly highest score, in key order.
pub fn argmax_label(scores: &BTreeMap<String, f64>) -> &str {
    let mut best: Option<(&str, f64)> = None;
    for (l, &s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((l, s));
        }
    }
    best.map(|b| b.0).unwrap_or("")
}

/// Pool of labelled reference programs from which each detection trial
/// draws `per_label` distinct programs per label.
#[derive(Clone, Debug)]
pub struct ReferenceSampler {
    pool: BTreeMap<String, Vec<Arc<IndexedAst>>>,
    per_label: usize,
}

impl ReferenceSampler {
    pub fn new(
        pool: BTreeMap<String, Vec<Arc<IndexedAst>>>,
        per_label: usize,
        labels: &[String],
    ) -> Result<Self> {
        if per_label == 0 {
            return Err(Error::Config(
                "references per label must be positive".into(),
            ));
        }
        for l in labels {
            let have = pool.get(l).map_or(0, Vec::len);
            if have == 0 {
                return Err(Error::MissingLabel(l.clone()));
            }
            if have < per_label {
                return Err(Error::InvalidArgument(format!(
                    "label `{l}` has {have} reference program(s), {per_label} needed"
                )));
            }
        }
        let pool = pool
            .into_iter()
            .filter(|(l, _)| labels.contains(l))
            .collect();
        Ok(Self { pool, per_label })
    }

    /// Groups programs by their algorithm label.
    pub fn group(programs: &[Arc<IndexedAst>]) -> BTreeMap<String, Vec<Arc<IndexedAst>>> {
        let mut pool: BTreeMap<String, Vec<Arc<IndexedAst>>> = BTreeMap::new();
        for p in programs {
            if let Some(l) = &p.algorithm_label {
                pool.entry(l.clone()).or_default().push(Arc::clone(p));
            }
        }
        pool
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.pool.keys().map(String::as_str)
    }

    pub fn draw(&self, rng: &mut RngStream) -> BTreeMap<String, Vec<Arc<IndexedAst>>> {
        self.pool
            .iter()
            .map(|(l, progs)| {
                let picks = sample_distinct(progs.len() as u64, self.per_label, rng);
                (
                    l.clone(),
                    picks
                        .into_iter()
                        .map(|i| Arc::clone(&progs[i as usize]))
                        .collect(),
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
    /// true label → (correct, total)
    pub per_label: BTreeMap<String, (u64, u64)>,
}

impl DetectionReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("#label\tcorrect\ttotal\taccuracy\n");
        for (l, (c, t)) in &self.per_label {
            s.push_str(&format!("{l}\t{c}\t{t}\t{:.6}\n", *c as f64 / *t as f64));
        }
        s.push_str(&format!(
            "all\t{}\t{}\t{:.6}\n",
            self.correct, self.total, self.accuracy
        ));
        s
    }
}

/// Detection accuracy over labelled `queries`; query `i` draws its
/// references from a stream forked off `rng` by index.
pub fn evaluate_detection(
    model: &BiTbcnnModel,
    queries: &[Arc<IndexedAst>],
    sampler: &ReferenceSampler,
    rng: &RngStream,
    par: Parallelism,
) -> Result<DetectionReport> {
    let outcomes = map_indexed(queries.len(), par, |i| {
        let q = &queries[i];
        let truth = label_of(q)?;
        let refs = sampler.draw(&mut rng.fork_path(&[TAG_QUERY, i as u64]));
        let d = detect_algorithm(model, q, &refs)?;
        Ok::<_, Error>((truth.to_string(), d.label == truth))
    });
    let mut per_label: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let (mut correct, mut total) = (0, 0);
    for o in outcomes {
        let (label, ok) = o?;
        let e = per_label.entry(label).or_default();
        e.0 += u64::from(ok);
        e.1 += 1;
        correct += u64::from(ok);
        total += 1;
    }
    Ok(DetectionReport {
        correct,
        total,
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        per_label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn progs(lang: &str, labels: &[(&str, usize)]) -> Vec<Arc<IndexedAst>> {
        let mut out = Vec::new();
        for (l, n) in labels {
            for i in 0..*n {
                let mut t = IndexedAst::from_parts(lang, vec![0], vec![vec![]]).unwrap();
                t.algorithm_label = Some(l.to_string());
                t.source_id = format!("{lang}-{l}-{i}");
                out.push(Arc::new(t));
            }
        }
        out
    }

    fn key(p: &PairSample) -> (String, String) {
        (p.left.source_id.clone(), p.right.source_id.clone())
    }

    #[test]
    fn epoch_counts_and_uniqueness() {
        let l = progs("cpp", &[("a", 5), ("b", 4), ("c", 3)]);
        let r = progs("java", &[("a", 3), ("b", 5), ("c", 4)]);
        // similar = 15 + 20 + 12 = 47
        let s = sample_epoch(&l, &r, 47, 30, &mut RngStream::new(4)).unwrap();
        assert_eq!(s.iter().filter(|p| p.label == 1).count(), 47);
        assert_eq!(s.len(), 77);
        let distinct: HashSet<_> = s.iter().map(key).collect();
        assert_eq!(distinct.len(), 77);
        for p in &s {
            let same = p.left.algorithm_label == p.right.algorithm_label;
            assert_eq!(same, p.label == 1);
        }
        assert!(sample_epoch(&l, &r, 48, 0, &mut RngStream::new(4)).is_err());
    }

    #[test]
    fn all_dissimilar_and_seeded() {
        let l = progs("cpp", &[("a", 3), ("b", 3)]);
        let r = progs("java", &[("a", 3), ("b", 3)]);
        let s = sample_epoch(&l, &r, 0, 18, &mut RngStream::new(1)).unwrap();
        assert!(s.iter().all(|p| p.label == 0));
        let a: Vec<_> = sample_epoch(&l, &r, 5, 5, &mut RngStream::new(8))
            .unwrap()
            .iter()
            .map(key)
            .collect();
        let b: Vec<_> = sample_epoch(&l, &r, 5, 5, &mut RngStream::new(8))
            .unwrap()
            .iter()
            .map(key)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn metrics_formula() {
        // class 1: TP=2, FP=0, FN=1
        let m = MetricsReport::from_confusion([[3, 0], [1, 2]]);
        let c = m.classes[1];
        assert_eq!(c.precision, 1.0);
        assert!((c.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.f1 - 0.8).abs() < 1e-12);
        let perfect = MetricsReport::from_confusion([[4, 0], [0, 5]]);
        assert!(perfect
            .classes
            .iter()
            .all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
        let none = MetricsReport::from_confusion([[0, 0], [0, 0]]);
        assert_eq!(none.classes[0].f1, 0.0);
    }

    #[test]
    fn argmax_and_ties() {
        let s: BTreeMap<String, f64> = [
            ("ms", 0.9),
            ("bs", 0.2),
            ("qs", 0.1),
            ("ll", 0.3),
            ("bfs", 0.2),
            ("kns", 0.1),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        assert_eq!(argmax_label(&s), "ms");
        let tied: BTreeMap<String, f64> = ["qs", "bs", "ms"]
            .iter()
            .map(|k| (k.to_string(), 0.4))
            .collect();
        assert_eq!(argmax_label(&tied), "bs");
    }

    #[test]
    fn sampler_requires_every_label() {
        let pool = ReferenceSampler::group(&progs("java", &[("a", 2)]));
        let err = ReferenceSampler::new(pool, 1, &["a".into(), "kns".into()]).unwrap_err();
        assert!(err.to_string().contains("kns"));
    }

    #[test]
    fn floyd_draws_are_distinct() {
        let mut rng = RngStream::new(2);
        for n in 0..=10 {
            let v = sample_distinct(10, n, &mut rng);
            let set: HashSet<_> = v.iter().collect();
            assert_eq!(set.len(), n);
            assert!(v.iter().all(|&x| x < 10));
        }
    }
}
