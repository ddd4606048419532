//! Corpus manifest, stratified splitting and pair counting.
//!
//! Manifest files are tab-separated, one program per line:
//! `source_id  language  algorithm_label  path  split`, with `-` for a
//! missing label. Lines starting with `#` are comments. Relative paths are
//! resolved against the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::ast::{index_tree, validate_tag, Ast, IndexedAst, Vocabulary};
use crate::error::{Error, Result};
use crate::numeric::RngStream;

pub const MANIFEST_HEADER: &str = "#source_id\tlanguage\talgorithm_label\tpath\tsplit";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            _ => Err(Error::InvalidArgument(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub source_id: String,
    pub language: String,
    pub algorithm_label: Option<String>,
    pub path: PathBuf,
    pub split: Split,
}

impl ManifestEntry {
    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.source_id,
            self.language,
            self.algorithm_label.as_deref().unwrap_or("-"),
            self.path.display(),
            self.split
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    /// Checks id uniqueness and tag syntax.
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.source_id.is_empty() || e.source_id.contains(['\t', '\n']) {
                return Err(Error::InvalidArgument(format!(
                    "invalid source id `{}`",
                    e.source_id
                )));
            }
            if !seen.insert(e.source_id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate source id `{}`",
                    e.source_id
                )));
            }
            validate_tag("language", &e.language)?;
            if let Some(l) = &e.algorithm_label {
                validate_tag("label", l)?;
            }
            let p = e.path.to_string_lossy();
            if p.is_empty() || p.contains(['\t', '\n']) {
                return Err(Error::InvalidArgument(format!(
                    "invalid path for `{}`",
                    e.source_id
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: ManifestEntry) -> Result<()> {
        let mut all = std::mem::take(&mut self.entries);
        all.push(entry);
        match Self::new(all.clone()) {
            Ok(m) => {
                *self = m;
                Ok(())
            }
            Err(e) => {
                all.pop();
                self.entries = all;
                Err(e)
            }
        }
    }

    /// Every label must belong to `labels`.
    pub fn check_labels(&self, labels: &[String]) -> Result<()> {
        for e in &self.entries {
            if let Some(l) = &e.algorithm_label {
                if !labels.contains(l) {
                    return Err(Error::InvalidArgument(format!(
                        "`{}` has label `{l}` outside the configured set",
                        e.source_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = |msg: String| Error::Format {
                path: "manifest".into(),
                message: format!("line {}: {msg}", n + 1),
            };
            if fields.len() != 5 {
                return Err(bad(format!(
                    "expected 5 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            entries.push(ManifestEntry {
                source_id: fields[0].to_string(),
                language: fields[1].to_string(),
                algorithm_label: (fields[2] != "-").then(|| fields[2].to_string()),
                path: PathBuf::from(fields[3]),
                split: fields[4].parse().map_err(|e: Error| bad(e.to_string()))?,
            });
        }
        Self::new(entries).map_err(|e| Error::Format {
            path: "manifest".into(),
            message: e.to_string(),
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(MANIFEST_HEADER);
        s.push('\n');
        for e in &self.entries {
            s.push_str(&e.to_line());
            s.push('\n');
        }
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the serialized manifest.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.language.as_str()).collect()
    }

    pub fn select(&self, language: &str, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        let language = language.to_string();
        self.entries
            .iter()
            .filter(move |e| e.language == language && e.split == split)
    }

    /// Per-label program counts of one language and split.
    pub fn label_counts(&self, language: &str, split: Split) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for e in self.select(language, split) {
            if let Some(l) = &e.algorithm_label {
                *out.entry(l.clone()).or_default() += 1;
            }
        }
        out
    }
}

/// `(language, label)` cells of the configured grid that hold no program.
pub fn empty_cells(
    manifest: &CorpusManifest,
    languages: &[String],
    labels: &[String],
) -> Vec<(String, String)> {
    let mut present = BTreeSet::new();
    for e in manifest.entries() {
        if let Some(l) = &e.algorithm_label {
            present.insert((e.language.as_str(), l.as_str()));
        }
    }
    let mut out = Vec::new();
    for lang in languages {
        for label in labels {
            if !present.contains(&(lang.as_str(), label.as_str())) {
                out.push((lang.clone(), label.clone()));
            }
        }
    }
    out
}

/// Assigns train/test per `(language, label)` cell. Each cell gets
/// `floor(ratio·size)` training items; the per-language shortfall against
/// `round(ratio·total)` is handed out one item at a time to the cells with
/// the largest fractional remainders. Members of a cell are ordered by
/// source id and shuffled before the cut, so input order does not matter.
pub fn split_corpus(
    manifest: &CorpusManifest,
    ratio: f64,
    rng: &mut RngStream,
) -> Result<CorpusManifest> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut cells: BTreeMap<(&str, Option<&str>), Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries().iter().enumerate() {
        cells
            .entry((e.language.as_str(), e.algorithm_label.as_deref()))
            .or_default()
            .push(i);
    }
    let mut quota: BTreeMap<(&str, Option<&str>), usize> = BTreeMap::new();
    let languages: BTreeSet<&str> = cells.keys().map(|k| k.0).collect();
    for lang in languages {
        let lang_cells: Vec<_> = cells.iter().filter(|(k, _)| k.0 == lang).collect();
        let total: usize = lang_cells.iter().map(|(_, v)| v.len()).sum();
        let target = (ratio * total as f64).round() as usize;
        let mut rem = Vec::new();
        let mut assigned = 0;
        for (k, v) in &lang_cells {
            let exact = ratio * v.len() as f64;
            let base = exact.floor() as usize;
            quota.insert(**k, base);
            assigned += base;
            rem.push((exact - base as f64, **k));
        }
        // largest remainder first; ties in cell order
        rem.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (_, k) in rem.into_iter().take(target.saturating_sub(assigned)) {
            *quota.get_mut(&k).expect("cell present") += 1;
        }
    }

    let mut entries = manifest.entries().to_vec();
    for (k, mut members) in cells {
        members.sort_by(|&a, &b| entries[a].source_id.cmp(&entries[b].source_id));
        rng.shuffle(&mut members);
        let q = quota[&k];
        for (pos, &i) in members.iter().enumerate() {
            entries[i].split = if pos < q { Split::Train } else { Split::Test };
        }
    }
    CorpusManifest::new(entries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairCounts {
    pub total: u128,
    pub similar: u128,
    pub dissimilar: u128,
}

/// Sizes of the left × right cross product and its same-label part.
pub fn count_pairs(left: &BTreeMap<String, u64>, right: &BTreeMap<String, u64>) -> PairCounts {
    let l: u128 = left.values().map(|&c| c as u128).sum();
    let r: u128 = right.values().map(|&c| c as u128).sum();
    let similar = left
        .iter()
        .map(|(k, &c)| c as u128 * right.get(k).copied().unwrap_or(0) as u128)
        .sum();
    PairCounts {
        total: l * r,
        similar,
        dissimilar: l * r - similar,
    }
}

/// A manifest row with its parsed tree.
#[derive(Clone, Debug)]
pub struct Program {
    pub entry: ManifestEntry,
    pub ast: Ast,
}

pub fn resolve_path(manifest_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_dir.join(p)
    }
}

/// Reads every canonical tree named by `manifest`. Fails on the first
/// unreadable or malformed file.
pub fn load_programs(manifest: &CorpusManifest, manifest_dir: &Path) -> Result<Vec<Program>> {
    manifest
        .entries()
        .iter()
        .map(|e| {
            let path = resolve_path(manifest_dir, &e.path);
            let text = std::fs::read_to_string(&path).map_err(|err| Error::io(&path, err))?;
            let mut ast = Ast::from_canonical(&text, &e.language, &e.source_id).map_err(|err| {
                Error::Format {
                    path: path.clone(),
                    message: err.to_string(),
                }
            })?;
            ast.algorithm_label = e.algorithm_label.clone();
            Ok(Program {
                entry: e.clone(),
                ast,
            })
        })
        .collect()
}

/// Indexes the programs of one language and split.
pub fn index_split(
    programs: &[Program],
    vocab: &Vocabulary,
    split: Split,
) -> Result<Vec<Arc<IndexedAst>>> {
    programs
        .iter()
        .filter(|p| p.entry.language == vocab.language() && p.entry.split == split)
        .map(|p| index_tree(&p.ast, vocab).map(Arc::new))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, lang: &str, label: &str) -> ManifestEntry {
        ManifestEntry {
            source_id: id.into(),
            language: lang.into(),
            algorithm_label: Some(label.into()),
            path: format!("{id}.tree").into(),
            split: Split::Unassigned,
        }
    }

    fn manifest(cells: &[(&str, &str, usize)]) -> CorpusManifest {
        let mut v = Vec::new();
        for (lang, label, n) in cells {
            for i in 0..*n {
                v.push(entry(&format!("{lang}-{label}-{i}"), lang, label));
            }
        }
        CorpusManifest::new(v).unwrap()
    }

    fn train_count(m: &CorpusManifest, lang: &str) -> usize {
        m.select(lang, Split::Train).count()
    }

    #[test]
    fn ten_items_split_seven_three() {
        let m = manifest(&[("cpp", "qs", 10)]);
        let s = split_corpus(&m, 0.7, &mut RngStream::new(1)).unwrap();
        assert_eq!(train_count(&s, "cpp"), 7);
        assert_eq!(s.select("cpp", Split::Test).count(), 3);
    }

    #[test]
    fn split_is_seeded() {
        let m = manifest(&[("cpp", "qs", 10), ("java", "qs", 9)]);
        let a = split_corpus(&m, 0.7, &mut RngStream::new(3)).unwrap();
        let b = split_corpus(&m, 0.7, &mut RngStream::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cpp_table_totals() {
        let m = manifest(&[
            ("cpp", "ms", 588),
            ("cpp", "bs", 531),
            ("cpp", "qs", 567),
            ("cpp", "ll", 609),
            ("cpp", "bfs", 609),
            ("cpp", "kns", 630),
        ]);
        assert_eq!(m.len(), 3534);
        let s = split_corpus(&m, 0.7, &mut RngStream::new(0)).unwrap();
        assert_eq!(train_count(&s, "cpp"), 2474);
    }

    #[test]
    fn bad_ratio() {
        let m = manifest(&[("cpp", "qs", 2)]);
        assert!(split_corpus(&m, 1.0, &mut RngStream::new(0)).is_err());
        assert!(split_corpus(&m, 0.0, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn small_pair_count() {
        let l = BTreeMap::from([("a".to_string(), 2), ("b".to_string(), 1)]);
        let r = BTreeMap::from([("a".to_string(), 1), ("b".to_string(), 2)]);
        let c = count_pairs(&l, &r);
        assert_eq!((c.total, c.similar, c.dissimilar), (9, 4, 5));
    }

    #[test]
    fn manifest_text_round_trip() {
        let mut m = manifest(&[("cpp", "qs", 2)]);
        m.push(ManifestEntry {
            algorithm_label: None,
            ..entry("x", "java", "-")
        })
        .unwrap();
        let back = CorpusManifest::parse(&m.to_tsv()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.digest(), m.digest());
        assert!(m.push(entry("x", "java", "qs")).is_err());
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn malformed_manifest_lines() {
        assert!(CorpusManifest::parse("a\tcpp\tqs\tp\n").is_err());
        assert!(CorpusManifest::parse("a\tcpp\tqs\tp\tlater\n").is_err());
        assert!(CorpusManifest::parse("a\tcpp\tqs\tp\ttrain\na\tcpp\tqs\tq\ttest\n").is_err());
    }

    #[test]
    fn empty_cells_are_reported() {
        let m = manifest(&[("cpp", "qs", 1)]);
        let cells = empty_cells(&m, &["cpp".into()], &["qs".into(), "kns".into()]);
        assert_eq!(cells, [("cpp".to_string(), "kns".to_string())]);
    }
}
