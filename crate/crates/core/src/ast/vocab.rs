use std::collections::{BTreeMap, BTreeSet};

use super::Ast;
use crate::error::{Error, Result};

/// Display name for the reserved unknown slot; never a valid node name.
pub const UNKNOWN_NAME: &str = "<unk>";

/// Per-language bijection between node-type names and indices. Known names
/// take `0..V-1` in lexicographic order; index `V-1` is the unknown slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    language: String,
    names: Vec<String>,
    index_of: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Builds from an arbitrary collection of names; duplicates collapse.
    pub fn from_names<I, S>(language: impl Into<String>, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        let names: Vec<String> = sorted.into_iter().collect();
        let index_of = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self {
            language: language.into(),
            names,
            index_of,
        }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    /// `V`: known names plus the unknown slot.
    pub fn size(&self) -> usize {
        self.names.len() + 1
    }

    pub fn known_count(&self) -> usize {
        self.names.len()
    }

    pub fn unknown_index(&self) -> usize {
        self.names.len()
    }

    pub fn index(&self, name: &str) -> usize {
        self.index_of
            .get(name)
            .copied()
            .unwrap_or(self.unknown_index())
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index_of.get(name).copied()
    }

    /// Reverse lookup; `None` for the unknown slot or out-of-range indices.
    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    /// Known names in index order.
    pub fn names(&self) -> &[String] {
        &self.names
    }
}

pub fn build_vocabulary(corpus: &[Ast], language: &str) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "cannot build a `{language}` vocabulary from an empty corpus"
        )));
    }
    if let Some(a) = corpus.iter().find(|a| a.language != language) {
        return Err(Error::LanguageMismatch {
            expected: language.to_string(),
            got: a.language.clone(),
        });
    }
    let names = corpus
        .iter()
        .flat_map(|a| a.root.preorder().map(|n| n.type_name.clone()));
    Ok(Vocabulary::from_names(language, names))
}
