//! Program trees: loading, identifier stripping, vocabularies and indexing.

mod canonical;
mod indexed;
mod srcml;
mod stats;
mod vocab;

pub use canonical::{is_valid_name, parse_canonical_tree, to_canonical};
pub use indexed::{index_tree, IndexedAst};
pub use srcml::{convert_srcml, SrcmlOptions};
pub use stats::{corpus_stats, CorpusStats};
pub use vocab::{build_vocabulary, Vocabulary, UNKNOWN_NAME};

use crate::error::{Error, Result};

/// One node of a program tree; only the grammar node type is kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AstNode {
    pub type_name: String,
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn leaf(type_name: impl Into<String>) -> Self {
        Self {
            type_name: type_name.into(),
            children: Vec::new(),
        }
    }

    pub fn with_children(type_name: impl Into<String>, children: Vec<AstNode>) -> Self {
        Self {
            type_name: type_name.into(),
            children,
        }
    }

    /// Preorder traversal.
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: vec![self] }
    }

    pub fn node_count(&self) -> usize {
        self.preorder().count()
    }

    /// Nodes on the longest root-to-leaf path; a single node has depth 1.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self, 1usize)];
        while let Some((n, d)) = stack.pop() {
            best = best.max(d);
            stack.extend(n.children.iter().map(|c| (c, d + 1)));
        }
        best
    }
}

pub struct Preorder<'a> {
    stack: Vec<&'a AstNode>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a AstNode;

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.stack.pop()?;
        self.stack.extend(n.children.iter().rev());
        Some(n)
    }
}

/// A program tree tagged with its language family and optional algorithm label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ast {
    pub root: AstNode,
    pub language: String,
    pub source_id: String,
    pub algorithm_label: Option<String>,
}

impl Ast {
    pub fn new(root: AstNode, language: impl Into<String>, source_id: impl Into<String>) -> Self {
        Self {
            root,
            language: language.into(),
            source_id: source_id.into(),
            algorithm_label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.algorithm_label = Some(label.into());
        self
    }

    pub fn from_canonical(text: &str, language: &str, source_id: &str) -> Result<Self> {
        Ok(Self::new(parse_canonical_tree(text)?, language, source_id))
    }
}

/// Language and label tags share the identifier alphabet of node names,
/// minus `:`.
pub fn validate_tag(kind: &str, tag: &str) -> Result<()> {
    if !tag.is_empty()
        && tag
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
    {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("invalid {kind} `{tag}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preorder_and_depth() {
        let t = AstNode::with_children(
            "a",
            vec![
                AstNode::with_children("b", vec![AstNode::leaf("c")]),
                AstNode::leaf("d"),
            ],
        );
        let names: Vec<_> = t.preorder().map(|n| n.type_name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "d"]);
        assert_eq!(t.depth(), 3);
        assert_eq!(AstNode::leaf("x").depth(), 1);
    }

    #[test]
    fn tags() {
        assert!(validate_tag("language", "cpp").is_ok());
        assert!(validate_tag("language", "srcml-family").is_ok());
        assert!(validate_tag("language", "").is_err());
        assert!(validate_tag("language", "c++").is_err());
    }
}
