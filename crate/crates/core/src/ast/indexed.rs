use super::{Ast, AstNode, Vocabulary};
use crate::error::{Error, Result};

/// A tree in vocabulary-index form, stored flat in preorder: node 0 is the
/// root and every child has a larger id than its parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexedAst {
    pub language: String,
    pub source_id: String,
    pub algorithm_label: Option<String>,
    types: Vec<usize>,
    children: Vec<Vec<usize>>,
    depth: usize,
}

impl IndexedAst {
    /// Assembles a tree from preorder node types and child lists, checking
    /// that the lists describe a single tree rooted at node 0 in preorder.
    pub fn from_parts(
        language: impl Into<String>,
        types: Vec<usize>,
        children: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = types.len();
        if n == 0 || children.len() != n {
            return Err(Error::InvalidArgument(
                "tree needs matching, non-empty type and child lists".into(),
            ));
        }
        // a preorder walk of the child lists must visit 0, 1, 2, ... in turn
        let mut expected = 0;
        let mut depth = 0;
        let mut stack = vec![(0usize, 1usize)];
        while let Some((v, d)) = stack.pop() {
            if v != expected {
                return Err(Error::InvalidArgument(format!(
                    "node {v} is not in preorder position {expected}"
                )));
            }
            expected += 1;
            depth = depth.max(d);
            for &c in children[v].iter().rev() {
                if c >= n {
                    return Err(Error::InvalidArgument(format!("child id {c} out of range")));
                }
                stack.push((c, d + 1));
            }
        }
        if expected != n {
            return Err(Error::InvalidArgument(format!(
                "{} node(s) unreachable from the root",
                n - expected
            )));
        }
        Ok(Self {
            language: language.into(),
            source_id: String::new(),
            algorithm_label: None,
            types,
            children,
            depth,
        })
    }

    pub fn node_count(&self) -> usize {
        self.types.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn type_of(&self, node: usize) -> usize {
        self.types[node]
    }

    /// Node types in preorder.
    pub fn types(&self) -> &[usize] {
        &self.types
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn max_type(&self) -> usize {
        self.types.iter().copied().max().unwrap_or(0)
    }

    /// Reverse lookup into names; unknown slots render as [`super::UNKNOWN_NAME`].
    pub fn to_ast(&self, vocab: &Vocabulary) -> Ast {
        fn build(t: &IndexedAst, v: usize, vocab: &Vocabulary) -> AstNode {
            AstNode::with_children(
                vocab.name(t.types[v]).unwrap_or(super::UNKNOWN_NAME),
                t.children[v].iter().map(|&c| build(t, c, vocab)).collect(),
            )
        }
        Ast {
            root: build(self, 0, vocab),
            language: self.language.clone(),
            source_id: self.source_id.clone(),
            algorithm_label: self.algorithm_label.clone(),
        }
    }
}

/// Maps every node name through `vocab`; unseen names take the unknown index.
pub fn index_tree(ast: &Ast, vocab: &Vocabulary) -> Result<IndexedAst> {
    if ast.language != vocab.language() {
        return Err(Error::LanguageMismatch {
            expected: vocab.language().to_string(),
            got: ast.language.clone(),
        });
    }
    let mut types = Vec::new();
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut depth = 0;
    // (node, parent id, depth)
    let mut stack: Vec<(&AstNode, Option<usize>, usize)> = vec![(&ast.root, None, 1)];
    while let Some((node, parent, d)) = stack.pop() {
        let id = types.len();
        types.push(vocab.index(&node.type_name));
        children.push(Vec::with_capacity(node.children.len()));
        if let Some(p) = parent {
            children[p].push(id);
        }
        depth = depth.max(d);
        stack.extend(node.children.iter().rev().map(|c| (c, Some(id), d + 1)));
    }
    Ok(IndexedAst {
        language: ast.language.clone(),
        source_id: ast.source_id.clone(),
        algorithm_label: ast.algorithm_label.clone(),
        types,
        children,
        depth,
    })
}
