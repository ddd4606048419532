use std::collections::BTreeSet;

use super::canonical::is_valid_name;
use super::AstNode;
use crate::error::{Error, Result};

/// Element filtering for srcML import.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SrcmlOptions {
    /// Local element names dropped together with their subtrees, e.g.
    /// `position` or `comment`. Empty keeps every element.
    pub prune: BTreeSet<String>,
}

impl SrcmlOptions {
    pub fn pruning<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            prune: names.into_iter().map(Into::into).collect(),
        }
    }
}

/// Converts a srcML document into a node-type tree: every element becomes a
/// node named by its local name; text, attributes, comments and processing
/// instructions are discarded, which removes identifiers and literals.
pub fn convert_srcml(xml: &str, options: &SrcmlOptions) -> Result<AstNode> {
    if xml.trim().is_empty() {
        return Err(Error::Xml("empty document".into()));
    }
    let doc = roxmltree::Document::parse(xml).map_err(|e| Error::Xml(e.to_string()))?;
    let root = doc.root_element();
    if options.prune.contains(root.tag_name().name()) {
        return Err(Error::Xml(format!(
            "root element `{}` is pruned",
            root.tag_name().name()
        )));
    }
    convert_element(root, options)
}

fn convert_element(el: roxmltree::Node<'_, '_>, options: &SrcmlOptions) -> Result<AstNode> {
    let name = el.tag_name().name();
    if !is_valid_name(name) {
        return Err(Error::Xml(format!(
            "element name `{name}` is not a valid node type"
        )));
    }
    let children = el
        .children()
        .filter(|c| c.is_element() && !options.prune.contains(c.tag_name().name()))
        .map(|c| convert_element(c, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(AstNode::with_children(name, children))
}
