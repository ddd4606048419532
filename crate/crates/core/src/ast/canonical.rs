//! Parenthesized tree text: `tree := '(' name tree* ')'`, with
//! `name = [A-Za-z0-9_:-]+` and free whitespace between tokens.

use super::AstNode;
use crate::error::{Error, Result};

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b':' | b'-')
}

pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(is_name_byte)
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

/// Parses exactly one tree. Works with an explicit stack, so nesting depth is
/// bounded only by memory.
pub fn parse_canonical_tree(text: &str) -> Result<AstNode> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut stack: Vec<AstNode> = Vec::new();
    let mut root: Option<AstNode> = None;

    let skip_ws = |pos: &mut usize| {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
    };

    loop {
        skip_ws(&mut pos);
        if pos >= bytes.len() {
            break;
        }
        if root.is_some() {
            return Err(err(pos, "trailing input after tree"));
        }
        match bytes[pos] {
            b'(' => {
                pos += 1;
                skip_ws(&mut pos);
                let start = pos;
                while pos < bytes.len() && is_name_byte(bytes[pos]) {
                    pos += 1;
                }
                if start == pos {
                    return Err(if pos >= bytes.len() {
                        err(pos, "unexpected end of input, expected node name")
                    } else {
                        err(
                            pos,
                            format!("expected node name, found `{}`", bytes[pos] as char),
                        )
                    });
                }
                stack.push(AstNode::leaf(&text[start..pos]));
            }
            b')' => {
                let Some(done) = stack.pop() else {
                    return Err(err(pos, "unbalanced `)`"));
                };
                pos += 1;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => root = Some(done),
                }
            }
            other => {
                let what = if stack.is_empty() {
                    "expected `(`"
                } else {
                    "expected `(` or `)`"
                };
                return Err(err(pos, format!("{what}, found `{}`", other as char)));
            }
        }
    }
    if !stack.is_empty() {
        return Err(err(
            bytes.len(),
            format!("unexpected end of input, {} unclosed node(s)", stack.len()),
        ));
    }
    root.ok_or_else(|| err(0, "empty input"))
}

/// Single-line rendering, e.g. `(unit (function (block)))`.
pub fn to_canonical(root: &AstNode) -> String {
    enum Step<'a> {
        Open(&'a AstNode),
        Close,
    }
    let mut out = String::new();
    let mut stack = vec![Step::Open(root)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Open(n) => {
                if !out.is_empty() && !out.ends_with('(') {
                    out.push(' ');
                }
                out.push('(');
                out.push_str(&n.type_name);
                stack.push(Step::Close);
                stack.extend(n.children.iter().rev().map(Step::Open));
            }
            Step::Close => out.push(')'),
        }
    }
    out
}
