//! Tree-based convolution over depth-2 windows with continuous-binary-tree
//! weighting, followed by max pooling over nodes.
//!
//! Each window is a node and its direct children. A window member `i` is
//! weighted by `η_t(i)·W_t + η_l(i)·W_l + η_r(i)·W_r`; the window root gets
//! pure `W_t`, and children interpolate between `W_l` and `W_r` by their
//! sibling position. Leaves form a window of one.

use std::sync::Arc;

use crate::ast::IndexedAst;
use crate::error::{Error, Result};
use crate::numeric::{MixEntry, NodeId, ParamStore, RngStream, Tape, Tensor, WindowPlan};

/// Position of one node inside a convolution window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EtaInputs {
    depth_in_window: usize,
    window_depth: usize,
    position: usize,
    siblings: usize,
}

impl EtaInputs {
    /// `depth_in_window` counts from the window bottom (1) up to the window
    /// root (`window_depth`); `position` is 1-based among `siblings`.
    pub fn new(
        depth_in_window: usize,
        window_depth: usize,
        position: usize,
        siblings: usize,
    ) -> Result<Self> {
        if depth_in_window == 0
            || depth_in_window > window_depth
            || position == 0
            || position > siblings
        {
            return Err(Error::InvalidArgument(format!(
                "invalid window position d_i={depth_in_window} d={window_depth} p={position} n={siblings}"
            )));
        }
        Ok(Self {
            depth_in_window,
            window_depth,
            position,
            siblings,
        })
    }

    pub fn window_root() -> Self {
        Self {
            depth_in_window: 2,
            window_depth: 2,
            position: 1,
            siblings: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaWeights {
    pub top: f64,
    pub left: f64,
    pub right: f64,
}

pub fn compute_eta(inp: EtaInputs) -> EtaWeights {
    let top = if inp.window_depth == 1 {
        1.0
    } else {
        (inp.depth_in_window - 1) as f64 / (inp.window_depth - 1) as f64
    };
    let sibling_factor = if inp.siblings == 1 {
        0.5
    } else {
        (inp.position - 1) as f64 / (inp.siblings - 1) as f64
    };
    let right = (1.0 - top) * sibling_factor;
    let left = (1.0 - top) - right;
    EtaWeights { top, left, right }
}

/// Convolution weights of one encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct TbcnnParams {
    pub w_top: Tensor,
    pub w_left: Tensor,
    pub w_right: Tensor,
    pub bias: Tensor,
}

impl TbcnnParams {
    /// Uniform in `±sqrt(6/(E+C))` for the matrices, zero bias.
    pub fn init(embedding_dim: usize, conv_dim: usize, rng: &mut RngStream) -> Self {
        let r = glorot_range(embedding_dim, conv_dim);
        let mut mat = || uniform_matrix(conv_dim, embedding_dim, r, rng);
        Self {
            w_top: mat(),
            w_left: mat(),
            w_right: mat(),
            bias: Tensor::zeros(&[conv_dim]),
        }
    }

    pub fn conv_dim(&self) -> usize {
        self.bias.numel()
    }
}

pub(crate) fn glorot_range(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub(crate) fn uniform_matrix(rows: usize, cols: usize, r: f64, rng: &mut RngStream) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.uniform_range(-r, r)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

/// Window membership and η coefficients for every node of `tree`.
pub fn conv_windows(tree: &IndexedAst) -> WindowPlan {
    let n = tree.node_count();
    let root = compute_eta(EtaInputs::window_root());
    let windows = (0..n)
        .map(|v| {
            let kids = tree.children(v);
            let mut w = Vec::with_capacity(kids.len() + 1);
            w.push(MixEntry {
                src: v,
                top: root.top,
                left: root.left,
                right: root.right,
            });
            for (p, &c) in kids.iter().enumerate() {
                let eta = compute_eta(EtaInputs {
                    depth_in_window: 1,
                    window_depth: 2,
                    position: p + 1,
                    siblings: kids.len(),
                });
                w.push(MixEntry {
                    src: c,
                    top: eta.top,
                    left: eta.left,
                    right: eta.right,
                });
            }
            w
        })
        .collect();
    WindowPlan::new(n, windows).expect("tree children are in range")
}

/// Tape handles of one encoder's parameters.
#[derive(Clone, Copy, Debug)]
pub struct EncoderNodes {
    pub embedding: NodeId,
    pub w_top: NodeId,
    pub w_left: NodeId,
    pub w_right: NodeId,
    pub bias: NodeId,
}

/// Records the convolution; returns the `N×C` per-node features.
pub fn record_convolution(
    tape: &mut Tape<'_>,
    tree: &IndexedAst,
    p: EncoderNodes,
) -> Result<NodeId> {
    let vocab_rows = tape.value(p.embedding).shape()[0];
    if tree.max_type() >= vocab_rows {
        return Err(Error::dim(
            "tree type index",
            format!("< {vocab_rows}"),
            tree.max_type(),
        ));
    }
    // Projecting the whole table first is cheaper once the tree has more
    // nodes than the vocabulary has rows; both orders give the same values.
    let (top, left, right) = if vocab_rows < tree.node_count() {
        let mut project = |w| -> Result<NodeId> {
            let t = tape.matmul_nt(p.embedding, w)?;
            tape.gather(t, tree.types())
        };
        (project(p.w_top)?, project(p.w_left)?, project(p.w_right)?)
    } else {
        let x = tape.gather(p.embedding, tree.types())?;
        (
            tape.matmul_nt(x, p.w_top)?,
            tape.matmul_nt(x, p.w_left)?,
            tape.matmul_nt(x, p.w_right)?,
        )
    };
    let mixed = tape.window_sum(top, left, right, Arc::new(conv_windows(tree)))?;
    let biased = tape.add_row_bias(mixed, p.bias)?;
    tape.tanh(biased)
}

/// Records convolution plus pooling; returns the length-`C` tree vector.
pub fn record_encoding(tape: &mut Tape<'_>, tree: &IndexedAst, p: EncoderNodes) -> Result<NodeId> {
    let conv = record_convolution(tape, tree, p)?;
    tape.max_pool_rows(conv)
}

fn constant_nodes(tape: &mut Tape<'_>, emb: &Tensor, params: &TbcnnParams) -> Result<EncoderNodes> {
    let (_, e) = emb.dims2()?;
    let (c, pe) = params.w_top.dims2()?;
    if pe != e {
        return Err(Error::dim("conv weight columns", e, pe));
    }
    for w in [&params.w_left, &params.w_right] {
        if w.shape() != params.w_top.shape() {
            return Err(Error::dim(
                "conv weight",
                format!("{c}x{e}"),
                format!("{:?}", w.shape()),
            ));
        }
    }
    if params.bias.numel() != c {
        return Err(Error::dim("conv bias", c, params.bias.numel()));
    }
    Ok(EncoderNodes {
        embedding: tape.constant(emb.clone())?,
        w_top: tape.constant(params.w_top.clone())?,
        w_left: tape.constant(params.w_left.clone())?,
        w_right: tape.constant(params.w_right.clone())?,
        bias: tape.constant(params.bias.clone())?,
    })
}

/// Per-node convolution output, `N×C`.
pub fn tree_convolution(tree: &IndexedAst, emb: &Tensor, params: &TbcnnParams) -> Result<Tensor> {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let nodes = constant_nodes(&mut tape, emb, params)?;
    let conv = record_convolution(&mut tape, tree, nodes)?;
    Ok(tape.value(conv).clone())
}

/// Elementwise maximum over node vectors.
pub fn dynamic_max_pool(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot pool zero nodes".into()))?;
    let mut out = first.clone();
    for r in &rows[1..] {
        if r.len() != out.len() {
            return Err(Error::dim("pool row", out.len(), r.len()));
        }
        for (o, v) in out.iter_mut().zip(r) {
            *o = o.max(*v);
        }
    }
    Ok(out)
}

/// Fixed-size feature vector of one tree.
pub fn encode_tree(tree: &IndexedAst, emb: &Tensor, params: &TbcnnParams) -> Result<Tensor> {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let nodes = constant_nodes(&mut tape, emb, params)?;
    let enc = record_encoding(&mut tape, tree, nodes)?;
    Ok(tape.value(enc).clone())
}
