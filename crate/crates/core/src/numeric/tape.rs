//! Reverse-mode differentiation over a linear tape.
//!
//! Nodes are appended in evaluation order and may only reference earlier
//! nodes, so the recorded graph is acyclic by construction. Parameters are
//! read from a borrowed [`ParamStore`]; `backward` returns a [`Gradients`]
//! set which the caller folds back into the store once the tape is dropped.

use std::sync::Arc;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{axpy, dot, matmul_nt, Tensor, PROB_FLOOR};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

/// One source row contributing to an output row of [`Tape::window_sum`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixEntry {
    pub src: usize,
    pub top: f64,
    pub left: f64,
    pub right: f64,
}

/// Sparse three-way row mixing: output row `v` is
/// `Σ_e (e.top·A[e.src] + e.left·B[e.src] + e.right·C[e.src])`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowPlan {
    rows: usize,
    offsets: Vec<usize>,
    entries: Vec<MixEntry>,
}

impl WindowPlan {
    pub fn new(rows: usize, windows: Vec<Vec<MixEntry>>) -> Result<Self> {
        if windows.len() != rows {
            return Err(Error::dim("window plan", rows, windows.len()));
        }
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for w in windows {
            if let Some(bad) = w.iter().find(|e| e.src >= rows) {
                return Err(Error::InvalidArgument(format!(
                    "window source row {} out of range {rows}",
                    bad.src
                )));
            }
            entries.extend(w);
            offsets.push(entries.len());
        }
        Ok(Self {
            rows,
            offsets,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn window(&self, v: usize) -> &[MixEntry] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Gather {
        table: NodeId,
        rows: Vec<usize>,
    },
    MatMulNt {
        x: NodeId,
        w: NodeId,
    },
    Affine {
        w: NodeId,
        x: NodeId,
        b: Option<NodeId>,
    },
    WindowSum {
        top: NodeId,
        left: NodeId,
        right: NodeId,
        plan: Arc<WindowPlan>,
    },
    AddRowBias {
        x: NodeId,
        b: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    MulConst {
        x: NodeId,
        mask: Tensor,
    },
    Scale {
        x: NodeId,
        c: f64,
    },
    Tanh {
        x: NodeId,
    },
    MaxPoolRows {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Concat {
        a: NodeId,
        b: NodeId,
    },
    Sum {
        x: NodeId,
    },
    Softmax {
        x: NodeId,
    },
    CrossEntropy {
        p: NodeId,
        label: usize,
    },
    Reshape {
        x: NodeId,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::Gather { .. } => "gather",
            Op::MatMulNt { .. } => "matmul",
            Op::Affine { .. } => "affine",
            Op::WindowSum { .. } => "window_sum",
            Op::AddRowBias { .. } => "add_row_bias",
            Op::Add { .. } => "add",
            Op::Mul { .. } => "mul",
            Op::MulConst { .. } => "mul_const",
            Op::Scale { .. } => "scale",
            Op::Tanh { .. } => "tanh",
            Op::MaxPoolRows { .. } => "max_pool",
            Op::Concat { .. } => "concat",
            Op::Sum { .. } => "sum",
            Op::Softmax { .. } => "softmax",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Reshape { .. } => "reshape",
        }
    }
}

struct Node {
    op: Op,
    value: Option<Tensor>,
    needs_grad: bool,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.op, &node.value) {
            (Op::Param(pid), _) => self.params.value(*pid),
            (_, Some(v)) => v,
            _ => unreachable!("non-parameter node without value"),
        }
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Result<NodeId> {
        value.ensure_finite(op.name())?;
        self.nodes.push(Node {
            op,
            value: Some(value),
            needs_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Constant, value, false)
    }

    /// Node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            needs_grad: true,
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(n);
        n
    }

    /// Embedding lookup: selects `rows` of a `V×E` table into an `n×E` matrix.
    pub fn gather(&mut self, table: NodeId, rows: &[usize]) -> Result<NodeId> {
        let t = self.value(table);
        let (v, e) = t.dims2()?;
        if rows.is_empty() {
            return Err(Error::InvalidArgument("gather of zero rows".into()));
        }
        let mut out = Vec::with_capacity(rows.len() * e);
        for &r in rows {
            if r >= v {
                return Err(Error::dim("gather row", format!("< {v}"), r));
            }
            out.extend_from_slice(t.row(r));
        }
        let value = Tensor::matrix(rows.len(), e, out)?;
        let needs = self.needs(table);
        self.push(
            Op::Gather {
                table,
                rows: rows.to_vec(),
            },
            value,
            needs,
        )
    }

    /// `x · wᵀ` with `x: n×k` (or a length-`k` vector) and `w: m×k`.
    pub fn matmul_nt(&mut self, x: NodeId, w: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(w).dims2()?;
        let xv = self.value(x);
        let (n, xk) = match xv.shape() {
            [n, k] => (*n, *k),
            [k] => (1, *k),
            s => return Err(Error::dim("matmul", "rank 1 or 2", format!("{s:?}"))),
        };
        if xk != k {
            return Err(Error::dim("matmul inner", k, xk));
        }
        let data = matmul_nt(xv.data(), n, self.value(w).data(), m, k);
        let shape = if xv.rank() == 1 { vec![m] } else { vec![n, m] };
        let needs = self.needs(x) || self.needs(w);
        self.push(Op::MatMulNt { x, w }, Tensor::new(shape, data)?, needs)
    }

    /// `W·x + b`.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let (m, n) = self.value(w).dims2()?;
        let xv = self.value(x);
        if xv.numel() != n {
            return Err(Error::dim("affine input", n, xv.numel()));
        }
        let mut out = matmul_nt(xv.data(), 1, self.value(w).data(), m, n);
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.numel() != m {
                return Err(Error::dim("affine bias", m, bv.numel()));
            }
            for (o, bi) in out.iter_mut().zip(bv.data()) {
                *o += bi;
            }
        }
        let needs = self.needs(w) || self.needs(x) || b.is_some_and(|b| self.needs(b));
        self.push(Op::Affine { w, x, b }, Tensor::vector(out), needs)
    }

    pub fn window_sum(
        &mut self,
        top: NodeId,
        left: NodeId,
        right: NodeId,
        plan: Arc<WindowPlan>,
    ) -> Result<NodeId> {
        let shape = self.value(top).shape().to_vec();
        let (n, c) = self.value(top).dims2()?;
        for other in [left, right] {
            if self.value(other).shape() != shape.as_slice() {
                return Err(Error::dim(
                    "window_sum",
                    format!("{shape:?}"),
                    format!("{:?}", self.value(other).shape()),
                ));
            }
        }
        if plan.rows() != n {
            return Err(Error::dim("window_sum rows", n, plan.rows()));
        }
        let (a, b, cc) = (self.value(top), self.value(left), self.value(right));
        let mut out = Tensor::zeros(&[n, c]);
        for v in 0..n {
            let row = out.row_mut(v);
            for e in plan.window(v) {
                if e.top != 0.0 {
                    axpy(e.top, a.row(e.src), row);
                }
                if e.left != 0.0 {
                    axpy(e.left, b.row(e.src), row);
                }
                if e.right != 0.0 {
                    axpy(e.right, cc.row(e.src), row);
                }
            }
        }
        let needs = self.needs(top) || self.needs(left) || self.needs(right);
        self.push(
            Op::WindowSum {
                top,
                left,
                right,
                plan,
            },
            out,
            needs,
        )
    }

    /// Adds the length-`c` bias to every row of an `n×c` matrix.
    pub fn add_row_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let c = *self.value(x).shape().last().unwrap_or(&0);
        if self.value(b).numel() != c {
            return Err(Error::dim("row bias", c, self.value(b).numel()));
        }
        let mut out = self.value(x).clone();
        let bv = self.value(b).data();
        for row in out.data_mut().chunks_exact_mut(c) {
            for (o, bi) in row.iter_mut().zip(bv) {
                *o += bi;
            }
        }
        let needs = self.needs(x) || self.needs(b);
        self.push(Op::AddRowBias { x, b }, out, needs)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(op, format!("{sa:?}"), format!("{sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        self.push(Op::Add { a, b }, out, needs)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let mut out = self.value(a).clone();
        for (o, y) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o *= y;
        }
        let needs = self.needs(a) || self.needs(b);
        self.push(Op::Mul { a, b }, out, needs)
    }

    /// Elementwise product with a constant tensor, e.g. a dropout mask.
    pub fn mul_const(&mut self, x: NodeId, mask: Tensor) -> Result<NodeId> {
        if self.value(x).shape() != mask.shape() {
            return Err(Error::dim(
                "mul_const",
                format!("{:?}", self.value(x).shape()),
                format!("{:?}", mask.shape()),
            ));
        }
        let mut out = self.value(x).clone();
        for (o, m) in out.data_mut().iter_mut().zip(mask.data()) {
            *o *= m;
        }
        let needs = self.needs(x);
        self.push(Op::MulConst { x, mask }, out, needs)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= c);
        let needs = self.needs(x);
        self.push(Op::Scale { x, c }, out, needs)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let out = super::tensor::tanh_map(self.value(x));
        let needs = self.needs(x);
        self.push(Op::Tanh { x }, out, needs)
    }

    /// Column-wise maximum over the rows of an `n×c` matrix. Ties go to the
    /// lowest row index.
    pub fn max_pool_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let (n, c) = xv.dims2()?;
        let mut best = xv.row(0).to_vec();
        let mut argmax = vec![0usize; c];
        for r in 1..n {
            for (j, &v) in xv.row(r).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = r;
                }
            }
        }
        let needs = self.needs(x);
        self.push(Op::MaxPoolRows { x, argmax }, Tensor::vector(best), needs)
    }

    /// Concatenates the flattened values of `a` and `b`.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let mut out = self.value(a).data().to_vec();
        out.extend_from_slice(self.value(b).data());
        let needs = self.needs(a) || self.needs(b);
        self.push(Op::Concat { a, b }, Tensor::vector(out), needs)
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).data().iter().sum();
        let needs = self.needs(x);
        self.push(Op::Sum { x }, Tensor::scalar(s), needs)
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let out = super::tensor::softmax(self.value(x))?;
        let needs = self.needs(x);
        self.push(Op::Softmax { x }, out, needs)
    }

    pub fn cross_entropy(&mut self, p: NodeId, label: usize) -> Result<NodeId> {
        let loss = super::tensor::cross_entropy(self.value(p), label)?;
        let needs = self.needs(p);
        self.push(Op::CrossEntropy { p, label }, Tensor::scalar(loss), needs)
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let out = self.value(x).clone().reshape(shape)?;
        let needs = self.needs(x);
        self.push(Op::Reshape { x }, out, needs)
    }

    /// Gradients of the scalar `loss` with respect to every parameter that
    /// took part in computing it.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::ones(self.value(loss).shape()));
        let mut out = Gradients::with_len(self.params.len());

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(&node.op, NodeId(i), g, &mut grads, &mut out)?;
        }
        Ok(out)
    }

    fn propagate(
        &self,
        op: &Op,
        me: NodeId,
        g: Tensor,
        grads: &mut [Option<Tensor>],
        out: &mut Gradients,
    ) -> Result<()> {
        match op {
            Op::Constant => {}
            Op::Param(pid) => out.add_owned(*pid, g),
            Op::Gather { table, rows } => {
                if self.needs(*table) {
                    let t = self.value(*table);
                    let mut dt = Tensor::zeros(t.shape());
                    for (i, &r) in rows.iter().enumerate() {
                        axpy(1.0, g.row(i), dt.row_mut(r));
                    }
                    accumulate(grads, *table, dt);
                }
            }
            Op::MatMulNt { x, w } => {
                let wv = self.value(*w);
                let xv = self.value(*x);
                let (m, k) = wv.dims2()?;
                let n = xv.numel() / k;
                if self.needs(*x) {
                    let mut dx = Tensor::zeros(xv.shape());
                    for (gr, dxr) in g
                        .data()
                        .chunks_exact(m)
                        .zip(dx.data_mut().chunks_exact_mut(k))
                    {
                        for (j, &gj) in gr.iter().enumerate() {
                            if gj != 0.0 {
                                axpy(gj, &wv.data()[j * k..(j + 1) * k], dxr);
                            }
                        }
                    }
                    accumulate(grads, *x, dx);
                }
                if self.needs(*w) {
                    let mut dw = Tensor::zeros(wv.shape());
                    for r in 0..n {
                        let xr = &xv.data()[r * k..(r + 1) * k];
                        let gr = &g.data()[r * m..(r + 1) * m];
                        for (j, &gj) in gr.iter().enumerate() {
                            if gj != 0.0 {
                                axpy(gj, xr, dw.row_mut(j));
                            }
                        }
                    }
                    accumulate(grads, *w, dw);
                }
            }
            Op::Affine { w, x, b } => {
                let wv = self.value(*w);
                let xv = self.value(*x);
                let (_, n) = wv.dims2()?;
                if self.needs(*x) {
                    let mut dx = Tensor::zeros(xv.shape());
                    for (j, &gj) in g.data().iter().enumerate() {
                        axpy(gj, &wv.data()[j * n..(j + 1) * n], dx.data_mut());
                    }
                    accumulate(grads, *x, dx);
                }
                if self.needs(*w) {
                    let mut dw = Tensor::zeros(wv.shape());
                    for (j, &gj) in g.data().iter().enumerate() {
                        axpy(gj, xv.data(), dw.row_mut(j));
                    }
                    accumulate(grads, *w, dw);
                }
                if let Some(b) = b {
                    if self.needs(*b) {
                        let db = g.clone().reshape(self.value(*b).shape().to_vec())?;
                        accumulate(grads, *b, db);
                    }
                }
            }
            Op::WindowSum {
                top,
                left,
                right,
                plan,
            } => {
                let shape = self.value(*top).shape().to_vec();
                let mut dt = Tensor::zeros(&shape);
                let mut dl = Tensor::zeros(&shape);
                let mut dr = Tensor::zeros(&shape);
                for v in 0..plan.rows() {
                    let gv = g.row(v);
                    for e in plan.window(v) {
                        if e.top != 0.0 {
                            axpy(e.top, gv, dt.row_mut(e.src));
                        }
                        if e.left != 0.0 {
                            axpy(e.left, gv, dl.row_mut(e.src));
                        }
                        if e.right != 0.0 {
                            axpy(e.right, gv, dr.row_mut(e.src));
                        }
                    }
                }
                for (id, d) in [(*top, dt), (*left, dl), (*right, dr)] {
                    if self.needs(id) {
                        accumulate(grads, id, d);
                    }
                }
            }
            Op::AddRowBias { x, b } => {
                if self.needs(*b) {
                    let bshape = self.value(*b).shape().to_vec();
                    let c = self.value(*b).numel();
                    let mut db = Tensor::zeros(&bshape);
                    for row in g.data().chunks_exact(c) {
                        axpy(1.0, row, db.data_mut());
                    }
                    accumulate(grads, *b, db);
                }
                if self.needs(*x) {
                    accumulate(grads, *x, g);
                }
            }
            Op::Add { a, b } => {
                if self.needs(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs(*b) {
                    accumulate(grads, *b, g);
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let mut da = g.clone();
                    da.data_mut()
                        .iter_mut()
                        .zip(bv.data())
                        .for_each(|(d, y)| *d *= y);
                    accumulate(grads, *a, da);
                }
                if self.needs(*b) {
                    let mut db = g;
                    db.data_mut()
                        .iter_mut()
                        .zip(av.data())
                        .for_each(|(d, y)| *d *= y);
                    accumulate(grads, *b, db);
                }
            }
            Op::MulConst { x, mask } => {
                let mut dx = g;
                dx.data_mut()
                    .iter_mut()
                    .zip(mask.data())
                    .for_each(|(d, m)| *d *= m);
                accumulate(grads, *x, dx);
            }
            Op::Scale { x, c } => {
                let mut dx = g;
                dx.data_mut().iter_mut().for_each(|d| *d *= c);
                accumulate(grads, *x, dx);
            }
            Op::Tanh { x } => {
                let y = self.value(me);
                let mut dx = g;
                dx.data_mut()
                    .iter_mut()
                    .zip(y.data())
                    .for_each(|(d, y)| *d *= 1.0 - y * y);
                accumulate(grads, *x, dx);
            }
            Op::MaxPoolRows { x, argmax } => {
                let xv = self.value(*x);
                let mut dx = Tensor::zeros(xv.shape());
                let c = argmax.len();
                for (j, (&r, &gj)) in argmax.iter().zip(g.data()).enumerate() {
                    dx.data_mut()[r * c + j] += gj;
                }
                accumulate(grads, *x, dx);
            }
            Op::Concat { a, b } => {
                let (sa, sb) = (
                    self.value(*a).shape().to_vec(),
                    self.value(*b).shape().to_vec(),
                );
                let na = self.value(*a).numel();
                let (ga, gb) = g.data().split_at(na);
                if self.needs(*a) {
                    accumulate(grads, *a, Tensor::new(sa, ga.to_vec())?);
                }
                if self.needs(*b) {
                    accumulate(grads, *b, Tensor::new(sb, gb.to_vec())?);
                }
            }
            Op::Sum { x } => {
                let shape = self.value(*x).shape().to_vec();
                accumulate(grads, *x, Tensor::filled(&shape, g.data()[0]));
            }
            Op::Softmax { x } => {
                let p = self.value(me);
                let s = dot(p.data(), g.data());
                let dz: Vec<f64> = p
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(pi, gi)| pi * (gi - s))
                    .collect();
                let shape = self.value(*x).shape().to_vec();
                accumulate(grads, *x, Tensor::new(shape, dz)?);
            }
            Op::CrossEntropy { p, label } => {
                let pv = self.value(*p);
                let mut dp = Tensor::zeros(pv.shape());
                let pl = pv.data()[*label];
                if pl >= PROB_FLOOR {
                    dp.data_mut()[*label] = -g.data()[0] / pl;
                }
                accumulate(grads, *p, dp);
            }
            Op::Reshape { x } => {
                let shape = self.value(*x).shape().to_vec();
                accumulate(grads, *x, g.reshape(shape)?);
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_gradient() {
        let mut store = ParamStore::new();
        let w = store.insert("w", Tensor::scalar(2.0)).unwrap();
        let mut tape = Tape::new(&store);
        let wn = tape.param(w);
        let x = tape.constant(Tensor::scalar(3.0)).unwrap();
        let prod = tape.mul(wn, x).unwrap();
        let loss = tape.sum(prod).unwrap();
        assert_eq!(tape.value(loss).data(), &[6.0]);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[3.0]);
    }

    #[test]
    fn quadratic_gradient() {
        let mut store = ParamStore::new();
        let w = store.insert("w", Tensor::scalar(3.0)).unwrap();
        let mut tape = Tape::new(&store);
        let wn = tape.param(w);
        let sq = tape.mul(wn, wn).unwrap();
        let loss = tape.sum(sq).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[6.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut store = ParamStore::new();
        let w = store.insert("w", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut tape = Tape::new(&store);
        let wn = tape.param(w);
        let t = tape.tanh(wn).unwrap();
        assert!(tape.backward(t).is_err());
    }

    #[test]
    fn param_node_is_memoized() {
        let mut store = ParamStore::new();
        let w = store.insert("w", Tensor::scalar(1.0)).unwrap();
        let mut tape = Tape::new(&store);
        assert_eq!(tape.param(w), tape.param(w));
        assert_eq!(tape.len(), 1);
    }

    #[test]
    fn unused_param_has_no_gradient() {
        let mut store = ParamStore::new();
        let a = store.insert("a", Tensor::scalar(1.0)).unwrap();
        let b = store.insert("b", Tensor::scalar(1.0)).unwrap();
        let mut tape = Tape::new(&store);
        let an = tape.param(a);
        let loss = tape.sum(an).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!(g.get(b).is_none());
    }

    #[test]
    fn non_finite_rejected_at_op_boundary() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::scalar(1e308)).unwrap();
        assert!(matches!(tape.scale(x, 10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn max_pool_ties_route_to_first_row() {
        let mut store = ParamStore::new();
        let w = store
            .insert(
                "w",
                Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 5.0]]).unwrap(),
            )
            .unwrap();
        let mut tape = Tape::new(&store);
        let wn = tape.param(w);
        let pooled = tape.max_pool_rows(wn).unwrap();
        assert_eq!(tape.value(pooled).data(), &[1.0, 5.0]);
        let loss = tape.sum(pooled).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn window_plan_rejects_out_of_range_source() {
        let bad = vec![vec![MixEntry {
            src: 3,
            top: 1.0,
            left: 0.0,
            right: 0.0,
        }]];
        assert!(WindowPlan::new(1, bad).is_err());
    }
}
