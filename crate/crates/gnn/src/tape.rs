//! Reverse-mode automatic differentiation over dense matrices.
//!
//! Every op appends a node holding its value; [`Tape::backward`] walks the
//! nodes in reverse once, accumulating gradients into every node that
//! depends on a parameter. Gradients of intermediate nodes are dropped as
//! soon as they have been propagated; parameter gradients stay readable.

use std::rc::Rc;

use demograph_core::{Graph, SparseAdjacency};

use crate::error::GnnError;
use crate::tensor::{matmul, matmul_a_bt, matmul_at_b, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Directed edges `src -> dst` grouped by destination, for attention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeIndex {
    num_nodes: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    /// `seg[i]..seg[i + 1]` are the edges into node `i`.
    seg: Vec<usize>,
}

impl EdgeIndex {
    pub fn from_pairs(num_nodes: usize, pairs: &[(usize, usize)]) -> Result<Self, GnnError> {
        let mut sorted: Vec<(usize, usize)> = pairs.iter().map(|&(s, d)| (d, s)).collect();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&(d, s)) = sorted
            .iter()
            .find(|&&(d, s)| d >= num_nodes || s >= num_nodes)
        {
            return Err(GnnError::shape(
                "edge_index",
                format!("edge {s}->{d} out of range for {num_nodes} nodes"),
            ));
        }
        let mut seg = vec![0usize; num_nodes + 1];
        for &(d, _) in &sorted {
            seg[d + 1] += 1;
        }
        for i in 0..num_nodes {
            seg[i + 1] += seg[i];
        }
        Ok(Self {
            num_nodes,
            dst: sorted.iter().map(|e| e.0).collect(),
            src: sorted.iter().map(|e| e.1).collect(),
            seg,
        })
    }

    /// Symmetrized edges of `graph` plus one self-loop per node.
    pub fn with_self_loops(graph: &Graph) -> Self {
        Self::from_pairs(graph.num_nodes(), &graph.edges_with_self_loops())
            .expect("graph edges are in range")
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }

    pub fn dst(&self) -> &[usize] {
        &self.dst
    }

    pub fn incoming(&self, node: usize) -> std::ops::Range<usize> {
        self.seg[node]..self.seg[node + 1]
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Rc<SparseAdjacency>, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Elu(Var),
    Mask(Var, Rc<Vec<f64>>),
    ConcatCols(Vec<Var>),
    VStack(Var, Var),
    GatherRows(Var, Rc<Vec<usize>>),
    EdgeScore {
        dst: Var,
        src: Var,
        edges: Rc<EdgeIndex>,
    },
    SegmentSoftmax(Var, Rc<EdgeIndex>),
    EdgeAggregate {
        alpha: Var,
        h: Var,
        edges: Rc<EdgeIndex>,
    },
    Sum(Var),
    SoftmaxCe {
        logits: Var,
        rows: Rc<Vec<usize>>,
        labels: Rc<Vec<usize>>,
        tau: f64,
        probs: Tensor,
    },
}

struct Node {
    value: Rc<Tensor>,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(Rc::new(value), true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: impl Into<Rc<Tensor>>) -> Var {
        self.leaf(value.into(), false)
    }

    fn leaf(&mut self, value: Rc<Tensor>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor> {
        self.nodes[v.0].grad.take()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(
        &mut self,
        name: &'static str,
        value: Tensor,
        op: Op,
        inputs: &[Var],
    ) -> Result<Var, GnnError> {
        if !value.all_finite() {
            return Err(GnnError::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value: Rc::new(value),
            grad: None,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, GnnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(GnnError::shape(
                "matmul",
                format!("{:?} x {:?}", va.shape(), vb.shape()),
            ));
        }
        let out = matmul(va, vb);
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn spmm(&mut self, adj: Rc<SparseAdjacency>, x: Var) -> Result<Var, GnnError> {
        let vx = self.value(x);
        if adj.dim() != vx.rows() {
            return Err(GnnError::shape(
                "spmm",
                format!(
                    "adjacency {n}x{n} with features {:?}",
                    vx.shape(),
                    n = adj.dim()
                ),
            ));
        }
        let m = vx.cols();
        let mut out = Tensor::zeros(vx.rows(), m);
        for i in 0..adj.dim() {
            let orow = out.row_mut(i);
            for (j, a) in adj.row(i) {
                for (o, &xv) in orow.iter_mut().zip(vx.row(j)) {
                    *o += a * xv;
                }
            }
        }
        self.push("spmm", out, Op::SpMM(adj, x), &[x])
    }

    /// `x + 1·bᵀ` for a `1 x C` row `b`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var, GnnError> {
        let (vx, vb) = (self.value(x), self.value(b));
        if vb.rows() != 1 || vb.cols() != vx.cols() {
            return Err(GnnError::shape(
                "add_row",
                format!("{:?} + {:?}", vx.shape(), vb.shape()),
            ));
        }
        let mut out = vx.clone();
        for i in 0..out.rows() {
            for (o, &bv) in out.row_mut(i).iter_mut().zip(vb.data()) {
                *o += bv;
            }
        }
        self.push("add_row", out, Op::AddRow(x, b), &[x, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, GnnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(GnnError::shape(
                "add",
                format!("{:?} + {:?}", va.shape(), vb.shape()),
            ));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var, GnnError> {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= s);
        self.push("scale", out, Op::Scale(x, s), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, GnnError> {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        self.push("relu", out, Op::Relu(x), &[x])
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var, GnnError> {
        let mut out = self.value(x).clone();
        out.data_mut()
            .iter_mut()
            .for_each(|v| *v = if *v > 0.0 { *v } else { slope * *v });
        self.push("leaky_relu", out, Op::LeakyRelu(x, slope), &[x])
    }

    pub fn elu(&mut self, x: Var) -> Result<Var, GnnError> {
        let mut out = self.value(x).clone();
        out.data_mut()
            .iter_mut()
            .for_each(|v| *v = if *v > 0.0 { *v } else { v.exp_m1() });
        self.push("elu", out, Op::Elu(x), &[x])
    }

    /// Elementwise product with a fixed mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Rc<Vec<f64>>) -> Result<Var, GnnError> {
        let vx = self.value(x);
        if mask.len() != vx.len() {
            return Err(GnnError::shape(
                "mask",
                format!("{} mask entries for {:?}", mask.len(), vx.shape()),
            ));
        }
        let mut out = vx.clone();
        out.data_mut()
            .iter_mut()
            .zip(mask.iter())
            .for_each(|(v, m)| *v *= m);
        self.push("mask", out, Op::Mask(x, mask), &[x])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, GnnError> {
        let Some(&first) = parts.first() else {
            return Err(GnnError::Argument("concat of zero tensors".into()));
        };
        let rows = self.value(first).rows();
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(GnnError::shape("concat_cols", "row counts differ"));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                out.row_mut(i)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn vstack(&mut self, top: Var, bottom: Var) -> Result<Var, GnnError> {
        let (vt, vb) = (self.value(top), self.value(bottom));
        if vt.cols() != vb.cols() {
            return Err(GnnError::shape(
                "vstack",
                format!("{:?} over {:?}", vt.shape(), vb.shape()),
            ));
        }
        let data = [vt.data(), vb.data()].concat();
        let out = Tensor::from_vec(vt.rows() + vb.rows(), vt.cols(), data)?;
        self.push("vstack", out, Op::VStack(top, bottom), &[top, bottom])
    }

    pub fn gather_rows(&mut self, x: Var, idx: Rc<Vec<usize>>) -> Result<Var, GnnError> {
        let vx = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= vx.rows()) {
            return Err(GnnError::shape(
                "gather_rows",
                format!("row {bad} of {:?}", vx.shape()),
            ));
        }
        let mut out = Tensor::zeros(idx.len(), vx.cols());
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(vx.row(i));
        }
        self.push("gather_rows", out, Op::GatherRows(x, idx), &[x])
    }

    /// Per-edge `dst_scores[dst] + src_scores[src]` as an `E x 1` column.
    pub fn edge_score(
        &mut self,
        dst: Var,
        src: Var,
        edges: Rc<EdgeIndex>,
    ) -> Result<Var, GnnError> {
        let (vd, vs) = (self.value(dst), self.value(src));
        let n = edges.num_nodes();
        if vd.shape() != (n, 1) || vs.shape() != (n, 1) {
            return Err(GnnError::shape(
                "edge_score",
                format!("scores {:?}/{:?} for {n} nodes", vd.shape(), vs.shape()),
            ));
        }
        let data = edges
            .dst()
            .iter()
            .zip(edges.src())
            .map(|(&d, &s)| vd.data()[d] + vs.data()[s])
            .collect();
        let out = Tensor::from_vec(edges.len(), 1, data)?;
        self.push(
            "edge_score",
            out,
            Op::EdgeScore { dst, src, edges },
            &[dst, src],
        )
    }

    /// Softmax of an `E x 1` column within each destination's incoming edges.
    pub fn segment_softmax(&mut self, scores: Var, edges: Rc<EdgeIndex>) -> Result<Var, GnnError> {
        let vs = self.value(scores);
        if vs.shape() != (edges.len(), 1) {
            return Err(GnnError::shape(
                "segment_softmax",
                format!("{:?} for {} edges", vs.shape(), edges.len()),
            ));
        }
        let mut out = vec![0.0; edges.len()];
        for i in 0..edges.num_nodes() {
            let r = edges.incoming(i);
            if r.is_empty() {
                continue;
            }
            let seg = &vs.data()[r.clone()];
            let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (o, &s) in out[r.clone()].iter_mut().zip(seg) {
                *o = (s - max).exp();
                total += *o;
            }
            out[r].iter_mut().for_each(|o| *o /= total);
        }
        let out = Tensor::from_vec(edges.len(), 1, out)?;
        self.push(
            "segment_softmax",
            out,
            Op::SegmentSoftmax(scores, edges),
            &[scores],
        )
    }

    /// `out[dst] += alpha[e] * h[src]` over all edges.
    pub fn edge_aggregate(
        &mut self,
        alpha: Var,
        h: Var,
        edges: Rc<EdgeIndex>,
    ) -> Result<Var, GnnError> {
        let (va, vh) = (self.value(alpha), self.value(h));
        if va.shape() != (edges.len(), 1) || vh.rows() != edges.num_nodes() {
            return Err(GnnError::shape(
                "edge_aggregate",
                format!("alpha {:?}, h {:?}", va.shape(), vh.shape()),
            ));
        }
        let mut out = Tensor::zeros(vh.rows(), vh.cols());
        for e in 0..edges.len() {
            let a = va.data()[e];
            let src = vh.row(edges.src()[e]);
            for (o, &x) in out.row_mut(edges.dst()[e]).iter_mut().zip(src) {
                *o += a * x;
            }
        }
        self.push(
            "edge_aggregate",
            out,
            Op::EdgeAggregate { alpha, h, edges },
            &[alpha, h],
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, GnnError> {
        let total = self.value(x).sum();
        self.push("sum", Tensor::scalar(total), Op::Sum(x), &[x])
    }

    /// Mean over `rows` of `-log softmax(logits[row] / tau)[label]`.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        rows: Rc<Vec<usize>>,
        labels: Rc<Vec<usize>>,
        tau: f64,
    ) -> Result<Var, GnnError> {
        if rows.is_empty() {
            return Err(GnnError::Argument("empty loss mask".into()));
        }
        if rows.len() != labels.len() {
            return Err(GnnError::Argument(
                "mask and labels differ in length".into(),
            ));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(GnnError::Argument(format!(
                "temperature must be positive, got {tau}"
            )));
        }
        let vz = self.value(logits);
        let c = vz.cols();
        if let Some(&bad) = rows.iter().find(|&&r| r >= vz.rows()) {
            return Err(GnnError::shape(
                "softmax_cross_entropy",
                format!("row {bad} of {:?}", vz.shape()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(GnnError::shape(
                "softmax_cross_entropy",
                format!("label {bad} with {c} classes"),
            ));
        }
        let mut probs = Tensor::zeros(rows.len(), c);
        let mut loss = 0.0;
        for (k, (&r, &y)) in rows.iter().zip(labels.iter()).enumerate() {
            let (p, lse) = softmax_row(vz.row(r), tau);
            loss += lse - vz.get(r, y) / tau;
            probs.row_mut(k).copy_from_slice(&p);
        }
        loss /= rows.len() as f64;
        self.push(
            "softmax_cross_entropy",
            Tensor::scalar(loss),
            Op::SoftmaxCe {
                logits,
                rows,
                labels,
                tau,
                probs,
            },
            &[logits],
        )
    }

    /// Propagates gradients from the scalar `loss`. A recording can be
    /// differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<(), GnnError> {
        if self.consumed {
            return Err(GnnError::State(
                "backward already ran on this recording; record a new forward pass".into(),
            ));
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(GnnError::shape(
                "backward",
                format!("loss has shape {:?}", self.value(loss).shape()),
            ));
        }
        self.consumed = true;
        if !self.requires_grad(loss) {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            for (v, contribution) in self.input_grads(i, &op, &g) {
                self.accumulate(v, contribution);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Tensor) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn input_grads(&self, i: usize, op: &Op, g: &Tensor) -> Vec<(Var, Tensor)> {
        let val = |v: Var| -> &Tensor { &self.nodes[v.0].value };
        let req = |v: Var| self.nodes[v.0].requires_grad;
        let mut out = Vec::new();
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if req(*a) {
                    out.push((*a, matmul_a_bt(g, val(*b))));
                }
                if req(*b) {
                    out.push((*b, matmul_at_b(val(*a), g)));
                }
            }
            Op::SpMM(adj, x) => {
                let m = g.cols();
                let mut dx = Tensor::zeros(adj.dim(), m);
                for (r, c, a) in adj.entries() {
                    for (o, &gv) in dx.row_mut(c).iter_mut().zip(g.row(r)) {
                        *o += a * gv;
                    }
                }
                out.push((*x, dx));
            }
            Op::AddRow(x, b) => {
                if req(*b) {
                    let mut db = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &gv) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *o += gv;
                        }
                    }
                    out.push((*b, db));
                }
                out.push((*x, g.clone()));
            }
            Op::Add(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.clone()));
            }
            Op::Scale(x, s) => {
                let mut d = g.clone();
                d.data_mut().iter_mut().for_each(|v| *v *= s);
                out.push((*x, d));
            }
            Op::Relu(x) => {
                let mut d = g.clone();
                for (dv, &xv) in d.data_mut().iter_mut().zip(val(*x).data()) {
                    if xv <= 0.0 {
                        *dv = 0.0;
                    }
                }
                out.push((*x, d));
            }
            Op::LeakyRelu(x, slope) => {
                let mut d = g.clone();
                for (dv, &xv) in d.data_mut().iter_mut().zip(val(*x).data()) {
                    if xv <= 0.0 {
                        *dv *= slope;
                    }
                }
                out.push((*x, d));
            }
            Op::Elu(x) => {
                let y = &self.nodes[i].value;
                let mut d = g.clone();
                for ((dv, &xv), &yv) in d.data_mut().iter_mut().zip(val(*x).data()).zip(y.data()) {
                    if xv <= 0.0 {
                        *dv *= yv + 1.0;
                    }
                }
                out.push((*x, d));
            }
            Op::Mask(x, mask) => {
                let mut d = g.clone();
                d.data_mut()
                    .iter_mut()
                    .zip(mask.iter())
                    .for_each(|(v, m)| *v *= m);
                out.push((*x, d));
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = val(p).cols();
                    if req(p) {
                        let mut d = Tensor::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            d.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        out.push((p, d));
                    }
                    off += w;
                }
            }
            Op::VStack(top, bottom) => {
                let (rt, cols) = val(*top).shape();
                let split = rt * cols;
                if req(*top) {
                    out.push((
                        *top,
                        Tensor::from_vec(rt, cols, g.data()[..split].to_vec()).expect("split"),
                    ));
                }
                if req(*bottom) {
                    let rb = val(*bottom).rows();
                    out.push((
                        *bottom,
                        Tensor::from_vec(rb, cols, g.data()[split..].to_vec()).expect("split"),
                    ));
                }
            }
            Op::GatherRows(x, idx) => {
                let vx = val(*x);
                let mut d = Tensor::zeros(vx.rows(), vx.cols());
                for (k, &r) in idx.iter().enumerate() {
                    for (o, &gv) in d.row_mut(r).iter_mut().zip(g.row(k)) {
                        *o += gv;
                    }
                }
                out.push((*x, d));
            }
            Op::EdgeScore { dst, src, edges } => {
                let n = edges.num_nodes();
                let mut dd = Tensor::zeros(n, 1);
                let mut ds = Tensor::zeros(n, 1);
                for e in 0..edges.len() {
                    dd.data_mut()[edges.dst()[e]] += g.data()[e];
                    ds.data_mut()[edges.src()[e]] += g.data()[e];
                }
                out.push((*dst, dd));
                out.push((*src, ds));
            }
            Op::SegmentSoftmax(scores, edges) => {
                let alpha = &self.nodes[i].value;
                let mut d = Tensor::zeros(edges.len(), 1);
                for n in 0..edges.num_nodes() {
                    let r = edges.incoming(n);
                    let dot: f64 = r.clone().map(|e| alpha.data()[e] * g.data()[e]).sum();
                    for e in r {
                        d.data_mut()[e] = alpha.data()[e] * (g.data()[e] - dot);
                    }
                }
                out.push((*scores, d));
            }
            Op::EdgeAggregate { alpha, h, edges } => {
                let (va, vh) = (val(*alpha), val(*h));
                if req(*alpha) {
                    let data = (0..edges.len())
                        .map(|e| {
                            g.row(edges.dst()[e])
                                .iter()
                                .zip(vh.row(edges.src()[e]))
                                .map(|(x, y)| x * y)
                                .sum()
                        })
                        .collect();
                    out.push((
                        *alpha,
                        Tensor::from_vec(edges.len(), 1, data).expect("sized"),
                    ));
                }
                if req(*h) {
                    let mut dh = Tensor::zeros(vh.rows(), vh.cols());
                    for e in 0..edges.len() {
                        let a = va.data()[e];
                        let grow = g.row(edges.dst()[e]);
                        for (o, &gv) in dh.row_mut(edges.src()[e]).iter_mut().zip(grow) {
                            *o += a * gv;
                        }
                    }
                    out.push((*h, dh));
                }
            }
            Op::Sum(x) => {
                let (r, c) = val(*x).shape();
                out.push((*x, Tensor::filled(r, c, g.data()[0])));
            }
            Op::SoftmaxCe {
                logits,
                rows,
                labels,
                tau,
                probs,
            } => {
                let (n, c) = val(*logits).shape();
                let scale = g.data()[0] / (tau * rows.len() as f64);
                let mut d = Tensor::zeros(n, c);
                for (k, (&r, &y)) in rows.iter().zip(labels.iter()).enumerate() {
                    let drow = d.row_mut(r);
                    for (j, (o, &p)) in drow.iter_mut().zip(probs.row(k)).enumerate() {
                        let target = if j == y { 1.0 } else { 0.0 };
                        *o += scale * (p - target);
                    }
                }
                out.push((*logits, d));
            }
        }
        out
    }
}

/// Stable softmax of `z / tau`; also returns `logsumexp(z / tau)`.
pub(crate) fn softmax_row(z: &[f64], tau: f64) -> (Vec<f64>, f64) {
    let max = z.iter().map(|v| v / tau).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v / tau - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let lse = max + total.ln();
    (exps.into_iter().map(|e| e / total).collect(), lse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let w = tape.param(t(&[vec![1.0, -2.0], vec![3.0, 4.0]]));
        let s = tape.sum(w).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(w).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn second_backward_is_state_error() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::scalar(2.0));
        let s = tape.sum(w).unwrap();
        tape.backward(s).unwrap();
        assert!(matches!(tape.backward(s), Err(GnnError::State(_))));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[vec![1.0, 2.0]]));
        let w = tape.param(t(&[vec![3.0], vec![4.0]]));
        let y = tape.matmul(x, w).unwrap();
        let s = tape.sum(y).unwrap();
        tape.backward(s).unwrap();
        assert!(tape.grad(x).is_none());
        assert_eq!(tape.grad(w).unwrap().data(), &[1.0, 2.0]);
        assert!(tape.grad(y).is_none());
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        assert!(matches!(tape.matmul(a, b), Err(GnnError::Shape { .. })));
        assert!(tape.sum(a).is_ok());
        let loss = tape.add(a, b).unwrap();
        assert!(matches!(tape.backward(loss), Err(GnnError::Shape { .. })));
    }

    #[test]
    fn nan_is_rejected() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::scalar(f64::MAX));
        assert!(matches!(
            tape.scale(a, 10.0),
            Err(GnnError::NonFinite { op: "scale" })
        ));
    }

    #[test]
    fn segment_softmax_single_and_uniform() {
        let edges = Rc::new(EdgeIndex::from_pairs(3, &[(0, 0), (1, 0), (2, 0), (1, 1)]).unwrap());
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::from_vec(4, 1, vec![0.7, 0.7, 0.7, -3.0]).unwrap());
        let a = tape.segment_softmax(s, edges.clone()).unwrap();
        let alpha = tape.value(a).data();
        // edges into node 0 come first, then node 1
        for &v in &alpha[..3] {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(alpha[3], 1.0);
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let mut tape = Tape::new();
        let z = tape.constant(t(&[vec![2.0, 0.0, 0.0], vec![0.5, 0.5, 0.5]]));
        let l = tape
            .softmax_cross_entropy(z, Rc::new(vec![0]), Rc::new(vec![0]), 1.0)
            .unwrap();
        let expected = (1.0 + 2.0 * (-2.0f64).exp()).ln();
        assert!((tape.value(l).data()[0] - expected).abs() < 1e-15);
        let u = tape
            .softmax_cross_entropy(z, Rc::new(vec![1]), Rc::new(vec![2]), 1.0)
            .unwrap();
        assert!((tape.value(u).data()[0] - 3.0f64.ln()).abs() < 1e-15);
        assert!(tape
            .softmax_cross_entropy(z, Rc::new(vec![]), Rc::new(vec![]), 1.0)
            .is_err());
    }
}
