//! Define-by-run reverse-mode differentiation over small real tensors.
//!
//! A [`Tape`] is an append-only arena of nodes. Every operation records its
//! parents and computes its value eagerly, so insertion order is already a
//! topological order and the backward sweep is a single reverse pass that
//! touches each node exactly once. Complex quantities are carried as real
//! pairs (see `CVec::realify`), which keeps every adjoint real-valued and
//! directly checkable against finite differences.

use crate::error::Result;
use crate::numerics::tensor::{SpdFactor, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Neg(NodeId),
    MulElem(NodeId, NodeId),
    DivElem(NodeId, NodeId),
    Scale(NodeId, f64),
    AddConst(NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    /// Matrix plus a row vector broadcast over every row.
    AddRow(NodeId, NodeId),
    /// Matrix times a row vector broadcast over every row.
    MulRow(NodeId, NodeId),
    /// Column means: m x n -> 1 x n.
    MeanRows(NodeId),
    Sum(NodeId),
    Log(NodeId),
    Exp(NodeId),
    Relu(NodeId),
    Sqrt(NodeId),
    Recip(NodeId),
    /// Numerically stabilized softmax of a column vector.
    Softmax(NodeId),
    /// Euclidean norm of all entries, yielding a scalar.
    Norm2(NodeId),
    /// Tensor scaled by a scalar (1 x 1) node.
    ScaleByScalar(NodeId, NodeId),
    /// `X = A^{-1} B` for symmetric positive-definite `A`; the Cholesky
    /// factor from the forward pass is cached for the adjoint solves.
    SolveSpd(NodeId, NodeId, SpdFactor),
    SliceRows(NodeId, usize),
    SliceCols(NodeId, usize),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the backward root with respect to `id`, if the node was
    /// reached by the sweep.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient of the root with respect to `id`; zero if unreachable.
    pub fn wrt(&self, id: NodeId, shape: (usize, usize)) -> Tensor {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(shape.0, shape.1),
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        // Parents must already live on the tape; together with the
        // append-only arena this rules out cycles.
        let id = self.nodes.len();
        let ok = match &op {
            Op::Leaf => true,
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::MulElem(a, b)
            | Op::DivElem(a, b)
            | Op::MatMul(a, b)
            | Op::AddRow(a, b)
            | Op::MulRow(a, b)
            | Op::ScaleByScalar(a, b)
            | Op::SolveSpd(a, b, _) => a.0 < id && b.0 < id,
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::AddConst(a)
            | Op::Transpose(a)
            | Op::MeanRows(a)
            | Op::Sum(a)
            | Op::Log(a)
            | Op::Exp(a)
            | Op::Relu(a)
            | Op::Sqrt(a)
            | Op::Recip(a)
            | Op::Softmax(a)
            | Op::Norm2(a)
            | Op::SliceRows(a, _)
            | Op::SliceCols(a, _) => a.0 < id,
        };
        assert!(ok, "graph construction error: node references a later node");
        self.nodes.push(Node { value, op });
        NodeId(id)
    }

    /// Insert a value with no parents (input, constant, or parameter).
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.leaf(Tensor::scalar(value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| -x);
        self.push(v, Op::Neg(a))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::MulElem(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x / y);
        self.push(v, Op::DivElem(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| c * x);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddConst(a))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (m, n) = self.value(a).shape();
        let r = self.value(row);
        assert_eq!(r.shape(), (1, n), "add_row expects a 1 x n row");
        let mut v = self.value(a).clone();
        for i in 0..m {
            for j in 0..n {
                v.set(i, j, v.get(i, j) + r.get(0, j));
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (m, n) = self.value(a).shape();
        let r = self.value(row);
        assert_eq!(r.shape(), (1, n), "mul_row expects a 1 x n row");
        let mut v = self.value(a).clone();
        for i in 0..m {
            for j in 0..n {
                v.set(i, j, v.get(i, j) * r.get(0, j));
            }
        }
        self.push(v, Op::MulRow(a, row))
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mean_rows();
        self.push(v, Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(v, Op::Relu(a))
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn recip(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::recip);
        self.push(v, Op::Recip(a))
    }

    /// Softmax of a column vector, max-subtracted for stability.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        assert_eq!(x.cols(), 1, "softmax expects a column vector");
        let v = softmax_value(x.data());
        self.push(Tensor::column(v), Op::Softmax(a))
    }

    /// Euclidean norm over all entries, as a 1 x 1 node.
    pub fn norm2(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).norm2());
        self.push(v, Op::Norm2(a))
    }

    /// Multiply every entry of `a` by the scalar node `s`.
    pub fn scale_by_scalar(&mut self, a: NodeId, s: NodeId) -> NodeId {
        assert!(self.value(s).is_scalar(), "scale_by_scalar wants a 1 x 1 node");
        let c = self.value(s).as_scalar();
        let v = self.value(a).map(|x| c * x);
        self.push(v, Op::ScaleByScalar(a, s))
    }

    /// `X = A^{-1} B` for symmetric positive-definite `A` (n x n) and `B`
    /// (n x m). One Cholesky factorization is shared by all `m` columns and
    /// by the adjoint solves in the backward pass.
    pub fn solve_spd(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        assert_eq!(av.rows(), av.cols(), "solve_spd needs a square matrix");
        assert_eq!(av.rows(), self.value(b).rows(), "solve_spd rhs mismatch");
        debug_assert!(
            {
                let n = av.rows();
                (0..n).all(|i| (0..n).all(|j| (av.get(i, j) - av.get(j, i)).abs() <= 1e-12))
            },
            "solve_spd input is not symmetric"
        );
        let factor = SpdFactor::new(av)?;
        let x = factor.solve(self.value(b));
        Ok(self.push(x, Op::SolveSpd(a, b, factor)))
    }

    /// Rows `[start, start + len)` of `a`.
    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let av = self.value(a);
        assert!(start + len <= av.rows(), "slice_rows out of range");
        let mut v = Tensor::zeros(len, av.cols());
        for i in 0..len {
            for j in 0..av.cols() {
                v.set(i, j, av.get(start + i, j));
            }
        }
        self.push(v, Op::SliceRows(a, start))
    }

    /// Columns `[start, start + len)` of `a`.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let av = self.value(a);
        assert!(start + len <= av.cols(), "slice_cols out of range");
        let mut v = Tensor::zeros(av.rows(), len);
        for i in 0..av.rows() {
            for j in 0..len {
                v.set(i, j, av.get(i, start + j));
            }
        }
        self.push(v, Op::SliceCols(a, start))
    }

    /// Sum a list of same-shaped nodes.
    pub fn sum_nodes(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "sum_nodes needs at least one node");
        let mut acc = ids[0];
        for &id in &ids[1..] {
            acc = self.add(acc, id);
        }
        acc
    }

    /// Reverse sweep from a scalar root. Returns the gradient of the root
    /// with respect to every node reachable from it.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        assert!(
            self.value(root).is_scalar(),
            "backward requires a scalar root, got {:?}",
            self.value(root).shape()
        );
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        fn acc(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
            match &mut grads[id.index()] {
                Some(t) => t.add_in_place(&delta),
                slot @ None => *slot = Some(delta),
            }
        }

        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.map(|x| -x));
            }
            Op::Neg(a) => acc(grads, *a, g.map(|x| -x)),
            Op::MulElem(a, b) => {
                acc(grads, *a, g.zip_map(self.value(*b), |gi, bi| gi * bi));
                acc(grads, *b, g.zip_map(self.value(*a), |gi, ai| gi * ai));
            }
            Op::DivElem(a, b) => {
                let bv = self.value(*b);
                acc(grads, *a, g.zip_map(bv, |gi, bi| gi / bi));
                let out = &node.value;
                let mut db = g.zip_map(out, |gi, oi| gi * oi);
                db = db.zip_map(bv, |x, bi| -x / bi);
                acc(grads, *b, db);
            }
            Op::Scale(a, c) => acc(grads, *a, g.map(|x| c * x)),
            Op::AddConst(a) => acc(grads, *a, g.clone()),
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                acc(grads, *a, g.matmul(&bv.transpose()));
                acc(grads, *b, av.transpose().matmul(g));
            }
            Op::Transpose(a) => acc(grads, *a, g.transpose()),
            Op::AddRow(a, row) => {
                acc(grads, *a, g.clone());
                acc(grads, *row, g.col_sums());
            }
            Op::MulRow(a, row) => {
                let rv = self.value(*row);
                let (m, n) = g.shape();
                let mut da = Tensor::zeros(m, n);
                for i in 0..m {
                    for j in 0..n {
                        da.set(i, j, g.get(i, j) * rv.get(0, j));
                    }
                }
                acc(grads, *a, da);
                let av = self.value(*a);
                let dr = g.zip_map(av, |gi, ai| gi * ai).col_sums();
                acc(grads, *row, dr);
            }
            Op::MeanRows(a) => {
                let (m, n) = self.value(*a).shape();
                let inv = 1.0 / m as f64;
                let mut da = Tensor::zeros(m, n);
                for i in 0..m {
                    for j in 0..n {
                        da.set(i, j, g.get(0, j) * inv);
                    }
                }
                acc(grads, *a, da);
            }
            Op::Sum(a) => {
                let (m, n) = self.value(*a).shape();
                let gv = g.as_scalar();
                acc(grads, *a, Tensor::from_vec(m, n, vec![gv; m * n]));
            }
            Op::Log(a) => acc(grads, *a, g.zip_map(self.value(*a), |gi, x| gi / x)),
            Op::Exp(a) => acc(grads, *a, g.zip_map(&node.value, |gi, o| gi * o)),
            Op::Relu(a) => acc(
                grads,
                *a,
                g.zip_map(self.value(*a), |gi, x| if x > 0.0 { gi } else { 0.0 }),
            ),
            Op::Sqrt(a) => acc(grads, *a, g.zip_map(&node.value, |gi, o| gi / (2.0 * o))),
            Op::Recip(a) => acc(grads, *a, g.zip_map(&node.value, |gi, o| -gi * o * o)),
            Op::Softmax(a) => {
                let s = &node.value;
                let dot = g.frob_inner(s);
                acc(grads, *a, g.zip_map(s, |gi, si| si * (gi - dot)));
            }
            Op::Norm2(a) => {
                let norm = node.value.as_scalar();
                let gv = g.as_scalar();
                acc(grads, *a, self.value(*a).map(|x| gv * x / norm));
            }
            Op::ScaleByScalar(a, s) => {
                let c = self.value(*s).as_scalar();
                acc(grads, *a, g.map(|x| c * x));
                let ds = g.frob_inner(self.value(*a));
                acc(grads, *s, Tensor::scalar(ds));
            }
            Op::SolveSpd(a, b, factor) => {
                // dX = -A^{-1} dA X + A^{-1} dB, so with S = A^{-1} G:
                //   grad B += S,  grad A += -S X^T.
                let s = factor.solve(g);
                let x = &node.value;
                let mut da = Tensor::zeros(s.rows(), s.rows());
                for i in 0..s.rows() {
                    for j in 0..s.rows() {
                        let mut acc_ij = 0.0;
                        for r in 0..x.cols() {
                            acc_ij += s.get(i, r) * x.get(j, r);
                        }
                        da.set(i, j, -acc_ij);
                    }
                }
                acc(grads, *a, da);
                acc(grads, *b, s);
            }
            Op::SliceRows(a, start) => {
                let (m, n) = self.value(*a).shape();
                let mut da = Tensor::zeros(m, n);
                for i in 0..g.rows() {
                    for j in 0..n {
                        da.set(start + i, j, g.get(i, j));
                    }
                }
                acc(grads, *a, da);
            }
            Op::SliceCols(a, start) => {
                let (m, n) = self.value(*a).shape();
                let mut da = Tensor::zeros(m, n);
                for i in 0..m {
                    for j in 0..g.cols() {
                        da.set(i, start + j, g.get(i, j));
                    }
                }
                acc(grads, *a, da);
            }
        }
        Ok(())
    }
}

/// Max-subtracted softmax of a slice, total on finite input.
pub fn softmax_value(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / total).collect()
}
