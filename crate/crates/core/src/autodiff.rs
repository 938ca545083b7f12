//! Reverse-mode automatic differentiation over a tape of dense 2-D tensors.
//!
//! The tape is define-by-run: every operation evaluates immediately and
//! records its parents. [`Tape::backward`] then sweeps the nodes in reverse
//! creation order, which is a valid topological order because a node can
//! only reference nodes created before it.
//!
//! Binary elementwise operations accept operands of equal shape, or a `1×1`
//! operand that is broadcast against the other. Anything fancier (row
//! broadcasting, reshapes, transposes, im2col) goes through [`Tape::gather`].
//!
//! Conventions at non-differentiable points: `clamp` passes the gradient
//! through on the closed interval `[lo, hi]` (so the boundary subgradient is
//! 1) and blocks it outside; `sqrt` has derivative 0 at exactly 0.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("domain error at node {node} ({op}): argument {value}")]
    Domain { node: usize, op: &'static str, value: f64 },

    #[error("gradients requested before a backward pass")]
    NotBackpropagated,

    #[error("wrong number of inputs: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Serialised as nested rows, `[[…], …]`. An empty matrix keeps its column
/// count only if it has at least one row.
impl serde::Serialize for Tensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.rows))?;
        for r in 0..self.rows {
            seq.serialize_element(&self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        seq.end()
    }
}

impl<'de> serde::Deserialize<'de> for Tensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("ragged matrix"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AdError> {
        if rows * cols != data.len() {
            return Err(AdError::Shape {
                op: "tensor",
                detail: format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    /// Column vector.
    pub fn column(data: Vec<f64>) -> Self {
        Self {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor, AdError> {
        if self.cols != rhs.rows {
            return Err(AdError::Shape {
                op: "matmul",
                detail: format!("{}x{} · {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            });
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            rows: self.rows,
            cols: rhs.cols,
            data: out,
        })
    }

    fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Binary(Binary, Var, Var),
    Neg(Var),
    Scale(Var, f64),
    Offset(Var),
    Sqrt(Var),
    Log2(Var),
    Exp(Var),
    Sigmoid(Var),
    Clamp(Var, f64, f64),
    MatMul(Var, Var),
    Softmax(Var),
    Sum(Var),
    Gather(Var, Vec<Option<usize>>),
    ConcatCols(Vec<Var>),
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Operation tape. Single-writer; distinct tapes are independent.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    adjoints: Option<Vec<Option<Tensor>>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.nodes.len()).finish()
    }
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

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.adjoints = None;
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Differentiable leaf.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn scalar_constant(&mut self, v: f64) -> Var {
        self.constant(Tensor::scalar(v))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0]
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var, AdError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let f = |x: f64, y: f64| match kind {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
            Binary::Div => x / y,
        };
        let value = if va.shape() == vb.shape() {
            Tensor {
                rows: va.rows,
                cols: va.cols,
                data: va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect(),
            }
        } else if vb.len() == 1 {
            let y = vb.data[0];
            va.map(|x| f(x, y))
        } else if va.len() == 1 {
            let x = va.data[0];
            vb.map(|y| f(x, y))
        } else {
            return Err(AdError::Shape {
                op: "elementwise",
                detail: format!("{:?} vs {:?}", va.shape(), vb.shape()),
            });
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Binary(kind, a, b), value, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(Binary::Div, a, b)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| -x);
        let rg = self.rg(a);
        self.push(Op::Neg(a), value, rg)
    }

    /// `c · a` for a constant `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| c * x);
        let rg = self.rg(a);
        self.push(Op::Scale(a, c), value, rg)
    }

    /// `a + c` for a constant `c`.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        let rg = self.rg(a);
        self.push(Op::Offset(a), value, rg)
    }

    pub fn square(&mut self, a: Var) -> Result<Var, AdError> {
        self.mul(a, a)
    }

    fn check_domain(&self, a: Var, op: &'static str, ok: impl Fn(f64) -> bool) -> Result<(), AdError> {
        if let Some(&bad) = self.value(a).data.iter().find(|&&x| !ok(x)) {
            return Err(AdError::Domain {
                node: self.nodes.len(),
                op,
                value: bad,
            });
        }
        Ok(())
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var, AdError> {
        self.check_domain(a, "sqrt", |x| x >= 0.0)?;
        let value = self.value(a).map(f64::sqrt);
        let rg = self.rg(a);
        Ok(self.push(Op::Sqrt(a), value, rg))
    }

    pub fn log2(&mut self, a: Var) -> Result<Var, AdError> {
        self.check_domain(a, "log2", |x| x > 0.0)?;
        let value = self.value(a).map(f64::log2);
        let rg = self.rg(a);
        Ok(self.push(Op::Log2(a), value, rg))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        let rg = self.rg(a);
        self.push(Op::Exp(a), value, rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(Op::Sigmoid(a), value, rg)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|x| x.clamp(lo, hi));
        let rg = self.rg(a);
        self.push(Op::Clamp(a, lo, hi), value, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.clamp(a, 0.0, f64::INFINITY)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        let rg = self.rg(a);
        self.push(Op::Softmax(a), value, rg)
    }

    /// Sum of all entries, as a `1×1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(Op::Sum(a), value, rg)
    }

    /// `out[i] = src[index[i]]` (flat, row-major), or 0 where the index is `None`.
    /// Covers reshape, transpose, padding, im2col and row/column broadcasting.
    pub fn gather(&mut self, src: Var, rows: usize, cols: usize, index: Vec<Option<usize>>) -> Result<Var, AdError> {
        let n = self.value(src).len();
        if index.len() != rows * cols || index.iter().flatten().any(|&i| i >= n) {
            return Err(AdError::Shape {
                op: "gather",
                detail: format!("{} indices for {rows}x{cols} from {n} values", index.len()),
            });
        }
        let sv = &self.value(src).data;
        let data = index.iter().map(|i| i.map_or(0.0, |i| sv[i])).collect();
        let rg = self.rg(src);
        Ok(self.push(Op::Gather(src, index), Tensor { rows, cols, data }, rg))
    }

    pub fn reshape(&mut self, src: Var, rows: usize, cols: usize) -> Result<Var, AdError> {
        self.gather(src, rows, cols, (0..rows * cols).map(Some).collect())
    }

    pub fn transpose(&mut self, src: Var) -> Result<Var, AdError> {
        let (r, c) = self.value(src).shape();
        let index = (0..c).flat_map(|i| (0..r).map(move |j| Some(j * c + i))).collect();
        self.gather(src, c, r, index)
    }

    /// Horizontal concatenation of tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AdError> {
        let rows = parts.first().map(|&p| self.value(p).rows).unwrap_or(0);
        if parts.iter().any(|&p| self.value(p).rows != rows) {
            return Err(AdError::Shape {
                op: "concat_cols",
                detail: "row counts differ".into(),
            });
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let t = self.value(p);
                data.extend_from_slice(&t.data[r * t.cols..(r + 1) * t.cols]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Op::ConcatCols(parts.to_vec()), Tensor { rows, cols, data }, rg))
    }

    /// Reverse sweep from a `1×1` output. Adjoints are kept on the tape until
    /// the next node is recorded.
    pub fn backward(&mut self, output: Var) -> Result<(), AdError> {
        if self.value(output).len() != 1 {
            return Err(AdError::Shape {
                op: "backward",
                detail: format!("output must be scalar, got {:?}", self.value(output).shape()),
            });
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adj[output.0] = Some(Tensor::scalar(1.0));
        for i in (0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                adj[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut adj);
            adj[i] = Some(g);
        }
        self.adjoints = Some(adj);
        Ok(())
    }

    /// Gradient of the last backward output with respect to `v` (zeros when
    /// `v` does not influence it).
    pub fn grad(&self, v: Var) -> Result<Tensor, AdError> {
        let adj = self.adjoints.as_ref().ok_or(AdError::NotBackpropagated)?;
        Ok(adj
            .get(v.0)
            .and_then(Clone::clone)
            .unwrap_or_else(|| {
                let (r, c) = self.value(v).shape();
                Tensor::zeros(r, c)
            }))
    }

    fn propagate(&self, i: usize, g: &Tensor, adj: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        let mut acc = |v: Var, contrib: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut adj[v.0] {
                Some(t) => t.add_assign(&contrib),
                slot @ None => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Binary(kind, a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (da, db): (Vec<f64>, Vec<f64>) = (0..out.len())
                    .map(|j| {
                        let x = if va.len() == 1 { va.data[0] } else { va.data[j] };
                        let y = if vb.len() == 1 { vb.data[0] } else { vb.data[j] };
                        let gj = g.data[j];
                        match kind {
                            Binary::Add => (gj, gj),
                            Binary::Sub => (gj, -gj),
                            Binary::Mul => (gj * y, gj * x),
                            Binary::Div => (gj / y, -gj * x / (y * y)),
                        }
                    })
                    .unzip();
                acc(*a, reduce_broadcast(va, out, da));
                acc(*b, reduce_broadcast(vb, out, db));
            }
            Op::Neg(a) => acc(*a, g.map(|x| -x)),
            Op::Scale(a, c) => acc(*a, g.map(|x| c * x)),
            Op::Offset(a) => acc(*a, g.clone()),
            Op::Sqrt(a) => acc(*a, zip(g, out, |gj, y| if y > 0.0 { gj * 0.5 / y } else { 0.0 })),
            Op::Log2(a) => {
                let x = self.value(*a);
                acc(*a, zip(g, x, |gj, x| gj / (x * std::f64::consts::LN_2)))
            }
            Op::Exp(a) => acc(*a, zip(g, out, |gj, y| gj * y)),
            Op::Sigmoid(a) => acc(*a, zip(g, out, |gj, y| gj * y * (1.0 - y))),
            Op::Clamp(a, lo, hi) => {
                let x = self.value(*a);
                acc(*a, zip(g, x, |gj, x| if x >= *lo && x <= *hi { gj } else { 0.0 }))
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].requires_grad {
                    acc(*a, g.matmul(&vb.transpose()).expect("matmul backward shape"));
                }
                if self.nodes[b.0].requires_grad {
                    acc(*b, va.transpose().matmul(g).expect("matmul backward shape"));
                }
            }
            Op::Softmax(a) => {
                let mut dx = Tensor::zeros(out.rows, out.cols);
                for r in 0..out.rows {
                    let row = &out.data[r * out.cols..(r + 1) * out.cols];
                    let grow = &g.data[r * out.cols..(r + 1) * out.cols];
                    let dot: f64 = row.iter().zip(grow).map(|(y, gy)| y * gy).sum();
                    for c in 0..out.cols {
                        dx.data[r * out.cols + c] = row[c] * (grow[c] - dot);
                    }
                }
                acc(*a, dx)
            }
            Op::Sum(a) => {
                let (r, c) = self.value(*a).shape();
                acc(*a, Tensor::filled(r, c, g.data[0]))
            }
            Op::Gather(src, index) => {
                let (r, c) = self.value(*src).shape();
                let mut dx = Tensor::zeros(r, c);
                for (j, idx) in index.iter().enumerate() {
                    if let Some(s) = idx {
                        dx.data[*s] += g.data[j];
                    }
                }
                acc(*src, dx)
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).cols;
                    let dx = Tensor::from_fn(out.rows, pc, |r, c| g.get(r, offset + c));
                    offset += pc;
                    acc(p, dx);
                }
            }
        }
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

fn reduce_broadcast(operand: &Tensor, out: &Tensor, d: Vec<f64>) -> Tensor {
    if operand.len() == 1 && out.len() != 1 {
        Tensor::scalar(d.iter().sum())
    } else {
        Tensor {
            rows: out.rows,
            cols: out.cols,
            data: d,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for r in 0..t.rows {
        let row = &mut out.data[r * t.cols..(r + 1) * t.cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Builds a scalar-valued expression on a fresh tape from its inputs.
pub trait TapeFn: Fn(&mut Tape, &[Var]) -> Result<Var, AdError> {}
impl<F: Fn(&mut Tape, &[Var]) -> Result<Var, AdError>> TapeFn for F {}

/// Records `f` at `inputs` and returns the tape, the input handles and the output.
pub fn forward<F: TapeFn>(f: &F, inputs: &[Tensor]) -> Result<(Tape, Vec<Var>, Var), AdError> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    Ok((tape, vars, out))
}

/// Value of a scalar expression and its gradient with respect to each input.
pub fn value_and_grad<F: TapeFn>(f: &F, inputs: &[Tensor]) -> Result<(f64, Vec<Tensor>), AdError> {
    let (mut tape, vars, out) = forward(f, inputs)?;
    tape.backward(out)?;
    let grads = vars.iter().map(|&v| tape.grad(v)).collect::<Result<_, _>>()?;
    Ok((tape.scalar(out), grads))
}

/// Worst-case relative error between reverse-mode gradients and central
/// differences of step `h`, over every input coordinate. The relative error
/// of a coordinate is `|ad - fd| / max(|ad|, |fd|, 1e-8 · max|ad|, 1e-300)`.
pub fn grad_check<F: TapeFn>(f: &F, inputs: &[Tensor], h: f64) -> Result<f64, AdError> {
    let (_, grads) = value_and_grad(f, inputs)?;
    let scale = grads.iter().map(Tensor::max_abs).fold(0.0, f64::max);
    let eval = |xs: &[Tensor]| -> Result<f64, AdError> {
        let (tape, _, out) = forward(f, xs)?;
        Ok(tape.scalar(out))
    };
    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let x0 = input.data[j];
            probe[i].data[j] = x0 + h;
            let up = eval(&probe)?;
            probe[i].data[j] = x0 - h;
            let down = eval(&probe)?;
            probe[i].data[j] = x0;
            let fd = (up - down) / (2.0 * h);
            let ad = grads[i].data[j];
            let denom = ad.abs().max(fd.abs()).max(1e-8 * scale).max(1e-300);
            worst = worst.max((ad - fd).abs() / denom);
        }
    }
    Ok(worst)
}
