//! Operation recording and reverse-mode replay.

use std::rc::Rc;

use crate::error::{shape_err, AutodiffError, Result};
use crate::kernels::{self, gemm_acc};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Per-row, per-pair rotation angles for rotary position embedding.
///
/// Row `i` of the rotated matrix has every head's pair `p` (columns `2p`,
/// `2p+1` within the head) rotated by the angle whose cosine/sine are stored
/// at `[i * pairs + p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RopeTable {
    rows: usize,
    pairs: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl RopeTable {
    /// Builds a table from angles laid out `[rows × pairs]`.
    pub fn from_angles(rows: usize, pairs: usize, angles: &[f64]) -> Result<Self> {
        if angles.len() != rows * pairs {
            return shape_err(
                "rope_table",
                format!("{} angles for {rows} rows x {pairs} pairs", angles.len()),
            );
        }
        Ok(Self {
            rows,
            pairs,
            cos: angles.iter().map(|a| a.cos()).collect(),
            sin: angles.iter().map(|a| a.sin()).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// Rotates `data` (`[rows × heads·2·pairs]`) in place; `inverse` applies the transpose.
    pub fn rotate(&self, data: &mut [f64], cols: usize, inverse: bool) {
        let head_dim = 2 * self.pairs;
        let heads = cols / head_dim;
        for r in 0..self.rows {
            for h in 0..heads {
                for p in 0..self.pairs {
                    let c = self.cos[r * self.pairs + p];
                    let s = if inverse {
                        -self.sin[r * self.pairs + p]
                    } else {
                        self.sin[r * self.pairs + p]
                    };
                    let i0 = r * cols + h * head_dim + 2 * p;
                    let (x0, x1) = (data[i0], data[i0 + 1]);
                    data[i0] = x0 * c - x1 * s;
                    data[i0 + 1] = x0 * s + x1 * c;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow { a: Var, bias: Var },
    Scale(Var, f64),
    AddScalar(Var),
    Exp(Var),
    Log(Var),
    LogSigmoid(Var),
    Silu(Var),
    Softmax { a: Var, axis: usize },
    LogSoftmax(Var),
    CausalSoftmax { a: Var },
    RmsNorm { x: Var, gain: Var, inv_rms: Vec<f64> },
    Rope { a: Var, table: Rc<RopeTable> },
    SliceCols { a: Var, start: usize },
    ConcatCols(Vec<Var>),
    SliceRows { a: Var, start: usize },
    ConcatRows(Vec<Var>),
    GatherRows { table: Var, ids: Vec<usize> },
    Pick { a: Var, flat: Vec<usize> },
    Sum(Var),
    ClampMax { a: Var, max: f64 },
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Record of primitive operations in execution (hence topological) order.
///
/// Every operation returns a [`Var`] naming its output. A node needs a
/// gradient only if one of its inputs does, so frozen sub-graphs cost nothing
/// during [`Tape::backward`].
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    grad_enabled: bool,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar with respect to every recorded leaf that needed one.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn unary_map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = x.data().iter().map(|&v| f(v)).collect();
    Tensor::from_vec(x.shape().to_vec(), data).expect("shape preserved")
}

fn acc(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

impl Tape {
    /// A recording tape with finiteness checks enabled.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
            check_finite: true,
        }
    }

    /// A tape on which no value needs a gradient (inference / reference scoring).
    pub fn no_grad() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn set_check_finite(&mut self, on: bool) {
        self.check_finite = on;
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, op: &'static str, value: Tensor, node: Op, inputs: &[Var]) -> Result<Var> {
        if self.check_finite && !value.all_finite() {
            return Err(AutodiffError::NonFinite { op });
        }
        let needs_grad = self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        let mut value = value;
        value.set_requires_grad(false);
        value.zero_grad();
        self.nodes.push(Node {
            value,
            op: node,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a leaf; it needs a gradient iff `t.requires_grad()` and the tape records gradients.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        let needs_grad = self.grad_enabled && t.requires_grad();
        let mut value = t.clone();
        value.zero_grad();
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let mut t = t;
        t.set_requires_grad(false);
        self.leaf(&t)
    }

    fn dims2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            other => shape_err(op, format!("expected 2-D operand, got {other:?}")),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    /// `a[m×k] · b[k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul", a)?;
        let (k2, n) = self.dims2("matmul", b)?;
        if k != k2 {
            return shape_err("matmul", format!("[{m}x{k}] x [{k2}x{n}]"));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n, false, false);
        let t = Tensor::from_vec(vec![m, n], out)?;
        self.push("matmul", t, Op::MatMul { a, b, tb: false }, &[a, b])
    }

    /// `a[m×k] · b[n×k]ᵀ`, the layout used for `x · Wᵀ` with `W` stored `[out×in]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul_nt", a)?;
        let (n, k2) = self.dims2("matmul_nt", b)?;
        if k != k2 {
            return shape_err("matmul_nt", format!("[{m}x{k}] x [{n}x{k2}]^T"));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n, false, true);
        let t = Tensor::from_vec(vec![m, n], out)?;
        self.push("matmul_nt", t, Op::MatMul { a, b, tb: true }, &[a, b])
    }

    fn zip(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(op, a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::from_vec(x.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip("add", a, b, |p, q| p + q)?;
        self.push("add", t, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip("sub", a, b, |p, q| p - q)?;
        self.push("sub", t, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip("mul", a, b, |p, q| p * q)?;
        self.push("mul", t, Op::Mul(a, b), &[a, b])
    }

    /// Adds a length-`n` vector to every row of `a[m×n]`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.dims2("add_row", a)?;
        if self.value(bias).len() != n {
            return shape_err("add_row", format!("bias {:?} for {n} columns", self.shape(bias)));
        }
        let b = self.value(bias).data();
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n) {
            row.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        let t = Tensor::from_vec(self.shape(a).to_vec(), data)?;
        self.push("add_row", t, Op::AddRow { a, bias }, &[a, bias])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let t = unary_map(self.value(a), |v| v * c);
        self.push("scale", t, Op::Scale(a, c), &[a])
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let t = unary_map(self.value(a), |v| v + c);
        self.push("add_scalar", t, Op::AddScalar(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let t = unary_map(self.value(a), f64::exp);
        self.push("exp", t, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let t = unary_map(self.value(a), f64::ln);
        self.push("log", t, Op::Log(a), &[a])
    }

    /// Numerically stable `ln σ(a)`.
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        let t = unary_map(self.value(a), kernels::log_sigmoid);
        self.push("log_sigmoid", t, Op::LogSigmoid(a), &[a])
    }

    /// `a · σ(a)`.
    pub fn silu(&mut self, a: Var) -> Result<Var> {
        let t = unary_map(self.value(a), |v| v * kernels::sigmoid(v));
        self.push("silu", t, Op::Silu(a), &[a])
    }

    /// Caps values at `max`; the gradient is zero where the cap is active.
    pub fn clamp_max(&mut self, a: Var, max: f64) -> Result<Var> {
        let t = unary_map(self.value(a), |v| v.min(max));
        self.push("clamp_max", t, Op::ClampMax { a, max }, &[a])
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = kernels::softmax(self.value(a), axis)?;
        self.push("softmax", t, Op::Softmax { a, axis }, &[a])
    }

    /// Row-wise log-softmax of a 2-D value.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let t = kernels::log_softmax_rows(self.value(a))?;
        self.push("log_softmax", t, Op::LogSoftmax(a), &[a])
    }

    /// Row softmax where row `i` only sees columns `j <= i + offset`; masked entries are exactly 0.
    pub fn causal_softmax(&mut self, a: Var, offset: usize) -> Result<Var> {
        let (m, n) = self.dims2("causal_softmax", a)?;
        let x = self.value(a).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let visible = (i + offset + 1).min(n);
            let row = &x[i * n..i * n + visible];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let orow = &mut out[i * n..i * n + visible];
            let mut sum = 0.0;
            for (o, v) in orow.iter_mut().zip(row) {
                *o = (v - max).exp();
                sum += *o;
            }
            orow.iter_mut().for_each(|o| *o /= sum);
        }
        let t = Tensor::from_vec(vec![m, n], out)?;
        self.push("causal_softmax", t, Op::CausalSoftmax { a }, &[a])
    }

    /// Row-wise RMS normalisation with a learned per-column gain.
    pub fn rms_norm(&mut self, x: Var, gain: Var, eps: f64) -> Result<Var> {
        let (_, n) = self.dims2("rms_norm", x)?;
        if self.value(gain).len() != n {
            return shape_err("rms_norm", format!("gain {:?} for {n} columns", self.shape(gain)));
        }
        let g = self.value(gain).data();
        let xs = self.value(x).data();
        let mut inv_rms = Vec::with_capacity(xs.len() / n);
        let mut out = vec![0.0; xs.len()];
        for (row, orow) in xs.chunks(n).zip(out.chunks_mut(n)) {
            let ms = row.iter().map(|v| v * v).sum::<f64>() / n as f64;
            let r = 1.0 / (ms + eps).sqrt();
            inv_rms.push(r);
            for ((o, v), gv) in orow.iter_mut().zip(row).zip(g) {
                *o = v * r * gv;
            }
        }
        let t = Tensor::from_vec(self.shape(x).to_vec(), out)?;
        self.push("rms_norm", t, Op::RmsNorm { x, gain, inv_rms }, &[x, gain])
    }

    /// Applies rotary embedding to every head of `a[rows × heads·head_dim]`.
    pub fn rope(&mut self, a: Var, table: Rc<RopeTable>) -> Result<Var> {
        let (m, n) = self.dims2("rope", a)?;
        let head_dim = 2 * table.pairs();
        if m != table.rows() || head_dim == 0 || n % head_dim != 0 {
            return shape_err(
                "rope",
                format!("[{m}x{n}] with table of {} rows x {} pairs", table.rows(), table.pairs()),
            );
        }
        let mut data = self.value(a).data().to_vec();
        table.rotate(&mut data, n, false);
        let t = Tensor::from_vec(vec![m, n], data)?;
        self.push("rope", t, Op::Rope { a, table }, &[a])
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.dims2("slice_cols", a)?;
        if len == 0 || start + len > n {
            return shape_err("slice_cols", format!("[{start}, {}) of {n} columns", start + len));
        }
        let x = self.value(a).data();
        let mut out = Vec::with_capacity(m * len);
        for i in 0..m {
            out.extend_from_slice(&x[i * n + start..i * n + start + len]);
        }
        let t = Tensor::from_vec(vec![m, len], out)?;
        self.push("slice_cols", t, Op::SliceCols { a, start }, &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| AutodiffError::Contract("concat_cols of nothing".into()))?;
        let (m, _) = self.dims2("concat_cols", first)?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims2("concat_cols", p)?;
            if r != m {
                return shape_err("concat_cols", format!("row counts {m} vs {r}"));
            }
            widths.push(c);
        }
        let n: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let t = Tensor::from_vec(vec![m, n], out)?;
        self.push("concat_cols", t, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.dims2("slice_rows", a)?;
        if len == 0 || start + len > m {
            return shape_err("slice_rows", format!("[{start}, {}) of {m} rows", start + len));
        }
        let data = self.value(a).data()[start * n..(start + len) * n].to_vec();
        let t = Tensor::from_vec(vec![len, n], data)?;
        self.push("slice_rows", t, Op::SliceRows { a, start }, &[a])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| AutodiffError::Contract("concat_rows of nothing".into()))?;
        let (_, n) = self.dims2("concat_rows", first)?;
        let mut out = Vec::new();
        let mut m = 0;
        for &p in parts {
            let (r, c) = self.dims2("concat_rows", p)?;
            if c != n {
                return shape_err("concat_rows", format!("column counts {n} vs {c}"));
            }
            m += r;
            out.extend_from_slice(self.value(p).data());
        }
        let t = Tensor::from_vec(vec![m, n], out)?;
        self.push("concat_rows", t, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Embedding lookup: row `ids[i]` of `table[V×d]` becomes output row `i`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = self.dims2("gather_rows", table)?;
        if ids.is_empty() {
            return shape_err("gather_rows", "no ids");
        }
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(AutodiffError::Vocabulary { id, vocab: v });
            }
            out.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let t = Tensor::from_vec(vec![ids.len(), d], out)?;
        self.push("gather_rows", t, Op::GatherRows { table, ids: ids.to_vec() }, &[table])
    }

    /// Selects `a[r, c]` for each `(r, c)` into a 1-D value.
    pub fn pick(&mut self, a: Var, at: &[(usize, usize)]) -> Result<Var> {
        let (m, n) = self.dims2("pick", a)?;
        if at.is_empty() {
            return shape_err("pick", "no positions");
        }
        let mut flat = Vec::with_capacity(at.len());
        for &(r, c) in at {
            if r >= m {
                return shape_err("pick", format!("row {r} of {m}"));
            }
            if c >= n {
                return Err(AutodiffError::Vocabulary { id: c, vocab: n });
            }
            flat.push(r * n + c);
        }
        let x = self.value(a).data();
        let data = flat.iter().map(|&i| x[i]).collect();
        let t = Tensor::from_vec(vec![flat.len()], data)?;
        self.push("pick", t, Op::Pick { a, flat }, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a).clone().reshape(shape)?;
        self.push("reshape", t, Op::Reshape(a), &[a])
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of `logits[T×V]`.
    ///
    /// Positions whose target equals `ignore_index` are skipped.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        ignore_index: Option<usize>,
    ) -> Result<Var> {
        let (t, v) = self.dims2("cross_entropy", logits)?;
        if targets.len() != t {
            return shape_err("cross_entropy", format!("{} targets for {t} rows", targets.len()));
        }
        let mut at = Vec::with_capacity(t);
        for (row, &id) in targets.iter().enumerate() {
            if Some(id) == ignore_index {
                continue;
            }
            if id >= v {
                return Err(AutodiffError::Vocabulary { id, vocab: v });
            }
            at.push((row, id));
        }
        if at.is_empty() {
            return Err(AutodiffError::DegenerateBatch);
        }
        let logp = self.log_softmax(logits)?;
        let picked = self.pick(logp, &at)?;
        let m = self.mean(picked)?;
        self.neg(m)
    }

    /// Reverse-mode sweep from a one-element `loss`.
    ///
    /// Nodes are visited in reverse recording order, each at most once.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].needs_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop(node, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn backprop(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let needs = |v: Var| self.nodes[v.0].needs_grad;
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, tb } => {
                let (m, k) = val(*a).dims2()?;
                let n = node.value.shape()[1];
                if needs(*a) {
                    // da = g · b^T (or g · b when b was used transposed)
                    let da = acc(&mut grads[a.0], m * k);
                    gemm_acc(g, val(*b).data(), da, m, n, k, false, !*tb);
                }
                if needs(*b) {
                    if *tb {
                        // b is [n×k]: db = g^T · a
                        let db = acc(&mut grads[b.0], n * k);
                        gemm_acc(g, val(*a).data(), db, n, m, k, true, false);
                    } else {
                        // b is [k×n]: db = a^T · g
                        let db = acc(&mut grads[b.0], k * n);
                        gemm_acc(val(*a).data(), g, db, k, m, n, true, false);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if needs(v) {
                        let d = acc(&mut grads[v.0], g.len());
                        d.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    let d = acc(&mut grads[a.0], g.len());
                    d.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                if needs(*b) {
                    let d = acc(&mut grads[b.0], g.len());
                    d.iter_mut().zip(g).for_each(|(x, y)| *x -= y);
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    let other = val(*b).data();
                    let d = acc(&mut grads[a.0], g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * other[i];
                    }
                }
                if needs(*b) {
                    let other = val(*a).data();
                    let d = acc(&mut grads[b.0], g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * other[i];
                    }
                }
            }
            Op::AddRow { a, bias } => {
                if needs(*a) {
                    let d = acc(&mut grads[a.0], g.len());
                    d.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                if needs(*bias) {
                    let n = val(*bias).len();
                    let d = acc(&mut grads[bias.0], n);
                    for row in g.chunks(n) {
                        d.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Scale(a, c) => {
                if needs(*a) {
                    let d = acc(&mut grads[a.0], g.len());
                    d.iter_mut().zip(g).for_each(|(x, y)| *x += y * c);
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                if needs(*a) {
                    let d = acc(&mut grads[a.0], g.len());
                    d.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
            }
            Op::Exp(a) => {
                if needs(*a) {
                    let y = node.value.data();
                    let d = acc(&mut grads[a.0], g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * y[i];
                    }
                }
            }
            Op::Log(a) => {
                if needs(*a) {
                    let x = val(*a).data();
                    let d = acc(&mut grads[a.0], g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] / x[i];
                    }
                }
            }
            Op::LogSigmoid(a) => {
                if needs(*a) {
                    let x = val(*a).data();
                    let d = acc(&mut grads[a.0], g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * kernels::sigmoid(-x[i]);
                    }
                }
            }
            Op::Silu(a) => {
                if needs(*a) {
                    let x = val(*a).data();
                    let d = acc(&mut grads[a.0], g.len());
                    for i in 0..g.len() {
                        let s = kernels::sigmoid(x[i]);
                        d[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
                    }
                }
            }
            Op::ClampMax { a, max } => {
                if needs(*a) {
                    let x = val(*a).data();
                    let d = acc(&mut grads[a.0], g.len());
                    for i in 0..g.len() {
                        if x[i] < *max {
                            d[i] += g[i];
                        }
                    }
                }
            }
            Op::Softmax { a, axis } => {
                if needs(*a) {
                    let y = node.value.data();
                    let (outer, len, inner) = kernels::axis_split(node.value.shape(), *axis);
                    let d = acc(&mut grads[a.0], g.len());
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |j: usize| (o * len + j) * inner + i;
                            let dot: f64 = (0..len).map(|j| g[idx(j)] * y[idx(j)]).sum();
                            for j in 0..len {
                                d[idx(j)] += y[idx(j)] * (g[idx(j)] - dot);
                            }
                        }
                    }
                }
            }
            Op::CausalSoftmax { a } => {
                if needs(*a) {
                    let y = node.value.data();
                    let n = node.value.shape()[1];
                    let d = acc(&mut grads[a.0], g.len());
                    for ((yr, gr), dr) in y.chunks(n).zip(g.chunks(n)).zip(d.chunks_mut(n)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..n {
                            dr[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
            }
            Op::LogSoftmax(a) => {
                if needs(*a) {
                    let y = node.value.data();
                    let n = node.value.shape()[1];
                    let d = acc(&mut grads[a.0], g.len());
                    for ((yr, gr), dr) in y.chunks(n).zip(g.chunks(n)).zip(d.chunks_mut(n)) {
                        let gs: f64 = gr.iter().sum();
                        for j in 0..n {
                            dr[j] += gr[j] - yr[j].exp() * gs;
                        }
                    }
                }
            }
            Op::RmsNorm { x, gain, inv_rms } => {
                let n = node.value.shape()[1];
                let xs = val(*x).data();
                let gv = val(*gain).data();
                if needs(*x) {
                    let d = acc(&mut grads[x.0], g.len());
                    for (r, &ir) in inv_rms.iter().enumerate() {
                        let row = &xs[r * n..(r + 1) * n];
                        let gr = &g[r * n..(r + 1) * n];
                        let dot: f64 = (0..n).map(|j| gr[j] * gv[j] * row[j]).sum();
                        let coef = ir * ir * ir * dot / n as f64;
                        for j in 0..n {
                            d[r * n + j] += ir * gv[j] * gr[j] - coef * row[j];
                        }
                    }
                }
                if needs(*gain) {
                    let d = acc(&mut grads[gain.0], n);
                    for (r, &ir) in inv_rms.iter().enumerate() {
                        for j in 0..n {
                            d[j] += g[r * n + j] * xs[r * n + j] * ir;
                        }
                    }
                }
            }
            Op::Rope { a, table } => {
                if needs(*a) {
                    let n = node.value.shape()[1];
                    let mut back = g.to_vec();
                    table.rotate(&mut back, n, true);
                    let d = acc(&mut grads[a.0], g.len());
                    d.iter_mut().zip(&back).for_each(|(x, y)| *x += y);
                }
            }
            Op::SliceCols { a, start } => {
                if needs(*a) {
                    let (m, n) = val(*a).dims2()?;
                    let w = node.value.shape()[1];
                    let d = acc(&mut grads[a.0], m * n);
                    for i in 0..m {
                        for j in 0..w {
                            d[i * n + start + j] += g[i * w + j];
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let (m, n) = node.value.dims2()?;
                let mut off = 0;
                for &p in parts {
                    let w = val(p).shape()[1];
                    if needs(p) {
                        let d = acc(&mut grads[p.0], m * w);
                        for i in 0..m {
                            for j in 0..w {
                                d[i * w + j] += g[i * n + off + j];
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::SliceRows { a, start } => {
                if needs(*a) {
                    let (m, n) = val(*a).dims2()?;
                    let d = acc(&mut grads[a.0], m * n);
                    let base = start * n;
                    for (i, gv) in g.iter().enumerate() {
                        d[base + i] += gv;
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = val(p).len();
                    if needs(p) {
                        let d = acc(&mut grads[p.0], len);
                        d.iter_mut().zip(&g[off..off + len]).for_each(|(x, y)| *x += y);
                    }
                    off += len;
                }
            }
            Op::GatherRows { table, ids } => {
                if needs(*table) {
                    let (v, dd) = val(*table).dims2()?;
                    let d = acc(&mut grads[table.0], v * dd);
                    for (i, &id) in ids.iter().enumerate() {
                        for j in 0..dd {
                            d[id * dd + j] += g[i * dd + j];
                        }
                    }
                }
            }
            Op::Pick { a, flat } => {
                if needs(*a) {
                    let d = acc(&mut grads[a.0], val(*a).len());
                    for (i, &f) in flat.iter().enumerate() {
                        d[f] += g[i];
                    }
                }
            }
            Op::Sum(a) => {
                if needs(*a) {
                    let d = acc(&mut grads[a.0], val(*a).len());
                    d.iter_mut().for_each(|x| *x += g[0]);
                }
            }
        }
        Ok(())
    }
}
