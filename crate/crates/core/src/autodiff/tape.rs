//! Reverse-mode differentiation on a Wengert list.
//!
//! The backward pass records its own vector-Jacobian products as ordinary
//! nodes on the same tape, so a gradient is itself a differentiable [`Var`].
//! Differentiating a loss that was evaluated at `θ − α∇L(θ)` therefore picks
//! up the full second-order term. Detach a gradient with [`Tape::constant`]
//! when a first-order approximation is wanted.

use std::cell::RefCell;
use std::fmt;
use std::ops;
use std::rc::Rc;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// `m × n` plus a `1 × n` row broadcast over every row.
    AddRow(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Scale(usize, f64),
    Shift(usize),
    Tanh(usize),
    Sigmoid(usize),
    Exp(usize),
    LogSoftmaxRows(usize),
    SumAll(usize),
    SumRows(usize),
    SumCols(usize),
    BroadcastAll(usize),
    BroadcastRows(usize),
    BroadcastCols(usize),
    Reshape(usize),
    SliceRows { src: usize, start: usize },
    PadRows { src: usize, start: usize },
    ConcatRows(Vec<usize>),
    /// Elementwise product with a constant mask; used for clamp/min plateaus.
    Masked(usize, Rc<Tensor>),
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation graph.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tape({} nodes)", self.len())
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable leaf.
    pub fn var(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value: Rc::new(value), op, requires_grad });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    fn unary(&self, a: usize, value: Tensor, op: Op) -> Var<'_> {
        let rg = self.requires_grad(a);
        self.push(value, op, rg)
    }

    fn binary(&self, a: usize, b: usize, value: Tensor, op: Op) -> Var<'_> {
        let rg = self.requires_grad(a) || self.requires_grad(b);
        self.push(value, op, rg)
    }

    /// Gradients of the scalar `loss` with respect to each of `wrt`.
    ///
    /// The returned vars live on this tape and can be differentiated again.
    /// Inputs that `loss` does not depend on get a zero constant.
    pub fn grad<'t>(&'t self, loss: Var<'t>, wrt: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        if !std::ptr::eq(loss.tape, self) || wrt.iter().any(|w| !std::ptr::eq(w.tape, self)) {
            return Err(Error::contract("gradient requested across tapes"));
        }
        if loss.value().shape() != [1, 1] {
            return Err(Error::shape(format!("loss must be 1x1, got {:?}", loss.value().shape())));
        }
        let n = loss.id + 1;
        let mut grads: Vec<Option<Var<'t>>> = vec![None; n];
        if self.requires_grad(loss.id) {
            grads[loss.id] = Some(self.scalar(1.0));
        }

        for id in (0..n).rev() {
            let Some(g) = grads[id] else { continue };
            let (op, requires) = {
                let nodes = self.nodes.borrow();
                (nodes[id].op.clone(), nodes[id].requires_grad)
            };
            if !requires {
                continue;
            }
            let out = Var { tape: self, id };
            for (parent, contrib) in self.vjp(&op, out, g)? {
                if !self.requires_grad(parent) {
                    continue;
                }
                grads[parent] = Some(match grads[parent] {
                    Some(acc) => acc + contrib,
                    None => contrib,
                });
            }
        }

        Ok(wrt
            .iter()
            .map(|w| match grads.get(w.id).copied().flatten() {
                Some(g) => g,
                None => {
                    let [r, c] = w.value().shape();
                    self.constant(Tensor::zeros(r, c))
                }
            })
            .collect())
    }

    fn vjp<'t>(&'t self, op: &Op, out: Var<'t>, g: Var<'t>) -> Result<Vec<(usize, Var<'t>)>> {
        let v = |id: usize| Var { tape: self, id };
        let contribs = match *op {
            Op::Leaf => vec![],
            Op::Add(a, b) => vec![(a, g), (b, g)],
            Op::Sub(a, b) => vec![(a, g), (b, g.scale(-1.0))],
            Op::Mul(a, b) => {
                let mut c = Vec::with_capacity(2);
                if self.requires_grad(a) {
                    c.push((a, g * v(b)));
                }
                if self.requires_grad(b) {
                    c.push((b, g * v(a)));
                }
                c
            }
            Op::AddRow(a, b) => vec![(a, g), (b, g.sum_rows())],
            Op::MatMul(a, b) => {
                let mut c = Vec::with_capacity(2);
                if self.requires_grad(a) {
                    c.push((a, g.matmul(v(b).t())?));
                }
                if self.requires_grad(b) {
                    c.push((b, v(a).t().matmul(g)?));
                }
                c
            }
            Op::Transpose(a) => vec![(a, g.t())],
            Op::Scale(a, k) => vec![(a, g.scale(k))],
            Op::Shift(a) => vec![(a, g)],
            // d tanh = 1 - y^2
            Op::Tanh(a) => vec![(a, g * (out * out).scale(-1.0).shift(1.0))],
            // d sigmoid = y (1 - y)
            Op::Sigmoid(a) => vec![(a, g * (out * out.scale(-1.0).shift(1.0)))],
            Op::Exp(a) => vec![(a, g * out)],
            Op::LogSoftmaxRows(a) => {
                let cols = out.value().cols();
                vec![(a, g - out.exp() * g.sum_cols().broadcast_cols(cols))]
            }
            Op::SumAll(a) => {
                let [r, c] = self.value(a).shape();
                vec![(a, g.broadcast_all(r, c))]
            }
            Op::BroadcastAll(a) => vec![(a, g.sum_all())],
            Op::SumRows(a) => {
                let rows = self.value(a).rows();
                vec![(a, g.broadcast_rows(rows))]
            }
            Op::BroadcastRows(a) => vec![(a, g.sum_rows())],
            Op::SumCols(a) => {
                let cols = self.value(a).cols();
                vec![(a, g.broadcast_cols(cols))]
            }
            Op::BroadcastCols(a) => vec![(a, g.sum_cols())],
            Op::Reshape(a) => {
                let [r, c] = self.value(a).shape();
                vec![(a, g.reshape(r, c)?)]
            }
            Op::SliceRows { src, start } => {
                let total = self.value(src).rows();
                vec![(src, g.pad_rows(start, total))]
            }
            Op::PadRows { src, start } => {
                let len = self.value(src).rows();
                vec![(src, g.slice_rows(start, len))]
            }
            Op::ConcatRows(ref parts) => {
                let mut offset = 0;
                let mut c = Vec::with_capacity(parts.len());
                for &p in parts {
                    let rows = self.value(p).rows();
                    c.push((p, g.slice_rows(offset, rows)));
                    offset += rows;
                }
                c
            }
            Op::Masked(a, ref mask) => vec![(a, g.masked(Rc::clone(mask)))],
        };
        Ok(contribs)
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn item(&self) -> f64 {
        self.value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other);
        let value = self.value().matmul(&other.value())?;
        Ok(self.tape.binary(self.id, other.id, value, Op::MatMul(self.id, other.id)))
    }

    /// Adds a `1 × n` row to every row of `self`.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&row);
        let (a, b) = (self.value(), row.value());
        if b.rows() != 1 || b.cols() != a.cols() {
            return Err(Error::shape(format!("add_row {:?} + {:?}", a.shape(), b.shape())));
        }
        let mut out = (*a).clone();
        let cols = a.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += b.data()[i % cols];
        }
        Ok(self.tape.binary(self.id, row.id, out, Op::AddRow(self.id, row.id)))
    }

    pub fn t(self) -> Var<'t> {
        let value = self.value().transpose();
        self.tape.unary(self.id, value, Op::Transpose(self.id))
    }

    pub fn scale(self, k: f64) -> Var<'t> {
        let value = self.value().map(|v| v * k);
        self.tape.unary(self.id, value, Op::Scale(self.id, k))
    }

    pub fn shift(self, k: f64) -> Var<'t> {
        let value = self.value().map(|v| v + k);
        self.tape.unary(self.id, value, Op::Shift(self.id))
    }

    pub fn tanh(self) -> Var<'t> {
        let value = self.value().map(f64::tanh);
        self.tape.unary(self.id, value, Op::Tanh(self.id))
    }

    pub fn sigmoid(self) -> Var<'t> {
        let value = self.value().map(|v| 1.0 / (1.0 + (-v).exp()));
        self.tape.unary(self.id, value, Op::Sigmoid(self.id))
    }

    pub fn exp(self) -> Var<'t> {
        let value = self.value().map(f64::exp);
        self.tape.unary(self.id, value, Op::Exp(self.id))
    }

    pub fn square(self) -> Var<'t> {
        self * self
    }

    pub fn log_softmax_rows(self) -> Var<'t> {
        let value = self.value().log_softmax_rows();
        self.tape.unary(self.id, value, Op::LogSoftmaxRows(self.id))
    }

    pub fn sum_all(self) -> Var<'t> {
        let value = Tensor::scalar(self.value().sum());
        self.tape.unary(self.id, value, Op::SumAll(self.id))
    }

    pub fn mean_all(self) -> Var<'t> {
        let n = self.value().len() as f64;
        self.sum_all().scale(1.0 / n)
    }

    /// `m × n → 1 × n`.
    pub fn sum_rows(self) -> Var<'t> {
        let a = self.value();
        let mut out = vec![0.0; a.cols()];
        for r in 0..a.rows() {
            for (o, v) in out.iter_mut().zip(a.row_slice(r)) {
                *o += v;
            }
        }
        self.tape.unary(self.id, Tensor::row(out), Op::SumRows(self.id))
    }

    /// `m × n → m × 1`.
    pub fn sum_cols(self) -> Var<'t> {
        let a = self.value();
        let out = (0..a.rows()).map(|r| a.row_slice(r).iter().sum()).collect();
        self.tape.unary(self.id, Tensor::column(out), Op::SumCols(self.id))
    }

    fn broadcast_all(self, rows: usize, cols: usize) -> Var<'t> {
        let value = Tensor::filled(rows, cols, self.value().item());
        self.tape.unary(self.id, value, Op::BroadcastAll(self.id))
    }

    fn broadcast_rows(self, rows: usize) -> Var<'t> {
        let a = self.value();
        let mut data = Vec::with_capacity(rows * a.cols());
        for _ in 0..rows {
            data.extend_from_slice(a.data());
        }
        let value = Tensor::new(rows, a.cols(), data).expect("broadcast shape");
        self.tape.unary(self.id, value, Op::BroadcastRows(self.id))
    }

    fn broadcast_cols(self, cols: usize) -> Var<'t> {
        let a = self.value();
        let mut data = Vec::with_capacity(a.rows() * cols);
        for &v in a.data() {
            data.extend(std::iter::repeat(v).take(cols));
        }
        let value = Tensor::new(a.rows(), cols, data).expect("broadcast shape");
        self.tape.unary(self.id, value, Op::BroadcastCols(self.id))
    }

    pub fn reshape(self, rows: usize, cols: usize) -> Result<Var<'t>> {
        let value = self.value().reshape(rows, cols)?;
        Ok(self.tape.unary(self.id, value, Op::Reshape(self.id)))
    }

    pub fn slice_rows(self, start: usize, len: usize) -> Var<'t> {
        let value = self.value().slice_rows(start, len);
        self.tape.unary(self.id, value, Op::SliceRows { src: self.id, start })
    }

    fn pad_rows(self, start: usize, total: usize) -> Var<'t> {
        let a = self.value();
        let cols = a.cols();
        let mut data = vec![0.0; total * cols];
        data[start * cols..(start + a.rows()) * cols].copy_from_slice(a.data());
        let value = Tensor::new(total, cols, data).expect("pad shape");
        self.tape.unary(self.id, value, Op::PadRows { src: self.id, start })
    }

    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts.first().ok_or_else(|| Error::shape("concat of zero parts"))?;
        let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Tensor> = values.iter().map(|v| v.as_ref()).collect();
        let value = Tensor::concat_rows(&refs)?;
        let rg = parts.iter().any(|p| p.requires_grad());
        let ids = parts.iter().map(|p| p.id).collect();
        Ok(first.tape.push(value, Op::ConcatRows(ids), rg))
    }

    fn masked(self, mask: Rc<Tensor>) -> Var<'t> {
        let value = self.value().zip_map(&mask, |a, m| a * m);
        self.tape.unary(self.id, value, Op::Masked(self.id, mask))
    }

    /// Elementwise clamp; gradient is zero outside `[lo, hi]`.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        let a = self.value();
        let mask = a.map(|v| if v < lo || v > hi { 0.0 } else { 1.0 });
        let clamped = a.map(|v| v.clamp(lo, hi));
        // clamped = x·mask + (x_clamped − x·mask) with the second term constant
        let offset = clamped.zip_map(&a.zip_map(&mask, |x, m| x * m), |c, xm| c - xm);
        self.masked(Rc::new(mask)) + self.tape.constant(offset)
    }

    /// Elementwise minimum; ties route the gradient to `self`.
    pub fn minimum(self, other: Var<'t>) -> Var<'t> {
        self.same_tape(&other);
        let (a, b) = (self.value(), other.value());
        let mask_a = a.zip_map(&b, |x, y| if x <= y { 1.0 } else { 0.0 });
        let mask_b = mask_a.map(|m| 1.0 - m);
        self.masked(Rc::new(mask_a)) + other.masked(Rc::new(mask_b))
    }

    fn check_same_shape(&self, other: &Var<'t>, what: &str) {
        self.same_tape(other);
        let (a, b) = (self.value().shape(), other.value().shape());
        assert_eq!(a, b, "{what}: shape mismatch {a:?} vs {b:?}");
    }
}

impl<'t> ops::Add for Var<'t> {
    type Output = Var<'t>;

    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.check_same_shape(&rhs, "add");
        let value = self.value().zip_map(&rhs.value(), |a, b| a + b);
        self.tape.binary(self.id, rhs.id, value, Op::Add(self.id, rhs.id))
    }
}

impl<'t> ops::Sub for Var<'t> {
    type Output = Var<'t>;

    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.check_same_shape(&rhs, "sub");
        let value = self.value().zip_map(&rhs.value(), |a, b| a - b);
        self.tape.binary(self.id, rhs.id, value, Op::Sub(self.id, rhs.id))
    }
}

impl<'t> ops::Mul for Var<'t> {
    type Output = Var<'t>;

    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.check_same_shape(&rhs, "mul");
        let value = self.value().zip_map(&rhs.value(), |a, b| a * b);
        self.tape.binary(self.id, rhs.id, value, Op::Mul(self.id, rhs.id))
    }
}

impl<'t> ops::Neg for Var<'t> {
    type Output = Var<'t>;

    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}
