use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::matrix::{matmul_nt, matmul_tn};
use super::{Matrix, ParamId, ParamStore};
use crate::error::invalid;
use crate::math;
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    ScaleBy(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MulConst(Var, Matrix),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    RowGather(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    SegmentSoftmax(Var, Arc<[usize]>),
    SoftmaxRows(Var),
    LeakyRelu(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    Transpose(Var),
    RowDot(Var, Var),
    CrossEntropy(Var, Arc<[usize]>, Matrix),
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Records a forward computation so it can be differentiated in reverse.
///
/// Nodes are appended in evaluation order, so the tape order is a topological order
/// of the (acyclic) compute graph. A tape is cheap to create; build one per forward
/// pass and drop it after [`Tape::backward`].
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, Var>,
}

/// Gradients of a scalar root with respect to every recorded value.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for `var`, or `None` if the root does not depend on it.
    pub fn wrt(&self, var: Var) -> Option<&Matrix> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Shape {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

/// Checks that `offsets` is a monotone CSR offset array covering `n` rows.
fn check_offsets(op: &'static str, offsets: &[usize], n: usize) -> Result<()> {
    let ok = !offsets.is_empty()
        && offsets[0] == 0
        && *offsets.last().unwrap() == n
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(invalid(alloc::format!(
            "{op}: segment offsets do not partition {n} rows"
        )))
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A constant leaf. Its gradient is still reported by [`Gradients::wrt`].
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Input)
    }

    /// Leaf bound to a parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, self.value(a), self.value(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// `x + bias` with a 1 x d bias broadcast over rows.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(shape_err("add_row", xv, bv));
        }
        let mut out = xv.clone();
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(bv.as_slice()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(x, bias)))
    }

    /// Scales row `i` of `x` by `weights[i]` (an n x 1 column).
    pub fn mul_col(&mut self, x: Var, weights: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(weights));
        if wv.cols() != 1 || wv.rows() != xv.rows() {
            return Err(shape_err("mul_col", xv, wv));
        }
        let mut out = xv.clone();
        for i in 0..out.rows() {
            let w = wv.as_slice()[i];
            out.row_mut(i).iter_mut().for_each(|o| *o *= w);
        }
        Ok(self.push(out, Op::MulCol(x, weights)))
    }

    /// Multiplies every entry of `x` by the 1x1 value `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        let sv = self.value(s).item()?;
        let out = self.value(x).map(|v| v * sv);
        Ok(self.push(out, Op::ScaleBy(x, s)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).map(|v| v * c);
        self.push(out, Op::Scale(x, c))
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).map(|v| v + c);
        self.push(out, Op::AddConst(x))
    }

    /// Elementwise product with a constant matrix.
    pub fn mul_const(&mut self, x: Var, c: Matrix) -> Result<Var> {
        if c.shape() != self.shape(x) {
            return Err(shape_err("mul_const", self.value(x), &c));
        }
        let out = self.value(x).zip_map(&c, |a, b| a * b);
        Ok(self.push(out, Op::MulConst(x, c)))
    }

    /// Inverted dropout: in training, zeroes each entry with probability `p` and
    /// scales survivors by `1/(1-p)`. Identity when `training` is false or `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        p: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(invalid(alloc::format!("dropout probability {p} not in [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let (r, c) = self.shape(x);
        let keep = 1.0 / (1.0 - p);
        let mut mask = Matrix::zeros(r, c);
        for m in mask.as_mut_slice() {
            if rng.random::<f64>() >= p {
                *m = keep;
            }
        }
        self.mul_const(x, mask)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Matrix::hconcat(&mats)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: xv.shape(),
                rhs: (start, len),
            });
        }
        let out = xv.slice_cols(start, len);
        Ok(self.push(out, Op::SliceCols(x, start)))
    }

    /// Output row `k` is input row `idx[k]`. Indices may repeat.
    pub fn row_gather(&mut self, x: Var, idx: Arc<[usize]>) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::IndexOutOfRange {
                what: "row_gather",
                index: bad,
                bound: xv.rows(),
            });
        }
        let out = xv.gather_rows(&idx);
        Ok(self.push(out, Op::RowGather(x, idx)))
    }

    /// Sums contiguous row segments: output row `s` is the sum of rows
    /// `offsets[s]..offsets[s+1]`. Empty segments yield zero rows.
    pub fn segment_sum(&mut self, x: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let xv = self.value(x);
        check_offsets("segment_sum", &offsets, xv.rows())?;
        let mut out = Matrix::zeros(offsets.len() - 1, xv.cols());
        for s in 0..offsets.len() - 1 {
            for i in offsets[s]..offsets[s + 1] {
                for (o, v) in out.row_mut(s).iter_mut().zip(xv.row(i)) {
                    *o += v;
                }
            }
        }
        Ok(self.push(out, Op::SegmentSum(x, offsets)))
    }

    /// Softmax of an n x 1 score column within each segment (max-subtracted).
    /// Empty segments are allowed here and simply contain no entries.
    pub fn segment_softmax(&mut self, scores: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let sv = self.value(scores);
        if sv.cols() != 1 {
            return Err(Error::Shape {
                op: "segment_softmax",
                lhs: sv.shape(),
                rhs: (sv.rows(), 1),
            });
        }
        check_offsets("segment_softmax", &offsets, sv.rows())?;
        let mut out = sv.clone();
        for s in 0..offsets.len() - 1 {
            softmax_in_place(&mut out.as_mut_slice()[offsets[s]..offsets[s + 1]]);
        }
        Ok(self.push(out, Op::SegmentSoftmax(scores, offsets)))
    }

    /// Row-wise softmax (max-subtracted).
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for i in 0..out.rows() {
            softmax_in_place(out.row_mut(i));
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    /// `max(x, slope*x)`; the derivative at exactly zero is `slope`.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let out = self
            .value(x)
            .map(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu(x, slope))
    }

    /// `max(x, 0)`; the derivative at exactly zero is 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(math::sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let out = self.value(x).map(math::exp);
        self.push(out, Op::Exp(x))
    }

    /// Natural log; every input entry must be strictly positive.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = xv.as_slice().iter().find(|&&v| v.is_nan() || v <= 0.0) {
            return Err(invalid(alloc::format!("log of non-positive value {bad}")));
        }
        let out = xv.map(math::ln);
        Ok(self.push(out, Op::Log(x)))
    }

    /// Clamps into `[lo, hi]`; gradient flows only strictly inside.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(x).map(|v| v.clamp(lo, hi));
        self.push(out, Op::Clamp(x, lo, hi))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Matrix::scalar(self.value(x).sum());
        self.push(out, Op::Sum(x))
    }

    /// Mean over all entries. The mean of an empty matrix is 0.
    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let m = if xv.is_empty() {
            0.0
        } else {
            xv.sum() / xv.len() as f64
        };
        self.push(Matrix::scalar(m), Op::Mean(x))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let out = self.value(x).transpose();
        self.push(out, Op::Transpose(x))
    }

    /// Per-row dot products of two equally shaped matrices, as an n x 1 column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("row_dot", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Matrix::zeros(av.rows(), 1);
        for i in 0..av.rows() {
            out.as_mut_slice()[i] = av.row(i).iter().zip(bv.row(i)).map(|(x, y)| x * y).sum();
        }
        Ok(self.push(out, Op::RowDot(a, b)))
    }

    /// Mean softmax cross-entropy of `logits` (n x C) against class ids, computed
    /// through log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, labels: Arc<[usize]>) -> Result<Var> {
        let lv = self.value(logits);
        if labels.len() != lv.rows() {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: lv.shape(),
                rhs: (labels.len(), 1),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= lv.cols()) {
            return Err(Error::IndexOutOfRange {
                what: "class label",
                index: bad,
                bound: lv.cols(),
            });
        }
        let mut probs = lv.clone();
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = lv.row(i);
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + math::ln(row.iter().map(|&z| math::exp(z - mx)).sum::<f64>());
            total += lse - row[y];
            softmax_in_place(probs.row_mut(i));
        }
        let n = labels.len().max(1) as f64;
        Ok(self.push(
            Matrix::scalar(total / n),
            Op::CrossEntropy(logits, labels, probs),
        ))
    }

    /// Activation pattern of every ReLU, LeakyReLU and clamp on the tape. Two
    /// evaluations with equal patterns are on the same smooth piece.
    pub fn kink_pattern(&self) -> Vec<bool> {
        let mut pattern = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::Relu(x) | Op::LeakyRelu(x, _) => {
                    pattern.extend(self.value(x).as_slice().iter().map(|&v| v > 0.0));
                }
                Op::Clamp(x, lo, hi) => {
                    pattern.extend(self.value(x).as_slice().iter().map(|&v| v > lo && v < hi));
                }
                _ => {}
            }
        }
        pattern
    }

    /// Reverse pass from a 1x1 `root`.
    ///
    /// Every parameter leaf reachable from `root` has its gradient added (`+=`) to
    /// the store, so calling this twice without [`ParamStore::zero_grads`] doubles
    /// the accumulated gradients.
    pub fn backward(&self, root: Var, store: &mut ParamStore) -> Result<Gradients> {
        if self.shape(root) != (1, 1) {
            return Err(Error::NotScalar(self.shape(root)));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads, store);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(
        &self,
        i: usize,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
        store: &mut ParamStore,
    ) {
        let node = &self.nodes[i];
        let out = &node.value;
        let mut acc = |v: Var, d: Matrix| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        match &node.op {
            Op::Input => {}
            Op::Param(id) => store.accumulate(*id, g),
            Op::MatMul(a, b) => {
                acc(*a, matmul_nt(g, self.value(*b)));
                acc(*b, matmul_tn(self.value(*a), g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(self.value(*b), |x, y| x * y));
                acc(*b, g.zip_map(self.value(*a), |x, y| x * y));
            }
            Op::AddRow(x, b) => {
                let mut db = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (d, v) in db.as_mut_slice().iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                acc(*x, g.clone());
                acc(*b, db);
            }
            Op::MulCol(x, w) => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let mut dx = g.clone();
                let mut dw = Matrix::zeros(wv.rows(), 1);
                for r in 0..g.rows() {
                    let wr = wv.as_slice()[r];
                    dx.row_mut(r).iter_mut().for_each(|d| *d *= wr);
                    dw.as_mut_slice()[r] = g.row(r).iter().zip(xv.row(r)).map(|(a, b)| a * b).sum();
                }
                acc(*x, dx);
                acc(*w, dw);
            }
            Op::ScaleBy(x, s) => {
                let sv = self.value(*s).as_slice()[0];
                let ds = g
                    .as_slice()
                    .iter()
                    .zip(self.value(*x).as_slice())
                    .map(|(a, b)| a * b)
                    .sum();
                acc(*x, g.map(|v| v * sv));
                acc(*s, Matrix::scalar(ds));
            }
            Op::Scale(x, c) => acc(*x, g.map(|v| v * c)),
            Op::AddConst(x) => acc(*x, g.clone()),
            Op::MulConst(x, c) => acc(*x, g.zip_map(c, |a, b| a * b)),
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    acc(p, g.slice_cols(off, w));
                    off += w;
                }
            }
            Op::SliceCols(x, start) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for r in 0..g.rows() {
                    dx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                acc(*x, dx);
            }
            Op::RowGather(x, idx) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for (k, &r) in idx.iter().enumerate() {
                    for (d, v) in dx.row_mut(r).iter_mut().zip(g.row(k)) {
                        *d += v;
                    }
                }
                acc(*x, dx);
            }
            Op::SegmentSum(x, offsets) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for s in 0..offsets.len() - 1 {
                    for r in offsets[s]..offsets[s + 1] {
                        dx.row_mut(r).copy_from_slice(g.row(s));
                    }
                }
                acc(*x, dx);
            }
            Op::SegmentSoftmax(x, offsets) => {
                let mut dx = Matrix::zeros(out.rows(), 1);
                for s in 0..offsets.len() - 1 {
                    let range = offsets[s]..offsets[s + 1];
                    softmax_backward(
                        &out.as_slice()[range.clone()],
                        &g.as_slice()[range.clone()],
                        &mut dx.as_mut_slice()[range],
                    );
                }
                acc(*x, dx);
            }
            Op::SoftmaxRows(x) => {
                let mut dx = Matrix::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    softmax_backward(out.row(r), g.row(r), dx.row_mut(r));
                }
                acc(*x, dx);
            }
            Op::LeakyRelu(x, slope) => {
                acc(*x, g.zip_map(self.value(*x), |d, v| if v > 0.0 { d } else { d * slope }));
            }
            Op::Relu(x) => {
                acc(*x, g.zip_map(self.value(*x), |d, v| if v > 0.0 { d } else { 0.0 }));
            }
            Op::Sigmoid(x) => acc(*x, g.zip_map(out, |d, y| d * y * (1.0 - y))),
            Op::Exp(x) => acc(*x, g.zip_map(out, |d, y| d * y)),
            Op::Log(x) => acc(*x, g.zip_map(self.value(*x), |d, v| d / v)),
            Op::Clamp(x, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                acc(
                    *x,
                    g.zip_map(self.value(*x), |d, v| if v > lo && v < hi { d } else { 0.0 }),
                );
            }
            Op::Sum(x) => {
                let (r, c) = self.shape(*x);
                acc(*x, Matrix::filled(r, c, g.as_slice()[0]));
            }
            Op::Mean(x) => {
                let (r, c) = self.shape(*x);
                let n = (r * c).max(1) as f64;
                acc(*x, Matrix::filled(r, c, g.as_slice()[0] / n));
            }
            Op::Transpose(x) => acc(*x, g.transpose()),
            Op::RowDot(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut da = bv.clone();
                let mut db = av.clone();
                for r in 0..av.rows() {
                    let gr = g.as_slice()[r];
                    da.row_mut(r).iter_mut().for_each(|v| *v *= gr);
                    db.row_mut(r).iter_mut().for_each(|v| *v *= gr);
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::CrossEntropy(x, labels, probs) => {
                let scale = g.as_slice()[0] / labels.len().max(1) as f64;
                let mut dx = probs.clone();
                for (r, &y) in labels.iter().enumerate() {
                    dx[(r, y)] -= 1.0;
                }
                dx.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
                acc(*x, dx);
            }
        }
    }
}

pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = math::exp(*x - mx);
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

fn softmax_backward(y: &[f64], dy: &[f64], dx: &mut [f64]) {
    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    for ((d, &yi), &gi) in dx.iter_mut().zip(y).zip(dy) {
        *d = yi * (gi - dot);
    }
}

/// Max-subtracted softmax within each segment of a plain score vector.
///
/// `segments` holds CSR-style offsets (`len = number of segments + 1`) that must
/// partition `scores`. Every segment must be non-empty.
pub fn segment_softmax(scores: &[f64], segments: &[usize]) -> Result<Vec<f64>> {
    check_offsets("segment_softmax", segments, scores.len())?;
    if let Some(s) = segments.windows(2).position(|w| w[0] == w[1]) {
        return Err(invalid(alloc::format!("segment_softmax: segment {s} is empty")));
    }
    let mut out = scores.to_vec();
    for w in segments.windows(2) {
        softmax_in_place(&mut out[w[0]..w[1]]);
    }
    Ok(out)
}
