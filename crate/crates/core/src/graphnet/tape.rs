//! Reverse-mode automatic differentiation over 2-d arrays.
//!
//! A [`Tape`] records every operation of a forward computation; [`Tape::backward`]
//! replays the record in reverse, accumulating exact gradients for every
//! node. Generic over `f32`/`f64` so training can run single precision while
//! gradient checks and invariance tests run double.

use ndarray::{s, Array2, Axis, NdFloat};

/// Handle to a node on a tape. Only valid for the tape that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<F> {
    /// Input or parameter; no inputs to differentiate through.
    Leaf,
    /// a.dot(b)
    MatMul(NodeId, NodeId),
    /// x + row broadcast over rows; row is 1 x d.
    AddRowBroadcast(NodeId, NodeId),
    /// max(x, 0) + slope * min(x, 0)
    LeakyRelu(NodeId, F),
    /// 1 / (1 + exp(-x))
    Sigmoid(NodeId),
    Add(NodeId, NodeId),
    /// Horizontal concatenation; widths recorded for the backward split.
    ConcatCols(Vec<(NodeId, usize)>),
    /// Columns start..end of x.
    SliceCols(NodeId, usize, usize),
    /// out[i] = x[rows[i]]
    GatherRows(NodeId, Vec<usize>),
    /// out[segments[i]] += x[i]; output has `1` rows (arg 2).
    SegmentSum(NodeId, Vec<usize>),
    /// Row-wise dot product of equal-shape a and b; output is n x 1.
    RowDot(NodeId, NodeId),
    /// x * col broadcast over columns; col is n x 1, both differentiated.
    MulColBroadcast(NodeId, NodeId),
    /// Row i scaled by the fixed factor factors[i].
    RowScaleConst(NodeId, Vec<F>),
    /// Elementwise product with a fixed array of the same shape.
    MulConst(NodeId, Array2<F>),
    /// a * x + b elementwise with scalar constants.
    AffineConst(NodeId, F, F),
    Ln(NodeId),
    /// Clamp to [lo, hi]; gradient passes only strictly inside.
    Clamp(NodeId, F, F),
    /// Sum of all entries, as a 1 x 1 array.
    SumAll(NodeId),
}

pub struct Tape<F> {
    values: Vec<Array2<F>>,
    ops: Vec<Op<F>>,
}

/// Gradients for every tape node, in node order; `None` for nodes the loss
/// does not depend on.
pub struct Gradients<F> {
    grads: Vec<Option<Array2<F>>>,
}

impl<F: NdFloat> Gradients<F> {
    /// Gradient of the loss w.r.t. the given node; zeros if untouched.
    pub fn get(&self, id: NodeId, like: &Array2<F>) -> Array2<F> {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => Array2::zeros(like.raw_dim()),
        }
    }
}

impl<F: NdFloat> Tape<F> {
    pub fn new() -> Self {
        Tape {
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Array2<F> {
        &self.values[id.0]
    }

    fn push(&mut self, value: Array2<F>, op: Op<F>) -> NodeId {
        self.values.push(value);
        self.ops.push(op);
        NodeId(self.values.len() - 1)
    }

    /// Register an input or parameter array.
    pub fn leaf(&mut self, value: Array2<F>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.values[a.0].dot(&self.values[b.0]);
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add_row_broadcast(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let (xv, rv) = (&self.values[x.0], &self.values[row.0]);
        debug_assert_eq!(rv.nrows(), 1);
        debug_assert_eq!(xv.ncols(), rv.ncols());
        let value = xv + &rv.broadcast(xv.raw_dim()).unwrap();
        self.push(value, Op::AddRowBroadcast(x, row))
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: F) -> NodeId {
        let value = self.values[x.0].mapv(|v| if v > F::zero() { v } else { slope * v });
        self.push(value, Op::LeakyRelu(x, slope))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let one = F::one();
        let value = self.values[x.0].mapv(|v| one / (one + (-v).exp()));
        self.push(value, Op::Sigmoid(x))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = &self.values[a.0] + &self.values[b.0];
        self.push(value, Op::Add(a, b))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        debug_assert!(!parts.is_empty());
        let rows = self.values[parts[0].0].nrows();
        let widths: Vec<(NodeId, usize)> = parts
            .iter()
            .map(|&p| (p, self.values[p.0].ncols()))
            .collect();
        let total: usize = widths.iter().map(|&(_, w)| w).sum();
        let mut value = Array2::zeros((rows, total));
        let mut offset = 0;
        for &(p, w) in &widths {
            value
                .slice_mut(s![.., offset..offset + w])
                .assign(&self.values[p.0]);
            offset += w;
        }
        self.push(value, Op::ConcatCols(widths))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, end: usize) -> NodeId {
        let value = self.values[x.0].slice(s![.., start..end]).to_owned();
        self.push(value, Op::SliceCols(x, start, end))
    }

    pub fn gather_rows(&mut self, x: NodeId, rows: Vec<usize>) -> NodeId {
        let xv = &self.values[x.0];
        let mut value = Array2::zeros((rows.len(), xv.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            value.row_mut(i).assign(&xv.row(r));
        }
        self.push(value, Op::GatherRows(x, rows))
    }

    pub fn segment_sum(&mut self, x: NodeId, segments: Vec<usize>, num_segments: usize) -> NodeId {
        let xv = &self.values[x.0];
        debug_assert_eq!(xv.nrows(), segments.len());
        let mut value = Array2::zeros((num_segments, xv.ncols()));
        for (i, &seg) in segments.iter().enumerate() {
            let mut row = value.row_mut(seg);
            row += &xv.row(i);
        }
        self.push(value, Op::SegmentSum(x, segments))
    }

    pub fn row_dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        debug_assert_eq!(av.raw_dim(), bv.raw_dim());
        let value = (av * bv).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(value, Op::RowDot(a, b))
    }

    pub fn mul_col_broadcast(&mut self, x: NodeId, col: NodeId) -> NodeId {
        let (xv, cv) = (&self.values[x.0], &self.values[col.0]);
        debug_assert_eq!(cv.ncols(), 1);
        debug_assert_eq!(xv.nrows(), cv.nrows());
        let value = xv * &cv.broadcast(xv.raw_dim()).unwrap();
        self.push(value, Op::MulColBroadcast(x, col))
    }

    pub fn row_scale_const(&mut self, x: NodeId, factors: Vec<F>) -> NodeId {
        let xv = &self.values[x.0];
        debug_assert_eq!(xv.nrows(), factors.len());
        let mut value = xv.clone();
        for (i, &f) in factors.iter().enumerate() {
            let mut row = value.row_mut(i);
            row *= f;
        }
        self.push(value, Op::RowScaleConst(x, factors))
    }

    pub fn mul_const(&mut self, x: NodeId, c: Array2<F>) -> NodeId {
        let value = &self.values[x.0] * &c;
        self.push(value, Op::MulConst(x, c))
    }

    pub fn affine_const(&mut self, x: NodeId, a: F, b: F) -> NodeId {
        let value = self.values[x.0].mapv(|v| a * v + b);
        self.push(value, Op::AffineConst(x, a, b))
    }

    pub fn ln(&mut self, x: NodeId) -> NodeId {
        let value = self.values[x.0].mapv(F::ln);
        self.push(value, Op::Ln(x))
    }

    pub fn clamp(&mut self, x: NodeId, lo: F, hi: F) -> NodeId {
        let value = self.values[x.0].mapv(|v| v.max(lo).min(hi));
        self.push(value, Op::Clamp(x, lo, hi))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let mut value = Array2::zeros((1, 1));
        value[(0, 0)] = self.values[x.0].sum();
        self.push(value, Op::SumAll(x))
    }

    /// Reverse sweep from `root`, which must be 1 x 1; its gradient is
    /// seeded with one.
    pub fn backward(&self, root: NodeId) -> Gradients<F> {
        debug_assert_eq!(self.values[root.0].raw_dim(), ndarray::Dim([1, 1]));
        let mut grads: Vec<Option<Array2<F>>> = vec![None; self.values.len()];
        grads[root.0] = Some(Array2::ones((1, 1)));

        for i in (0..self.ops.len()).rev() {
            // Leaves keep their accumulated gradient for readout; interior
            // gradients are consumed once all their users have contributed.
            if matches!(self.ops[i], Op::Leaf) {
                continue;
            }
            let Some(grad) = grads[i].take() else { continue };
            match &self.ops[i] {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let da = grad.dot(&self.values[b.0].t());
                    let db = self.values[a.0].t().dot(&grad);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::AddRowBroadcast(x, row) => {
                    let drow = grad.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads[x.0], grad.clone());
                    accumulate(&mut grads[row.0], drow);
                }
                Op::LeakyRelu(x, slope) => {
                    let mask = self.values[x.0]
                        .mapv(|v| if v > F::zero() { F::one() } else { *slope });
                    accumulate(&mut grads[x.0], &grad * &mask);
                }
                Op::Sigmoid(x) => {
                    let s = &self.values[i];
                    let ds = s.mapv(|v| v * (F::one() - v));
                    accumulate(&mut grads[x.0], &grad * &ds);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], grad.clone());
                    accumulate(&mut grads[b.0], grad);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &(p, w) in parts {
                        let piece = grad.slice(s![.., offset..offset + w]).to_owned();
                        accumulate(&mut grads[p.0], piece);
                        offset += w;
                    }
                }
                Op::SliceCols(x, start, end) => {
                    let mut dx = Array2::zeros(self.values[x.0].raw_dim());
                    dx.slice_mut(s![.., *start..*end]).assign(&grad);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::GatherRows(x, rows) => {
                    let mut dx = Array2::zeros(self.values[x.0].raw_dim());
                    for (k, &r) in rows.iter().enumerate() {
                        let mut row = dx.row_mut(r);
                        row += &grad.row(k);
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::SegmentSum(x, segments) => {
                    let mut dx = Array2::zeros(self.values[x.0].raw_dim());
                    for (k, &seg) in segments.iter().enumerate() {
                        dx.row_mut(k).assign(&grad.row(seg));
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::RowDot(a, b) => {
                    let wide = self.values[a.0].raw_dim();
                    let da = &grad.broadcast(wide).unwrap() * &self.values[b.0];
                    let db = &grad.broadcast(wide).unwrap() * &self.values[a.0];
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MulColBroadcast(x, col) => {
                    let xv = &self.values[x.0];
                    let cv = &self.values[col.0];
                    let dx = &grad * &cv.broadcast(xv.raw_dim()).unwrap();
                    let dcol = (&grad * xv).sum_axis(Axis(1)).insert_axis(Axis(1));
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut grads[col.0], dcol);
                }
                Op::RowScaleConst(x, factors) => {
                    let mut dx = grad;
                    for (k, &f) in factors.iter().enumerate() {
                        let mut row = dx.row_mut(k);
                        row *= f;
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::MulConst(x, c) => {
                    accumulate(&mut grads[x.0], &grad * c);
                }
                Op::AffineConst(x, a, _) => {
                    accumulate(&mut grads[x.0], grad.mapv(|g| g * *a));
                }
                Op::Ln(x) => {
                    accumulate(&mut grads[x.0], &grad / &self.values[x.0]);
                }
                Op::Clamp(x, lo, hi) => {
                    let mask = self.values[x.0]
                        .mapv(|v| if v > *lo && v < *hi { F::one() } else { F::zero() });
                    accumulate(&mut grads[x.0], &grad * &mask);
                }
                Op::SumAll(x) => {
                    let g = grad[(0, 0)];
                    let dx = Array2::from_elem(self.values[x.0].raw_dim(), g);
                    accumulate(&mut grads[x.0], dx);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate<F: NdFloat>(slot: &mut Option<Array2<F>>, delta: Array2<F>) {
    match slot {
        Some(g) => *g += &delta,
        None => *slot = Some(delta),
    }
}
