//! A small reverse-mode tape over [`Matrix`] values.
//!
//! Every forward pass records its operations on a fresh [`Tape`]; calling
//! [`Tape::backward`] on a scalar output yields gradients for every parameter
//! bound into the tape. The operation set is exactly what the grounding model
//! needs: affine maps, pointwise nonlinearities, row gathers/scatters for
//! edge-list message passing, segment softmax for neighbourhood attention and
//! the two training criteria.

use crate::error::Error;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Matrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Lower clamp applied to probabilities inside logarithms.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    RowDot(Var, Var),
    MulCol(Var, Var),
    SegmentSoftmax(Var, Vec<usize>),
    Sum(Var),
    SoftBce {
        pred: Var,
        target: Vec<f64>,
        scale: f64,
    },
    SmoothL1 {
        input: Var,
        target: Vec<f64>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "input",
            Op::Param => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::OneMinus(_) => "one_minus",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::Transpose(_) => "transpose",
            Op::ConcatCols(_) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::SliceRows(..) => "slice_rows",
            Op::GatherRows(..) => "gather_rows",
            Op::ScatterAddRows(..) => "scatter_add_rows",
            Op::RowDot(..) => "row_dot",
            Op::MulCol(..) => "mul_col",
            Op::SegmentSoftmax(..) => "segment_softmax",
            Op::Sum(_) => "sum",
            Op::SoftBce { .. } => "soft_bce",
            Op::SmoothL1 { .. } => "smooth_l1",
        }
    }
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
    label: Option<String>,
}

/// Gradients produced by [`Tape::backward`], indexed by parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    per_param: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.per_param.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient for `id`, or zeros of `shape` if the parameter did not take part.
    pub fn get_or_zeros(&self, id: ParamId, shape: (usize, usize)) -> Matrix {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }

    pub fn len(&self) -> usize {
        self.per_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_param.is_empty()
    }
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    bound: Vec<Option<Var>>,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            bound: vec![None; params.len()],
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            label: None,
        });
        Var(self.nodes.len() - 1)
    }

    #[inline]
    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Attach a human-readable name used in non-finite diagnostics.
    pub fn label(&mut self, v: Var, label: impl Into<String>) -> Var {
        self.nodes[v.0].label = Some(label.into());
        v
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input (no gradient).
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Parameter leaf; repeated calls return the same handle.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let value = self.params.get(id).clone();
        let v = self.push(value, Op::Param, true);
        self.nodes[v.0].label = Some(self.params.name(id).to_string());
        self.bound[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::Add(a, b), ng)
    }

    /// Sum of several equally-shaped values.
    pub fn add_all(&mut self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty(), "add_all of nothing");
        let mut acc = vars[0];
        for &v in &vars[1..] {
            acc = self.add(acc, v);
        }
        acc
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::Sub(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::Mul(a, b), ng)
    }

    /// `a + row` with `row` (1 x d) broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (n, d) = self.shape(a);
        assert_eq!(self.shape(row), (1, d), "add_row bias shape");
        let mut value = self.value(a).clone();
        let bias = self.value(row).data().to_vec();
        for r in 0..n {
            for (x, b) in value.row_mut(r).iter_mut().zip(&bias) {
                *x += b;
            }
        }
        let ng = self.needs(a) || self.needs(row);
        self.push(value, Op::AddRow(a, row), ng)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x * s);
        let ng = self.needs(a);
        self.push(value, Op::Scale(a, s), ng)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 - x);
        let ng = self.needs(a);
        self.push(value, Op::OneMinus(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let ng = self.needs(a);
        self.push(value, Op::Tanh(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(crate::tensor::sigmoid);
        let ng = self.needs(a);
        self.push(value, Op::Sigmoid(a), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let ng = self.needs(a);
        self.push(value, Op::Relu(a), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let ng = self.needs(a);
        self.push(value, Op::Transpose(a), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.shape(parts[0]).0;
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows(), rows, "concat_cols row mismatch");
            for r in 0..rows {
                value.row_mut(r)[offset..offset + m.cols()].copy_from_slice(m.row(r));
            }
            offset += m.cols();
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols(), cols, "concat_rows col mismatch");
            data.extend_from_slice(m.data());
        }
        let rows = data.len() / cols.max(1);
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(
            Matrix::from_vec(rows, cols, data),
            Op::ConcatRows(parts.to_vec()),
            ng,
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let m = self.value(a);
        assert!(start + width <= m.cols(), "slice_cols out of range");
        let mut value = Matrix::zeros(m.rows(), width);
        for r in 0..m.rows() {
            value
                .row_mut(r)
                .copy_from_slice(&m.row(r)[start..start + width]);
        }
        let ng = self.needs(a);
        self.push(value, Op::SliceCols(a, start), ng)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, count: usize) -> Var {
        let m = self.value(a);
        assert!(start + count <= m.rows(), "slice_rows out of range");
        let c = m.cols();
        let value = Matrix::from_vec(count, c, m.data()[start * c..(start + count) * c].to_vec());
        let ng = self.needs(a);
        self.push(value, Op::SliceRows(a, start), ng)
    }

    /// Row `idx[k]` of `a` becomes row `k` of the output.
    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let m = self.value(a);
        let c = m.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in &idx {
            data.extend_from_slice(m.row(i));
        }
        let value = Matrix::from_vec(idx.len(), c, data);
        let ng = self.needs(a);
        self.push(value, Op::GatherRows(a, idx), ng)
    }

    /// Output row `idx[k]` accumulates row `k` of `a`; output has `rows` rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Vec<usize>, rows: usize) -> Var {
        let m = self.value(a);
        assert_eq!(m.rows(), idx.len(), "scatter index length");
        let mut value = Matrix::zeros(rows, m.cols());
        for (k, &i) in idx.iter().enumerate() {
            for (o, x) in value.row_mut(i).iter_mut().zip(m.row(k)) {
                *o += x;
            }
        }
        let ng = self.needs(a);
        self.push(value, Op::ScatterAddRows(a, idx), ng)
    }

    /// Row-wise dot products: `n x d`, `n x d` -> `n x 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Var {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!(ma.shape(), mb.shape(), "row_dot shape mismatch");
        let data = (0..ma.rows())
            .map(|r| crate::tensor::dot(ma.row(r), mb.row(r)))
            .collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(Matrix::column(data), Op::RowDot(a, b), ng)
    }

    /// Scale each row of `a` (n x d) by the matching entry of `c` (n x 1).
    pub fn mul_col(&mut self, a: Var, c: Var) -> Var {
        let (ma, mc) = (self.value(a), self.value(c));
        assert_eq!(mc.shape(), (ma.rows(), 1), "mul_col shape mismatch");
        let mut value = ma.clone();
        for r in 0..ma.rows() {
            let s = mc.get(r, 0);
            for x in value.row_mut(r) {
                *x *= s;
            }
        }
        let ng = self.needs(a) || self.needs(c);
        self.push(value, Op::MulCol(a, c), ng)
    }

    /// Softmax of an `n x 1` column within groups sharing a segment id.
    pub fn segment_softmax(&mut self, logits: Var, segments: Vec<usize>) -> Var {
        let m = self.value(logits);
        assert_eq!(m.shape(), (segments.len(), 1), "segment_softmax shape");
        let nseg = segments.iter().copied().max().map_or(0, |x| x + 1);
        let mut max = vec![f64::NEG_INFINITY; nseg];
        for (k, &s) in segments.iter().enumerate() {
            max[s] = max[s].max(m.get(k, 0));
        }
        let mut exps: Vec<f64> = segments
            .iter()
            .enumerate()
            .map(|(k, &s)| (m.get(k, 0) - max[s]).exp())
            .collect();
        let mut total = vec![0.0; nseg];
        for (k, &s) in segments.iter().enumerate() {
            total[s] += exps[k];
        }
        for (k, &s) in segments.iter().enumerate() {
            exps[k] /= total[s];
        }
        let ng = self.needs(logits);
        self.push(Matrix::column(exps), Op::SegmentSoftmax(logits, segments), ng)
    }

    pub fn softmax_col(&mut self, logits: Var) -> Var {
        let n = self.shape(logits).0;
        self.segment_softmax(logits, vec![0; n])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::from_vec(1, 1, vec![self.value(a).sum()]);
        let ng = self.needs(a);
        self.push(value, Op::Sum(a), ng)
    }

    /// `-scale * Σ [(1-y) ln(1-p) + y ln p]` over all entries, `p` clamped to
    /// `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn soft_bce(&mut self, pred: Var, target: Vec<f64>, scale: f64) -> Var {
        let p = self.value(pred);
        assert_eq!(p.len(), target.len(), "soft_bce target length");
        let total: f64 = p
            .data()
            .iter()
            .zip(&target)
            .map(|(&p, &y)| {
                let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
                (1.0 - y) * (1.0 - p).ln() + y * p.ln()
            })
            .sum();
        let value = Matrix::from_vec(1, 1, vec![-scale * total]);
        let ng = self.needs(pred);
        self.push(value, Op::SoftBce { pred, target, scale }, ng)
    }

    /// `Σ R(x - target)` with `R` the smooth-L1 penalty.
    pub fn smooth_l1(&mut self, input: Var, target: Vec<f64>) -> Var {
        let x = self.value(input);
        assert_eq!(x.len(), target.len(), "smooth_l1 target length");
        let total = x
            .data()
            .iter()
            .zip(&target)
            .map(|(&x, &t)| smooth_l1(x - t))
            .sum();
        let value = Matrix::from_vec(1, 1, vec![total]);
        let ng = self.needs(input);
        self.push(value, Op::SmoothL1 { input, target }, ng)
    }

    /// First non-finite value on the tape, in recording order.
    pub fn first_non_finite(&self) -> Option<Error> {
        self.nodes.iter().enumerate().find_map(|(i, n)| {
            if n.value.all_finite() {
                None
            } else {
                let tensor = n
                    .label
                    .clone()
                    .unwrap_or_else(|| format!("{}#{i}", n.op.name()));
                Some(Error::NonFinite {
                    tensor,
                    detail: format!("op {} shape {:?}", n.op.name(), n.value.shape()),
                })
            }
        })
    }

    /// Back-propagate from a `1 x 1` output.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.shape(output), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            // Keep parameter gradients; everything else can be dropped.
            if matches!(node.op, Op::Param) {
                grads[idx] = Some(g);
            }
        }

        let mut per_param = vec![None; self.params.len()];
        for (pid, bound) in self.bound.iter().enumerate() {
            if let Some(v) = bound {
                per_param[pid] = grads[v.0].take();
            }
        }
        Gradients { per_param }
    }

    fn acc(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    self.acc(grads, *a, g.matmul_t(self.value(*b)));
                }
                if self.needs(*b) {
                    self.acc(grads, *b, self.value(*a).t_matmul(g));
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    self.acc(grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.needs(*b) {
                    self.acc(grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::AddRow(a, row) => {
                self.acc(grads, *a, g.clone());
                if self.needs(*row) {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, x) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    self.acc(grads, *row, gb);
                }
            }
            Op::Scale(a, s) => self.acc(grads, *a, g.map(|x| x * s)),
            Op::OneMinus(a) => self.acc(grads, *a, g.map(|x| -x)),
            Op::Tanh(a) => self.acc(grads, *a, g.zip_map(out, |x, y| x * (1.0 - y * y))),
            Op::Sigmoid(a) => self.acc(grads, *a, g.zip_map(out, |x, y| x * y * (1.0 - y))),
            Op::Relu(a) => self.acc(
                grads,
                *a,
                g.zip_map(self.value(*a), |x, y| if y > 0.0 { x } else { 0.0 }),
            ),
            Op::Transpose(a) => self.acc(grads, *a, g.transpose()),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    if self.needs(p) {
                        let mut gp = Matrix::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        self.acc(grads, p, gp);
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let c = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let h = self.shape(p).0;
                    if self.needs(p) {
                        let gp = Matrix::from_vec(h, c, g.data()[offset * c..(offset + h) * c].to_vec());
                        self.acc(grads, p, gp);
                    }
                    offset += h;
                }
            }
            Op::SliceCols(a, start) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                self.acc(grads, *a, ga);
            }
            Op::SliceRows(a, start) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = Matrix::zeros(rows, cols);
                ga.data_mut()[start * cols..(start + g.rows()) * cols].copy_from_slice(g.data());
                self.acc(grads, *a, ga);
            }
            Op::GatherRows(a, idx) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = Matrix::zeros(rows, cols);
                for (k, &i) in idx.iter().enumerate() {
                    for (o, x) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += x;
                    }
                }
                self.acc(grads, *a, ga);
            }
            Op::ScatterAddRows(a, idx) => {
                let cols = g.cols();
                let mut data = Vec::with_capacity(idx.len() * cols);
                for &i in idx {
                    data.extend_from_slice(g.row(i));
                }
                self.acc(grads, *a, Matrix::from_vec(idx.len(), cols, data));
            }
            Op::RowDot(a, b) => {
                let (ma, mb) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let mut ga = mb.clone();
                    for r in 0..ga.rows() {
                        let s = g.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|x| *x *= s);
                    }
                    self.acc(grads, *a, ga);
                }
                if self.needs(*b) {
                    let mut gb = ma.clone();
                    for r in 0..gb.rows() {
                        let s = g.get(r, 0);
                        gb.row_mut(r).iter_mut().for_each(|x| *x *= s);
                    }
                    self.acc(grads, *b, gb);
                }
            }
            Op::MulCol(a, c) => {
                let (ma, mc) = (self.value(*a), self.value(*c));
                if self.needs(*a) {
                    let mut ga = g.clone();
                    for r in 0..ga.rows() {
                        let s = mc.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|x| *x *= s);
                    }
                    self.acc(grads, *a, ga);
                }
                if self.needs(*c) {
                    let data = (0..ma.rows())
                        .map(|r| crate::tensor::dot(g.row(r), ma.row(r)))
                        .collect();
                    self.acc(grads, *c, Matrix::column(data));
                }
            }
            Op::SegmentSoftmax(a, segments) => {
                let nseg = segments.iter().copied().max().map_or(0, |x| x + 1);
                let mut inner = vec![0.0; nseg];
                for (k, &s) in segments.iter().enumerate() {
                    inner[s] += out.get(k, 0) * g.get(k, 0);
                }
                let data = segments
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| out.get(k, 0) * (g.get(k, 0) - inner[s]))
                    .collect();
                self.acc(grads, *a, Matrix::column(data));
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                self.acc(grads, *a, Matrix::filled(r, c, g.scalar()));
            }
            Op::SoftBce {
                pred,
                target,
                scale,
            } => {
                let p = self.value(*pred);
                let go = g.scalar();
                let data = p
                    .data()
                    .iter()
                    .zip(target)
                    .map(|(&p, &y)| {
                        if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
                            0.0
                        } else {
                            go * scale * ((1.0 - y) / (1.0 - p) - y / p)
                        }
                    })
                    .collect();
                self.acc(grads, *pred, Matrix::from_vec(p.rows(), p.cols(), data));
            }
            Op::SmoothL1 { input, target } => {
                let x = self.value(*input);
                let go = g.scalar();
                let data = x
                    .data()
                    .iter()
                    .zip(target)
                    .map(|(&x, &t)| go * smooth_l1_grad(x - t))
                    .collect();
                self.acc(grads, *input, Matrix::from_vec(x.rows(), x.cols(), data));
            }
        }
    }
}

/// `0.5 x²` for `|x| < 1`, `|x| - 0.5` otherwise.
pub fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}
