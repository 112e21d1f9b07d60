//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of a forward pass; [`Tape::backward`]
//! replays it in reverse, accumulating exact gradients. Only the operations
//! the attention/actor/critic stack needs are implemented. Shape mismatches
//! in tape ops are programming errors and panic; recoverable validation
//! lives in the layer and network wrappers.

use crate::linalg::Mat;
use crate::nn::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

enum Op {
    Leaf,
    /// a @ b
    MatMul(TensorId, TensorId),
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    /// Elementwise product.
    Mul(TensorId, TensorId),
    /// (n x c) + broadcast (1 x c) row.
    AddRow(TensorId, TensorId),
    Scale(TensorId, f64),
    /// Add a constant matrix (no gradient into the constant).
    Offset(TensorId),
    LeakyRelu(TensorId, f64),
    Tanh(TensorId),
    Square(TensorId),
    /// Side-by-side column concatenation.
    ConcatCols(TensorId, TensorId),
    /// Vertical row stacking.
    ConcatRows(TensorId, TensorId),
    /// Select rows by index (duplicates allowed).
    GatherRows(TensorId, Vec<usize>),
    /// out[i][j] = s[i] + d[j] from two n x 1 columns.
    OuterSum(TensorId, TensorId),
    /// Row-wise masked softmax; mask entries > 0 mark the support.
    MaskedSoftmax(TensorId, Mat),
    MeanAll(TensorId),
    SumAll(TensorId),
}

struct Node {
    value: Mat,
    op: Op,
}

/// Gradients by tensor id after a backward pass.
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn of(&self, id: TensorId) -> Option<&Mat> {
        self.grads[id.0].as_ref()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    /// Leaves bound to named parameters, for gradient extraction.
    bindings: Vec<(TensorId, String)>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Mat, op: Op) -> TensorId {
        self.nodes.push(Node { value, op });
        TensorId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: TensorId) -> &Mat {
        &self.nodes[id.0].value
    }

    pub fn leaf(&mut self, value: Mat) -> TensorId {
        self.push(value, Op::Leaf)
    }

    /// Leaf bound to a named parameter; its gradient lands in the store.
    pub fn param(
        &mut self,
        store: &crate::nn::store::ParameterStore,
        name: &str,
    ) -> Result<TensorId, NnError> {
        let value = store.value(name)?.clone();
        let id = self.push(value, Op::Leaf);
        self.bindings.push((id, name.to_string()));
        Ok(id)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch");
        let out = Mat::from_vec(
            va.rows(),
            va.cols(),
            va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect(),
        );
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "sub shape mismatch");
        let out = Mat::from_vec(
            va.rows(),
            va.cols(),
            va.data().iter().zip(vb.data()).map(|(x, y)| x - y).collect(),
        );
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "mul shape mismatch");
        let out = Mat::from_vec(
            va.rows(),
            va.cols(),
            va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect(),
        );
        self.push(out, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, x: TensorId, row: TensorId) -> TensorId {
        let (vx, vr) = (self.value(x), self.value(row));
        assert_eq!(vr.rows(), 1, "add_row needs a 1 x c row");
        assert_eq!(vx.cols(), vr.cols(), "add_row width mismatch");
        let mut out = vx.clone();
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                out.add_at(i, j, vr.get(0, j));
            }
        }
        self.push(out, Op::AddRow(x, row))
    }

    pub fn scale(&mut self, x: TensorId, c: f64) -> TensorId {
        let out = self.value(x).map(|v| v * c);
        self.push(out, Op::Scale(x, c))
    }

    pub fn offset(&mut self, x: TensorId, constant: Mat) -> TensorId {
        let vx = self.value(x);
        assert_eq!(vx.shape(), constant.shape(), "offset shape mismatch");
        let out = Mat::from_vec(
            vx.rows(),
            vx.cols(),
            vx.data()
                .iter()
                .zip(constant.data())
                .map(|(x, c)| x + c)
                .collect(),
        );
        self.push(out, Op::Offset(x))
    }

    pub fn leaky_relu(&mut self, x: TensorId, slope: f64) -> TensorId {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu(x, slope))
    }

    pub fn tanh(&mut self, x: TensorId) -> TensorId {
        let out = self.value(x).map(f64::tanh);
        self.push(out, Op::Tanh(x))
    }

    pub fn square(&mut self, x: TensorId) -> TensorId {
        let out = self.value(x).map(|v| v * v);
        self.push(out, Op::Square(x))
    }

    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.rows(), vb.rows(), "concat_cols row mismatch");
        let mut rows = Vec::with_capacity(va.rows());
        for i in 0..va.rows() {
            let mut row = va.row(i).to_vec();
            row.extend_from_slice(vb.row(i));
            rows.push(row);
        }
        self.push(Mat::from_rows(&rows), Op::ConcatCols(a, b))
    }

    pub fn concat_rows(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols(), vb.cols(), "concat_rows width mismatch");
        let mut data = va.data().to_vec();
        data.extend_from_slice(vb.data());
        let out = Mat::from_vec(va.rows() + vb.rows(), va.cols(), data);
        self.push(out, Op::ConcatRows(a, b))
    }

    pub fn gather_rows(&mut self, x: TensorId, indices: &[usize]) -> TensorId {
        let vx = self.value(x);
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| vx.row(i).to_vec()).collect();
        self.push(Mat::from_rows(&rows), Op::GatherRows(x, indices.to_vec()))
    }

    pub fn outer_sum(&mut self, s: TensorId, d: TensorId) -> TensorId {
        let (vs, vd) = (self.value(s), self.value(d));
        assert_eq!(vs.cols(), 1, "outer_sum takes n x 1 columns");
        assert_eq!(vd.cols(), 1, "outer_sum takes n x 1 columns");
        assert_eq!(vs.rows(), vd.rows(), "outer_sum length mismatch");
        let n = vs.rows();
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, vs.get(i, 0) + vd.get(j, 0));
            }
        }
        self.push(out, Op::OuterSum(s, d))
    }

    /// Row-wise softmax over the mask support. Off-support outputs are
    /// exactly zero; no infinities are materialized (the row max over the
    /// support is subtracted before exponentiation). A row with empty
    /// support is an error: every node must keep at least its self-loop.
    pub fn masked_softmax(&mut self, logits: TensorId, mask: Mat) -> Result<TensorId, NnError> {
        let vl = self.value(logits);
        assert_eq!(vl.shape(), mask.shape(), "masked_softmax shape mismatch");
        let (r, c) = vl.shape();
        let mut out = Mat::zeros(r, c);
        for i in 0..r {
            let support: Vec<usize> = (0..c).filter(|&j| mask.get(i, j) > 0.0).collect();
            if support.is_empty() {
                return Err(NnError::Shape(format!(
                    "softmax row {i} has no unmasked entries (isolated node)"
                )));
            }
            let max = support
                .iter()
                .map(|&j| vl.get(i, j))
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for &j in &support {
                let e = (vl.get(i, j) - max).exp();
                out.set(i, j, e);
                total += e;
            }
            for &j in &support {
                out.set(i, j, out.get(i, j) / total);
            }
        }
        Ok(self.push(out, Op::MaskedSoftmax(logits, mask)))
    }

    pub fn mean_all(&mut self, x: TensorId) -> TensorId {
        let vx = self.value(x);
        let n = (vx.rows() * vx.cols()) as f64;
        let mean = vx.data().iter().sum::<f64>() / n;
        self.push(Mat::from_vec(1, 1, vec![mean]), Op::MeanAll(x))
    }

    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let total = self.value(x).data().iter().sum();
        self.push(Mat::from_vec(1, 1, vec![total]), Op::SumAll(x))
    }

    /// Reverse pass from a scalar output. Returns per-tensor gradients.
    pub fn backward(&self, loss: TensorId) -> Result<Gradients, NnError> {
        let loss_value = &self.nodes[loss.0].value;
        if loss_value.shape() != (1, 1) {
            return Err(NnError::Shape(format!(
                "backward needs a 1x1 loss, got {}x{}",
                loss_value.rows(),
                loss_value.cols()
            )));
        }
        if !loss_value.is_finite() {
            return Err(NnError::NonFinite("loss is not finite".into()));
        }
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::from_vec(1, 1, vec![1.0]));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_one(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Adds the parameter gradients of a backward pass into the store.
    pub fn accumulate_into(
        &self,
        grads: &Gradients,
        store: &mut crate::nn::store::ParameterStore,
    ) -> Result<(), NnError> {
        for (id, name) in &self.bindings {
            if let Some(g) = grads.of(*id) {
                store.accumulate_grad(name, g)?;
            }
        }
        Ok(())
    }

    fn backprop_one(&self, idx: usize, g: &Mat, grads: &mut [Option<Mat>]) {
        let add_to = |grads: &mut [Option<Mat>], id: TensorId, delta: Mat| {
            match &mut grads[id.0] {
                Some(acc) => {
                    debug_assert_eq!(acc.shape(), delta.shape());
                    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                        *a += d;
                    }
                }
                slot @ None => *slot = Some(delta),
            }
        };

        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let va = &self.nodes[a.0].value;
                let vb = &self.nodes[b.0].value;
                add_to(grads, *a, g.matmul(&vb.transpose()));
                add_to(grads, *b, va.transpose().matmul(g));
            }
            Op::Add(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let va = &self.nodes[a.0].value;
                let vb = &self.nodes[b.0].value;
                let ga = Mat::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect(),
                );
                let gb = Mat::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(va.data()).map(|(x, y)| x * y).collect(),
                );
                add_to(grads, *a, ga);
                add_to(grads, *b, gb);
            }
            Op::AddRow(x, row) => {
                add_to(grads, *x, g.clone());
                let mut gr = Mat::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        gr.add_at(0, j, g.get(i, j));
                    }
                }
                add_to(grads, *row, gr);
            }
            Op::Scale(x, c) => {
                add_to(grads, *x, g.map(|v| v * c));
            }
            Op::Offset(x) => {
                add_to(grads, *x, g.clone());
            }
            Op::LeakyRelu(x, slope) => {
                let vx = &self.nodes[x.0].value;
                let gx = Mat::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data()
                        .iter()
                        .zip(vx.data())
                        .map(|(gv, xv)| if *xv > 0.0 { *gv } else { gv * slope })
                        .collect(),
                );
                add_to(grads, *x, gx);
            }
            Op::Tanh(x) => {
                let y = &self.nodes[idx].value;
                let gx = Mat::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gv, yv)| gv * (1.0 - yv * yv))
                        .collect(),
                );
                add_to(grads, *x, gx);
            }
            Op::Square(x) => {
                let vx = &self.nodes[x.0].value;
                let gx = Mat::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data()
                        .iter()
                        .zip(vx.data())
                        .map(|(gv, xv)| 2.0 * gv * xv)
                        .collect(),
                );
                add_to(grads, *x, gx);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.nodes[a.0].value.cols();
                let mut ga = Mat::zeros(g.rows(), ca);
                let mut gb = Mat::zeros(g.rows(), g.cols() - ca);
                for i in 0..g.rows() {
                    for j in 0..ca {
                        ga.set(i, j, g.get(i, j));
                    }
                    for j in ca..g.cols() {
                        gb.set(i, j - ca, g.get(i, j));
                    }
                }
                add_to(grads, *a, ga);
                add_to(grads, *b, gb);
            }
            Op::ConcatRows(a, b) => {
                let ra = self.nodes[a.0].value.rows();
                let split = ra * g.cols();
                let ga = Mat::from_vec(ra, g.cols(), g.data()[..split].to_vec());
                let gb = Mat::from_vec(g.rows() - ra, g.cols(), g.data()[split..].to_vec());
                add_to(grads, *a, ga);
                add_to(grads, *b, gb);
            }
            Op::GatherRows(x, indices) => {
                let vx = &self.nodes[x.0].value;
                let mut gx = Mat::zeros(vx.rows(), vx.cols());
                for (out_row, &src) in indices.iter().enumerate() {
                    for j in 0..g.cols() {
                        gx.add_at(src, j, g.get(out_row, j));
                    }
                }
                add_to(grads, *x, gx);
            }
            Op::OuterSum(s, d) => {
                let n = g.rows();
                let mut gs = Mat::zeros(n, 1);
                let mut gd = Mat::zeros(n, 1);
                for i in 0..n {
                    for j in 0..n {
                        gs.add_at(i, 0, g.get(i, j));
                        gd.add_at(j, 0, g.get(i, j));
                    }
                }
                add_to(grads, *s, gs);
                add_to(grads, *d, gd);
            }
            Op::MaskedSoftmax(logits, mask) => {
                // Per row: dl_j = alpha_j * (g_j - sum_k g_k alpha_k).
                let alpha = &self.nodes[idx].value;
                let mut gl = Mat::zeros(g.rows(), g.cols());
                for i in 0..g.rows() {
                    let mut dot = 0.0;
                    for j in 0..g.cols() {
                        if mask.get(i, j) > 0.0 {
                            dot += g.get(i, j) * alpha.get(i, j);
                        }
                    }
                    for j in 0..g.cols() {
                        if mask.get(i, j) > 0.0 {
                            gl.set(i, j, alpha.get(i, j) * (g.get(i, j) - dot));
                        }
                    }
                }
                add_to(grads, *logits, gl);
            }
            Op::MeanAll(x) => {
                let vx = &self.nodes[x.0].value;
                let scale = g.scalar() / (vx.rows() * vx.cols()) as f64;
                add_to(grads, *x, Mat::filled(vx.rows(), vx.cols(), scale));
            }
            Op::SumAll(x) => {
                let vx = &self.nodes[x.0].value;
                add_to(grads, *x, Mat::filled(vx.rows(), vx.cols(), g.scalar()));
            }
        }
    }
}
