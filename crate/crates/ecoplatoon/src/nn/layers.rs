//! Dense and graph-attention layers on top of the tape.
//!
//! Layers are lightweight descriptors: parameters live in the
//! [`ParameterStore`](crate::nn::store::ParameterStore) under the layer's
//! name prefix, and `forward` records operations on a caller-owned
//! [`Tape`]. The same descriptor therefore drives the online and target
//! copies of a network.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Mat;
use crate::nn::store::ParameterStore;
use crate::nn::tape::{Tape, TensorId};
use crate::nn::NnError;

/// Negative-branch slope of the attention nonlinearity.
pub const ATTENTION_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Linear,
    Tanh,
    LeakyRelu(f64),
    /// c * tanh(x); used by the actor head to pin the action range.
    ScaledTanh(f64),
}

impl Activation {
    pub fn apply(&self, tape: &mut Tape, x: TensorId) -> TensorId {
        match self {
            Activation::Linear => x,
            Activation::Tanh => tape.tanh(x),
            Activation::LeakyRelu(slope) => tape.leaky_relu(x, *slope),
            Activation::ScaledTanh(c) => {
                let t = tape.tanh(x);
                tape.scale(t, *c)
            }
        }
    }
}

/// Glorot-uniform matrix; the layer init convention throughout.
pub fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.gen_range(-limit..limit))
            .collect(),
    )
}

/// Fully connected layer: activation(x W + b), rows are independent items.
#[derive(Debug, Clone)]
pub struct Dense {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn init(
        store: &mut ParameterStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    ) -> Result<Dense, NnError> {
        store.register(&format!("{name}.w"), glorot(rng, in_dim, out_dim))?;
        store.register(&format!("{name}.b"), Mat::zeros(1, out_dim))?;
        Ok(Dense {
            name: name.to_string(),
            in_dim,
            out_dim,
            activation,
        })
    }

    pub fn shapes(&self) -> Vec<(String, usize, usize)> {
        vec![
            (format!("{}.w", self.name), self.in_dim, self.out_dim),
            (format!("{}.b", self.name), 1, self.out_dim),
        ]
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        x: TensorId,
    ) -> Result<TensorId, NnError> {
        let got = tape.value(x).cols();
        if got != self.in_dim {
            return Err(NnError::Shape(format!(
                "{}: expected {} input features, found {got}",
                self.name, self.in_dim
            )));
        }
        let w = tape.param(store, &format!("{}.w", self.name))?;
        let b = tape.param(store, &format!("{}.b", self.name))?;
        let h = tape.matmul(x, w);
        let h = tape.add_row(h, b);
        Ok(self.activation.apply(tape, h))
    }
}

/// How edge weights enter the attention logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightInjection {
    /// ln(w_ij) is added to the logit before the nonlinearity, so the
    /// softmax scores become w_ij-proportional. Weight 1 contributes 0.
    LogOffset,
    /// Weights only gate connectivity; magnitudes are ignored.
    MaskOnly,
}

/// One multi-head attention layer over a weighted adjacency matrix.
///
/// Per head k, scores use the additive split form
/// `e_ij = LeakyReLU(s_i + d_j [+ ln w_ij])` with `s = W_k h a_src` and
/// `d = W_k h a_dst`, normalized by a softmax restricted to rows' true
/// neighborhoods. Hidden layers activate each head then concatenate
/// (output width heads * head_dim); a final layer averages the head
/// aggregates and applies one activation (output width head_dim).
#[derive(Debug, Clone)]
pub struct GatLayer {
    pub name: String,
    pub in_dim: usize,
    pub head_dim: usize,
    pub heads: usize,
    pub injection: WeightInjection,
    /// Average heads then activate (a final layer) instead of concatenating.
    pub average_heads: bool,
    pub activation: Activation,
}

/// Forward result: the layer output plus concrete per-head attention
/// matrices (row-stochastic on each node's neighborhood).
pub struct GatOutput {
    pub out: TensorId,
    pub attention: Vec<Mat>,
}

impl GatLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        store: &mut ParameterStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        head_dim: usize,
        heads: usize,
        injection: WeightInjection,
        average_heads: bool,
        activation: Activation,
    ) -> Result<GatLayer, NnError> {
        if heads == 0 || head_dim == 0 {
            return Err(NnError::Shape(format!(
                "{name}: heads and head_dim must be positive"
            )));
        }
        for k in 0..heads {
            store.register(&format!("{name}.w{k}"), glorot(rng, in_dim, head_dim))?;
            store.register(&format!("{name}.src{k}"), glorot(rng, head_dim, 1))?;
            store.register(&format!("{name}.dst{k}"), glorot(rng, head_dim, 1))?;
        }
        Ok(GatLayer {
            name: name.to_string(),
            in_dim,
            head_dim,
            heads,
            injection,
            average_heads,
            activation,
        })
    }

    pub fn out_dim(&self) -> usize {
        if self.average_heads {
            self.head_dim
        } else {
            self.heads * self.head_dim
        }
    }

    pub fn shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.heads {
            out.push((format!("{}.w{k}", self.name), self.in_dim, self.head_dim));
            out.push((format!("{}.src{k}", self.name), self.head_dim, 1));
            out.push((format!("{}.dst{k}", self.name), self.head_dim, 1));
        }
        out
    }

    /// Logit offsets and softmax mask from the adjacency matrix.
    /// Entries <= 0 are non-edges. Self-loops must already be present
    /// where a node should attend to itself.
    fn mask_and_offset(&self, adjacency: &Mat) -> (Mat, Mat) {
        let (r, c) = adjacency.shape();
        let mut mask = Mat::zeros(r, c);
        let mut offset = Mat::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                let w = adjacency.get(i, j);
                if w > 0.0 {
                    mask.set(i, j, 1.0);
                    if self.injection == WeightInjection::LogOffset {
                        offset.set(i, j, w.ln());
                    }
                }
            }
        }
        (mask, offset)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        h: TensorId,
        adjacency: &Mat,
    ) -> Result<GatOutput, NnError> {
        let n = tape.value(h).rows();
        if adjacency.shape() != (n, n) {
            return Err(NnError::Shape(format!(
                "{}: adjacency {}x{} does not match {n} nodes",
                self.name,
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        if tape.value(h).cols() != self.in_dim {
            return Err(NnError::Shape(format!(
                "{}: expected {} input features, found {}",
                self.name,
                self.in_dim,
                tape.value(h).cols()
            )));
        }
        let (mask, offset) = self.mask_and_offset(adjacency);

        let mut heads = Vec::with_capacity(self.heads);
        let mut attention = Vec::with_capacity(self.heads);
        for k in 0..self.heads {
            let w = tape.param(store, &format!("{}.w{k}", self.name))?;
            let a_src = tape.param(store, &format!("{}.src{k}", self.name))?;
            let a_dst = tape.param(store, &format!("{}.dst{k}", self.name))?;
            let wh = tape.matmul(h, w);
            let s = tape.matmul(wh, a_src);
            let d = tape.matmul(wh, a_dst);
            let mut logits = tape.outer_sum(s, d);
            if self.injection == WeightInjection::LogOffset {
                logits = tape.offset(logits, offset.clone());
            }
            let logits = tape.leaky_relu(logits, ATTENTION_LEAKY_SLOPE);
            let alpha = tape.masked_softmax(logits, mask.clone())?;
            attention.push(tape.value(alpha).clone());
            heads.push(tape.matmul(alpha, wh));
        }

        let out = if self.average_heads {
            let mut acc = heads[0];
            for &head in &heads[1..] {
                acc = tape.add(acc, head);
            }
            let mean = tape.scale(acc, 1.0 / self.heads as f64);
            self.activation.apply(tape, mean)
        } else {
            let mut activated = Vec::with_capacity(self.heads);
            for &head in &heads {
                activated.push(self.activation.apply(tape, head));
            }
            let mut acc = activated[0];
            for &head in &activated[1..] {
                acc = tape.concat_cols(acc, head);
            }
            acc
        };
        Ok(GatOutput { out, attention })
    }
}
