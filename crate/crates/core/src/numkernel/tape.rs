//! A small reverse-mode autodiff tape over dense `f64` matrices.
//!
//! Nodes hold their forward value; `backward` walks the tape in reverse and
//! accumulates gradients. Only the operations the topic model needs are
//! implemented. Vectors are represented as `1 x d` or `n x 1` matrices.

use ndarray::{s, Array1, Array2, Axis};

use super::{sigmoid, softmax_rows, softplus};

/// Sigmoid outputs are clamped to `[SIGMA_CLAMP, 1 - SIGMA_CLAMP]` before
/// logs so discriminator losses stay finite.
pub const SIGMA_CLAMP: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    /// a (m x k) . b (k x n)
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    MulElem(NodeId, NodeId),
    /// a (n x d) + row (1 x d), broadcast over rows
    AddRow(NodeId, NodeId),
    /// a (n x d) * row (1 x d), broadcast over rows
    MulRow(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Softplus(NodeId),
    /// ln(clamp(sigmoid(x))); gradient is zero where the clamp is active
    LogSigmoid(NodeId),
    SoftmaxRows(NodeId),
    /// ln(max(x, floor)); gradient is zero below the floor
    LnClamped(NodeId, f64),
    /// Train-mode batch norm; saves normalized activations and 1/std
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
    },
    /// out[i] = a[rows[i]]
    GatherRows(NodeId, Vec<usize>),
    ConcatCols(NodeId, NodeId),
    SumAll(NodeId),
    MeanAll(NodeId),
    /// sum(w .* a) with constant weights, reduced to a 1x1 scalar
    WeightedSumAll(NodeId, Array2<f64>),
    /// Forward: row-wise one-hot at the argmax. Backward: identity
    /// (straight-through estimator).
    HardmaxRows(NodeId),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Gradients of every node w.r.t. the scalar the backward pass started from.
pub struct Gradients {
    grads: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn wrt(&self, id: NodeId) -> &Array2<f64> {
        &self.grads[id.0]
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.len(), 1);
        self.nodes[id.0].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Leaf holding a single scalar.
    pub fn scalar_leaf(&mut self, v: f64) -> NodeId {
        self.leaf(Array2::from_elem((1, 1), v))
    }

    /// Leaf holding a row vector.
    pub fn row_leaf(&mut self, v: &Array1<f64>) -> NodeId {
        self.leaf(v.clone().insert_axis(Axis(0)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::MulElem(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        debug_assert_eq!(self.value(row).nrows(), 1);
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        debug_assert_eq!(self.value(row).nrows(), 1);
        let v = self.value(a) * self.value(row);
        self.push(v, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).mapv(|x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).mapv(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn log_sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self
            .value(a)
            .mapv(|x| sigmoid(x).clamp(SIGMA_CLAMP, 1.0 - SIGMA_CLAMP).ln());
        self.push(v, Op::LogSigmoid(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn ln_clamped(&mut self, a: NodeId, floor: f64) -> NodeId {
        let v = self.value(a).mapv(|x| x.max(floor).ln());
        self.push(v, Op::LnClamped(a, floor))
    }

    /// Train-mode batch normalization over columns of `x` (n x d), with
    /// per-column scale `gamma` and shift `beta` (both 1 x d). Returns the
    /// output node together with the batch mean and biased batch variance so
    /// the caller can update running statistics.
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> (NodeId, Array1<f64>, Array1<f64>) {
        let xv = self.value(x);
        let n = xv.nrows() as f64;
        let mean = xv.mean_axis(Axis(0)).expect("nonempty batch");
        let var = xv
            .map_axis(Axis(0), |col| col.iter().map(|&v| v * v).sum::<f64>() / n)
            - &mean.mapv(|m| m * m);
        let var = var.mapv(|v| v.max(0.0));
        let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
        let mut xhat = xv.clone();
        for mut row in xhat.rows_mut() {
            row.zip_mut_with(&mean, |v, m| *v -= m);
            row.zip_mut_with(&inv_std, |v, s| *v *= s);
        }
        let g = self.value(gamma);
        let b = self.value(beta);
        let out = &xhat * g + b;
        let id = self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std: inv_std.clone(),
            },
        );
        (id, mean, var)
    }

    pub fn gather_rows(&mut self, a: NodeId, rows: Vec<usize>) -> NodeId {
        let av = self.value(a);
        let mut v = Array2::zeros((rows.len(), av.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            v.row_mut(i).assign(&av.row(r));
        }
        self.push(v, Op::GatherRows(a, rows))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        debug_assert_eq!(av.nrows(), bv.nrows());
        let mut v = Array2::zeros((av.nrows(), av.ncols() + bv.ncols()));
        v.slice_mut(s![.., ..av.ncols()]).assign(av);
        v.slice_mut(s![.., av.ncols()..]).assign(bv);
        self.push(v, Op::ConcatCols(a, b))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len() as f64;
        let v = Array2::from_elem((1, 1), self.value(a).sum() / n);
        self.push(v, Op::MeanAll(a))
    }

    pub fn weighted_sum_all(&mut self, a: NodeId, weights: Array2<f64>) -> NodeId {
        debug_assert_eq!(self.value(a).dim(), weights.dim());
        let v = Array2::from_elem((1, 1), (self.value(a) * &weights).sum());
        self.push(v, Op::WeightedSumAll(a, weights))
    }

    /// Straight-through one-hot: forward snaps each row to the argmax
    /// (ties to the lowest index), backward passes gradients unchanged.
    pub fn hardmax_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let mut v = Array2::zeros(av.dim());
        for (i, row) in av.rows().into_iter().enumerate() {
            let mut best = 0usize;
            for (j, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = j;
                }
            }
            v[[i, best]] = 1.0;
        }
        self.push(v, Op::HardmaxRows(a))
    }

    /// Reverse pass from a 1x1 scalar node. Returns gradients for every node;
    /// leaves that never influenced `root` keep zero gradients.
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert_eq!(self.nodes[root.0].value.len(), 1, "backward needs a scalar root");
        let mut grads: Vec<Array2<f64>> = self
            .nodes
            .iter()
            .map(|n| Array2::zeros(n.value.dim()))
            .collect();
        grads[root.0][[0, 0]] = 1.0;

        for i in (0..=root.0).rev() {
            // Move the incoming gradient out to appease the borrow checker;
            // a node never feeds itself.
            let g = std::mem::replace(&mut grads[i], Array2::zeros((0, 0)));
            if g.iter().all(|&x| x == 0.0) {
                grads[i] = g;
                continue;
            }
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    grads[a.0] += &da;
                    grads[b.0] += &db;
                }
                Op::Transpose(a) => {
                    grads[a.0] += &g.t();
                }
                Op::Add(a, b) => {
                    grads[a.0] += &g;
                    grads[b.0] += &g;
                }
                Op::Sub(a, b) => {
                    grads[a.0] += &g;
                    grads[b.0] -= &g;
                }
                Op::MulElem(a, b) => {
                    let da = &g * self.value(*b);
                    let db = &g * self.value(*a);
                    grads[a.0] += &da;
                    grads[b.0] += &db;
                }
                Op::AddRow(a, row) => {
                    grads[a.0] += &g;
                    let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    grads[row.0] += &dr;
                }
                Op::MulRow(a, row) => {
                    let da = &g * self.value(*row);
                    let dr = (&g * self.value(*a))
                        .sum_axis(Axis(0))
                        .insert_axis(Axis(0));
                    grads[a.0] += &da;
                    grads[row.0] += &dr;
                }
                Op::Scale(a, c) => {
                    grads[a.0].scaled_add(*c, &g);
                }
                Op::AddScalar(a) => {
                    grads[a.0] += &g;
                }
                Op::Softplus(a) => {
                    let da = self.value(*a).mapv(sigmoid) * &g;
                    grads[a.0] += &da;
                }
                Op::LogSigmoid(a) => {
                    let da = self.value(*a).mapv(|x| {
                        let s = sigmoid(x);
                        if s <= SIGMA_CLAMP || s >= 1.0 - SIGMA_CLAMP {
                            0.0
                        } else {
                            1.0 - s
                        }
                    }) * &g;
                    grads[a.0] += &da;
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = Array2::zeros(y.dim());
                    for (r, (yrow, grow)) in
                        y.rows().into_iter().zip(g.rows().into_iter()).enumerate()
                    {
                        let dot = yrow.dot(&grow);
                        for (c, (&yv, &gv)) in yrow.iter().zip(grow.iter()).enumerate() {
                            da[[r, c]] = yv * (gv - dot);
                        }
                    }
                    grads[a.0] += &da;
                }
                Op::LnClamped(a, floor) => {
                    let da = self
                        .value(*a)
                        .mapv(|x| if x > *floor { 1.0 / x } else { 0.0 })
                        * &g;
                    grads[a.0] += &da;
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let n = xhat.nrows() as f64;
                    let gam = self.value(*gamma);
                    let dbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dgamma = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &g * gam;
                    let sum_dxhat = dxhat.sum_axis(Axis(0));
                    let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                    let mut dx = Array2::zeros(xhat.dim());
                    for r in 0..xhat.nrows() {
                        for c in 0..xhat.ncols() {
                            dx[[r, c]] = inv_std[c] / n
                                * (n * dxhat[[r, c]]
                                    - sum_dxhat[c]
                                    - xhat[[r, c]] * sum_dxhat_xhat[c]);
                        }
                    }
                    grads[x.0] += &dx;
                    grads[gamma.0] += &dgamma;
                    grads[beta.0] += &dbeta;
                }
                Op::GatherRows(a, rows) => {
                    let da = &mut grads[a.0];
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = da.row_mut(src);
                        dst += &g.row(r);
                    }
                }
                Op::ConcatCols(a, b) => {
                    let ac = grads[a.0].ncols();
                    grads[a.0] += &g.slice(s![.., ..ac]);
                    grads[b.0] += &g.slice(s![.., ac..]);
                }
                Op::SumAll(a) => {
                    let gs = g[[0, 0]];
                    grads[a.0] += gs;
                }
                Op::MeanAll(a) => {
                    let gs = g[[0, 0]] / grads[a.0].len() as f64;
                    grads[a.0] += gs;
                }
                Op::WeightedSumAll(a, w) => {
                    let gs = g[[0, 0]];
                    grads[a.0].scaled_add(gs, w);
                }
                Op::HardmaxRows(a) => {
                    grads[a.0] += &g;
                }
            }
            grads[i] = g;
        }
        Gradients { grads }
    }
}
