use super::{gemm, Tensor};

/// Handle to a node on a [`Tape`]. Only valid for the tape that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

/// Define-by-run recording of one forward computation.
///
/// Nodes are appended in execution order, so every node's inputs have smaller
/// indices and a single reverse sweep visits children before parents.
/// `backward` accumulates gradients of leaf nodes into their tensors' `grad`
/// buffers; calling it twice without clearing doubles them.
pub struct Tape {
    nodes: Vec<Node>,
}

struct Node {
    value: Tensor,
    op: Op,
}

enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    /// `trans_b` multiplies by the stored matrix transposed (used by Linear,
    /// which keeps weights as out x in).
    MatMul {
        a: TensorId,
        b: TensorId,
        trans_b: bool,
    },
    Concat {
        axis: usize,
        parts: Vec<TensorId>,
    },
    SumAxis {
        a: TensorId,
        axis: usize,
        scale: f64,
    },
    SumAll(TensorId),
    Relu(TensorId),
    Silu(TensorId),
    Square(TensorId),
    Sqrt(TensorId),
    Recip(TensorId),
    Scale {
        a: TensorId,
        c: f64,
    },
    AddScalar(TensorId),
    Broadcast(TensorId),
    Reshape(TensorId),
    Gather {
        a: TensorId,
        index: Vec<usize>,
    },
    ScatterSum {
        a: TensorId,
        index: Vec<usize>,
    },
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
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

    /// Records an input tensor as-is; gradients flow into it iff
    /// `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> TensorId {
        self.push(t, Op::Leaf)
    }

    /// Records an input tensor with gradient tracking switched off.
    pub fn constant(&mut self, mut t: Tensor) -> TensorId {
        t.set_requires_grad(false);
        self.push(t, Op::Leaf)
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        self.nodes[id.0].value.data()
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// Gradient accumulated in a leaf after `backward`; `None` before that or
    /// for non-leaf nodes.
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].value.grad()
    }

    fn push(&mut self, value: Tensor, op: Op) -> TensorId {
        self.nodes.push(Node { value, op });
        TensorId(self.nodes.len() - 1)
    }

    fn any_grad(&self, ids: &[TensorId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].value.requires_grad())
    }

    fn binary_elementwise(
        &mut self,
        name: &str,
        a: TensorId,
        b: TensorId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> TensorId {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "{name}: shape mismatch {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let mut out = Tensor::new(ta.shape().to_vec(), data);
        out.set_requires_grad(self.any_grad(&[a, b]));
        self.push(out, op)
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary_elementwise(&mut self, a: TensorId, f: impl Fn(f64) -> f64, op: Op) -> TensorId {
        let ta = &self.nodes[a.0].value;
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let mut out = Tensor::new(ta.shape().to_vec(), data);
        out.set_requires_grad(self.any_grad(&[a]));
        self.push(out, op)
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        self.unary_elementwise(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn silu(&mut self, a: TensorId) -> TensorId {
        self.unary_elementwise(a, |x| x * sigmoid(x), Op::Silu(a))
    }

    pub fn square(&mut self, a: TensorId) -> TensorId {
        self.unary_elementwise(a, |x| x * x, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: TensorId) -> TensorId {
        self.unary_elementwise(a, f64::sqrt, Op::Sqrt(a))
    }

    pub fn recip(&mut self, a: TensorId) -> TensorId {
        self.unary_elementwise(a, |x| 1.0 / x, Op::Recip(a))
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        self.unary_elementwise(a, |x| c * x, Op::Scale { a, c })
    }

    pub fn add_scalar(&mut self, a: TensorId, c: f64) -> TensorId {
        self.unary_elementwise(a, |x| x + c, Op::AddScalar(a))
    }

    /// `a @ b` for rank-2 operands.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.matmul_impl(a, b, false)
    }

    /// `a @ b^T` where `b` is stored untransposed.
    pub fn matmul_bt(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: TensorId, b: TensorId, trans_b: bool) -> TensorId {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.rank(), 2, "matmul: lhs shape {:?}", ta.shape());
        assert_eq!(tb.rank(), 2, "matmul: rhs shape {:?}", tb.shape());
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        let (kb, n) = if trans_b {
            (tb.shape()[1], tb.shape()[0])
        } else {
            (tb.shape()[0], tb.shape()[1])
        };
        assert_eq!(
            k,
            kb,
            "matmul: shape mismatch {:?} vs {:?} (trans_b={trans_b})",
            ta.shape(),
            tb.shape()
        );
        let mut data = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), trans_b, 0.0, &mut data);
        let mut out = Tensor::matrix(m, n, data);
        out.set_requires_grad(self.any_grad(&[a, b]));
        self.push(out, Op::MatMul { a, b, trans_b })
    }

    /// Concatenates rank-2 tensors along `axis` (0 or 1).
    pub fn concat(&mut self, axis: usize, parts: &[TensorId]) -> TensorId {
        assert!(!parts.is_empty(), "concat: no inputs");
        assert!(axis < 2, "concat: axis {axis} out of range for rank 2");
        let first = self.nodes[parts[0].0].value.shape().to_vec();
        assert_eq!(first.len(), 2, "concat: input shape {first:?}");
        let fixed = 1 - axis;
        let mut along = 0;
        for p in parts {
            let s = self.nodes[p.0].value.shape();
            assert_eq!(s.len(), 2, "concat: input shape {s:?}");
            assert_eq!(
                s[fixed], first[fixed],
                "concat: shape mismatch {s:?} vs {first:?} along axis {axis}"
            );
            along += s[axis];
        }
        let mut shape = first.clone();
        shape[axis] = along;
        let (rows, cols) = (shape[0], shape[1]);
        let mut data = vec![0.0; rows * cols];
        if axis == 0 {
            let mut row = 0;
            for p in parts {
                let t = &self.nodes[p.0].value;
                let n = t.numel();
                data[row * cols..row * cols + n].copy_from_slice(t.data());
                row += t.shape()[0];
            }
        } else {
            let mut col = 0;
            for p in parts {
                let t = &self.nodes[p.0].value;
                let w = t.shape()[1];
                for r in 0..rows {
                    data[r * cols + col..r * cols + col + w]
                        .copy_from_slice(&t.data()[r * w..(r + 1) * w]);
                }
                col += w;
            }
        }
        let mut out = Tensor::new(shape, data);
        out.set_requires_grad(self.any_grad(parts));
        self.push(
            out,
            Op::Concat {
                axis,
                parts: parts.to_vec(),
            },
        )
    }

    /// Sums a rank-2 tensor over `axis`, producing rank 1.
    pub fn sum_axis(&mut self, a: TensorId, axis: usize) -> TensorId {
        self.reduce_axis(a, axis, 1.0)
    }

    /// Arithmetic mean of a rank-2 tensor over `axis`, producing rank 1.
    pub fn mean_axis(&mut self, a: TensorId, axis: usize) -> TensorId {
        let n = {
            let t = &self.nodes[a.0].value;
            assert_eq!(t.rank(), 2, "mean: tensor shape {:?}", t.shape());
            t.shape()[axis]
        };
        assert!(n > 0, "mean: axis {axis} is empty");
        self.reduce_axis(a, axis, 1.0 / n as f64)
    }

    fn reduce_axis(&mut self, a: TensorId, axis: usize, scale: f64) -> TensorId {
        let t = &self.nodes[a.0].value;
        assert_eq!(t.rank(), 2, "sum: tensor shape {:?}", t.shape());
        assert!(axis < 2, "sum: axis {axis} out of range for rank 2");
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        let out_len = if axis == 0 { cols } else { rows };
        let mut data = vec![0.0; out_len];
        for r in 0..rows {
            for c in 0..cols {
                let slot = if axis == 0 { c } else { r };
                data[slot] += t.data()[r * cols + c];
            }
        }
        if scale != 1.0 {
            data.iter_mut().for_each(|v| *v *= scale);
        }
        let mut out = Tensor::new(vec![out_len], data);
        out.set_requires_grad(self.any_grad(&[a]));
        self.push(out, Op::SumAxis { a, axis, scale })
    }

    /// Sums every element into a rank-0 scalar.
    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let t = &self.nodes[a.0].value;
        let total = t.data().iter().sum();
        let mut out = Tensor::scalar(total);
        out.set_requires_grad(self.any_grad(&[a]));
        self.push(out, Op::SumAll(a))
    }

    /// Expands `a` to `target` with numpy-style right-aligned rules: each
    /// axis must match or be 1 (missing leading axes count as 1).
    pub fn broadcast(&mut self, a: TensorId, target: &[usize]) -> TensorId {
        let t = &self.nodes[a.0].value;
        let src = t.shape().to_vec();
        let (dims, strides) = broadcast_layout(&src, target);
        let numel: usize = target.iter().product();
        let mut data = vec![0.0; numel];
        let src_data = t.data();
        for_each_broadcast(&dims, &strides, |f, soff| data[f] = src_data[soff]);
        let mut out = Tensor::new(target.to_vec(), data);
        out.set_requires_grad(self.any_grad(&[a]));
        self.push(out, Op::Broadcast(a))
    }

    /// Reinterprets the data with a new shape of equal element count.
    pub fn reshape(&mut self, a: TensorId, shape: &[usize]) -> TensorId {
        let t = &self.nodes[a.0].value;
        let numel: usize = shape.iter().product();
        assert_eq!(
            t.numel(),
            numel,
            "reshape: {:?} to {:?} changes element count",
            t.shape(),
            shape
        );
        let mut out = Tensor::new(shape.to_vec(), t.data().to_vec());
        out.set_requires_grad(self.any_grad(&[a]));
        self.push(out, Op::Reshape(a))
    }

    /// Selects rows of a rank-2 tensor: `out[k] = a[index[k]]`.
    pub fn gather(&mut self, a: TensorId, index: &[usize]) -> TensorId {
        let t = &self.nodes[a.0].value;
        assert_eq!(t.rank(), 2, "gather: tensor shape {:?}", t.shape());
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        let mut data = vec![0.0; index.len() * cols];
        for (k, &i) in index.iter().enumerate() {
            assert!(i < rows, "gather: index {i} out of range for {rows} rows");
            data[k * cols..(k + 1) * cols].copy_from_slice(&t.data()[i * cols..(i + 1) * cols]);
        }
        let mut out = Tensor::matrix(index.len(), cols, data);
        out.set_requires_grad(self.any_grad(&[a]));
        self.push(
            out,
            Op::Gather {
                a,
                index: index.to_vec(),
            },
        )
    }

    /// Row-wise scatter-add: `out[index[k]] += a[k]`, accumulated in
    /// ascending `k` so the reduction order is fixed.
    pub fn scatter_sum(&mut self, a: TensorId, index: &[usize], out_rows: usize) -> TensorId {
        let t = &self.nodes[a.0].value;
        assert_eq!(t.rank(), 2, "scatter_sum: tensor shape {:?}", t.shape());
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        assert_eq!(
            index.len(),
            rows,
            "scatter_sum: index length {} vs {} rows",
            index.len(),
            rows
        );
        let mut data = vec![0.0; out_rows * cols];
        for (k, &i) in index.iter().enumerate() {
            assert!(
                i < out_rows,
                "scatter_sum: index {i} out of range for {out_rows} rows"
            );
            for c in 0..cols {
                data[i * cols + c] += t.data()[k * cols + c];
            }
        }
        let mut out = Tensor::matrix(out_rows, cols, data);
        out.set_requires_grad(self.any_grad(&[a]));
        self.push(
            out,
            Op::ScatterSum {
                a,
                index: index.to_vec(),
            },
        )
    }

    /// Reverse sweep from a scalar `loss`. Intermediate gradients live in
    /// scratch buffers; only leaf tensors keep grads, added onto whatever
    /// they already hold.
    pub fn backward(&mut self, loss: TensorId) {
        assert_eq!(
            self.nodes[loss.0].value.numel(),
            1,
            "backward: loss has shape {:?}, expected a scalar",
            self.nodes[loss.0].value.shape()
        );
        let mut scratch: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        scratch[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = scratch[i].take() else { continue };
            if !self.nodes[i].value.requires_grad() {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].value.accumulate_grad(&g);
                continue;
            }
            self.propagate(i, &g, &mut scratch);
        }
    }

    fn wants(&self, id: TensorId) -> bool {
        self.nodes[id.0].value.requires_grad()
    }

    fn propagate(&self, i: usize, g: &[f64], scratch: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        // Adds a contribution into a parent's scratch slot, skipping parents
        // outside the differentiated subgraph.
        macro_rules! bump {
            ($id:expr, |$buf:ident| $body:expr) => {
                if self.wants($id) {
                    let len = self.nodes[$id.0].value.numel();
                    let $buf = scratch[$id.0].get_or_insert_with(|| vec![0.0; len]);
                    $body
                }
            };
        }
        match &node.op {
            Op::Leaf => unreachable!("leaf handled by backward"),
            Op::Add(a, b) => {
                bump!(*a, |buf| buf.iter_mut().zip(g).for_each(|(s, v)| *s += v));
                bump!(*b, |buf| buf.iter_mut().zip(g).for_each(|(s, v)| *s += v));
            }
            Op::Sub(a, b) => {
                bump!(*a, |buf| buf.iter_mut().zip(g).for_each(|(s, v)| *s += v));
                bump!(*b, |buf| buf.iter_mut().zip(g).for_each(|(s, v)| *s -= v));
            }
            Op::Mul(a, b) => {
                let (da, db) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
                bump!(*a, |buf| {
                    for k in 0..g.len() {
                        buf[k] += g[k] * db[k];
                    }
                });
                bump!(*b, |buf| {
                    for k in 0..g.len() {
                        buf[k] += g[k] * da[k];
                    }
                });
            }
            Op::MatMul { a, b, trans_b } => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = if *trans_b { tb.shape()[0] } else { tb.shape()[1] };
                bump!(*a, |buf| {
                    // dA = dC @ B^T, or dC @ B when b was used transposed.
                    gemm(m, n, k, g, false, tb.data(), !*trans_b, 1.0, buf);
                });
                bump!(*b, |buf| {
                    if *trans_b {
                        // dB = dC^T @ A  (B stored n x k)
                        gemm(n, m, k, g, true, ta.data(), false, 1.0, buf);
                    } else {
                        // dB = A^T @ dC  (B stored k x n)
                        gemm(k, m, n, ta.data(), true, g, false, 1.0, buf);
                    }
                });
            }
            Op::Concat { axis, parts } => {
                let cols = node.value.shape()[1];
                if *axis == 0 {
                    let mut row = 0;
                    for p in parts {
                        let t = &self.nodes[p.0].value;
                        let (pr, n) = (t.shape()[0], t.numel());
                        bump!(*p, |buf| {
                            for (s, v) in buf.iter_mut().zip(&g[row * cols..row * cols + n]) {
                                *s += v;
                            }
                        });
                        row += pr;
                    }
                } else {
                    let rows = node.value.shape()[0];
                    let mut col = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.shape()[1];
                        bump!(*p, |buf| {
                            for r in 0..rows {
                                for c in 0..w {
                                    buf[r * w + c] += g[r * cols + col + c];
                                }
                            }
                        });
                        col += w;
                    }
                }
            }
            Op::SumAxis { a, axis, scale } => {
                let t = &self.nodes[a.0].value;
                let (rows, cols) = (t.shape()[0], t.shape()[1]);
                bump!(*a, |buf| {
                    for r in 0..rows {
                        for c in 0..cols {
                            let slot = if *axis == 0 { c } else { r };
                            buf[r * cols + c] += g[slot] * scale;
                        }
                    }
                });
            }
            Op::SumAll(a) => {
                bump!(*a, |buf| buf.iter_mut().for_each(|s| *s += g[0]));
            }
            Op::Relu(a) => {
                let da = self.nodes[a.0].value.data();
                bump!(*a, |buf| {
                    for k in 0..g.len() {
                        if da[k] > 0.0 {
                            buf[k] += g[k];
                        }
                    }
                });
            }
            Op::Silu(a) => {
                let da = self.nodes[a.0].value.data();
                bump!(*a, |buf| {
                    for k in 0..g.len() {
                        let s = sigmoid(da[k]);
                        buf[k] += g[k] * (s + da[k] * s * (1.0 - s));
                    }
                });
            }
            Op::Square(a) => {
                let da = self.nodes[a.0].value.data();
                bump!(*a, |buf| {
                    for k in 0..g.len() {
                        buf[k] += g[k] * 2.0 * da[k];
                    }
                });
            }
            Op::Sqrt(a) => {
                let y = node.value.data();
                bump!(*a, |buf| {
                    for k in 0..g.len() {
                        buf[k] += g[k] * 0.5 / y[k];
                    }
                });
            }
            Op::Recip(a) => {
                let y = node.value.data();
                bump!(*a, |buf| {
                    for k in 0..g.len() {
                        buf[k] -= g[k] * y[k] * y[k];
                    }
                });
            }
            Op::Scale { a, c } => {
                bump!(*a, |buf| {
                    for k in 0..g.len() {
                        buf[k] += g[k] * c;
                    }
                });
            }
            Op::AddScalar(a) => {
                bump!(*a, |buf| buf.iter_mut().zip(g).for_each(|(s, v)| *s += v));
            }
            Op::Broadcast(a) => {
                let src = self.nodes[a.0].value.shape().to_vec();
                let (dims, strides) = broadcast_layout(&src, node.value.shape());
                bump!(*a, |buf| {
                    for_each_broadcast(&dims, &strides, |f, soff| buf[soff] += g[f]);
                });
            }
            Op::Reshape(a) => {
                bump!(*a, |buf| buf.iter_mut().zip(g).for_each(|(s, v)| *s += v));
            }
            Op::Gather { a, index } => {
                let cols = if index.is_empty() {
                    0
                } else {
                    node.value.shape()[1]
                };
                bump!(*a, |buf| {
                    for (k, &i) in index.iter().enumerate() {
                        for c in 0..cols {
                            buf[i * cols + c] += g[k * cols + c];
                        }
                    }
                });
            }
            Op::ScatterSum { a, index } => {
                let cols = self.nodes[a.0].value.shape()[1];
                bump!(*a, |buf| {
                    for (k, &i) in index.iter().enumerate() {
                        for c in 0..cols {
                            buf[k * cols + c] += g[i * cols + c];
                        }
                    }
                });
            }
        }
    }
}

/// Per-axis (target dim, source stride) pairs for right-aligned broadcasting;
/// broadcast axes get stride 0. Panics when the shapes are incompatible.
fn broadcast_layout(src: &[usize], target: &[usize]) -> (Vec<usize>, Vec<usize>) {
    assert!(
        src.len() <= target.len(),
        "broadcast: cannot broadcast {src:?} to {target:?}"
    );
    let pad = target.len() - src.len();
    let mut strides = vec![0usize; target.len()];
    let mut stride = 1;
    for ax in (0..src.len()).rev() {
        let (s, t) = (src[ax], target[pad + ax]);
        assert!(
            s == t || s == 1,
            "broadcast: cannot broadcast {src:?} to {target:?}"
        );
        strides[pad + ax] = if s == 1 { 0 } else { stride };
        stride *= s;
    }
    (target.to_vec(), strides)
}

/// Walks all flat indices of the target shape, handing `(target_flat,
/// source_flat)` to `f` in row-major order.
fn for_each_broadcast(dims: &[usize], strides: &[usize], mut f: impl FnMut(usize, usize)) {
    let numel: usize = dims.iter().product();
    if numel == 0 {
        return;
    }
    let rank = dims.len();
    let mut midx = vec![0usize; rank];
    let mut soff = 0usize;
    for flat in 0..numel {
        f(flat, soff);
        for ax in (0..rank).rev() {
            midx[ax] += 1;
            soff += strides[ax];
            if midx[ax] < dims[ax] {
                break;
            }
            midx[ax] = 0;
            soff -= strides[ax] * dims[ax];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_grad(t: &Tape, id: TensorId) -> Vec<f64> {
        t.grad(id).unwrap().to_vec()
    }

    #[test]
    fn matmul_identity_is_identity() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let i = t.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let y = t.matmul(a, i);
        assert_eq!(t.data(y), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_bt_matches_explicit_transpose() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let w = t.constant(Tensor::matrix(2, 3, vec![1.0, 0.5, -1.0, 2.0, 0.0, 1.0]));
        let y = t.matmul_bt(a, w);
        // a @ w^T computed by hand.
        assert_eq!(t.data(y), &[-1.0, 5.0, 0.5, 14.0]);
    }

    #[test]
    fn silu_fixed_points() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(vec![3], vec![0.0, 20.0, -20.0]));
        let y = t.silu(x);
        let d = t.data(y);
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 20.0).abs() < 1e-7);
        assert!(d[2].abs() < 1e-7);
    }

    #[test]
    fn sum_axis_examples() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let s0 = t.sum_axis(a, 0);
        let s1 = t.sum_axis(a, 1);
        assert_eq!(t.data(s0), &[4.0, 6.0]);
        assert_eq!(t.data(s1), &[3.0, 7.0]);
        assert_eq!(t.shape(s0), &[2]);
        let m0 = t.mean_axis(a, 0);
        assert_eq!(t.data(m0), &[2.0, 3.0]);
    }

    #[test]
    fn gather_duplicates_rows() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let y = t.gather(a, &[0, 0, 2]);
        assert_eq!(t.data(y), &[1.0, 2.0, 1.0, 2.0, 5.0, 6.0]);
        let empty = t.gather(a, &[]);
        assert_eq!(t.shape(empty), &[0, 2]);
        assert!(t.data(empty).is_empty());
    }

    #[test]
    fn scatter_sum_example() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(4, 1, vec![1.0, 2.0, 3.0, 4.0]));
        let y = t.scatter_sum(a, &[0, 0, 1, 1], 2);
        assert_eq!(t.data(y), &[3.0, 7.0]);
        // Rows nothing scatters into stay zero.
        let z = t.scatter_sum(a, &[3, 3, 3, 3], 4);
        assert_eq!(t.data(z), &[0.0, 0.0, 0.0, 10.0]);
    }

    #[test]
    fn backward_square_sum() {
        let mut t = Tape::new();
        let w = t.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).with_grad());
        let r = t.reshape(w, &[1, 2]);
        let sq = t.square(r);
        let y = t.sum_all(sq);
        t.backward(y);
        assert_eq!(leaf_grad(&t, w), vec![2.0, 4.0]);
    }

    #[test]
    fn backward_product_grads() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::new(vec![1], vec![3.0]).with_grad());
        let b = t.leaf(Tensor::new(vec![1], vec![4.0]).with_grad());
        let p = t.mul(a, b);
        let y = t.sum_all(p);
        t.backward(y);
        assert_eq!(leaf_grad(&t, a), vec![4.0]);
        assert_eq!(leaf_grad(&t, b), vec![3.0]);
    }

    #[test]
    fn backward_fanout_accumulates() {
        let mut t = Tape::new();
        let w = t.leaf(Tensor::new(vec![1], vec![1.0]).with_grad());
        let u = t.add(w, w);
        let y = t.sum_all(u);
        t.backward(y);
        assert_eq!(leaf_grad(&t, w), vec![2.0]);
    }

    #[test]
    fn backward_twice_doubles_leaf_grads() {
        let mut t = Tape::new();
        let w = t.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).with_grad());
        let sq = {
            let r = t.reshape(w, &[1, 2]);
            t.square(r)
        };
        let y = t.sum_all(sq);
        t.backward(y);
        let first = leaf_grad(&t, w);
        t.backward(y);
        let second = leaf_grad(&t, w);
        assert_eq!(second, vec![2.0 * first[0], 2.0 * first[1]]);
    }

    #[test]
    fn no_grad_leaves_stay_clean() {
        let mut t = Tape::new();
        let w = t.constant(Tensor::new(vec![2], vec![1.0, 2.0]));
        let r = t.reshape(w, &[1, 2]);
        let y = t.sum_all(r);
        t.backward(y);
        assert!(t.grad(w).is_none());
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn add_rejects_mismatched_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::new(vec![2], vec![1.0, 2.0]));
        let b = t.constant(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]));
        t.add(a, b);
    }

    #[test]
    #[should_panic(expected = "expected a scalar")]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).with_grad());
        t.backward(a);
    }

    #[test]
    fn broadcast_row_and_scalar() {
        let mut t = Tape::new();
        let row = t.constant(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]));
        let y = t.broadcast(row, &[2, 3]);
        assert_eq!(t.data(y), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let col = t.constant(Tensor::matrix(2, 1, vec![5.0, 7.0]));
        let z = t.broadcast(col, &[2, 3]);
        assert_eq!(t.data(z), &[5.0, 5.0, 5.0, 7.0, 7.0, 7.0]);
        let s = t.constant(Tensor::scalar(4.0));
        let w = t.broadcast(s, &[2, 2]);
        assert_eq!(t.data(w), &[4.0; 4]);
    }

    #[test]
    fn broadcast_backward_sums_over_expanded_axes() {
        let mut t = Tape::new();
        let col = t.leaf(Tensor::matrix(2, 1, vec![1.0, 2.0]).with_grad());
        let b = t.broadcast(col, &[2, 3]);
        let y = t.sum_all(b);
        t.backward(y);
        assert_eq!(leaf_grad(&t, col), vec![3.0, 3.0]);
    }

    #[test]
    fn concat_axis1_roundtrip_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(2, 1, vec![1.0, 2.0]));
        let b = t.constant(Tensor::matrix(2, 2, vec![3.0, 4.0, 5.0, 6.0]));
        let y = t.concat(1, &[a, b]);
        assert_eq!(t.shape(y), &[2, 3]);
        assert_eq!(t.data(y), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let z = t.concat(0, &[a, a]);
        assert_eq!(t.shape(z), &[4, 1]);
    }

    #[test]
    fn scatter_then_gather_restores_unique_rows() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        // Row k lands at s[index[k]], so gathering with the same index
        // restores the original order.
        let s = t.scatter_sum(a, &[2, 0, 1], 3);
        let g = t.gather(s, &[2, 0, 1]);
        assert_eq!(t.data(g), t.data(a));
    }

    #[test]
    fn empty_rows_flow_through_ops() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(0, 3, vec![]));
        let w = t.constant(Tensor::matrix(3, 2, vec![1.0; 6]));
        let y = t.matmul(a, w);
        assert_eq!(t.shape(y), &[0, 2]);
        let s = t.scatter_sum(a, &[], 4);
        assert_eq!(t.shape(s), &[4, 3]);
        assert_eq!(t.data(s), &[0.0; 12]);
    }
}
