//! Dense row-major f64 tensors and a define-by-run reverse-mode tape.
//!
//! The tape is rebuilt on every forward pass; `backward` walks it once in
//! reverse and accumulates gradients into leaf tensors. Shape errors are
//! programming errors and panic with both shapes in the message.

mod gradcheck;
mod tape;

pub use gradcheck::grad_check;
pub use tape::{Tape, TensorId};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    /// `data.len()` must equal the product of `shape`.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Self {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            numel,
            "tensor: data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let numel = shape.iter().product();
        Tensor::new(shape, vec![0.0; numel])
    }

    /// Rank-0 tensor holding one value.
    pub fn scalar(v: f64) -> Self {
        Tensor::new(Vec::new(), vec![v])
    }

    /// Rank-2 tensor from `rows * cols` values in row-major order.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    /// Copy of shape/data/requires_grad with no gradient buffer. Tape leaves
    /// start from this so each backward reflects that tape alone.
    pub fn detached(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.clone(),
            requires_grad: self.requires_grad,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Row count of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        assert_eq!(self.rank(), 2, "rows: tensor has shape {:?}", self.shape);
        self.shape[0]
    }

    /// Column count of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        assert_eq!(self.rank(), 2, "cols: tensor has shape {:?}", self.shape);
        self.shape[1]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, v: bool) {
        self.requires_grad = v;
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Clears the gradient buffer to zeros (allocating it if absent).
    pub fn zero_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.iter_mut().for_each(|v| *v = 0.0),
            None => self.grad = Some(vec![0.0; self.data.len()]),
        }
    }

    /// Adds `g` into the gradient buffer. Gradients accumulate across calls
    /// until `zero_grad`.
    pub fn accumulate_grad(&mut self, g: &[f64]) {
        assert_eq!(
            g.len(),
            self.data.len(),
            "accumulate_grad: length {} vs tensor numel {}",
            g.len(),
            self.data.len()
        );
        let buf = self.grad.get_or_insert_with(|| vec![0.0; g.len()]);
        for (b, v) in buf.iter_mut().zip(g) {
            *b += v;
        }
    }
}

/// C = alpha*op(A)op(B) + beta*C for row-major buffers; `ta`/`tb` transpose
/// the logical operands without copying. A is logical m*k, B logical k*n.
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k, "gemm: A buffer {} != {}x{}", a.len(), m, k);
    assert_eq!(b.len(), k * n, "gemm: B buffer {} != {}x{}", b.len(), k, n);
    assert_eq!(c.len(), m * n, "gemm: C buffer {} != {}x{}", c.len(), m, n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c.iter_mut().for_each(|v| *v = 0.0);
        } else {
            c.iter_mut().for_each(|v| *v *= beta);
        }
        return;
    }
    // Row-major strides; a transposed view swaps them.
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_checks_length() {
        let t = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.shape(), &[2, 2]);
        assert_eq!(t.numel(), 4);
    }

    #[test]
    #[should_panic(expected = "does not match shape")]
    fn constructor_rejects_bad_length() {
        let _ = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn scalar_is_rank_zero() {
        let s = Tensor::scalar(3.5);
        assert_eq!(s.rank(), 0);
        assert_eq!(s.numel(), 1);
        assert_eq!(s.data(), &[3.5]);
    }

    #[test]
    fn grad_accumulates_additively() {
        let mut t = Tensor::new(vec![2], vec![0.0, 0.0]).with_grad();
        t.accumulate_grad(&[1.0, 2.0]);
        t.accumulate_grad(&[1.0, 2.0]);
        assert_eq!(t.grad().unwrap(), &[2.0, 4.0]);
        t.zero_grad();
        assert_eq!(t.grad().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn gemm_matches_naive() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let mut c = [0.0; 4];
        gemm(2, 3, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);

        // A^T path: same product expressed with A stored transposed (3x2).
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let mut c2 = [0.0; 4];
        gemm(2, 3, 2, &at, true, &b, false, 0.0, &mut c2);
        assert_eq!(c2, c);

        // B^T path: B stored as 2x3.
        let bt = [7.0, 9.0, 11.0, 8.0, 10.0, 12.0];
        let mut c3 = [0.0; 4];
        gemm(2, 3, 2, &a, false, &bt, true, 0.0, &mut c3);
        assert_eq!(c3, c);
    }

    #[test]
    fn gemm_handles_empty_dims() {
        let mut c = [5.0, 5.0];
        gemm(1, 0, 2, &[], false, &[], false, 0.0, &mut c);
        assert_eq!(c, [0.0, 0.0]);
        let mut empty: [f64; 0] = [];
        gemm(0, 3, 2, &[], false, &[1.0; 6], false, 0.0, &mut empty);
    }
}
