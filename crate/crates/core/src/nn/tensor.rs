use serde::{Deserialize, Serialize};

use super::NnError;

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) || expected != data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self, NnError> {
        Self::new(shape.to_vec(), self.data)
    }

    /// Shape as `(batch, len, channels)`; errors unless the tensor is 3-D.
    pub fn dims3(&self) -> Result<(usize, usize, usize), NnError> {
        match self.shape[..] {
            [n, l, c] => Ok((n, l, c)),
            _ => Err(NnError::ShapeMismatch(format!("expected 3-D tensor, got {:?}", self.shape))),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` where `op(a)` is `m x k` and
/// `op(b)` is `k x n`, all row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert_eq!(a.len(), m * k, "gemm: lhs size");
    assert_eq!(b.len(), k * n, "gemm: rhs size");
    assert_eq!(c.len(), m * n, "gemm: output size");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above guarantee every strided access stays within
    // the slices, and `c` does not alias `a` or `b` (distinct borrows).
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
