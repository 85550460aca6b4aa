//! Dense row-major tensors and the float precision switch.
//!
//! Training runs in `f32`; gradient checks instantiate the same code in
//! `f64` so finite differences have enough headroom below the check
//! tolerance.

use std::fmt::Debug;

use num_traits::Float;

use super::NeuralError;

/// Floating-point element type for all network math.
pub trait Scalar:
    Float + Debug + Default + Send + Sync + std::iter::Sum + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Row-major dense tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![S::zero(); len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self, NeuralError> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "shape {:?} wants {} elements, got {}",
                shape,
                expect,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[S] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, v: S) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// 2-D matrix product `self · other`.
    pub fn matmul(&self, other: &Tensor<S>) -> Result<Tensor<S>, NeuralError> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.cols() != other.rows() {
            return Err(NeuralError::ShapeMismatch(format!(
                "matmul {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = Tensor::zeros(&[self.rows(), other.cols()]);
        gemm_nn(
            self.rows(),
            self.cols(),
            other.cols(),
            &self.data,
            &other.data,
            &mut out.data,
        );
        Ok(out)
    }

    /// Lossy precision cast, used when loading f32 checkpoints into f64
    /// gradient-check models.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| T::from_f64(Scalar::to_f64(v))).collect(),
        }
    }
}

/// `c += a · b` with `a: [m×k]`, `b: [k×n]`, `c: [m×n]`.
///
/// i-k-j loop order keeps the inner loop on contiguous rows of `b` and `c`.
pub fn gemm_nn<S: Scalar>(m: usize, k: usize, n: usize, a: &[S], b: &[S], c: &mut [S]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            if av == S::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv = *cv + av * bv;
            }
        }
    }
}

/// `c += a · bᵀ` with `a: [m×n]`, `b: [p×n]`, `c: [m×p]`.
///
/// Each output element is a dot product of two contiguous rows.
pub fn gemm_nt<S: Scalar>(m: usize, n: usize, p: usize, a: &[S], b: &[S], c: &mut [S]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), p * n);
    debug_assert_eq!(c.len(), m * p);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        let c_row = &mut c[i * p..(i + 1) * p];
        for (j, cv) in c_row.iter_mut().enumerate() {
            let b_row = &b[j * n..(j + 1) * n];
            let mut acc = S::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc = acc + av * bv;
            }
            *cv = *cv + acc;
        }
    }
}

/// `c += aᵀ · b` with `a: [r×m]`, `b: [r×n]`, `c: [m×n]`.
///
/// Accumulates rank-1 updates row by row; inner loop stays contiguous.
pub fn gemm_tn<S: Scalar>(r: usize, m: usize, n: usize, a: &[S], b: &[S], c: &mut [S]) {
    debug_assert_eq!(a.len(), r * m);
    debug_assert_eq!(b.len(), r * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..r {
        let a_row = &a[i * m..(i + 1) * m];
        let b_row = &b[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            if av == S::zero() {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv = *cv + av * bv;
            }
        }
    }
}
