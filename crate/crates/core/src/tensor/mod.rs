//! Dense row-major arrays and a reverse-mode differentiation tape.
//!
//! [`Tensor`] is a plain value (shape + flat data). Differentiable programs
//! are recorded on a [`Tape`] whose nodes are addressed by [`Var`] handles;
//! gradients live on the tape, one per node, with the same shape as the
//! node's value.

pub mod gradcheck;
pub(crate) mod kernels;
mod tape;

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

pub use tape::{Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) || shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape {
                op: "tensor",
                left: shape,
                right: vec![data.len()],
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
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

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Rows and columns of a rank-2 tensor; a rank-1 tensor is one row.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [m, n] => (*m, *n),
            _ => {
                let n = *self.shape.last().unwrap_or(&1);
                (self.data.len() / n, n)
            }
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let (_, n) = self.dims2();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        let (_, n) = self.dims2();
        self.data[i * n + j]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape {
                op: "reshape",
                left: self.shape,
                right: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.matrix_dims("matmul", other)?;
        let (k2, n) = other.matrix_dims("matmul", self)?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        kernels::gemm_nn(&mut out, &self.data, &other.data, m, k, n);
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = self.matrix_dims("transpose", self)?;
        let mut out = vec![0.0; m * n];
        kernels::transpose(&mut out, &self.data, m, n);
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    fn matrix_dims(&self, op: &'static str, other: &Tensor) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [m, n] => Ok((*m, *n)),
            _ => Err(Error::Shape {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            }),
        }
    }

    /// Splits the shape around `axis` into (outer, extent, inner) strides.
    pub(crate) fn axis_split(&self, axis: usize) -> Result<(usize, usize, usize)> {
        if axis >= self.shape.len() {
            return Err(Error::InvalidAxis {
                axis,
                rank: self.shape.len(),
            });
        }
        let outer = self.shape[..axis].iter().product();
        let inner = self.shape[axis + 1..].iter().product();
        Ok((outer, self.shape[axis], inner))
    }
}

/// Softmax along `axis`, stabilized by subtracting each slice's maximum.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let (outer, n, inner) = x.axis_split(axis)?;
    let mut out = x.data.clone();
    kernels::softmax_strided(&mut out, outer, n, inner);
    Ok(Tensor {
        shape: x.shape.clone(),
        data: out,
    })
}

/// Layer normalization over the last axis.
pub fn layer_norm(x: &Tensor, gamma: &[f64], beta: &[f64], eps: f64) -> Result<Tensor> {
    let n = *x.shape.last().unwrap_or(&0);
    if gamma.len() != n || beta.len() != n {
        return Err(Error::Shape {
            op: "layer_norm",
            left: x.shape.clone(),
            right: vec![gamma.len(), beta.len()],
        });
    }
    let mut out = vec![0.0; x.len()];
    for (row, dst) in x.data.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
        let (mean, rstd) = kernels::moments(row, eps);
        for j in 0..n {
            dst[j] = (row[j] - mean) * rstd * gamma[j] + beta[j];
        }
    }
    Ok(Tensor {
        shape: x.shape.clone(),
        data: out,
    })
}

/// Tanh-approximated GELU.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + math::tanh(kernels::GELU_C * (x + 0.044715 * x * x * x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = a.dims2();
        let (_, n) = b.dims2();
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a.at(i, p) * b.at(p, j);
                }
                out.data[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(Tensor::identity(2).matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_two_by_two() {
        let a = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]).unwrap();
        let expected = naive_matmul(&a, &b);
        assert_eq!(expected.data(), &[19.0, 22.0, 43.0, 50.0]);
        assert_eq!(a.matmul(&b).unwrap(), expected);
    }

    #[test]
    fn matmul_zero_row() {
        let z = Tensor::zeros(&[1, 3]);
        let b = Tensor::new(vec![3, 4], (0..12).map(|x| x as f64).collect()).unwrap();
        assert_eq!(z.matmul(&b).unwrap(), Tensor::zeros(&[1, 4]));
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        match a.matmul(&b) {
            Err(Error::Shape { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2, 3]);
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_inconsistent_shape() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn softmax_cases() {
        let u = softmax(&Tensor::zeros(&[3]), 0).unwrap();
        for p in u.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let t = softmax(&Tensor::new(vec![2], vec![0.0, math::ln(2.0)]).unwrap(), 0).unwrap();
        assert!((t.data()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.data()[1] - 2.0 / 3.0).abs() < 1e-15);
        let big = softmax(&Tensor::new(vec![2], vec![1000.0, 1000.0]).unwrap(), 0).unwrap();
        assert_eq!(big.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_first_axis() {
        let x = Tensor::from_rows(&[&[0.0, 1.0], &[0.0, 3.0]]).unwrap();
        let s = softmax(&x, 0).unwrap();
        assert!((s.at(0, 0) - 0.5).abs() < 1e-15);
        assert!((s.at(0, 1) + s.at(1, 1) - 1.0).abs() < 1e-15);
        assert!(softmax(&x, 2).is_err());
    }

    #[test]
    fn layer_norm_cases() {
        let x = Tensor::new(vec![2], vec![1.0, 3.0]).unwrap();
        let y = layer_norm(&x, &[1.0, 1.0], &[0.0, 0.0], 1e-12).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-9 && (y.data()[1] - 1.0).abs() < 1e-9);

        let c = Tensor::new(vec![3], vec![5.0; 3]).unwrap();
        let y = layer_norm(&c, &[1.0; 3], &[0.0; 3], 1e-5).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.0]);

        let r = Tensor::new(vec![3], vec![-2.0, 0.5, 9.0]).unwrap();
        let y = layer_norm(&r, &[0.0; 3], &[0.0; 3], 1e-5).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn softmax_sums_to_one(xs in proptest::collection::vec(-700.0f64..700.0, 1..40)) {
            let n = xs.len();
            let s = softmax(&Tensor::new(alloc::vec![n], xs).unwrap(), 0).unwrap();
            let total: f64 = s.data().iter().sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-6);
            proptest::prop_assert!(s.data().iter().all(|&p| p >= 0.0));
        }
    }
}
