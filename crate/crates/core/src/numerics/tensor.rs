use std::fmt;

use crate::error::{shape_err, Error, Result};

/// Dense row-major tensor of `f64` values.
///
/// Most of the library works with rank-2 tensors (matrices). A rank-1 tensor
/// of length `n` is treated as a `1 x n` row wherever a matrix is expected.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl Tensor {
    /// Builds a tensor from external data, rejecting length mismatches and
    /// non-finite values.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return shape_err("Tensor::new", &shape, &[data.len()]);
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                context: format!("tensor construction at flat index {pos}"),
            });
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for values computed by the library itself.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// `rows x cols` matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Argument("ragged rows".into()));
        }
        Self::new(vec![r, c], rows.concat())
    }

    /// `1 x n` row vector.
    pub fn row(values: &[f64]) -> Result<Self> {
        Self::new(vec![1, values.len()], values.to_vec())
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

    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[..self.shape.len() - 1].iter().product(),
        }
    }

    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.len() {
            return shape_err("reshape", &self.shape, shape);
        }
        Ok(Self::from_parts(shape.to_vec(), self.data.clone()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard matrix product. Each output element accumulates its products
    /// in ascending inner index starting from `0.0`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 || self.shape.len() > 2 || other.shape.len() > 2 {
            return shape_err("matmul", &self.shape, &other.shape);
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor::from_parts(vec![m, n], out))
    }

    /// `self · otherᵀ`, i.e. row-by-row dot products.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = (self.rows(), self.cols());
        let (n, k2) = (other.rows(), other.cols());
        if k != k2 || self.shape.len() > 2 || other.shape.len() > 2 {
            return shape_err("matmul_t", &self.shape, &other.shape);
        }
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                out.push(dot(a, &other.data[j * k..(j + 1) * k]));
            }
        }
        Ok(Tensor::from_parts(vec![m, n], out))
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::from_parts(vec![c, r], out)
    }

    pub fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return shape_err(op, &self.shape, &other.shape);
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Tensor::from_parts(self.shape.clone(), data))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|v| v * c)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return shape_err("add_assign", &self.shape, &other.shape);
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dot product accumulated left to right from `0.0`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Numerically stable softmax: shifts by the maximum before exponentiating.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Argument("softmax of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            context: "softmax input".into(),
        });
    }
    Ok(softmax_unchecked(v))
}

pub(crate) fn softmax_unchecked(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_times_matrix() {
        let a = m(&[&[1.0, -2.0, 3.5], &[0.0, 4.0, 5.0], &[7.0, 8.0, -9.0]]);
        assert_eq!(Tensor::identity(3).matmul(&a).unwrap(), a);
    }

    #[test]
    fn hand_product() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&[&[0.0], &[1.0]]);
        assert_eq!(a.matmul(&b).unwrap(), m(&[&[2.0], &[4.0]]));
    }

    #[test]
    fn mismatched_product_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let err = a.matmul(&a).unwrap_err();
        match err {
            Error::Shape { left, right, .. } => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matmul_t_matches_transpose() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[0.5, -1.0, 2.0], &[1.0, 1.0, 1.0], &[0.0, 3.0, -2.0]]);
        assert_eq!(a.matmul_t(&b).unwrap(), a.matmul(&b.transpose()).unwrap());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Tensor::new(vec![2], vec![1.0, f64::NAN]),
            Err(Error::Numeric { .. })
        ));
        assert!(Tensor::new(vec![2, 2], vec![1.0]).is_err());
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&[1.0, 1.0, 1.0]).unwrap();
        for p in &u {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(softmax(&[0.0]).unwrap(), vec![1.0]);
        let p = softmax(&[0.0, 2f64.ln()]).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(softmax(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for x in [-30.0, -2.0, 0.0, 0.3, 12.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
