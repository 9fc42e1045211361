//! Small dense symmetric matrices with a Cholesky factorization, used as the
//! exact reference path for the structured Gaussian samplers and by tests
//! that densify operators. Intended for N up to a few thousand.

use crate::error::{Error, Result};
use crate::field::ImageField;
use crate::operators::LinearOperator;

/// Row-major dense n x n matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_assign(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// Densifies `op^T W op` column by column, with `W` a diagonal weight
    /// (`None` means identity). `op` maps an `in_shape` lattice anywhere.
    pub fn gram_of_operator(
        op: &dyn LinearOperator,
        weight: Option<&[f64]>,
    ) -> Result<DenseMatrix> {
        let (rows, cols) = op.input_shape();
        let n = rows * cols;
        let mut m = DenseMatrix::zeros(n);
        let mut basis = ImageField::zeros(rows, cols);
        for j in 0..n {
            basis.as_mut_slice()[j] = 1.0;
            let mut image = op.apply(&basis)?;
            if let Some(w) = weight {
                if w.len() != image.len() {
                    return Err(Error::Dimension("weight length != operator output".into()));
                }
                for (v, wi) in image.as_mut_slice().iter_mut().zip(w) {
                    *v *= wi;
                }
            }
            let column = op.adjoint_apply(&image)?;
            for i in 0..n {
                m.data[i * n + j] = column.as_slice()[i];
            }
            basis.as_mut_slice()[j] = 0.0;
        }
        Ok(m)
    }

    /// Densifies a linear map given as a closure (used by tests to compare
    /// operators against their matrix form).
    pub fn from_apply(
        n_in: usize,
        shape: (usize, usize),
        mut apply: impl FnMut(&ImageField) -> Result<ImageField>,
    ) -> Result<DenseMatrix> {
        let mut basis = ImageField::zeros(shape.0, shape.1);
        let mut out: Option<DenseMatrix> = None;
        for j in 0..n_in {
            basis.as_mut_slice()[j] = 1.0;
            let column = apply(&basis)?;
            let m = out.get_or_insert_with(|| DenseMatrix::zeros(column.len().max(n_in)));
            for i in 0..column.len() {
                m.data[i * m.n + j] = column.as_slice()[i];
            }
            basis.as_mut_slice()[j] = 0.0;
        }
        Ok(out.expect("n_in > 0"))
    }

    pub fn add_scaled_identity(&mut self, c: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += c;
        }
    }

    pub fn add_scaled(&mut self, other: &DenseMatrix, c: f64) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Lower-triangular Cholesky factor; fails on non-SPD input.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Factorization(format!(
                            "pivot {s:.3e} at index {i}; matrix is not positive definite"
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(CholeskyFactor { n, l })
    }
}

/// Lower-triangular factor L with A = L L^T.
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let y = self.solve_lower(b);
        self.solve_upper(&y)
    }

    /// Solves L y = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solves L^T x = y.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }
}
