use crate::error::{Error, Result};

/// A real-valued pixel lattice with an explicit 2-D shape, stored row-major.
///
/// All sampled and observed vectors live on such lattices; 1-D signals are
/// represented as `rows x 1` fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageField {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ImageField {
    /// All-zero field.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "field shape must be positive");
        ImageField { rows, cols, values: vec![0.0; rows * cols] }
    }

    /// Constant field.
    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        let mut f = Self::zeros(rows, cols);
        f.values.fill(value);
        f
    }

    /// Builds a field from row-major values, validating length and finiteness.
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("field shape must be positive".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} values for a {}x{} field, got {}",
                rows * cols,
                rows,
                cols,
                values.len()
            )));
        }
        let f = ImageField { rows, cols, values };
        f.check_finite()?;
        Ok(f)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.values[i * cols + j] = f(i, j);
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_shape(&self, other: &ImageField) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub(crate) fn require_same_shape(&self, other: &ImageField, what: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Errors if any entry is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric("field contains NaN or Inf".into()))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageField {
        ImageField {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// self += c * other
    pub fn add_scaled(&mut self, other: &ImageField, c: f64) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in self.values.iter_mut() {
            *a *= c;
        }
    }

    pub fn add(&self, other: &ImageField) -> ImageField {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn sub(&self, other: &ImageField) -> ImageField {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn scaled(&self, c: f64) -> ImageField {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn dot(&self, other: &ImageField) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
