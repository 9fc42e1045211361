//! Linear operators with exact adjoints: circulant convolutions, binary
//! masks, diagonal scalings and the discrete gradient. Operators are
//! immutable after construction and safe to share across chains.

use std::sync::Arc;

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft::{to_complex, to_real_checked, Fft2};
use crate::field::ImageField;

/// A linear map between pixel lattices together with its exact adjoint.
pub trait LinearOperator: Send + Sync {
    fn apply(&self, x: &ImageField) -> Result<ImageField>;
    fn adjoint_apply(&self, y: &ImageField) -> Result<ImageField>;
    /// Shape of admissible inputs.
    fn input_shape(&self) -> (usize, usize);
    /// Shape of produced outputs.
    fn output_shape(&self) -> (usize, usize);
}

fn check_shape(x: &ImageField, shape: (usize, usize), what: &str) -> Result<()> {
    if x.shape() != shape {
        return Err(Error::Dimension(format!(
            "{what}: got {}x{}, operator expects {}x{}",
            x.rows(),
            x.cols(),
            shape.0,
            shape.1
        )));
    }
    Ok(())
}

/// Circulant convolution on a periodic `rows x cols` lattice.
///
/// The kernel is stored centered; construction zero-shifts it so that the
/// kernel center lands on lattice index (0, 0) with wrap-around. Symmetric
/// kernels therefore yield symmetric operators with real Fourier eigenvalues.
#[derive(Clone)]
pub struct CirculantOperator {
    rows: usize,
    cols: usize,
    kernel: ImageField,
    eigenvalues: Vec<Complex<f64>>,
    fft: Arc<Fft2>,
}

impl CirculantOperator {
    pub fn from_kernel(kernel: &ImageField, rows: usize, cols: usize) -> Result<Self> {
        if kernel.rows() > rows || kernel.cols() > cols {
            return Err(Error::Dimension(format!(
                "kernel {}x{} larger than lattice {}x{}",
                kernel.rows(),
                kernel.cols(),
                rows,
                cols
            )));
        }
        kernel.check_finite()?;
        let fft = Arc::new(Fft2::new(rows, cols));
        // Zero-shift: kernel center ((kr-1)/2, (kc-1)/2) goes to (0, 0).
        let (cr, cc) = ((kernel.rows() - 1) / 2, (kernel.cols() - 1) / 2);
        let mut embedded = vec![Complex::new(0.0, 0.0); rows * cols];
        for i in 0..kernel.rows() {
            for j in 0..kernel.cols() {
                let r = (i + rows - cr % rows) % rows;
                let c = (j + cols - cc % cols) % cols;
                embedded[r * cols + c] += Complex::new(kernel.get(i, j), 0.0);
            }
        }
        fft.forward(&mut embedded);
        Ok(CirculantOperator {
            rows,
            cols,
            kernel: kernel.clone(),
            eigenvalues: embedded,
            fft,
        })
    }

    /// Identity operator (1x1 unit kernel).
    pub fn identity(rows: usize, cols: usize) -> Self {
        let kernel = ImageField::constant(1, 1, 1.0);
        Self::from_kernel(&kernel, rows, cols).expect("identity kernel always fits")
    }

    /// Normalized Gaussian blur with standard deviation `sigma` pixels,
    /// truncated at `2 sigma` (kernel side `2*ceil(2 sigma) + 1`).
    pub fn gaussian_blur(rows: usize, cols: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Parameter("blur sigma must be positive".into()));
        }
        let half = (2.0 * sigma).ceil() as usize;
        let side = (2 * half + 1).min(rows.min(cols));
        let half = (side - 1) / 2;
        let mut kernel = ImageField::zeros(side, side);
        let mut sum = 0.0;
        for i in 0..side {
            for j in 0..side {
                let di = i as f64 - half as f64;
                let dj = j as f64 - half as f64;
                let v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
                kernel.set(i, j, v);
                sum += v;
            }
        }
        kernel.scale(1.0 / sum);
        Self::from_kernel(&kernel, rows, cols)
    }

    /// Circulant operator for the 5-point Laplacian stencil
    /// [0 1 0; 1 -4 1; 0 1 0].
    pub fn laplacian(rows: usize, cols: usize) -> Result<Self> {
        let kernel = ImageField::from_values(
            3,
            3,
            vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
        )?;
        Self::from_kernel(&kernel, rows, cols)
    }

    pub fn kernel(&self) -> &ImageField {
        &self.kernel
    }

    pub fn eigenvalues(&self) -> &[Complex<f64>] {
        &self.eigenvalues
    }

    /// |lambda_k|^2 for every frequency, the Fourier symbol of K^T K.
    pub fn eigenvalues_sq(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.norm_sqr()).collect()
    }

    pub fn max_eigenvalue_sq(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.norm_sqr()))
    }

    pub(crate) fn fft(&self) -> &Arc<Fft2> {
        &self.fft
    }

    fn convolve(&self, x: &ImageField, conjugate: bool) -> Result<ImageField> {
        check_shape(x, (self.rows, self.cols), "circulant operand")?;
        let mut data = to_complex(x.as_slice());
        self.fft.forward(&mut data);
        for (v, l) in data.iter_mut().zip(&self.eigenvalues) {
            *v *= if conjugate { l.conj() } else { *l };
        }
        self.fft.inverse(&mut data);
        let values = to_real_checked(&data, "circulant apply")?;
        ImageField::from_values(self.rows, self.cols, values)
    }
}

impl LinearOperator for CirculantOperator {
    fn apply(&self, x: &ImageField) -> Result<ImageField> {
        self.convolve(x, false)
    }

    /// Adjoint eigenvalues are the conjugates of the forward ones.
    fn adjoint_apply(&self, y: &ImageField) -> Result<ImageField> {
        self.convolve(y, true)
    }

    fn input_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn output_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Binary selection of M pixels out of an N-pixel lattice. Satisfies
/// H H^T = I_M exactly; H^T H is diagonal with 0/1 entries.
#[derive(Clone)]
pub struct MaskOperator {
    rows: usize,
    cols: usize,
    kept: Vec<usize>,
}

impl MaskOperator {
    pub fn new(rows: usize, cols: usize, kept: Vec<usize>) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::Parameter("mask keeps no pixels".into()));
        }
        let n = rows * cols;
        for w in kept.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Parameter("mask indices must be sorted and distinct".into()));
            }
        }
        if *kept.last().unwrap() >= n {
            return Err(Error::Parameter(format!(
                "mask index {} out of range for {n} pixels",
                kept.last().unwrap()
            )));
        }
        Ok(MaskOperator { rows, cols, kept })
    }

    /// Keeps all pixels (identity).
    pub fn full(rows: usize, cols: usize) -> Self {
        MaskOperator { rows, cols, kept: (0..rows * cols).collect() }
    }

    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    pub fn observed_len(&self) -> usize {
        self.kept.len()
    }

    pub fn lattice_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_observed(&self, index: usize) -> bool {
        self.kept.binary_search(&index).is_ok()
    }

    /// Lifts an observation vector back to the lattice, writing `fill`
    /// into unobserved pixels.
    pub fn embed_with_fill(&self, y: &ImageField, fill: f64) -> Result<ImageField> {
        if y.len() != self.kept.len() {
            return Err(Error::Dimension(format!(
                "observation has {} entries, mask keeps {}",
                y.len(),
                self.kept.len()
            )));
        }
        let mut out = ImageField::constant(self.rows, self.cols, fill);
        for (slot, &idx) in self.kept.iter().enumerate() {
            out.as_mut_slice()[idx] = y.as_slice()[slot];
        }
        Ok(out)
    }
}

impl LinearOperator for MaskOperator {
    fn apply(&self, x: &ImageField) -> Result<ImageField> {
        check_shape(x, (self.rows, self.cols), "mask operand")?;
        let values = self.kept.iter().map(|&i| x.as_slice()[i]).collect();
        ImageField::from_values(self.kept.len(), 1, values)
    }

    fn adjoint_apply(&self, y: &ImageField) -> Result<ImageField> {
        self.embed_with_fill(y, 0.0)
    }

    fn input_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn output_shape(&self) -> (usize, usize) {
        (self.kept.len(), 1)
    }
}

/// Pointwise multiplication by a fixed diagonal; self-adjoint.
#[derive(Clone)]
pub struct DiagonalOperator {
    rows: usize,
    cols: usize,
    diag: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(rows: usize, cols: usize, diag: Vec<f64>) -> Result<Self> {
        if diag.len() != rows * cols {
            return Err(Error::Dimension("diagonal length does not match lattice".into()));
        }
        if !diag.iter().all(|d| d.is_finite()) {
            return Err(Error::Numeric("diagonal contains NaN or Inf".into()));
        }
        Ok(DiagonalOperator { rows, cols, diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl LinearOperator for DiagonalOperator {
    fn apply(&self, x: &ImageField) -> Result<ImageField> {
        check_shape(x, (self.rows, self.cols), "diagonal operand")?;
        let values = x.as_slice().iter().zip(&self.diag).map(|(v, d)| v * d).collect();
        ImageField::from_values(self.rows, self.cols, values)
    }

    fn adjoint_apply(&self, y: &ImageField) -> Result<ImageField> {
        self.apply(y)
    }

    fn input_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn output_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Boundary handling for the discrete gradient. Only replicate-edge
/// (Neumann) differences are provided: the last row/column difference is 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Neumann,
}

/// Forward differences of `x` with Neumann boundary, as a
/// (horizontal, vertical) pair of fields on the same lattice.
pub fn gradient(x: &ImageField) -> (ImageField, ImageField) {
    let (rows, cols) = x.shape();
    let mut h = ImageField::zeros(rows, cols);
    let mut v = ImageField::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            if j + 1 < cols {
                h.set(i, j, x.get(i, j + 1) - x.get(i, j));
            }
            if i + 1 < rows {
                v.set(i, j, x.get(i + 1, j) - x.get(i, j));
            }
        }
    }
    (h, v)
}

/// Discrete divergence, the exact negative adjoint of [`gradient`]:
/// <grad x, p> = <x, -div p> for every x and p.
pub fn divergence(p_h: &ImageField, p_v: &ImageField) -> ImageField {
    assert!(p_h.same_shape(p_v), "gradient pair shapes differ");
    let (rows, cols) = p_h.shape();
    let mut out = ImageField::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let mut d = 0.0;
            if j + 1 < cols {
                d += p_h.get(i, j);
            }
            if j > 0 {
                d -= p_h.get(i, j - 1);
            }
            if i + 1 < rows {
                d += p_v.get(i, j);
            }
            if i > 0 {
                d -= p_v.get(i - 1, j);
            }
            out.set(i, j, d);
        }
    }
    out
}

/// The discrete gradient as a linear operator; the output stacks the
/// horizontal differences on top of the vertical ones (2 rows x cols).
#[derive(Clone)]
pub struct GradientOperator {
    rows: usize,
    cols: usize,
    pub boundary: Boundary,
}

impl GradientOperator {
    pub fn new(rows: usize, cols: usize) -> Self {
        GradientOperator { rows, cols, boundary: Boundary::Neumann }
    }

    fn split(&self, stacked: &ImageField) -> (ImageField, ImageField) {
        let mut h = ImageField::zeros(self.rows, self.cols);
        let mut v = ImageField::zeros(self.rows, self.cols);
        let n = self.rows * self.cols;
        h.as_mut_slice().copy_from_slice(&stacked.as_slice()[..n]);
        v.as_mut_slice().copy_from_slice(&stacked.as_slice()[n..]);
        (h, v)
    }
}

impl LinearOperator for GradientOperator {
    fn apply(&self, x: &ImageField) -> Result<ImageField> {
        check_shape(x, (self.rows, self.cols), "gradient operand")?;
        let (h, v) = gradient(x);
        let mut values = Vec::with_capacity(2 * x.len());
        values.extend_from_slice(h.as_slice());
        values.extend_from_slice(v.as_slice());
        ImageField::from_values(2 * self.rows, self.cols, values)
    }

    fn adjoint_apply(&self, y: &ImageField) -> Result<ImageField> {
        check_shape(y, (2 * self.rows, self.cols), "gradient adjoint operand")?;
        let (h, v) = self.split(y);
        let mut div = divergence(&h, &v);
        div.scale(-1.0);
        Ok(div)
    }

    fn input_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn output_shape(&self) -> (usize, usize) {
        (2 * self.rows, self.cols)
    }
}
