//! Minimal 2-D FFT plans on row-major complex buffers, built on rustfft.
//!
//! `forward` is the unnormalized DFT, `inverse` includes the 1/N factor so a
//! round trip is the identity.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }


    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    fn transform(&self, data: &mut [Complex<f64>], row_plan: &Arc<dyn Fft<f64>>, col_plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        for r in 0..self.rows {
            row_plan.process(&mut data[r * self.cols..(r + 1) * self.cols]);
        }
        let mut column = vec![Complex::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = data[r * self.cols + c];
            }
            col_plan.process(&mut column);
            for r in 0..self.rows {
                data[r * self.cols + c] = column[r];
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex<f64>]) {
        self.transform(data, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, data: &mut [Complex<f64>]) {
        self.transform(data, &self.row_inv, &self.col_inv);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

pub(crate) fn to_complex(values: &[f64]) -> Vec<Complex<f64>> {
    values.iter().map(|&v| Complex::new(v, 0.0)).collect()
}

/// Real parts of `data`, failing if the imaginary residue is not negligible
/// relative to the real magnitude.
pub(crate) fn to_real_checked(data: &[Complex<f64>], context: &str) -> crate::error::Result<Vec<f64>> {
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for v in data {
        max_re = max_re.max(v.re.abs());
        max_im = max_im.max(v.im.abs());
    }
    // Eigenvalue products of real symmetric kernels are real up to round-off.
    let bound = 1e-9 * max_re.max(1.0);
    if max_im > bound {
        return Err(crate::error::Error::Numeric(format!(
            "{context}: imaginary residue {max_im:.3e} exceeds bound {bound:.3e}"
        )));
    }
    Ok(data.iter().map(|v| v.re).collect())
}
