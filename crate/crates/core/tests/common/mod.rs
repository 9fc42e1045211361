//! Shared oracles for the integration suites. Everything here goes through
//! dense linear algebra or plain iteration, independent of the structured
//! (Fourier / auxiliary / closed-form) code paths under test.

#![allow(dead_code)]

use split_gibbs::dense::DenseMatrix;
use split_gibbs::field::ImageField;
use split_gibbs::operators::{divergence, gradient, LinearOperator};

/// Per-pixel sample mean and unbiased variance over a set of draws.
pub fn sample_moments(draws: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = draws.len() as f64;
    let dim = draws[0].len();
    let mut mean = vec![0.0; dim];
    for d in draws {
        for (m, v) in mean.iter_mut().zip(d) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for d in draws {
        for ((s, m), v) in var.iter_mut().zip(&mean).zip(d) {
            *s += (v - m) * (v - m) / (n - 1.0);
        }
    }
    (mean, var)
}

/// Exact mean vector and per-coordinate variances of `N(Q^{-1} b, Q^{-1})`
/// by dense factorization.
pub fn dense_gaussian_moments(q: &DenseMatrix, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let factor = q.cholesky().expect("oracle precision must be SPD");
    let mean = factor.solve(b);
    let n = q.n();
    let mut var = vec![0.0; n];
    let mut basis = vec![0.0; n];
    for i in 0..n {
        basis[i] = 1.0;
        var[i] = factor.solve(&basis)[i];
        basis[i] = 0.0;
    }
    (mean, var)
}

/// Densifies any linear operator into its matrix (output_len x input_len).
pub fn densify(op: &dyn LinearOperator) -> Vec<Vec<f64>> {
    let (ir, ic) = op.input_shape();
    let (or, oc) = op.output_shape();
    let (n_in, n_out) = (ir * ic, or * oc);
    let mut columns = vec![vec![0.0; n_out]; n_in];
    let mut basis = ImageField::zeros(ir, ic);
    for j in 0..n_in {
        basis.as_mut_slice()[j] = 1.0;
        let image = op.apply(&basis).expect("densify apply");
        for i in 0..n_out {
            columns[j][i] = image.as_slice()[i];
        }
        basis.as_mut_slice()[j] = 0.0;
    }
    // transpose to row-major rows
    let mut rows = vec![vec![0.0; n_in]; n_out];
    for j in 0..n_in {
        for i in 0..n_out {
            rows[i][j] = columns[j][i];
        }
    }
    rows
}

pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn mat_transpose_vec(m: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n_in = m[0].len();
    let mut out = vec![0.0; n_in];
    for (row, yi) in m.iter().zip(y) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yi;
        }
    }
    out
}

/// Independent primal objective of the TV proximal problem:
/// `1/2 ||u - x||^2 + theta TV(u)` with TV evaluated from scratch.
pub fn tv_primal_objective(u: &ImageField, x: &ImageField, theta: f64) -> f64 {
    let (h, v) = gradient(u);
    let tv: f64 = h
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .sum();
    0.5 * u.sub(x).norm_sq() + theta * tv
}

/// Long-run projected-gradient solver of the dual TV prox problem
/// `min_{|p_ij| <= 1} 1/2 ||x + theta div p||^2`, returning the primal
/// solution `u = x + theta div p`. A deliberately plain reference
/// implementation: fixed step `1/(8 theta^2)` (the gradient is
/// `-theta grad(x + theta div p)` with operator norm at most 8 theta^2)
/// and a Euclidean projection of each pixel pair onto the unit disc.
pub fn tv_prox_projected_gradient_oracle(
    x: &ImageField,
    theta: f64,
    iters: usize,
) -> ImageField {
    let (rows, cols) = x.shape();
    let mut p_h = ImageField::zeros(rows, cols);
    let mut p_v = ImageField::zeros(rows, cols);
    let step = 1.0 / (8.0 * theta * theta);
    for _ in 0..iters {
        let mut w = x.clone();
        w.add_scaled(&divergence(&p_h, &p_v), theta);
        let (g_h, g_v) = gradient(&w);
        for idx in 0..rows * cols {
            let mut h = p_h.as_slice()[idx] + step * theta * g_h.as_slice()[idx];
            let mut v = p_v.as_slice()[idx] + step * theta * g_v.as_slice()[idx];
            let norm = (h * h + v * v).sqrt();
            if norm > 1.0 {
                h /= norm;
                v /= norm;
            }
            p_h.as_mut_slice()[idx] = h;
            p_v.as_mut_slice()[idx] = v;
        }
    }
    let mut u = x.clone();
    u.add_scaled(&divergence(&p_h, &p_v), theta);
    u
}

/// Mean and per-pixel variance of the x-marginal of the coupled Gaussian
/// over (x, z) with density
/// `exp{-1/2 x^T Qf x + bf^T x - 1/2 z^T Qg z + bg^T z - ||x-z||^2/(2 rho^2)}`,
/// computed by densely factorizing the 2N x 2N joint precision.
pub fn split_joint_x_marginal(
    qf: &DenseMatrix,
    bf: &[f64],
    qg: &DenseMatrix,
    bg: &[f64],
    rho2: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = qf.n();
    let inv_rho2 = 1.0 / rho2;
    let mut joint = DenseMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            joint.set(i, j, qf.get(i, j));
            joint.set(n + i, n + j, qg.get(i, j));
        }
        joint.add_assign(i, i, inv_rho2);
        joint.add_assign(n + i, n + i, inv_rho2);
        joint.set(i, n + i, -inv_rho2);
        joint.set(n + i, i, -inv_rho2);
    }
    let mut b = vec![0.0; 2 * n];
    b[..n].copy_from_slice(bf);
    b[n..].copy_from_slice(bg);
    let factor = joint.cholesky().expect("joint split precision SPD");
    let mean = factor.solve(&b);
    let mut var = vec![0.0; n];
    let mut basis = vec![0.0; 2 * n];
    for i in 0..n {
        basis[i] = 1.0;
        var[i] = factor.solve(&basis)[i];
        basis[i] = 0.0;
    }
    (mean[..n].to_vec(), var)
}

/// Lag-k autocorrelation computed directly.
pub fn lag_autocorrelation(trace: &[f64], lag: usize) -> f64 {
    let n = trace.len();
    let mean = trace.iter().sum::<f64>() / n as f64;
    let var = trace.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let cov = trace[..n - lag]
        .iter()
        .zip(&trace[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum::<f64>()
        / n as f64;
    cov / var
}
