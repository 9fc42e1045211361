//! Scaled ADMM and the conjugate-gradient linear solver. With the same
//! `(f, g, rho^2)` as the split-augmented sampler, each ADMM step computes
//! the mode of the corresponding conditional, and `u` plays the scaled dual
//! variable.

use crate::error::{Error, Result};
use crate::field::ImageField;

#[derive(Clone, Copy, Debug)]
pub struct CgConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig { tol: 1e-12, max_iters: 2_000 }
    }
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: ImageField,
    pub iterations: usize,
    pub converged: bool,
    /// Final ||A x - b|| / ||b||.
    pub relative_residual: f64,
}

/// Conjugate gradients for `A x = b` with SPD `A` given as a callback.
/// Non-convergence is reported through the `converged` flag, not an error.
pub fn cg_solve(
    apply_a: impl Fn(&ImageField) -> ImageField,
    b: &ImageField,
    x0: Option<&ImageField>,
    config: &CgConfig,
) -> Result<CgResult> {
    cg_solve_observed(apply_a, b, x0, config, |_, _| {})
}

/// [`cg_solve`] with a per-iteration observer over the current iterate.
pub fn cg_solve_observed(
    apply_a: impl Fn(&ImageField) -> ImageField,
    b: &ImageField,
    x0: Option<&ImageField>,
    config: &CgConfig,
    mut observer: impl FnMut(usize, &ImageField),
) -> Result<CgResult> {
    if !(config.tol > 0.0) {
        return Err(Error::Parameter("cg tolerance must be positive".into()));
    }
    let mut x = match x0 {
        Some(x0) => {
            b.require_same_shape(x0, "cg initial guess")?;
            x0.clone()
        }
        None => ImageField::zeros(b.rows(), b.cols()),
    };
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(CgResult {
            x: ImageField::zeros(b.rows(), b.cols()),
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    let mut r = b.sub(&apply_a(&x));
    let mut p = r.clone();
    let mut rs_old = r.norm_sq();
    let mut iterations = 0;
    while iterations < config.max_iters {
        if rs_old.sqrt() <= config.tol * b_norm {
            break;
        }
        let ap = apply_a(&p);
        let p_ap = p.dot(&ap);
        if !(p_ap > 0.0) {
            return Err(Error::Config(format!(
                "cg curvature p^T A p = {p_ap:.3e}; operator is not positive definite"
            )));
        }
        let alpha = rs_old / p_ap;
        x.add_scaled(&p, alpha);
        r.add_scaled(&ap, -alpha);
        iterations += 1;
        observer(iterations, &x);
        let rs_new = r.norm_sq();
        let beta = rs_new / rs_old;
        rs_old = rs_new;
        let mut p_next = r.clone();
        p_next.add_scaled(&p, beta);
        p = p_next;
    }
    let relative_residual = rs_old.sqrt() / b_norm;
    Ok(CgResult { x, iterations, converged: relative_residual <= config.tol, relative_residual })
}

#[derive(Clone, Copy, Debug)]
pub struct AdmmConfig {
    /// The penalty parameter is rho^{-2}.
    pub rho2: f64,
    pub max_iters: usize,
    /// Stop threshold on the relative primal residual ||x - z||.
    pub tol_primal: f64,
    /// Stop threshold on the relative dual movement ||z_t - z_{t-1}||.
    pub tol_dual: f64,
}

impl AdmmConfig {
    pub fn new(rho2: f64) -> Result<Self> {
        if !(rho2 > 0.0) {
            return Err(Error::Parameter("rho^2 must be positive".into()));
        }
        Ok(AdmmConfig { rho2, max_iters: 500, tol_primal: 1e-6, tol_dual: 1e-6 })
    }

    pub fn with_tolerances(mut self, tol_primal: f64, tol_dual: f64) -> Result<Self> {
        if !(tol_primal > 0.0) || !(tol_dual > 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        self.tol_primal = tol_primal;
        self.tol_dual = tol_dual;
        Ok(self)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

#[derive(Clone, Debug)]
pub struct AdmmResult {
    pub x: ImageField,
    pub z: ImageField,
    pub u: ImageField,
    pub iterations: usize,
    /// Per-iteration (relative primal residual, relative dual movement).
    pub residuals: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Scaled ADMM:
///
/// ```text
/// x <- argmin f(x) + ||x - (z - u)||^2 / (2 rho^2)
/// z <- argmin g(z) + ||z - (x + u)||^2 / (2 rho^2)
/// u <- u + x - z
/// ```
///
/// `x_step` and `z_step` receive the respective anchors `z - u` and `x + u`.
pub fn admm_solve(
    mut x_step: impl FnMut(&ImageField) -> Result<ImageField>,
    mut z_step: impl FnMut(&ImageField) -> Result<ImageField>,
    config: &AdmmConfig,
    z0: &ImageField,
) -> Result<AdmmResult> {
    if !(config.tol_primal > 0.0) || !(config.tol_dual > 0.0) {
        return Err(Error::Parameter("tolerances must be positive".into()));
    }
    let mut z = z0.clone();
    let mut u = ImageField::zeros(z0.rows(), z0.cols());
    let mut x = z0.clone();
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for t in 0..config.max_iters {
        let z_prev = z.clone();
        x = x_step(&z.sub(&u))?;
        z = z_step(&x.add(&u))?;
        u.add_scaled(&x, 1.0);
        u.add_scaled(&z, -1.0);
        iterations = t + 1;

        let scale = x.norm().max(z.norm()).max(1e-30);
        let primal = x.sub(&z).norm() / scale;
        let dual = z.sub(&z_prev).norm() / z.norm().max(1e-30);
        residuals.push((primal, dual));
        if primal <= config.tol_primal && dual <= config.tol_dual {
            converged = true;
            break;
        }
    }
    Ok(AdmmResult { x, z, u, iterations, residuals, converged })
}
