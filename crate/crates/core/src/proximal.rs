//! Total-variation proximal machinery and the MYULA Markov kernel used for
//! non-smooth log-concave conditionals.

use crate::error::{Error, Result};
use crate::field::ImageField;
use crate::operators::{divergence, gradient};
use crate::rng::RandomStream;

/// Weight and Moreau-envelope step of a proximal term, e.g. `beta TV` with
/// smoothing parameter `lambda`.
#[derive(Clone, Copy, Debug)]
pub struct ProxSpec {
    pub weight: f64,
    pub step: f64,
}

impl ProxSpec {
    pub fn new(weight: f64, step: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Parameter("prox weight must be >= 0".into()));
        }
        if !(step > 0.0) {
            return Err(Error::Parameter("prox step must be positive".into()));
        }
        Ok(ProxSpec { weight, step })
    }

    /// The effective parameter theta = step * weight of prox_{theta TV}.
    pub fn theta(&self) -> f64 {
        self.weight * self.step
    }
}

/// Parameters of one MYULA move: Moreau parameter lambda, step size gamma
/// (stability needs gamma <= lambda) and the inner iteration count used for
/// the proximal evaluation.
#[derive(Clone, Copy, Debug)]
pub struct MyulaParams {
    pub lambda: f64,
    pub gamma: f64,
    pub prox_iters: usize,
}

impl MyulaParams {
    pub fn new(lambda: f64, gamma: f64, prox_iters: usize) -> Result<Self> {
        if !(lambda > 0.0) || !(gamma > 0.0) {
            return Err(Error::Parameter("lambda and gamma must be positive".into()));
        }
        if gamma > lambda {
            return Err(Error::Parameter(format!(
                "gamma = {gamma} must not exceed lambda = {lambda}"
            )));
        }
        if prox_iters == 0 {
            return Err(Error::Parameter("prox_iters must be >= 1".into()));
        }
        Ok(MyulaParams { lambda, gamma, prox_iters })
    }

    /// The usual pairing `lambda = rho^2`, `gamma = rho^2 / 4`.
    pub fn for_coupling(rho2: f64, prox_iters: usize) -> Result<Self> {
        Self::new(rho2, rho2 / 4.0, prox_iters)
    }
}

/// Isotropic total variation `sum_{i,j} ||(grad x)_{i,j}||_2` with the
/// replicate-boundary forward-difference gradient.
pub fn tv_value(x: &ImageField) -> f64 {
    let (h, v) = gradient(x);
    h.as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .sum()
}

/// Dual step size of the projection iteration; 1/8 is the classical
/// convergence bound for the 2-D forward-difference gradient.
const CHAMBOLLE_TAU: f64 = 0.125;

/// Approximates `prox_{theta TV}(x) = argmin_u 1/2 ||u - x||^2 + theta TV(u)`
/// with `theta = spec.step * spec.weight`, by the dual projection iteration:
///
/// ```text
/// g      = grad(div p - x / theta)
/// p_next = (p + tau g) / (1 + tau |g|)      (pixel-wise, |g| Euclidean)
/// u      = x - theta div p
/// ```
pub fn tv_prox(x: &ImageField, spec: &ProxSpec, iters: usize) -> ImageField {
    let theta = spec.theta();
    if theta == 0.0 {
        return x.clone();
    }
    let (rows, cols) = x.shape();
    let mut p_h = ImageField::zeros(rows, cols);
    let mut p_v = ImageField::zeros(rows, cols);
    let scaled = x.scaled(1.0 / theta);
    for _ in 0..iters.max(1) {
        let mut inner = divergence(&p_h, &p_v);
        inner.add_scaled(&scaled, -1.0);
        let (g_h, g_v) = gradient(&inner);
        for idx in 0..rows * cols {
            let gh = g_h.as_slice()[idx];
            let gv = g_v.as_slice()[idx];
            let denom = 1.0 + CHAMBOLLE_TAU * (gh * gh + gv * gv).sqrt();
            p_h.as_mut_slice()[idx] = (p_h.as_slice()[idx] + CHAMBOLLE_TAU * gh) / denom;
            p_v.as_mut_slice()[idx] = (p_v.as_slice()[idx] + CHAMBOLLE_TAU * gv) / denom;
        }
    }
    let mut u = x.clone();
    u.add_scaled(&divergence(&p_h, &p_v), -theta);
    u
}

/// The primal objective `1/2 ||u - x||^2 + theta TV(u)` that [`tv_prox`]
/// minimizes; exposed for diagnostics and tests.
pub fn tv_prox_objective(u: &ImageField, x: &ImageField, theta: f64) -> f64 {
    0.5 * u.sub(x).norm_sq() + theta * tv_value(u)
}

/// One unadjusted proximal Langevin move:
///
/// ```text
/// z' = (1 - gamma/lambda) z + (gamma/lambda) prox(z) - gamma grad_smooth(z)
///      + sqrt(2 gamma) xi
/// ```
///
/// with standard-normal `xi`. There is no accept/reject correction. `prox`
/// must evaluate the proximal map of the non-smooth term at parameter
/// `lambda`.
pub fn myula_step(
    z: &ImageField,
    grad_smooth: impl Fn(&ImageField) -> ImageField,
    prox: impl Fn(&ImageField) -> ImageField,
    params: &MyulaParams,
    rng: &mut RandomStream,
) -> ImageField {
    let ratio = params.gamma / params.lambda;
    let mut out = z.scaled(1.0 - ratio);
    out.add_scaled(&prox(z), ratio);
    out.add_scaled(&grad_smooth(z), -params.gamma);
    let sd = (2.0 * params.gamma).sqrt();
    for (o, _) in out.as_mut_slice().iter_mut().zip(0..) {
        *o += sd * rng.normal();
    }
    out
}
