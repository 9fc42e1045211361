//! Exact and structured samplers for the multivariate Gaussian conditionals
//! arising in the split samplers: Fourier-diagonal draws, auxiliary-variable
//! dissociation of heteroscedastic likelihood precisions, Sherman-Morrison
//! diagonal draws for mask likelihoods, and a dense Cholesky reference.
//!
//! All Gaussians are specified in precision form: `N(Q^{-1} b, Q^{-1})` with
//! `b` the right-hand side of `Q m = b`.

use rustfft::num_complex::Complex;

use crate::dense::{CholeskyFactor, DenseMatrix};
use crate::error::{Error, Result};
use crate::fft::{to_complex, to_real_checked};
use crate::field::ImageField;
use crate::operators::{CirculantOperator, LinearOperator, MaskOperator};
use crate::rng::RandomStream;

/// Diagonal noise precision Omega (inverse per-pixel noise variances).
#[derive(Clone, Debug)]
pub struct NoisePrecision {
    diag: Vec<f64>,
}

impl NoisePrecision {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || !diag.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(Error::Parameter(
                "noise precision entries must be strictly positive and finite".into(),
            ));
        }
        Ok(NoisePrecision { diag })
    }

    /// Builds Omega from per-pixel noise standard deviations.
    pub fn from_sigmas(sigmas: &[f64]) -> Result<Self> {
        Self::new(sigmas.iter().map(|s| 1.0 / (s * s)).collect())
    }

    pub fn isotropic(len: usize, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::Parameter("sigma^2 must be positive".into()));
        }
        Self::new(vec![1.0 / sigma2; len])
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// The spectral norm of the diagonal Omega.
    pub fn max(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, d| m.max(*d))
    }
}

/// Default auxiliary-dissociation parameter: keeps mu1 * ||Omega||_S = 0.9,
/// strictly inside the admissible region while keeping the v-covariance
/// well conditioned.
pub fn default_mu1(omega: &NoisePrecision) -> f64 {
    0.9 / omega.max()
}

/// One additive term of a structured precision matrix.
#[derive(Clone)]
pub enum PrecisionTerm {
    /// weight * K^T K with circulant K.
    CirculantQuadratic { weight: f64, op: CirculantOperator },
    /// Pointwise positive-semidefinite diagonal.
    Diagonal(Vec<f64>),
    /// tau * I.
    ScaledIdentity(f64),
}

/// A Gaussian in precision form: mean solves `Q m = b` with
/// `Q = sum of the terms`.
pub struct GaussianSpec {
    mean_rhs: ImageField,
    terms: Vec<PrecisionTerm>,
}

impl GaussianSpec {
    /// Validates positivity: the sum of per-term smallest eigenvalues must be
    /// strictly positive (a sufficient SPD condition for a sum of PSD terms).
    pub fn new(mean_rhs: ImageField, terms: Vec<PrecisionTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Parameter("precision needs at least one term".into()));
        }
        let n = mean_rhs.len();
        let mut min_eig_sum = 0.0;
        for term in &terms {
            match term {
                PrecisionTerm::CirculantQuadratic { weight, op } => {
                    if *weight < 0.0 || !weight.is_finite() {
                        return Err(Error::Parameter("circulant-quadratic weight must be >= 0".into()));
                    }
                    if op.input_shape() != mean_rhs.shape() {
                        return Err(Error::Dimension("precision term lattice mismatch".into()));
                    }
                    let min_sq = op
                        .eigenvalues_sq()
                        .into_iter()
                        .fold(f64::INFINITY, f64::min);
                    min_eig_sum += weight * min_sq;
                }
                PrecisionTerm::Diagonal(d) => {
                    if d.len() != n {
                        return Err(Error::Dimension("diagonal precision length mismatch".into()));
                    }
                    if !d.iter().all(|v| v.is_finite() && *v >= 0.0) {
                        return Err(Error::Parameter("diagonal precision entries must be >= 0".into()));
                    }
                    min_eig_sum += d.iter().cloned().fold(f64::INFINITY, f64::min);
                }
                PrecisionTerm::ScaledIdentity(tau) => {
                    if *tau < 0.0 || !tau.is_finite() {
                        return Err(Error::Parameter("identity scale must be >= 0".into()));
                    }
                    min_eig_sum += tau;
                }
            }
        }
        if !(min_eig_sum > 0.0) {
            return Err(Error::Parameter(format!(
                "precision lower bound {min_eig_sum:.3e} is not positive"
            )));
        }
        Ok(GaussianSpec { mean_rhs, terms })
    }

    pub fn mean_rhs(&self) -> &ImageField {
        &self.mean_rhs
    }

    pub fn terms(&self) -> &[PrecisionTerm] {
        &self.terms
    }

    /// Applies Q to a field (sum of term applications).
    pub fn apply_precision(&self, x: &ImageField) -> Result<ImageField> {
        let mut out = ImageField::zeros(x.rows(), x.cols());
        for term in &self.terms {
            match term {
                PrecisionTerm::CirculantQuadratic { weight, op } => {
                    let kx = op.apply(x)?;
                    let ktkx = op.adjoint_apply(&kx)?;
                    out.add_scaled(&ktkx, *weight);
                }
                PrecisionTerm::Diagonal(d) => {
                    for ((o, v), di) in out.as_mut_slice().iter_mut().zip(x.as_slice()).zip(d) {
                        *o += di * v;
                    }
                }
                PrecisionTerm::ScaledIdentity(tau) => out.add_scaled(x, *tau),
            }
        }
        Ok(out)
    }

    /// The Fourier symbol of Q when every term co-diagonalizes with the DFT;
    /// errors on diagonal terms.
    pub fn fourier_symbol(&self) -> Result<Vec<f64>> {
        let n = self.mean_rhs.len();
        let mut symbol = vec![0.0; n];
        for term in &self.terms {
            match term {
                PrecisionTerm::CirculantQuadratic { weight, op } => {
                    for (s, e) in symbol.iter_mut().zip(op.eigenvalues_sq()) {
                        *s += weight * e;
                    }
                }
                PrecisionTerm::ScaledIdentity(tau) => {
                    for s in symbol.iter_mut() {
                        *s += tau;
                    }
                }
                PrecisionTerm::Diagonal(_) => {
                    return Err(Error::Structure(
                        "diagonal precision term is not diagonal in the Fourier basis".into(),
                    ));
                }
            }
        }
        if !symbol.iter().all(|s| *s > 0.0) {
            return Err(Error::Parameter("Fourier symbol of the precision is not positive".into()));
        }
        Ok(symbol)
    }

    /// Dense Q for oracle comparisons (N up to a few thousand).
    pub fn dense_precision(&self) -> Result<DenseMatrix> {
        let n = self.mean_rhs.len();
        let mut q = DenseMatrix::zeros(n);
        for term in &self.terms {
            match term {
                PrecisionTerm::CirculantQuadratic { weight, op } => {
                    let gram = DenseMatrix::gram_of_operator(op, None)?;
                    q.add_scaled(&gram, *weight);
                }
                PrecisionTerm::Diagonal(d) => {
                    for (i, di) in d.iter().enumerate() {
                        q.add_assign(i, i, *di);
                    }
                }
                PrecisionTerm::ScaledIdentity(tau) => q.add_scaled_identity(*tau),
            }
        }
        Ok(q)
    }
}

fn fourier_transform_of(field: &ImageField, fft: &crate::fft::Fft2) -> Vec<Complex<f64>> {
    let mut data = to_complex(field.as_slice());
    fft.forward(&mut data);
    data
}

fn circulant_of_spec(spec: &GaussianSpec) -> Option<&CirculantOperator> {
    spec.terms.iter().find_map(|t| match t {
        PrecisionTerm::CirculantQuadratic { op, .. } => Some(op),
        _ => None,
    })
}

/// The mean `Q^{-1} b` of a co-diagonalizable spec, solved in the Fourier
/// domain.
pub fn fourier_solve(spec: &GaussianSpec) -> Result<ImageField> {
    let symbol = spec.fourier_symbol()?;
    let (rows, cols) = spec.mean_rhs.shape();
    let owned_fft;
    let fft = match circulant_of_spec(spec) {
        Some(op) => op.fft(),
        None => {
            owned_fft = std::sync::Arc::new(crate::fft::Fft2::new(rows, cols));
            &owned_fft
        }
    };
    let mut data = fourier_transform_of(&spec.mean_rhs, fft);
    for (v, s) in data.iter_mut().zip(&symbol) {
        *v /= s;
    }
    fft.inverse(&mut data);
    ImageField::from_values(rows, cols, to_real_checked(&data, "fourier solve")?)
}

/// One exact draw from `N(Q^{-1} b, Q^{-1})` for a precision diagonalized in
/// the Fourier domain: `x = Q^{-1} b + F^H Lambda^{-1/2} F xi` with white xi.
pub fn sample_fourier_diagonal(spec: &GaussianSpec, rng: &mut RandomStream) -> Result<ImageField> {
    let symbol = spec.fourier_symbol()?;
    let (rows, cols) = spec.mean_rhs.shape();
    let owned_fft;
    let fft = match circulant_of_spec(spec) {
        Some(op) => op.fft(),
        None => {
            owned_fft = std::sync::Arc::new(crate::fft::Fft2::new(rows, cols));
            &owned_fft
        }
    };
    let mut mean = fourier_transform_of(&spec.mean_rhs, fft);
    for (v, s) in mean.iter_mut().zip(&symbol) {
        *v /= s;
    }
    let noise = rng.normal_field(rows, cols);
    let mut noise_hat = fourier_transform_of(&noise, fft);
    for (v, s) in noise_hat.iter_mut().zip(&symbol) {
        *v *= Complex::new(1.0 / s.sqrt(), 0.0);
    }
    for (m, n) in mean.iter_mut().zip(&noise_hat) {
        *m += n;
    }
    fft.inverse(&mut mean);
    ImageField::from_values(rows, cols, to_real_checked(&mean, "fourier sample")?)
}

/// Warm-started state of the auxiliary dissociation sub-chain.
#[derive(Clone, Debug, Default)]
pub struct AuxState {
    pub v: Option<ImageField>,
}

/// One Gibbs sub-sweep of the auxiliary-variable scheme dissociating a
/// heteroscedastic likelihood precision `H^T Omega H` from the circulant
/// structure of `H`.
///
/// Draws `x | v` from the Fourier-diagonalizable Gaussian with precision
/// `G = mu1^{-1} H^T H + rho^{-2} I` and rhs `mean_rhs + H^T v`, then
/// refreshes `v | x ~ N((mu1^{-1} I - Omega) H x, mu1^{-1} I - Omega)`.
/// The x-marginal of the invariant distribution is
/// `N(G_x^{-1} mean_rhs, G_x^{-1})` with `G_x = H^T Omega H + rho^{-2} I`.
///
/// Requires `mu1 * ||Omega||_S < 1` so the v-covariance is positive definite.
pub fn sample_aux_dissociated(
    h: &CirculantOperator,
    omega: &NoisePrecision,
    rho2: f64,
    mean_rhs: &ImageField,
    state_v: &ImageField,
    mu1: f64,
    rng: &mut RandomStream,
) -> Result<(ImageField, ImageField)> {
    if !(rho2 > 0.0) {
        return Err(Error::Parameter("rho^2 must be positive".into()));
    }
    if !(mu1 > 0.0) || mu1 * omega.max() >= 1.0 {
        return Err(Error::Parameter(format!(
            "mu1 * ||Omega||_S = {:.6} must be strictly below 1",
            mu1 * omega.max()
        )));
    }
    if omega.len() != mean_rhs.len() || state_v.len() != mean_rhs.len() {
        return Err(Error::Dimension("aux dissociation operand lengths differ".into()));
    }
    let mu1_inv = 1.0 / mu1;

    // x | v
    let ht_v = h.adjoint_apply(state_v)?;
    let spec = GaussianSpec::new(
        mean_rhs.add(&ht_v),
        vec![
            PrecisionTerm::CirculantQuadratic { weight: mu1_inv, op: h.clone() },
            PrecisionTerm::ScaledIdentity(1.0 / rho2),
        ],
    )?;
    let x = sample_fourier_diagonal(&spec, rng)?;

    // v | x, with diagonal covariance mu1^{-1} I - Omega
    let hx = h.apply(&x)?;
    let mut v = ImageField::zeros(state_v.rows(), state_v.cols());
    for ((vi, hxi), om) in v.as_mut_slice().iter_mut().zip(hx.as_slice()).zip(omega.diag()) {
        let cov = mu1_inv - om;
        *vi = cov * hxi + cov.sqrt() * rng.normal();
    }
    Ok((x, v))
}

/// Fresh v-draw given x, used to warm-start the sub-chain.
pub fn init_aux_v(
    h: &CirculantOperator,
    omega: &NoisePrecision,
    mu1: f64,
    x: &ImageField,
    rng: &mut RandomStream,
) -> Result<ImageField> {
    if !(mu1 > 0.0) || mu1 * omega.max() >= 1.0 {
        return Err(Error::Parameter(format!(
            "mu1 * ||Omega||_S = {:.6} must be strictly below 1",
            mu1 * omega.max()
        )));
    }
    let mu1_inv = 1.0 / mu1;
    let hx = h.apply(x)?;
    let mut v = ImageField::zeros(x.rows(), x.cols());
    for ((vi, hxi), om) in v.as_mut_slice().iter_mut().zip(hx.as_slice()).zip(omega.diag()) {
        let cov = mu1_inv - om;
        *vi = cov * hxi + cov.sqrt() * rng.normal();
    }
    Ok(v)
}

/// Per-pixel mean and variance of the mask-likelihood conditional
/// `N(Cov (sigma^{-2} H^T y + rho^{-2} anchor), Cov)` whose covariance is the
/// diagonal `rho^2 (I - rho^2/(sigma^2 + rho^2) H^T H)`: observed pixels get
/// variance `sigma^2 rho^2 / (sigma^2 + rho^2)`, unobserved ones `rho^2`.
fn sherman_morrison_moments(
    mask: &MaskOperator,
    sigma2: f64,
    rho2: f64,
    y: &ImageField,
    anchor: &ImageField,
) -> Result<(ImageField, f64, f64)> {
    if !(sigma2 > 0.0) || !(rho2 > 0.0) {
        return Err(Error::Parameter("sigma^2 and rho^2 must be positive".into()));
    }
    if y.len() != mask.observed_len() {
        return Err(Error::Dimension("observation length != mask size".into()));
    }
    if anchor.shape() != mask.input_shape() {
        return Err(Error::Dimension("anchor shape != mask lattice".into()));
    }
    let var_observed = sigma2 * rho2 / (sigma2 + rho2);
    let mut mean = anchor.clone();
    for (slot, &idx) in mask.kept_indices().iter().enumerate() {
        let a = anchor.as_slice()[idx];
        mean.as_mut_slice()[idx] = (rho2 * y.as_slice()[slot] + sigma2 * a) / (sigma2 + rho2);
    }
    Ok((mean, var_observed, rho2))
}

/// Mode of the mask-likelihood conditional (used by the ADMM x-step).
pub fn sherman_morrison_mean(
    mask: &MaskOperator,
    sigma2: f64,
    rho2: f64,
    y: &ImageField,
    anchor: &ImageField,
) -> Result<ImageField> {
    Ok(sherman_morrison_moments(mask, sigma2, rho2, y, anchor)?.0)
}

/// One exact draw from the mask-likelihood conditional via its
/// Sherman-Morrison diagonal covariance.
pub fn sample_sherman_morrison(
    mask: &MaskOperator,
    sigma2: f64,
    rho2: f64,
    y: &ImageField,
    anchor: &ImageField,
    rng: &mut RandomStream,
) -> Result<ImageField> {
    let (mut mean, var_obs, var_unobs) = sherman_morrison_moments(mask, sigma2, rho2, y, anchor)?;
    let sd_obs = var_obs.sqrt();
    let sd_unobs = var_unobs.sqrt();
    let mut observed = vec![false; mask.lattice_len()];
    for &idx in mask.kept_indices() {
        observed[idx] = true;
    }
    for (v, obs) in mean.as_mut_slice().iter_mut().zip(observed) {
        *v += if obs { sd_obs } else { sd_unobs } * rng.normal();
    }
    Ok(mean)
}

/// Exact draw from `N(Q^{-1} b, Q^{-1})` via dense Cholesky: the reference
/// oracle every structured sampler is checked against.
pub fn sample_dense_oracle(q: &DenseMatrix, b: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
    let factor = q.cholesky()?;
    Ok(sample_with_factor(&factor, b, rng))
}

/// Dense draw reusing an existing factorization: `m + L^{-T} xi`.
pub fn sample_with_factor(factor: &CholeskyFactor, b: &[f64], rng: &mut RandomStream) -> Vec<f64> {
    let mean = factor.solve(b);
    let noise: Vec<f64> = (0..factor.n()).map(|_| rng.normal()).collect();
    let fluct = factor.solve_upper(&noise);
    mean.iter().zip(fluct).map(|(m, f)| m + f).collect()
}
