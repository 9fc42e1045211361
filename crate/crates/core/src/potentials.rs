//! Potential terms of a log-posterior. Each potential knows how to evaluate
//! itself, how to draw from its coupled conditional
//! `p(w | anchor) ∝ exp{-pot(w) - ||w - anchor||^2 / (2 rho^2)}`
//! with a dedicated sampling strategy, and how to minimize that conditional
//! (its mode) for the optimization counterpart.

use crate::admm::{cg_solve, CgConfig};
use crate::error::{Error, Result};
use crate::field::ImageField;
use crate::gaussian::{
    default_mu1, init_aux_v, sample_aux_dissociated, sample_fourier_diagonal,
    sample_sherman_morrison, sherman_morrison_mean, AuxState, GaussianSpec, NoisePrecision,
    PrecisionTerm,
};
use crate::operators::{CirculantOperator, LinearOperator, MaskOperator};
use crate::proximal::{myula_step, tv_prox, tv_value, MyulaParams, ProxSpec};
use crate::rng::RandomStream;

/// Sampling strategy a potential declares for its coupled conditional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    ExactGaussian,
    DiagonalGaussian,
    Myula,
}

#[derive(Clone)]
pub enum Potential {
    /// The zero potential: the conditional is `N(anchor, rho^2 I)`.
    Zero,

    /// `1/2 sum_i d_i (w_i - mean_i)^2` with a nonnegative diagonal `d`.
    DiagonalQuadratic { mean: ImageField, precision: Vec<f64> },

    /// `1/2 sum_k weight_k ||K_k w||^2 + tau/2 ||w||^2` with circulant `K_k`:
    /// the conditional is Gaussian and diagonal in the Fourier basis.
    CirculantQuadratic { terms: Vec<(f64, CirculantOperator)>, tau: f64 },

    /// `1/2 (H w - y)^T Omega (H w - y)` with circulant `H` and diagonal
    /// `Omega`; sampled by the auxiliary dissociation sub-chain.
    CirculantGaussianData {
        op: CirculantOperator,
        omega: NoisePrecision,
        y: ImageField,
        /// Dissociation parameter; `None` uses 0.9 / ||Omega||_S.
        mu1: Option<f64>,
    },

    /// `||M w - y||^2 / (2 sigma^2)` with a binary mask `M`; the conditional
    /// covariance is diagonal by the Sherman-Morrison identity.
    MaskGaussianData { mask: MaskOperator, sigma2: f64, y: ImageField },

    /// `weight * TV(w)`; the conditional is log-concave and is advanced by
    /// one MYULA move per sweep.
    Tv { weight: f64, myula: MyulaParams },
}

impl Potential {
    pub fn strategy(&self) -> Strategy {
        match self {
            Potential::Zero | Potential::DiagonalQuadratic { .. } => Strategy::DiagonalGaussian,
            Potential::CirculantQuadratic { .. } | Potential::CirculantGaussianData { .. } => {
                Strategy::ExactGaussian
            }
            Potential::MaskGaussianData { .. } => Strategy::DiagonalGaussian,
            Potential::Tv { .. } => Strategy::Myula,
        }
    }

    /// Value of the potential at `w`.
    pub fn eval(&self, w: &ImageField) -> Result<f64> {
        match self {
            Potential::Zero => Ok(0.0),
            Potential::DiagonalQuadratic { mean, precision } => {
                w.require_same_shape(mean, "diagonal quadratic operand")?;
                Ok(w.as_slice()
                    .iter()
                    .zip(mean.as_slice())
                    .zip(precision)
                    .map(|((wi, mi), di)| 0.5 * di * (wi - mi) * (wi - mi))
                    .sum())
            }
            Potential::CirculantQuadratic { terms, tau } => {
                let mut value = 0.5 * tau * w.norm_sq();
                for (weight, op) in terms {
                    value += 0.5 * weight * op.apply(w)?.norm_sq();
                }
                Ok(value)
            }
            Potential::CirculantGaussianData { op, omega, y, .. } => {
                let residual = op.apply(w)?.sub(y);
                Ok(0.5
                    * residual
                        .as_slice()
                        .iter()
                        .zip(omega.diag())
                        .map(|(r, om)| om * r * r)
                        .sum::<f64>())
            }
            Potential::MaskGaussianData { mask, sigma2, y } => {
                let residual = mask.apply(w)?.sub(y);
                Ok(residual.norm_sq() / (2.0 * sigma2))
            }
            Potential::Tv { weight, .. } => Ok(weight * tv_value(w)),
        }
    }

    /// Smooth-part gradient of the coupled conditional at `w` (used by the
    /// direct Langevin baseline); defined for the data potentials.
    pub fn grad(&self, w: &ImageField) -> Result<ImageField> {
        match self {
            Potential::Zero => Ok(ImageField::zeros(w.rows(), w.cols())),
            Potential::DiagonalQuadratic { mean, precision } => {
                let mut g = w.sub(mean);
                for (gi, di) in g.as_mut_slice().iter_mut().zip(precision) {
                    *gi *= di;
                }
                Ok(g)
            }
            Potential::CirculantQuadratic { terms, tau } => {
                let mut g = w.scaled(*tau);
                for (weight, op) in terms {
                    let kw = op.apply(w)?;
                    g.add_scaled(&op.adjoint_apply(&kw)?, *weight);
                }
                Ok(g)
            }
            Potential::CirculantGaussianData { op, omega, y, .. } => {
                let mut residual = op.apply(w)?.sub(y);
                for (r, om) in residual.as_mut_slice().iter_mut().zip(omega.diag()) {
                    *r *= om;
                }
                op.adjoint_apply(&residual)
            }
            Potential::MaskGaussianData { mask, sigma2, y } => {
                let residual = mask.apply(w)?.sub(y);
                Ok(mask.adjoint_apply(&residual)?.scaled(1.0 / sigma2))
            }
            Potential::Tv { .. } => {
                Err(Error::Config("TV potential has no smooth gradient".into()))
            }
        }
    }

    fn gaussian_spec(&self, anchor: &ImageField, rho2: f64) -> Result<GaussianSpec> {
        let inv_rho2 = 1.0 / rho2;
        match self {
            Potential::CirculantQuadratic { terms, tau } => {
                let mut precision: Vec<PrecisionTerm> = terms
                    .iter()
                    .map(|(w, op)| PrecisionTerm::CirculantQuadratic { weight: *w, op: op.clone() })
                    .collect();
                precision.push(PrecisionTerm::ScaledIdentity(tau + inv_rho2));
                GaussianSpec::new(anchor.scaled(inv_rho2), precision)
            }
            _ => Err(Error::Config("potential is not circulant-quadratic".into())),
        }
    }

    /// Right-hand side `H^T Omega y + anchor / rho^2` of the data conditional.
    fn data_rhs(&self, anchor: &ImageField, rho2: f64) -> Result<ImageField> {
        match self {
            Potential::CirculantGaussianData { op, omega, y, .. } => {
                let mut weighted = y.clone();
                for (v, om) in weighted.as_mut_slice().iter_mut().zip(omega.diag()) {
                    *v *= om;
                }
                let mut rhs = op.adjoint_apply(&weighted)?;
                rhs.add_scaled(anchor, 1.0 / rho2);
                Ok(rhs)
            }
            _ => Err(Error::Config("potential is not a circulant data term".into())),
        }
    }

    /// Draws from `p(w | anchor) ∝ exp{-pot(w) - ||w - anchor||^2/(2 rho^2)}`.
    ///
    /// `current` is the present value of the coordinate being refreshed (used
    /// by the MYULA kernel); `aux` persists warm-started auxiliary variables
    /// across sweeps.
    pub fn draw_conditional(
        &self,
        current: &ImageField,
        anchor: &ImageField,
        rho2: f64,
        aux: &mut AuxState,
        rng: &mut RandomStream,
    ) -> Result<ImageField> {
        if !(rho2 > 0.0) {
            return Err(Error::Parameter("rho^2 must be positive".into()));
        }
        match self {
            Potential::Zero => {
                let mut out = rng.normal_field(anchor.rows(), anchor.cols());
                out.scale(rho2.sqrt());
                out.add_scaled(anchor, 1.0);
                Ok(out)
            }
            Potential::DiagonalQuadratic { mean, precision } => {
                anchor.require_same_shape(mean, "diagonal conditional anchor")?;
                let inv_rho2 = 1.0 / rho2;
                let mut out = ImageField::zeros(anchor.rows(), anchor.cols());
                for idx in 0..out.len() {
                    let q = precision[idx] + inv_rho2;
                    let m = (precision[idx] * mean.as_slice()[idx]
                        + inv_rho2 * anchor.as_slice()[idx])
                        / q;
                    out.as_mut_slice()[idx] = m + rng.normal() / q.sqrt();
                }
                Ok(out)
            }
            Potential::CirculantQuadratic { .. } => {
                let spec = self.gaussian_spec(anchor, rho2)?;
                sample_fourier_diagonal(&spec, rng)
            }
            Potential::CirculantGaussianData { op, omega, mu1, .. } => {
                let mu1 = mu1.unwrap_or_else(|| default_mu1(omega));
                let rhs = self.data_rhs(anchor, rho2)?;
                if aux.v.is_none() {
                    aux.v = Some(init_aux_v(op, omega, mu1, current, rng)?);
                }
                let state_v = aux.v.as_ref().expect("just initialized");
                let (x, v) = sample_aux_dissociated(op, omega, rho2, &rhs, state_v, mu1, rng)?;
                aux.v = Some(v);
                Ok(x)
            }
            Potential::MaskGaussianData { mask, sigma2, y } => {
                sample_sherman_morrison(mask, *sigma2, rho2, y, anchor, rng)
            }
            Potential::Tv { weight, myula } => {
                let inv_rho2 = 1.0 / rho2;
                let prox_spec = ProxSpec::new(*weight, myula.lambda)?;
                let iters = myula.prox_iters;
                Ok(myula_step(
                    current,
                    |w| {
                        let mut g = w.sub(anchor);
                        g.scale(inv_rho2);
                        g
                    },
                    |w| tv_prox(w, &prox_spec, iters),
                    myula,
                    rng,
                ))
            }
        }
    }

    /// Minimizer of the coupled conditional, the deterministic counterpart of
    /// [`Potential::draw_conditional`]. `warm` seeds iterative solvers.
    pub fn conditional_mode(
        &self,
        anchor: &ImageField,
        rho2: f64,
        warm: &ImageField,
        params: &ModeParams,
    ) -> Result<ImageField> {
        if !(rho2 > 0.0) {
            return Err(Error::Parameter("rho^2 must be positive".into()));
        }
        match self {
            Potential::Zero => Ok(anchor.clone()),
            Potential::DiagonalQuadratic { mean, precision } => {
                let inv_rho2 = 1.0 / rho2;
                let mut out = ImageField::zeros(anchor.rows(), anchor.cols());
                for idx in 0..out.len() {
                    let q = precision[idx] + inv_rho2;
                    out.as_mut_slice()[idx] = (precision[idx] * mean.as_slice()[idx]
                        + inv_rho2 * anchor.as_slice()[idx])
                        / q;
                }
                Ok(out)
            }
            Potential::CirculantQuadratic { .. } => {
                let spec = self.gaussian_spec(anchor, rho2)?;
                crate::gaussian::fourier_solve(&spec)
            }
            Potential::CirculantGaussianData { op, omega, .. } => {
                let rhs = self.data_rhs(anchor, rho2)?;
                let inv_rho2 = 1.0 / rho2;
                let apply = |x: &ImageField| -> ImageField {
                    let hx = op.apply(x).expect("shape checked");
                    let mut w = hx;
                    for (v, om) in w.as_mut_slice().iter_mut().zip(omega.diag()) {
                        *v *= om;
                    }
                    let mut out = op.adjoint_apply(&w).expect("shape checked");
                    out.add_scaled(x, inv_rho2);
                    out
                };
                let result = cg_solve(apply, &rhs, Some(warm), &params.cg)?;
                if !result.converged {
                    return Err(Error::Config(format!(
                        "x-step conjugate gradient stalled at residual {:.3e}",
                        result.relative_residual
                    )));
                }
                Ok(result.x)
            }
            Potential::MaskGaussianData { mask, sigma2, y } => {
                sherman_morrison_mean(mask, *sigma2, rho2, y, anchor)
            }
            Potential::Tv { weight, .. } => {
                let spec = ProxSpec::new(*weight, rho2)?;
                Ok(tv_prox(anchor, &spec, params.prox_iters))
            }
        }
    }
}

/// Knobs for deterministic conditional minimization.
#[derive(Clone, Debug)]
pub struct ModeParams {
    pub cg: CgConfig,
    pub prox_iters: usize,
}

impl Default for ModeParams {
    fn default() -> Self {
        ModeParams { cg: CgConfig::default(), prox_iters: 50 }
    }
}
