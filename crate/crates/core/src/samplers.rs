//! The split (SP) and split-augmented (SPA) Gibbs samplers, their
//! generalized multi-block variant, and chain recording.
//!
//! A sweep updates x, then z, then u (SPA only), each from its exact
//! conditional under the coupled joint distribution; `alpha2 = 0` selects the
//! split sampler, where u stays pinned at zero.

use crate::admm::{cg_solve, CgConfig};
use crate::error::{Error, Result};
use crate::field::ImageField;
use crate::gaussian::{sample_fourier_diagonal, AuxState, GaussianSpec, PrecisionTerm};
use crate::operators::{CirculantOperator, DiagonalOperator, GradientOperator, LinearOperator, MaskOperator};
use crate::potentials::Potential;
use crate::rng::RandomStream;

/// A two-term split model: data potential `f`, regularizing potential `g`,
/// coupling scale `rho2` and augmentation scale `alpha2` (0 selects SP).
#[derive(Clone)]
pub struct SplitModel {
    pub f_term: Potential,
    pub g_term: Potential,
    pub rho2: f64,
    pub alpha2: f64,
}

impl SplitModel {
    pub fn new(f_term: Potential, g_term: Potential, rho2: f64, alpha2: f64) -> Result<Self> {
        if !(rho2 > 0.0) {
            return Err(Error::Parameter("rho^2 must be positive".into()));
        }
        if !(alpha2 >= 0.0) || !alpha2.is_finite() {
            return Err(Error::Parameter("alpha^2 must be finite and >= 0".into()));
        }
        Ok(SplitModel { f_term, g_term, rho2, alpha2 })
    }

    pub fn is_augmented(&self) -> bool {
        self.alpha2 > 0.0
    }

    /// `f(x) + g(x)`: the negative log target density at `x` up to an
    /// additive constant, the scalar chain summary.
    pub fn target_potential(&self, x: &ImageField) -> Result<f64> {
        Ok(self.f_term.eval(x)? + self.g_term.eval(x)?)
    }
}

/// Current chain state. `u` is all-zero and frozen for SP runs. The warm
/// auxiliary states of the conditional samplers ride along.
#[derive(Clone)]
pub struct ChainState {
    pub x: ImageField,
    pub z: ImageField,
    pub u: ImageField,
    pub sweep_index: u64,
    pub f_aux: AuxState,
    pub g_aux: AuxState,
}

impl ChainState {
    /// Starts a chain at `z0` (x copies the initialization, u = 0).
    pub fn from_init(z0: &ImageField) -> Self {
        ChainState {
            x: z0.clone(),
            z: z0.clone(),
            u: ImageField::zeros(z0.rows(), z0.cols()),
            sweep_index: 0,
            f_aux: AuxState::default(),
            g_aux: AuxState::default(),
        }
    }
}

/// One sweep of the split sampler: draw `x | z`, then `z | x`.
pub fn sp_sweep(model: &SplitModel, state: &mut ChainState, rng: &mut RandomStream) -> Result<()> {
    if model.is_augmented() {
        return Err(Error::Config("sp_sweep requires alpha^2 = 0".into()));
    }
    state.x = model
        .f_term
        .draw_conditional(&state.x, &state.z, model.rho2, &mut state.f_aux, rng)?;
    state.z = model
        .g_term
        .draw_conditional(&state.z, &state.x, model.rho2, &mut state.g_aux, rng)?;
    state.sweep_index += 1;
    Ok(())
}

/// One sweep of the split-augmented sampler: draw `x | (z - u)`, then
/// `z | (x + u)`, then the closed-form Gaussian
/// `u ~ N(alpha^2/(rho^2 + alpha^2) (z - x), alpha^2 rho^2/(alpha^2 + rho^2) I)`.
pub fn spa_sweep(model: &SplitModel, state: &mut ChainState, rng: &mut RandomStream) -> Result<()> {
    if !model.is_augmented() {
        return Err(Error::Config("spa_sweep requires alpha^2 > 0".into()));
    }
    let anchor_x = state.z.sub(&state.u);
    state.x = model
        .f_term
        .draw_conditional(&state.x, &anchor_x, model.rho2, &mut state.f_aux, rng)?;
    let anchor_z = state.x.add(&state.u);
    state.z = model
        .g_term
        .draw_conditional(&state.z, &anchor_z, model.rho2, &mut state.g_aux, rng)?;

    let (rho2, alpha2) = (model.rho2, model.alpha2);
    let shrink = alpha2 / (rho2 + alpha2);
    let sd = (alpha2 * rho2 / (alpha2 + rho2)).sqrt();
    let mut u = state.z.sub(&state.x);
    u.scale(shrink);
    for v in u.as_mut_slice().iter_mut() {
        *v += sd * rng.normal();
    }
    state.u = u;
    state.sweep_index += 1;
    Ok(())
}

/// Dispatches on `alpha2`.
pub fn sweep(model: &SplitModel, state: &mut ChainState, rng: &mut RandomStream) -> Result<()> {
    if model.is_augmented() {
        spa_sweep(model, state, rng)
    } else {
        sp_sweep(model, state, rng)
    }
}

/// Post burn-in history and scalar summaries of one chain.
#[derive(Clone, Debug)]
pub struct ChainRecord {
    /// `f(x) + g(x)` at every sweep, including burn-in.
    pub scalar_trace: Vec<f64>,
    /// Number of post burn-in samples folded into the moments.
    pub kept: usize,
    pub mean_x: ImageField,
    pub mean_z: ImageField,
    pub mean_u: ImageField,
    /// Welford sum of squared deviations of x around its running mean.
    m2_x: ImageField,
    /// Thinned kept samples of x, when retention is enabled.
    pub kept_x: Option<Vec<ImageField>>,
}

impl ChainRecord {
    fn new(shape: (usize, usize), keep_samples: bool) -> Self {
        ChainRecord {
            scalar_trace: Vec::new(),
            kept: 0,
            mean_x: ImageField::zeros(shape.0, shape.1),
            mean_z: ImageField::zeros(shape.0, shape.1),
            mean_u: ImageField::zeros(shape.0, shape.1),
            m2_x: ImageField::zeros(shape.0, shape.1),
            kept_x: keep_samples.then(Vec::new),
        }
    }

    fn accumulate(&mut self, x: &ImageField, z: &ImageField, u: &ImageField, thin: usize) {
        self.kept += 1;
        let n = self.kept as f64;
        // Welford update for x, plain running means for z and u.
        for idx in 0..self.mean_x.len() {
            let xi = x.as_slice()[idx];
            let delta = xi - self.mean_x.as_slice()[idx];
            self.mean_x.as_mut_slice()[idx] += delta / n;
            let delta2 = xi - self.mean_x.as_slice()[idx];
            self.m2_x.as_mut_slice()[idx] += delta * delta2;
            self.mean_z.as_mut_slice()[idx] +=
                (z.as_slice()[idx] - self.mean_z.as_slice()[idx]) / n;
            self.mean_u.as_mut_slice()[idx] +=
                (u.as_slice()[idx] - self.mean_u.as_slice()[idx]) / n;
        }
        if let Some(kept) = self.kept_x.as_mut() {
            if (self.kept - 1) % thin == 0 {
                kept.push(x.clone());
            }
        }
    }

    /// Starts an empty record for an externally driven chain (a kernel that
    /// is not one of the split sweeps, e.g. a direct Langevin baseline).
    pub fn new_external(shape: (usize, usize), keep_samples: bool) -> Self {
        Self::new(shape, keep_samples)
    }

    /// Records one externally produced state: the scalar summary always goes
    /// into the trace; when `keep` is set, `x` is folded into the moments
    /// (the z-mean mirrors x, u stays zero).
    pub fn push_external(&mut self, scalar: f64, x: &ImageField, keep: bool, thin: usize) {
        self.scalar_trace.push(scalar);
        if keep {
            let u = ImageField::zeros(x.rows(), x.cols());
            self.accumulate(x, x, &u, thin.max(1));
        }
    }

    /// Per-pixel sample variance of x (unbiased), zero until two samples.
    pub fn var_x(&self) -> ImageField {
        if self.kept < 2 {
            return ImageField::zeros(self.mean_x.rows(), self.mean_x.cols());
        }
        self.m2_x.scaled(1.0 / (self.kept as f64 - 1.0))
    }
}

/// Runs `t_mc` sweeps, recording the scalar trace every sweep and folding
/// sweeps after the first `t_bi` into moments (and into the thinned sample
/// history when `keep_samples` is set).
pub fn run_chain(
    model: &SplitModel,
    t_mc: usize,
    t_bi: usize,
    init_z: &ImageField,
    keep_samples: bool,
    thin: usize,
    rng: &mut RandomStream,
) -> Result<ChainRecord> {
    if t_mc == 0 || t_bi >= t_mc {
        return Err(Error::Parameter(format!(
            "need 0 <= burn-in < total sweeps, got t_bi = {t_bi}, t_mc = {t_mc}"
        )));
    }
    let thin = thin.max(1);
    let mut state = ChainState::from_init(init_z);
    let mut record = ChainRecord::new(init_z.shape(), keep_samples);
    record.scalar_trace.reserve(t_mc);
    for t in 0..t_mc {
        sweep(model, &mut state, rng)?;
        record.scalar_trace.push(model.target_potential(&state.x)?);
        if t >= t_bi {
            record.accumulate(&state.x, &state.z, &state.u, thin);
        }
    }
    state.x.check_finite()?;
    state.z.check_finite()?;
    Ok(record)
}

/// One block of the generalized sampler: a potential `h` acting on `K x`
/// through its own splitting pair `(z, u)`.
pub struct MultiBlock {
    pub potential: Potential,
    pub op: BlockOperator,
    pub z: ImageField,
    pub u: ImageField,
    pub aux: AuxState,
}

impl MultiBlock {
    pub fn new(potential: Potential, op: BlockOperator, z0: ImageField) -> Self {
        let u = ImageField::zeros(z0.rows(), z0.cols());
        MultiBlock { potential, op, z: z0, u, aux: AuxState::default() }
    }
}

/// Operators admissible as block maps `K_i`.
#[derive(Clone)]
pub enum BlockOperator {
    Identity { rows: usize, cols: usize },
    Circulant(CirculantOperator),
    Gradient(GradientOperator),
    Mask(MaskOperator),
    Diagonal(DiagonalOperator),
}

impl BlockOperator {
    pub fn as_linear(&self) -> Option<&dyn LinearOperator> {
        match self {
            BlockOperator::Identity { .. } => None,
            BlockOperator::Circulant(op) => Some(op),
            BlockOperator::Gradient(op) => Some(op),
            BlockOperator::Mask(op) => Some(op),
            BlockOperator::Diagonal(op) => Some(op),
        }
    }

    pub fn apply(&self, x: &ImageField) -> Result<ImageField> {
        match self {
            BlockOperator::Identity { rows, cols } => {
                if x.shape() != (*rows, *cols) {
                    return Err(Error::Dimension("identity block operand shape".into()));
                }
                Ok(x.clone())
            }
            _ => self.as_linear().unwrap().apply(x),
        }
    }

    pub fn adjoint_apply(&self, y: &ImageField) -> Result<ImageField> {
        match self {
            BlockOperator::Identity { rows, cols } => {
                if y.shape() != (*rows, *cols) {
                    return Err(Error::Dimension("identity block operand shape".into()));
                }
                Ok(y.clone())
            }
            _ => self.as_linear().unwrap().adjoint_apply(y),
        }
    }

    pub fn output_shape(&self) -> (usize, usize) {
        match self {
            BlockOperator::Identity { rows, cols } => (*rows, *cols),
            _ => self.as_linear().unwrap().output_shape(),
        }
    }

    fn circulant(&self) -> Option<CirculantForSymbol> {
        match self {
            BlockOperator::Identity { .. } => Some(CirculantForSymbol::Identity),
            BlockOperator::Circulant(op) => Some(CirculantForSymbol::Op(op.clone())),
            _ => None,
        }
    }
}

enum CirculantForSymbol {
    Identity,
    Op(CirculantOperator),
}

/// The generalized multi-block model over blocks `(h_i, K_i, z_i, u_i)`.
pub struct MultiBlockModel {
    pub blocks: Vec<MultiBlock>,
    pub rho2: f64,
    pub alpha2: f64,
    pub cg: CgConfig,
    /// Shape of the variable of interest.
    pub shape: (usize, usize),
}

impl MultiBlockModel {
    pub fn new(blocks: Vec<MultiBlock>, rho2: f64, alpha2: f64, shape: (usize, usize)) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Config("multi-block model needs at least one block".into()));
        }
        if !(rho2 > 0.0) || !(alpha2 >= 0.0) {
            return Err(Error::Parameter("need rho^2 > 0 and alpha^2 >= 0".into()));
        }
        for block in &blocks {
            if block.z.shape() != block.op.output_shape() {
                return Err(Error::Dimension("block z shape != K output shape".into()));
            }
        }
        Ok(MultiBlockModel { blocks, rho2, alpha2, cg: CgConfig::default(), shape })
    }

    fn all_circulant(&self) -> bool {
        self.blocks.iter().all(|b| b.op.circulant().is_some())
    }

    /// Draws x from its Gaussian conditional with precision
    /// `rho^{-2} sum_i K_i^T K_i` and rhs `rho^{-2} sum_i K_i^T (z_i - u_i)`.
    fn draw_x(&mut self, rng: &mut RandomStream) -> Result<ImageField> {
        let inv_rho2 = 1.0 / self.rho2;
        let (rows, cols) = self.shape;
        let mut rhs = ImageField::zeros(rows, cols);
        for block in &self.blocks {
            let target = block.z.sub(&block.u);
            rhs.add_scaled(&block.op.adjoint_apply(&target)?, inv_rho2);
        }
        if self.all_circulant() {
            // Fourier route: the precision symbol is rho^{-2} sum |lambda_i|^2.
            let mut terms = Vec::new();
            let mut identity_weight = 0.0;
            for block in &self.blocks {
                match block.op.circulant().unwrap() {
                    CirculantForSymbol::Identity => identity_weight += inv_rho2,
                    CirculantForSymbol::Op(op) => {
                        terms.push(PrecisionTerm::CirculantQuadratic { weight: inv_rho2, op })
                    }
                }
            }
            if identity_weight > 0.0 {
                terms.push(PrecisionTerm::ScaledIdentity(identity_weight));
            }
            let spec = GaussianSpec::new(rhs, terms).map_err(|e| match e {
                Error::Parameter(msg) => Error::Config(format!("singular x-precision: {msg}")),
                other => other,
            })?;
            return sample_fourier_diagonal(&spec, rng);
        }
        // Perturbation-optimization route: perturb the rhs so that solving
        // Q x = b + rho^{-1} sum K_i^T xi_i yields an exact draw, then solve
        // with conjugate gradients.
        let mut perturbed = rhs;
        for block in &self.blocks {
            let (orows, ocols) = block.op.output_shape();
            let noise = rng.normal_field(orows, ocols);
            perturbed.add_scaled(&block.op.adjoint_apply(&noise)?, inv_rho2.sqrt());
        }
        let blocks = &self.blocks;
        let apply = move |x: &ImageField| -> ImageField {
            let mut out = ImageField::zeros(x.rows(), x.cols());
            for block in blocks {
                let kx = block.op.apply(x).expect("block shapes validated");
                out.add_scaled(&block.op.adjoint_apply(&kx).expect("block shapes validated"), inv_rho2);
            }
            out
        };
        let result = cg_solve(apply, &perturbed, None, &self.cg)?;
        if !result.converged {
            return Err(Error::Config(format!(
                "multi-block x-draw: cg stalled at residual {:.3e} (singular precision?)",
                result.relative_residual
            )));
        }
        Ok(result.x)
    }

    /// One sweep: x, then every z_i, then every u_i (when alpha^2 > 0).
    pub fn sweep(&mut self, x: &mut ImageField, rng: &mut RandomStream) -> Result<()> {
        *x = self.draw_x(rng)?;
        let rho2 = self.rho2;
        let alpha2 = self.alpha2;
        for block in self.blocks.iter_mut() {
            let kx = block.op.apply(x)?;
            let anchor = kx.add(&block.u);
            block.z =
                block.potential.draw_conditional(&block.z, &anchor, rho2, &mut block.aux, rng)?;
            if alpha2 > 0.0 {
                let shrink = alpha2 / (rho2 + alpha2);
                let sd = (alpha2 * rho2 / (alpha2 + rho2)).sqrt();
                let mut u = block.z.sub(&kx);
                u.scale(shrink);
                for v in u.as_mut_slice().iter_mut() {
                    *v += sd * rng.normal();
                }
                block.u = u;
            }
        }
        Ok(())
    }
}
