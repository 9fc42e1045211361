//! Command orchestration behind the CLI: builds problems from a
//! [`RunConfig`], fans replicates out across threads (one directory per
//! replicate), and writes aggregate metrics.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::{Command, RunConfig};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::experiments::metrics::batch_means_se;
use crate::experiments::{
    images, run_deconv, run_inpaint, synthesize_deconv, synthesize_inpaint, Method, NoiseMixture,
    RunParams,
};
use crate::field::ImageField;
use crate::gaussian::{
    sample_aux_dissociated, sample_fourier_diagonal,
    sample_sherman_morrison, default_mu1, GaussianSpec, NoisePrecision, PrecisionTerm,
};
use crate::io;
use crate::operators::{CirculantOperator, LinearOperator, MaskOperator};
use crate::rng::RandomStream;

/// Loads a bundled image by name or an image file by path.
pub fn resolve_image(name: &str, rows: usize, cols: usize) -> Result<ImageField> {
    if let Some(img) = images::bundled(name, rows, cols) {
        return Ok(img);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Error::Usage(format!(
            "--image '{name}' is neither a bundled image ({}) nor an existing file",
            images::BUNDLED_NAMES.join("|")
        )));
    }
    let img = io::read_image(path)?;
    if img.shape() != (rows, cols) {
        return Err(Error::Usage(format!(
            "image {name} is {}x{}, run asks for {rows}x{cols}",
            img.rows(),
            img.cols()
        )));
    }
    Ok(img)
}

fn run_params(config: &RunConfig) -> Result<RunParams> {
    let mut params = RunParams::new(config.rho, config.alpha, config.t_mc, config.t_bi)?;
    params.keep_samples = config.keep_samples;
    params.thin = config.thin;
    params.prox_iters = config.prox_iters;
    Ok(params)
}

/// Executes one validated CLI invocation.
pub fn execute(config: &RunConfig) -> Result<()> {
    match config.command {
        Command::Deconv => run_replicated(config, replicate_deconv),
        Command::Inpaint => run_replicated(config, replicate_inpaint),
        Command::AdmmSolve => run_replicated(config, replicate_admm),
        Command::GaussianCheck => gaussian_check(config),
    }
}

fn replicate_deconv(config: &RunConfig, replicate: usize) -> Result<BTreeMap<String, f64>> {
    let truth = resolve_image(&config.image, config.rows, config.cols)?;
    let blur = CirculantOperator::gaussian_blur(config.rows, config.cols, config.blur_sigma)?;
    let mixture = NoiseMixture::new(config.mix_weight, config.mix_kappa1, config.mix_kappa2)?;
    let base = RandomStream::new(config.seed, replicate as u64);
    let mut synth_rng = base.substream(0);
    let mut chain_rng = base.substream(1);
    let problem = synthesize_deconv(&truth, &blur, config.gamma, mixture, &mut synth_rng)?;
    let params = run_params(config)?;
    let run = run_deconv(&problem, Some(&truth), config.method, &params, &mut chain_rng)?;
    let dir = io::replicate_dir(&config.output, replicate);
    io::write_report(&run.bundle, &run.output, &dir)?;
    Ok(run.bundle.metrics)
}

fn replicate_inpaint(config: &RunConfig, replicate: usize) -> Result<BTreeMap<String, f64>> {
    let truth = resolve_image(&config.image, config.rows, config.cols)?;
    let base = RandomStream::new(config.seed, replicate as u64);
    let mut synth_rng = base.substream(0);
    let mut chain_rng = base.substream(1);
    let problem = synthesize_inpaint(
        &truth,
        config.keep_fraction,
        config.snr_db,
        config.beta,
        &mut synth_rng,
    )?;
    let params = run_params(config)?;
    let run = run_inpaint(&problem, Some(&truth), config.method, &params, &mut chain_rng)?;
    let dir = io::replicate_dir(&config.output, replicate);
    io::write_report(&run.bundle, &run.output, &dir)?;
    Ok(run.bundle.metrics)
}

fn replicate_admm(config: &RunConfig, replicate: usize) -> Result<BTreeMap<String, f64>> {
    let mut salsa_config = config.clone();
    salsa_config.method = Method::Salsa;
    replicate_inpaint(&salsa_config, replicate)
}

fn run_replicated(
    config: &RunConfig,
    one: fn(&RunConfig, usize) -> Result<BTreeMap<String, f64>>,
) -> Result<()> {
    std::fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    let replicate_metrics: Vec<BTreeMap<String, f64>> = if config.replicates == 1 {
        vec![one(config, 0)?]
    } else {
        let mut slots: Vec<Option<Result<BTreeMap<String, f64>>>> =
            (0..config.replicates).map(|_| None).collect();
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        std::thread::scope(|scope| {
            for (worker, chunk) in slots.chunks_mut(config.replicates.div_ceil(workers)).enumerate()
            {
                let first = worker * config.replicates.div_ceil(workers);
                scope.spawn(move || {
                    for (offset, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(one(config, first + offset));
                    }
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.expect("every replicate ran"))
            .collect::<Result<Vec<_>>>()?
    };
    io::write_aggregate_csv(&config.output.join("aggregate.csv"), &replicate_metrics)?;
    for (name, value) in &replicate_metrics[0] {
        io::emit(&format!(
            "{} {} replicate_00 {name} = {value:.4}",
            config.command.name(),
            config.method.name()
        ));
    }
    io::emit(&format!(
        "{}: {} replicate(s) written under {}",
        config.command.name(),
        config.replicates,
        config.output.display()
    ));
    Ok(())
}

struct CheckOutcome {
    sampler: &'static str,
    max_mean_z: f64,
    max_var_z: f64,
}

fn moment_z_scores(
    draws: &[Vec<f64>],
    exact_mean: &[f64],
    exact_var: &[f64],
    batches: usize,
) -> Result<(f64, f64)> {
    let n = draws.len();
    let dim = exact_mean.len();
    let mut max_mean_z = 0.0f64;
    let mut max_var_z = 0.0f64;
    let mut series = vec![0.0; n];
    for pixel in 0..dim {
        for (t, draw) in draws.iter().enumerate() {
            series[t] = draw[pixel];
        }
        let mean = series.iter().sum::<f64>() / n as f64;
        let se_mean = batch_means_se(&series, batches)?;
        max_mean_z = max_mean_z.max((mean - exact_mean[pixel]).abs() / se_mean.max(1e-300));

        let centered: Vec<f64> = series.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = centered.iter().sum::<f64>() / (n as f64 - 1.0);
        let se_var = batch_means_se(&centered, batches)?;
        max_var_z = max_var_z.max((var - exact_var[pixel]).abs() / se_var.max(1e-300));
    }
    Ok((max_mean_z, max_var_z))
}

fn dense_moments(q: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let factor = q.cholesky()?;
    let mean = factor.solve(b);
    let n = q.n();
    let mut var = vec![0.0; n];
    let mut basis = vec![0.0; n];
    for i in 0..n {
        basis[i] = 1.0;
        var[i] = factor.solve(&basis)[i];
        basis[i] = 0.0;
    }
    Ok((mean, var))
}

/// Runs the three structured samplers against the dense Cholesky reference
/// on a small lattice and writes `gaussian_check.csv`.
fn gaussian_check(config: &RunConfig) -> Result<()> {
    let (rows, cols) = (config.rows.min(8), config.cols.min(8));
    let n = rows * cols;
    let draws = config.draws;
    io::emit(&format!(
        "gaussian-check: {rows}x{cols} lattice, {draws} draws per sampler"
    ));
    let mut outcomes = Vec::new();
    let mut rng = RandomStream::new(config.seed, 0);

    // Fourier-diagonal sampler on gamma L^T L + rho^{-2} I.
    {
        let (gamma, rho) = (6e-3, 20.0);
        let reg = CirculantOperator::laplacian(rows, cols)?;
        let b = ImageField::from_fn(rows, cols, |i, j| ((i + 2 * j) as f64 * 0.37).sin());
        let spec = GaussianSpec::new(
            b.clone(),
            vec![
                PrecisionTerm::CirculantQuadratic { weight: gamma, op: reg },
                PrecisionTerm::ScaledIdentity(1.0 / (rho * rho)),
            ],
        )?;
        let dense = spec.dense_precision()?;
        let (mean, var) = dense_moments(&dense, b.as_slice())?;
        let samples: Vec<Vec<f64>> = (0..draws)
            .map(|_| sample_fourier_diagonal(&spec, &mut rng).map(ImageField::into_values))
            .collect::<Result<_>>()?;
        let (mz, vz) = moment_z_scores(&samples, &mean, &var, 50)?;
        outcomes.push(CheckOutcome { sampler: "fourier_diagonal", max_mean_z: mz, max_var_z: vz });
    }

    // Auxiliary dissociation on H^T Omega H + rho^{-2} I with mixture noise.
    {
        let rho2 = 400.0;
        let h = CirculantOperator::gaussian_blur(rows, cols, 1.0)?;
        let sigmas: Vec<f64> =
            (0..n).map(|_| if rng.uniform() < 0.35 { 40.0 } else { 13.0 }).collect();
        let omega = NoisePrecision::from_sigmas(&sigmas)?;
        let anchor = ImageField::from_fn(rows, cols, |i, j| (i as f64 - j as f64) * 0.4);
        let y = ImageField::from_fn(rows, cols, |i, j| ((i * cols + j) as f64 * 0.11).cos());
        let mut weighted = y.clone();
        for (v, om) in weighted.as_mut_slice().iter_mut().zip(omega.diag()) {
            *v *= om;
        }
        let mut rhs = h.adjoint_apply(&weighted)?;
        rhs.add_scaled(&anchor, 1.0 / rho2);

        let mut dense = DenseMatrix::gram_of_operator(&h, Some(omega.diag()))?;
        dense.add_scaled_identity(1.0 / rho2);
        let (mean, var) = dense_moments(&dense, rhs.as_slice())?;

        let mu1 = default_mu1(&omega);
        let mut v = crate::gaussian::init_aux_v(&h, &omega, mu1, &anchor, &mut rng)?;
        // burn the sub-chain in before recording
        let mut x;
        for _ in 0..200 {
            let out = sample_aux_dissociated(&h, &omega, rho2, &rhs, &v, mu1, &mut rng)?;
            v = out.1;
        }
        let mut samples = Vec::with_capacity(draws);
        for _ in 0..draws {
            let out = sample_aux_dissociated(&h, &omega, rho2, &rhs, &v, mu1, &mut rng)?;
            x = out.0;
            v = out.1;
            samples.push(x.into_values());
        }
        let (mz, vz) = moment_z_scores(&samples, &mean, &var, 50)?;
        outcomes.push(CheckOutcome { sampler: "aux_dissociated", max_mean_z: mz, max_var_z: vz });
    }

    // Sherman-Morrison draw for the mask conditional.
    {
        let (sigma2, rho2) = (2.0, 4.0);
        let kept = rng.sample_indices(n, (n * 3) / 5);
        let mask = MaskOperator::new(rows, cols, kept)?;
        let y = ImageField::from_fn(mask.observed_len(), 1, |i, _| (i as f64 * 0.61).sin() * 2.0);
        let anchor = ImageField::from_fn(rows, cols, |i, j| 0.3 * i as f64 - 0.2 * j as f64);
        let mut dense = DenseMatrix::gram_of_operator(&mask, None)?;
        for (i, d) in (0..n).map(|i| (i, 1.0 / sigma2)) {
            if mask.is_observed(i) {
                let v = dense.get(i, i) * d;
                dense.set(i, i, v);
            }
        }
        dense.add_scaled_identity(1.0 / rho2);
        let mut rhs = mask.adjoint_apply(&y)?.scaled(1.0 / sigma2);
        rhs.add_scaled(&anchor, 1.0 / rho2);
        let (mean, var) = dense_moments(&dense, rhs.as_slice())?;
        let samples: Vec<Vec<f64>> = (0..draws)
            .map(|_| {
                sample_sherman_morrison(&mask, sigma2, rho2, &y, &anchor, &mut rng)
                    .map(ImageField::into_values)
            })
            .collect::<Result<_>>()?;
        let (mz, vz) = moment_z_scores(&samples, &mean, &var, 50)?;
        outcomes.push(CheckOutcome { sampler: "sherman_morrison", max_mean_z: mz, max_var_z: vz });
    }

    std::fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    let mut text = String::from("sampler,max_mean_z,max_var_z,pass\n");
    let mut all_pass = true;
    for o in &outcomes {
        let pass = o.max_mean_z <= 4.0 && o.max_var_z <= 4.0;
        all_pass &= pass;
        text.push_str(&format!(
            "{},{:.4},{:.4},{}\n",
            o.sampler, o.max_mean_z, o.max_var_z, pass
        ));
        io::emit(&format!(
            "gaussian-check {}: max |z(mean)| = {:.2}, max |z(var)| = {:.2} -> {}",
            o.sampler,
            o.max_mean_z,
            o.max_var_z,
            if pass { "pass" } else { "FAIL" }
        ));
    }
    let path = config.output.join("gaussian_check.csv");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    if !all_pass {
        return Err(Error::Numeric(
            "a structured sampler disagrees with the dense reference beyond 4 standard errors"
                .into(),
        ));
    }
    Ok(())
}
