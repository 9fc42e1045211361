//! Cross-module invariants checked against dense or long-run references.

mod common;

use common::*;
use split_gibbs::admm::{admm_solve, cg_solve_observed, AdmmConfig, CgConfig};
use split_gibbs::dense::DenseMatrix;
use split_gibbs::experiments::metrics::batch_means_se;
use split_gibbs::experiments::{
    images, run_inpaint, synthesize_inpaint, Method, RunParams,
};
use split_gibbs::field::ImageField;
use split_gibbs::gaussian::{
    init_aux_v, sample_aux_dissociated, NoisePrecision,
};
use split_gibbs::operators::{
    CirculantOperator, DiagonalOperator, GradientOperator, LinearOperator, MaskOperator,
};
use split_gibbs::potentials::Potential;
use split_gibbs::rng::RandomStream;
use split_gibbs::samplers::{
    run_chain, BlockOperator, MultiBlock, MultiBlockModel, SplitModel,
};

fn operators_under_test(rows: usize, cols: usize) -> Vec<(&'static str, Box<dyn LinearOperator>)> {
    let mut rng = RandomStream::new(101, 0);
    let kernel = rng.normal_field(3, 3);
    vec![
        ("circulant", Box::new(CirculantOperator::from_kernel(&kernel, rows, cols).unwrap())),
        (
            "mask",
            Box::new(
                MaskOperator::new(rows, cols, rng.sample_indices(rows * cols, rows * cols / 2))
                    .unwrap(),
            ),
        ),
        (
            "diagonal",
            Box::new(
                DiagonalOperator::new(
                    rows,
                    cols,
                    (0..rows * cols).map(|i| 0.2 + (i % 7) as f64).collect(),
                )
                .unwrap(),
            ),
        ),
        ("gradient", Box::new(GradientOperator::new(rows, cols))),
    ]
}

#[test]
fn densified_matrices_reproduce_apply_and_adjoint() {
    let (rows, cols) = (5, 6);
    let mut rng = RandomStream::new(7, 0);
    for (name, op) in operators_under_test(rows, cols) {
        let dense = densify(op.as_ref());
        for _ in 0..5 {
            let x = rng.normal_field(rows, cols);
            let fwd = op.apply(&x).unwrap();
            let expected = mat_vec(&dense, x.as_slice());
            for (a, e) in fwd.as_slice().iter().zip(&expected) {
                assert!((a - e).abs() < 1e-10, "{name} apply disagrees with its matrix");
            }
            let (or, oc) = op.output_shape();
            let y = rng.normal_field(or, oc);
            let adj = op.adjoint_apply(&y).unwrap();
            let expected = mat_transpose_vec(&dense, y.as_slice());
            for (a, e) in adj.as_slice().iter().zip(&expected) {
                assert!((a - e).abs() < 1e-10, "{name} adjoint disagrees with its matrix");
            }
        }
    }
}

#[test]
fn adjoint_inner_product_identity_on_random_4x4() {
    let mut rng = RandomStream::new(13, 0);
    for (name, op) in operators_under_test(4, 4) {
        for _ in 0..20 {
            let x = rng.normal_field(4, 4);
            let (or, oc) = op.output_shape();
            let y = rng.normal_field(or, oc);
            let lhs = op.apply(&x).unwrap().dot(&y);
            let rhs = x.dot(&op.adjoint_apply(&y).unwrap());
            assert!((lhs - rhs).abs() < 1e-10, "{name}: <Kx,y> = {lhs} but <x,K*y> = {rhs}");
        }
    }
}

#[test]
fn sherman_morrison_covariance_identity_holds_densely() {
    // (sigma^{-2} H^T H + rho^{-2} I) * Cov = I with the stated diagonal Cov
    let (rows, cols, sigma2, rho2) = (4, 4, 0.7, 2.3);
    let n = rows * cols;
    let mut rng = RandomStream::new(3, 0);
    let mask = MaskOperator::new(rows, cols, rng.sample_indices(n, 9)).unwrap();
    let var_obs = sigma2 * rho2 / (sigma2 + rho2);
    for i in 0..n {
        for j in 0..n {
            // dense precision entry
            let q = if i == j {
                (if mask.is_observed(i) { 1.0 / sigma2 } else { 0.0 }) + 1.0 / rho2
            } else {
                0.0
            };
            let cov = if i == j {
                if mask.is_observed(i) {
                    var_obs
                } else {
                    rho2
                }
            } else {
                0.0
            };
            let prod: f64 = q * cov;
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((prod - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn aux_dissociation_matches_dense_moments_under_scalar_noise() {
    let (rows, cols) = (8, 8);
    let n = rows * cols;
    let rho2 = 400.0;
    let h = CirculantOperator::gaussian_blur(rows, cols, 1.0).unwrap();
    let omega = NoisePrecision::isotropic(n, 9.0).unwrap();
    let mut rng = RandomStream::new(17, 0);
    let anchor = rng.normal_field(rows, cols).scaled(3.0);
    let y = rng.normal_field(rows, cols).scaled(2.0);
    let mut rhs = h.adjoint_apply(&y.scaled(1.0 / 9.0)).unwrap();
    rhs.add_scaled(&anchor, 1.0 / rho2);

    let mut dense = DenseMatrix::gram_of_operator(&h, Some(omega.diag())).unwrap();
    dense.add_scaled_identity(1.0 / rho2);
    let (exact_mean, exact_var) = dense_gaussian_moments(&dense, rhs.as_slice());

    let mu1 = split_gibbs::gaussian::default_mu1(&omega);
    let mut v = init_aux_v(&h, &omega, mu1, &anchor, &mut rng).unwrap();
    for _ in 0..200 {
        v = sample_aux_dissociated(&h, &omega, rho2, &rhs, &v, mu1, &mut rng).unwrap().1;
    }
    let draws = 20_000;
    let mut series = vec![Vec::with_capacity(draws); n];
    for _ in 0..draws {
        let (x, v_next) = sample_aux_dissociated(&h, &omega, rho2, &rhs, &v, mu1, &mut rng).unwrap();
        v = v_next;
        for (s, value) in series.iter_mut().zip(x.as_slice()) {
            s.push(*value);
        }
    }
    for pixel in 0..n {
        let s = &series[pixel];
        let mean = s.iter().sum::<f64>() / draws as f64;
        let se = batch_means_se(s, 50).unwrap();
        let z = (mean - exact_mean[pixel]).abs() / se;
        assert!(z <= 4.0, "pixel {pixel}: mean z-score {z:.2}");
        let centered: Vec<f64> = s.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = centered.iter().sum::<f64>() / (draws as f64 - 1.0);
        let se_var = batch_means_se(&centered, 50).unwrap();
        let zv = (var - exact_var[pixel]).abs() / se_var;
        assert!(zv <= 4.0, "pixel {pixel}: variance z-score {zv:.2}");
    }
}

fn gaussian_test_model(rows: usize, cols: usize, rho2: f64, alpha2: f64) -> (SplitModel, ImageField) {
    let mut rng = RandomStream::new(23, 9);
    let blur = CirculantOperator::gaussian_blur(rows, cols, 1.0).unwrap();
    let reg = CirculantOperator::laplacian(rows, cols).unwrap();
    let sigmas: Vec<f64> =
        (0..rows * cols).map(|_| if rng.uniform() < 0.35 { 40.0 } else { 13.0 }).collect();
    let truth = images::smooth(rows, cols);
    let mut y = blur.apply(&truth).unwrap();
    for (v, s) in y.as_mut_slice().iter_mut().zip(&sigmas) {
        *v += s * rng.normal();
    }
    let omega = NoisePrecision::from_sigmas(&sigmas).unwrap();
    let model = SplitModel::new(
        Potential::CirculantGaussianData { op: blur.clone(), omega, y: y.clone(), mu1: None },
        Potential::CirculantQuadratic { terms: vec![(6e-3, reg)], tau: 0.0 },
        rho2,
        alpha2,
    )
    .unwrap();
    let init = blur.adjoint_apply(&y).unwrap();
    (model, init)
}

/// Dense (Qf, bf, Qg, bg) of the Gaussian test model above.
fn dense_terms_of(model: &SplitModel) -> (DenseMatrix, Vec<f64>, DenseMatrix, Vec<f64>) {
    let (blur, omega, y) = match &model.f_term {
        Potential::CirculantGaussianData { op, omega, y, .. } => (op, omega, y),
        _ => unreachable!(),
    };
    let qf = DenseMatrix::gram_of_operator(blur, Some(omega.diag())).unwrap();
    let mut weighted = y.clone();
    for (v, om) in weighted.as_mut_slice().iter_mut().zip(omega.diag()) {
        *v *= om;
    }
    let bf = blur.adjoint_apply(&weighted).unwrap().into_values();
    let (gamma, reg) = match &model.g_term {
        Potential::CirculantQuadratic { terms, .. } => (&terms[0].0, &terms[0].1),
        _ => unreachable!(),
    };
    let mut qg = DenseMatrix::gram_of_operator(reg, None).unwrap();
    let n = qg.n();
    for i in 0..n {
        for j in 0..n {
            let v = qg.get(i, j) * gamma;
            qg.set(i, j, v);
        }
    }
    (qf, bf, qg, vec![0.0; n])
}

#[test]
fn sp_chain_is_exact_on_the_fully_gaussian_model() {
    let (rows, cols) = (8, 8);
    let n = rows * cols;
    let rho2 = 400.0;
    let (model, init) = gaussian_test_model(rows, cols, rho2, 0.0);
    let (qf, bf, qg, bg) = dense_terms_of(&model);
    let (exact_mean, exact_var) = split_joint_x_marginal(&qf, &bf, &qg, &bg, rho2);

    let mut rng = RandomStream::new(31, 0);
    let record = run_chain(&model, 20_500, 500, &init, true, 1, &mut rng).unwrap();
    let samples = record.kept_x.as_ref().unwrap();
    let mut series = vec![0.0; samples.len()];
    for pixel in 0..n {
        for (slot, s) in samples.iter().enumerate() {
            series[slot] = s.as_slice()[pixel];
        }
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let se = batch_means_se(&series, 50).unwrap();
        let z = (mean - exact_mean[pixel]).abs() / se;
        assert!(z <= 4.0, "pixel {pixel}: chain mean z-score {z:.2}");
        let centered: Vec<f64> = series.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = centered.iter().sum::<f64>() / (series.len() as f64 - 1.0);
        let se_var = batch_means_se(&centered, 50).unwrap();
        let zv = (var - exact_var[pixel]).abs() / se_var;
        assert!(zv <= 4.0, "pixel {pixel}: chain variance z-score {zv:.2}");
    }
}

#[test]
fn tiny_augmentation_reproduces_sp_moments() {
    // alpha^2 = 10^-2 vs exact SP under the same protocol: recorded first
    // and second moments agree within Monte Carlo noise.
    let (rows, cols) = (8, 8);
    let rho2 = 400.0;
    let (sp_model, init) = gaussian_test_model(rows, cols, rho2, 0.0);
    let (spa_model, _) = gaussian_test_model(rows, cols, rho2, 1e-2);
    let run = |model: &SplitModel, stream: u64| {
        let mut rng = RandomStream::new(37, stream);
        run_chain(model, 12_000, 500, &init, false, 1, &mut rng).unwrap()
    };
    let sp = run(&sp_model, 0);
    let spa = run(&spa_model, 1);
    for pixel in 0..rows * cols {
        let diff = (sp.mean_x.as_slice()[pixel] - spa.mean_x.as_slice()[pixel]).abs();
        // conservative MC band from the per-chain variances
        let band = 4.0
            * ((sp.var_x().as_slice()[pixel] + spa.var_x().as_slice()[pixel]) / 11_500.0).sqrt()
            * 6.0; // inflation for autocorrelation
        assert!(diff <= band, "pixel {pixel}: |SP - SPA| = {diff:.4} > band {band:.4}");
    }
}

#[test]
fn multiblock_two_blocks_run_and_x_step_matches_dense_oracle() {
    // blocks: K1 = circulant blur with a diagonal-quadratic data term,
    // K2 = discrete gradient with a zero potential (TV-like placement)
    let (rows, cols) = (4, 4);
    let n = rows * cols;
    let rho2 = 0.5;
    let blur = CirculantOperator::gaussian_blur(rows, cols, 0.8).unwrap();
    let grad = GradientOperator::new(rows, cols);
    let mut rng = RandomStream::new(41, 0);
    let y = rng.normal_field(rows, cols);
    let z1 = rng.normal_field(rows, cols);
    let z2 = rng.normal_field(2 * rows, cols);
    let mut model = MultiBlockModel::new(
        vec![
            MultiBlock::new(
                Potential::DiagonalQuadratic { mean: y.clone(), precision: vec![2.0; n] },
                BlockOperator::Circulant(blur.clone()),
                z1.clone(),
            ),
            MultiBlock::new(
                Potential::Zero,
                BlockOperator::Gradient(grad.clone()),
                z2.clone(),
            ),
        ],
        rho2,
        0.25,
        (rows, cols),
    )
    .unwrap();

    // dense oracle for the x-conditional at the initial block states:
    // Q = rho^{-2} (H^T H + Grad^T Grad), b = rho^{-2} (H^T z1 + Grad^T z2)
    let mut q = DenseMatrix::gram_of_operator(&blur, None).unwrap();
    let q_grad = DenseMatrix::gram_of_operator(&grad, None).unwrap();
    q.add_scaled(&q_grad, 1.0);
    let mut q_scaled = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            q_scaled.set(i, j, q.get(i, j) / rho2);
        }
    }
    let mut b = blur.adjoint_apply(&z1).unwrap();
    b.add_scaled(&grad.adjoint_apply(&z2).unwrap(), 1.0);
    b.scale(1.0 / rho2);
    let (exact_mean, exact_var) = dense_gaussian_moments(&q_scaled, b.as_slice());

    // repeated x-draws at frozen block states are i.i.d. from that Gaussian
    let draws = 20_000;
    let mut sums = vec![0.0; n];
    let mut sums2 = vec![0.0; n];
    let mut x = ImageField::zeros(rows, cols);
    for _ in 0..draws {
        model.blocks[0].z = z1.clone();
        model.blocks[0].u = ImageField::zeros(rows, cols);
        model.blocks[1].z = z2.clone();
        model.blocks[1].u = ImageField::zeros(2 * rows, cols);
        // draw x only: run a sweep and read x before blocks move
        model.sweep(&mut x, &mut rng).unwrap();
        for ((s, s2), v) in sums.iter_mut().zip(sums2.iter_mut()).zip(x.as_slice()) {
            *s += v;
            *s2 += v * v;
        }
    }
    for pixel in 0..n {
        let mean = sums[pixel] / draws as f64;
        let var = sums2[pixel] / draws as f64 - mean * mean;
        let se = (exact_var[pixel] / draws as f64).sqrt();
        assert!(
            (mean - exact_mean[pixel]).abs() <= 4.0 * se,
            "pixel {pixel} mean {mean:.4} vs {:.4}",
            exact_mean[pixel]
        );
        let se_var = exact_var[pixel] * (2.0 / (draws as f64 - 1.0)).sqrt();
        assert!(
            (var - exact_var[pixel]).abs() <= 4.0 * se_var,
            "pixel {pixel} var {var:.4} vs {:.4}",
            exact_var[pixel]
        );
    }
}

#[test]
fn multiblock_all_circulant_symbol_matches_dense_precision() {
    // with all-circulant blocks the x-precision handled in the Fourier
    // domain equals rho^{-2} sum K_i^T K_i built densely
    let (rows, cols) = (4, 4);
    let n = rows * cols;
    let rho2 = 2.0;
    let blur = CirculantOperator::gaussian_blur(rows, cols, 0.7).unwrap();
    let lap = CirculantOperator::laplacian(rows, cols).unwrap();
    let mut dense = DenseMatrix::gram_of_operator(&blur, None).unwrap();
    let lap_gram = DenseMatrix::gram_of_operator(&lap, None).unwrap();
    dense.add_scaled(&lap_gram, 1.0);
    // eigenvalue route: |lambda_blur|^2 + |lambda_lap|^2 per frequency
    let symbol: Vec<f64> = blur
        .eigenvalues_sq()
        .iter()
        .zip(lap.eigenvalues_sq())
        .map(|(a, b)| (a + b) / rho2)
        .collect();
    // compare through the quadratic form on basis vectors via FFT-free path:
    // densify the symbol operator by applying the circulant ops
    let mut basis = ImageField::zeros(rows, cols);
    for j in 0..n {
        basis.as_mut_slice()[j] = 1.0;
        let mut col = blur.adjoint_apply(&blur.apply(&basis).unwrap()).unwrap();
        col.add_scaled(&lap.adjoint_apply(&lap.apply(&basis).unwrap()).unwrap(), 1.0);
        col.scale(1.0 / rho2);
        for i in 0..n {
            assert!(
                (col.as_slice()[i] - dense.get(i, j) / rho2).abs() < 1e-10,
                "dense and operator routes disagree at ({i},{j})"
            );
        }
        basis.as_mut_slice()[j] = 0.0;
    }
    // the symbol lists the eigenvalues, so its sum equals the trace
    let trace_dense: f64 = (0..n).map(|i| dense.get(i, i) / rho2).sum();
    let trace_symbol: f64 = symbol.iter().sum();
    assert!(
        (trace_dense - trace_symbol).abs() < 1e-8 * trace_dense.abs().max(1.0),
        "trace mismatch {trace_dense} vs {trace_symbol}"
    );
}

#[test]
fn cg_error_decreases_monotonically_in_the_operator_norm() {
    let (rows, cols) = (8, 8);
    let n = rows * cols;
    let blur = CirculantOperator::gaussian_blur(rows, cols, 1.2).unwrap();
    let omega = NoisePrecision::isotropic(n, 4.0).unwrap();
    let mut q = DenseMatrix::gram_of_operator(&blur, Some(omega.diag())).unwrap();
    q.add_scaled_identity(0.05);
    let mut rng = RandomStream::new(47, 0);
    let b = rng.normal_field(rows, cols);
    let exact = q.cholesky().unwrap().solve(b.as_slice());

    let apply = |x: &ImageField| {
        let hx = blur.apply(x).unwrap();
        let mut w = hx.scaled(1.0 / 4.0);
        w = blur.adjoint_apply(&w).unwrap();
        w.add_scaled(x, 0.05);
        w
    };
    let a_norm_sq = |e: &[f64]| -> f64 {
        let from_vec = ImageField::from_values(rows, cols, e.to_vec()).unwrap();
        apply(&from_vec).dot(&from_vec)
    };
    let mut errors = Vec::new();
    let config = CgConfig { tol: 1e-14, max_iters: 300 };
    let result = cg_solve_observed(apply, &b, None, &config, |_, x| {
        let e: Vec<f64> = x.as_slice().iter().zip(&exact).map(|(a, b)| a - b).collect();
        errors.push(a_norm_sq(&e).sqrt());
    })
    .unwrap();
    assert!(result.converged);
    for w in errors.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-10), "A-norm error rose: {} -> {}", w[0], w[1]);
    }
    let rel: f64 = result
        .x
        .as_slice()
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(rel < 1e-8, "cg final error {rel}");
}

#[test]
fn salsa_short_run_is_close_to_its_long_run_reference() {
    // the tolerance-stopped solve, given a 10x larger iteration cap,
    // changes ISNR by less than 0.1 dB
    let truth = images::shapes(64, 64);
    let mut rng = RandomStream::new(53, 0);
    let problem = synthesize_inpaint(&truth, 0.6, 40.0, 0.2, &mut rng).unwrap();
    let short = RunParams::new(2.8, 1.0, 1_200, 0).unwrap();
    let long = RunParams::new(2.8, 1.0, 12_000, 0).unwrap();
    let mut c1 = RandomStream::new(53, 1);
    let mut c2 = RandomStream::new(53, 2);
    let isnr_short = run_inpaint(&problem, Some(&truth), Method::Salsa, &short, &mut c1)
        .unwrap()
        .bundle
        .metrics["isnr_db"];
    let isnr_long = run_inpaint(&problem, Some(&truth), Method::Salsa, &long, &mut c2)
        .unwrap()
        .bundle
        .metrics["isnr_db"];
    assert!(
        (isnr_short - isnr_long).abs() < 0.1,
        "SALSA ISNR drifted: {isnr_short:.3} vs long-run {isnr_long:.3}"
    );
}

#[test]
fn admm_primal_residual_is_driven_below_tolerance() {
    let truth = images::shapes(32, 32);
    let mut rng = RandomStream::new(59, 0);
    let problem = synthesize_inpaint(&truth, 0.6, 40.0, 0.2, &mut rng).unwrap();
    let y_filled = problem.y_filled().unwrap();
    let rho2 = 4.0;
    let config = AdmmConfig::new(rho2).unwrap().with_max_iters(4_000);
    let spec = split_gibbs::proximal::ProxSpec::new(problem.beta, rho2).unwrap();
    let result = admm_solve(
        |anchor| {
            split_gibbs::gaussian::sherman_morrison_mean(
                &problem.mask,
                problem.sigma2,
                rho2,
                &problem.y,
                anchor,
            )
        },
        |anchor| Ok(split_gibbs::proximal::tv_prox(anchor, &spec, 60)),
        &config,
        &y_filled,
    )
    .unwrap();
    assert!(result.converged, "no convergence in {} iterations", result.iterations);
    let (primal, _) = *result.residuals.last().unwrap();
    assert!(primal <= config.tol_primal);
}

#[test]
fn credibility_intervals_bracket_the_posterior_mean() {
    let truth = images::shapes(24, 24);
    let mut rng = RandomStream::new(61, 0);
    let problem = synthesize_inpaint(&truth, 0.6, 40.0, 0.2, &mut rng).unwrap();
    let params = RunParams::new(3.5, 1.0, 2_200, 200).unwrap();
    let mut chain = RandomStream::new(61, 1);
    let run = run_inpaint(&problem, Some(&truth), Method::Spa, &params, &mut chain).unwrap();
    let (low, high) = (run.bundle.ci_low.unwrap(), run.bundle.ci_high.unwrap());
    let mmse_x = &run.bundle.mmse_x;
    let mmse_z = &run.bundle.mmse_z;
    let sd = match run.output {
        split_gibbs::experiments::RunOutput::Chain(record) => record.var_x().map(f64::sqrt),
        _ => unreachable!(),
    };
    // the x- and z-estimates coincide within the posterior spread on
    // typical pixels; object boundaries carry the structural u-residual,
    // so only the bulk of the distribution is constrained
    let mut ratios: Vec<f64> = (0..truth.len())
        .map(|idx| {
            assert!(
                low.as_slice()[idx] <= mmse_x.as_slice()[idx]
                    && mmse_x.as_slice()[idx] <= high.as_slice()[idx],
                "pixel {idx}: 90% interval fails to bracket the mean"
            );
            let gap = (mmse_x.as_slice()[idx] - mmse_z.as_slice()[idx]).abs();
            gap / sd.as_slice()[idx].max(1.0)
        })
        .collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = ratios[ratios.len() / 2];
    let p95 = ratios[ratios.len() * 95 / 100];
    assert!(median <= 1.0, "median |mmse_x - mmse_z| is {median:.3} posterior sds");
    assert!(p95 <= 6.0, "95th percentile gap is {p95:.3} posterior sds");
}

#[test]
fn report_without_kept_samples_omits_interval_files() {
    let dir = std::env::temp_dir().join(format!("sg_report_{}", std::process::id()));
    let truth = images::shapes(16, 16);
    let mut rng = RandomStream::new(67, 0);
    let problem = synthesize_inpaint(&truth, 0.6, 40.0, 0.2, &mut rng).unwrap();
    let mut params = RunParams::new(3.0, 1.0, 60, 20).unwrap();
    params.keep_samples = false;
    let mut chain = RandomStream::new(67, 1);
    let run = run_inpaint(&problem, Some(&truth), Method::Spa, &params, &mut chain).unwrap();
    split_gibbs::io::write_report(&run.bundle, &run.output, &dir).unwrap();
    assert!(dir.join("metrics.csv").exists());
    assert!(dir.join("trace.csv").exists());
    assert!(dir.join("acf.csv").exists());
    assert!(!dir.join("ci_low.pgm").exists());
    assert!(!dir.join("ci_high.pgm").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn replicate_fanout_writes_aggregate_mean_and_std() {
    use split_gibbs::config::parse_config;
    let dir = std::env::temp_dir().join(format!("sg_agg_{}", std::process::id()));
    let args: Vec<String> = [
        "inpaint",
        "--method",
        "spa",
        "--seed",
        "5",
        "--size",
        "16",
        "--t-mc",
        "80",
        "--t-bi",
        "20",
        "--replicates",
        "3",
        "--no-samples",
        "--output",
        dir.to_str().unwrap(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let config = parse_config(&args).unwrap();
    split_gibbs::runner::execute(&config).unwrap();
    let text = std::fs::read_to_string(dir.join("aggregate.csv")).unwrap();
    assert!(text.starts_with("name,mean,std\n"), "{text}");
    assert!(text.contains("isnr_db,"));
    for r in 0..3 {
        assert!(dir.join(format!("replicate_{r:02}")).join("metrics.csv").exists());
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pipeline_is_deterministic_through_the_library() {
    use split_gibbs::config::parse_config;
    let run_once = |tag: &str| {
        let dir = std::env::temp_dir().join(format!("sg_det_{}_{tag}", std::process::id()));
        let args: Vec<String> = [
            "deconv",
            "--method",
            "spa",
            "--seed",
            "9",
            "--size",
            "16",
            "--t-mc",
            "60",
            "--t-bi",
            "10",
            "--output",
            dir.to_str().unwrap(),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let config = parse_config(&args).unwrap();
        split_gibbs::runner::execute(&config).unwrap();
        let bytes = std::fs::read(dir.join("replicate_00").join("trace.csv")).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        bytes
    };
    assert_eq!(run_once("a"), run_once("b"));
}

#[test]
fn deconv_mmse_approaches_the_least_squares_inverse_as_rho_grows() {
    // nearly noiseless data, gamma -> 0, full-rank blur: the posterior mean
    // collapses to H^{-1} y; the chain must land within 1% relative error
    let (rows, cols) = (16, 16);
    let n = rows * cols;
    let truth = images::smooth(rows, cols);
    let blur = CirculantOperator::gaussian_blur(rows, cols, 0.8).unwrap();
    let reg = CirculantOperator::laplacian(rows, cols).unwrap();
    let sigma = 0.5;
    let gamma = 1e-9;
    let mut rng = RandomStream::new(71, 0);
    let mut y = blur.apply(&truth).unwrap();
    for v in y.as_mut_slice().iter_mut() {
        *v += sigma * rng.normal();
    }
    let omega = NoisePrecision::isotropic(n, sigma * sigma).unwrap();

    // dense posterior-mean oracle: (H^T Omega H + gamma L^T L)^{-1} H^T Omega y
    let mut q = DenseMatrix::gram_of_operator(&blur, Some(omega.diag())).unwrap();
    let qg = DenseMatrix::gram_of_operator(&reg, None).unwrap();
    q.add_scaled(&qg, gamma);
    let b = blur.adjoint_apply(&y.scaled(1.0 / (sigma * sigma))).unwrap();
    let oracle_mean = q.cholesky().unwrap().solve(b.as_slice());

    let model = SplitModel::new(
        Potential::CirculantGaussianData { op: blur.clone(), omega, y: y.clone(), mu1: None },
        Potential::CirculantQuadratic { terms: vec![(gamma, reg)], tau: 0.0 },
        400.0,
        1.0,
    )
    .unwrap();
    let init = blur.adjoint_apply(&y).unwrap();
    let mut chain = RandomStream::new(71, 1);
    let record = run_chain(&model, 3_000, 500, &init, false, 1, &mut chain).unwrap();
    let err: f64 = record
        .mean_x
        .as_slice()
        .iter()
        .zip(&oracle_mean)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = oracle_mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = err / scale;
    assert!(rel < 0.01, "relative error {rel:.4} vs the dense posterior mean");
}

#[test]
fn inpaint_without_tv_pins_observed_pixels_to_the_gaussian_posterior() {
    // dropping the TV term leaves a Gaussian posterior; on observed pixels
    // the stationary mean of x is the observation itself
    let (rows, cols) = (8, 8);
    let mut rng = RandomStream::new(73, 0);
    let truth = images::shapes(rows, cols);
    let problem = synthesize_inpaint(&truth, 0.6, 40.0, 0.2, &mut rng).unwrap();
    let model = SplitModel::new(
        Potential::MaskGaussianData {
            mask: problem.mask.clone(),
            sigma2: problem.sigma2,
            y: problem.y.clone(),
        },
        Potential::Zero,
        4.0,
        1.0,
    )
    .unwrap();
    let init = problem.y_filled().unwrap();
    let mut chain = RandomStream::new(73, 1);
    let record = run_chain(&model, 20_000, 2_000, &init, false, 1, &mut chain).unwrap();
    for (slot, &idx) in problem.mask.kept_indices().iter().enumerate() {
        let mean = record.mean_x.as_slice()[idx];
        let y_i = problem.y.as_slice()[slot];
        // stationary sd of an observed pixel is sqrt(sigma^2 rho^2/(sigma^2+rho^2)+)
        // and 18k kept samples shrink the MC error well below half a level
        assert!(
            (mean - y_i).abs() < 0.5,
            "observed pixel {idx}: chain mean {mean:.3} vs observation {y_i:.3}"
        );
    }
}

#[test]
fn full_mask_high_snr_isnr_is_near_zero() {
    // nothing to restore: the estimate cannot improve much on the data
    let truth = images::shapes(16, 16);
    let mut rng = RandomStream::new(79, 0);
    let problem = synthesize_inpaint(&truth, 1.0, 60.0, 0.2, &mut rng).unwrap();
    let params = RunParams::new(2.0, 1.0, 600, 100).unwrap();
    let mut chain = RandomStream::new(79, 1);
    let run = run_inpaint(&problem, Some(&truth), Method::Spa, &params, &mut chain).unwrap();
    let isnr = run.bundle.metrics["isnr_db"];
    assert!(isnr.abs() < 1.0, "ISNR should be near zero with a full mask, got {isnr:.3}");
}

#[test]
fn deconv_mmse_matches_the_dense_posterior_mean_at_tight_coupling() {
    // fully Gaussian 8x8 problem run through the deconvolution pipeline at
    // small rho: the kept-sample mean must sit within 4 Monte Carlo
    // standard errors of the dense posterior mean Q^{-1} H^T Omega y.
    // The coupling bias scales with eta^2 relative to the likelihood
    // strength, so the check uses an informative observation (sigma = 2).
    let (rows, cols) = (8, 8);
    let truth = images::smooth(rows, cols);
    let blur = CirculantOperator::gaussian_blur(rows, cols, 1.0).unwrap();
    let mixture = split_gibbs::experiments::NoiseMixture::new(0.0, 2.0, 2.0).unwrap();
    let mut synth = RandomStream::new(83, 0);
    let problem =
        split_gibbs::experiments::synthesize_deconv(&truth, &blur, 6e-3, mixture, &mut synth)
            .unwrap();
    let omega = problem.omega().unwrap();

    let mut q = DenseMatrix::gram_of_operator(&problem.blur, Some(omega.diag())).unwrap();
    let qg = DenseMatrix::gram_of_operator(&problem.reg, None).unwrap();
    q.add_scaled(&qg, problem.gamma);
    let mut weighted = problem.y.clone();
    for (v, om) in weighted.as_mut_slice().iter_mut().zip(omega.diag()) {
        *v *= om;
    }
    let b = problem.blur.adjoint_apply(&weighted).unwrap();
    let posterior_mean = q.cholesky().unwrap().solve(b.as_slice());

    let mut params = RunParams::new(0.5, 0.1, 24_000, 2_000).unwrap();
    params.keep_samples = true;
    let mut chain = RandomStream::new(83, 1);
    let run = split_gibbs::experiments::run_deconv(
        &problem,
        Some(&truth),
        Method::Spa,
        &params,
        &mut chain,
    )
    .unwrap();
    let record = match run.output {
        split_gibbs::experiments::RunOutput::Chain(record) => record,
        _ => unreachable!(),
    };
    let samples = record.kept_x.as_ref().unwrap();
    let mut series = vec![0.0; samples.len()];
    for pixel in 0..rows * cols {
        for (slot, s) in samples.iter().enumerate() {
            series[slot] = s.as_slice()[pixel];
        }
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let se = batch_means_se(&series, 50).unwrap();
        let z = (mean - posterior_mean[pixel]).abs() / se;
        assert!(
            z <= 4.0,
            "pixel {pixel}: chain mean {mean:.4} vs posterior mean {:.4} (z = {z:.2})",
            posterior_mean[pixel]
        );
    }
}
