//! Acceptance criteria. Every criterion prints one `PASS`/`FAIL` line; run
//! with a name fragment as argument to select a subset.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use noisereg::losses::LossSpec;
use noisereg::models::{ModelSpec, ParamVector};
use noisereg::noise::{expected_smoothed_loss_mc_split, NoiseMode, NoiseScheme, Normalization};
use noisereg::numerics::{sample_gaussian_matrix, Matrix, RngStream};
use noisereg::oracles::finite_diff::{finite_diff_loss_grad, finite_diff_loss_hess_diag};
use noisereg::oracles::{
    finite_diff_jacobian, fit_rate, lasso_equivalence, log_spaced, max_relative_error, minimize_gd,
    nuclear_equivalence, prediction_gap_probe, GdOptions,
};
use noisereg::regularizers::{
    effective_loss, effective_loss_generic, effective_loss_grad, exact_smoothed_diagonal_full,
    exact_smoothed_two_layer_full, reg_deep_linear, reg_group_lasso, reg_lasso,
    reg_nuclear_factored, reg_relu_onehidden, EffectiveLoss,
};
use noisereg::sweep::{affine_fit, variance_sweep, SweepFamily, SweepSettings};
use noisereg::trainer::{
    make_planted_dataset, make_sparse_dataset, train, Batch, Schedule, TrainConfig,
};
use noisereg_validation::{filter_from_args, report, run, Check, Criterion};

fn gaussian(rng: &mut RngStream, r: usize, c: usize) -> Matrix {
    sample_gaussian_matrix(rng, r, c, 1.0).unwrap()
}

/// Parameters with i.i.d. standard normal entries.
fn generic_point(model: &ModelSpec, rng: &mut RngStream) -> ParamVector {
    ParamVector::new(
        model
            .layer_shapes()
            .iter()
            .map(|&(r, c)| gaussian(rng, r, c))
            .collect(),
    )
}

fn all_kinds(rng: &mut RngStream) -> Vec<ModelSpec> {
    let x = gaussian(rng, 6, 4);
    vec![
        ModelSpec::diagonal(x.clone()).unwrap(),
        ModelSpec::two_layer_linear(x.clone(), 5, 2).unwrap(),
        ModelSpec::deep_linear(x.clone(), &[5, 3, 2]).unwrap(),
        ModelSpec::one_hidden_relu(x.clone(), 5, 2).unwrap(),
        ModelSpec::deep_relu(x.clone(), &[5, 4, 1]).unwrap(),
        ModelSpec::group_factored(x, 2).unwrap(),
    ]
}

const H: f64 = 1e-5;

fn criterion_01_derivatives_match_finite_differences() -> bool {
    let t = Instant::now();
    let mut rng = RngStream::new(101, 0);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut resampled = 0;
    for model in all_kinds(&mut rng) {
        let mut points = 0;
        while points < 20 {
            let w = generic_point(&model, &mut rng);
            if let Some(m) = model.min_preactivation_margin(&w).unwrap() {
                if m <= 10.0 * H {
                    resampled += 1;
                    continue;
                }
            }
            let analytic = model.jacobian(&w).unwrap().matrix;
            let fd = finite_diff_jacobian(&model, &w, H).unwrap();
            worst = worst.max(max_relative_error(fd.as_slice(), analytic.as_slice()).max_rel);
            points += 1;
            checked += 1;
        }
    }
    let n = 6;
    let losses = [
        LossSpec::square(gaussian(&mut rng, n, 2)).unwrap(),
        LossSpec::logistic(
            (0..n)
                .map(|i| if i % 3 == 0 { -1.0 } else { 1.0 })
                .collect(),
        )
        .unwrap(),
    ];
    for loss in &losses {
        for _ in 0..20 {
            let phi = sample_gaussian_matrix(&mut rng, loss.out_dim(), n, 2.0).unwrap();
            let g = loss.loss_grad(&phi).unwrap();
            let gf = finite_diff_loss_grad(loss, &phi, H).unwrap();
            let h = loss.loss_hess_diag(&phi).unwrap();
            let hf = finite_diff_loss_hess_diag(loss, &phi, H).unwrap();
            worst = worst.max(max_relative_error(g.as_slice(), gf.as_slice()).max_rel);
            worst = worst.max(max_relative_error(&h, &hf).max_rel);
            checked += 1;
        }
    }
    let ok = report(
        "1",
        "analytic derivatives vs central differences (h = 1e-5)",
        worst < 1e-6,
        &format!("{checked} points, max relative error {worst:.2e} (< 1e-6), {resampled} near-kink points resampled"),
        t.elapsed(),
        Duration::from_secs(10),
    );
    ok
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn criterion_02_closed_forms_match_generic_route() -> bool {
    let t = Instant::now();
    let mut rng = RngStream::new(102, 0);
    let x = gaussian(&mut rng, 7, 4);
    type Reg = fn(&ModelSpec, &LossSpec, &ParamVector, f64) -> noisereg::Result<EffectiveLoss>;
    let cases: Vec<(&str, ModelSpec, Reg)> = vec![
        ("lasso", ModelSpec::diagonal(x.clone()).unwrap(), reg_lasso),
        (
            "nuclear",
            ModelSpec::two_layer_linear(x.clone(), 5, 2).unwrap(),
            reg_nuclear_factored,
        ),
        (
            "group",
            ModelSpec::group_factored(x.clone(), 2).unwrap(),
            reg_group_lasso,
        ),
        (
            "relu1h",
            ModelSpec::one_hidden_relu(x.clone(), 5, 2).unwrap(),
            reg_relu_onehidden,
        ),
        (
            "deep_linear",
            ModelSpec::deep_linear(x.clone(), &[5, 3, 2]).unwrap(),
            reg_deep_linear,
        ),
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (name, model, reg) in &cases {
        let loss = LossSpec::square(gaussian(&mut rng, 7, model.out_dim())).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let w = generic_point(model, &mut rng);
            let sigma = 0.05 + rng.uniform();
            let closed = reg(model, &loss, &w, sigma).unwrap();
            let generic = effective_loss_generic(model, &loss, &w, sigma).unwrap();
            worst = worst
                .max(rel(closed.total(), generic.total()))
                .max(rel(closed.penalty(), generic.penalty()));
        }
        pass &= worst <= 1e-10;
        details.push(format!("{name} {worst:.1e}"));
    }
    let ok = report(
        "2",
        "closed-form regularizers vs Jacobian route",
        pass,
        &format!(
            "max relative error per form (<= 1e-10): {}",
            details.join(", ")
        ),
        t.elapsed(),
        Duration::from_secs(10),
    );
    ok
}

fn criterion_03_exact_smoothed_loss_vs_monte_carlo() -> bool {
    let t = Instant::now();
    let mut rng = RngStream::new(103, 0);
    let x2 = gaussian(&mut rng, 6, 3);
    let two = ModelSpec::two_layer_linear(x2, 4, 2).unwrap();
    let loss2 = LossSpec::square(gaussian(&mut rng, 6, 2)).unwrap();
    let w2 = generic_point(&two, &mut rng);
    let xd = gaussian(&mut rng, 6, 4);
    let diag = ModelSpec::diagonal(xd).unwrap();
    let lossd = LossSpec::square(gaussian(&mut rng, 6, 1)).unwrap();
    let wd = generic_point(&diag, &mut rng);

    let mut pass = true;
    let mut details = Vec::new();
    for (k, sigma) in [0.01, 0.1, 0.5].into_iter().enumerate() {
        let scheme = NoiseScheme::full(sigma, 2).unwrap();
        for (name, model, loss, w, exact) in [
            (
                "exact2l",
                &two,
                &loss2,
                &w2,
                exact_smoothed_two_layer_full(&two, &loss2, &w2, sigma).unwrap(),
            ),
            (
                "exactdiag",
                &diag,
                &lossd,
                &wd,
                exact_smoothed_diagonal_full(&diag, &lossd, &wd, sigma).unwrap(),
            ),
        ] {
            let mc = expected_smoothed_loss_mc_split(
                model,
                loss,
                &scheme,
                w,
                100_000,
                1000 + k as u64,
                8,
            )
            .unwrap();
            let z = (mc.mean - exact.total()).abs() / mc.std_error;
            pass &= z <= 4.0;
            details.push(format!("{name}@{sigma}: {z:.2} SE"));
        }
    }
    let ok = report(
        "3",
        "exact smoothed losses vs Monte Carlo (10^5 samples)",
        pass,
        &format!("deviation (<= 4 SE): {}", details.join(", ")),
        t.elapsed(),
        Duration::from_secs(60),
    );
    ok
}

fn criterion_04_smoothing_gap_rates() -> bool {
    let t = Instant::now();
    let mut rng = RngStream::new(104, 0);
    let model = ModelSpec::diagonal(gaussian(&mut rng, 5, 10)).unwrap();
    let loss = LossSpec::square(gaussian(&mut rng, 5, 1)).unwrap();
    let w = generic_point(&model, &mut rng);
    let grid = log_spaced(1e-3, 1e-1, 9);
    let mut second = Vec::new();
    let mut higher = Vec::new();
    for &s in &grid {
        let exact = exact_smoothed_diagonal_full(&model, &loss, &w, s).unwrap();
        let eff = reg_lasso(&model, &loss, &w, s).unwrap();
        // both share R(w); compare penalties to avoid cancelling against it
        second.push(exact.penalty());
        higher.push((exact.penalty() - eff.penalty()).abs());
    }
    let a = fit_rate(&grid, &second).unwrap();
    let b = fit_rate(&grid, &higher).unwrap();
    let pass = (1.95..=2.05).contains(&a.slope) && (3.9..=4.1).contains(&b.slope);
    let ok = report(
        "4",
        "smoothed-loss gap rates (diagonal model, exact formulas)",
        pass,
        &format!(
            "slope |R_s - R| = {:.4} (in [1.95, 2.05]), slope |R_s - R_eff| = {:.4} (in [3.9, 4.1])",
            a.slope, b.slope
        ),
        t.elapsed(),
        Duration::from_secs(5),
    );
    ok
}

fn prediction_gap_instance() -> (ModelSpec, LossSpec, RngStream) {
    let mut rng = RngStream::new(105, 0);
    let (x, y) = make_planted_dataset(&mut rng, 5, 10, (1.0, -1.0)).unwrap();
    (
        ModelSpec::diagonal(x).unwrap(),
        LossSpec::square(y).unwrap(),
        rng,
    )
}

fn criterion_05a_minimizer_prediction_vs_interpolation() -> bool {
    let t = Instant::now();
    let (model, loss, mut rng) = prediction_gap_instance();
    let grid = log_spaced(1e-3, 1e-1, 9);
    let g = prediction_gap_probe(&model, &loss, &grid, 200_000, &mut rng).unwrap();
    let fit = fit_rate(&grid, &g.gaps_to_interp);
    let flagged = g.flagged.iter().filter(|f| **f).count();
    let (pass, detail) = match &fit {
        Ok(f) => (
            f.slope >= 1.9 && flagged == 0,
            format!(
                "slope ||Phi(w_s) - y||^2 = {:.4} (>= 1.9), r^2 = {:.6}, {flagged} unconverged",
                f.slope, f.r_squared
            ),
        ),
        Err(e) => (false, format!("fit failed: {e}")),
    };

    report(
        "5a",
        "smoothed-loss minimizer vs interpolating prediction",
        pass,
        &detail,
        t.elapsed(),
        Duration::from_secs(300),
    )
}

fn criterion_05b_effective_vs_smoothed_minimizer_prediction() -> bool {
    let t = Instant::now();
    let (model, loss, mut rng) = prediction_gap_instance();
    let grid = log_spaced(1e-3, 1e-1, 9);
    let g = prediction_gap_probe(&model, &loss, &grid, 200_000, &mut rng).unwrap();
    let fit = fit_rate(&grid, &g.gaps_eff_vs_sigma);
    let max_gap = g.gaps_eff_vs_sigma.iter().copied().fold(0.0, f64::max);
    let (pass, detail) = match &fit {
        Ok(f) => (
            f.slope >= 2.9,
            format!(
                "slope ||Phi(w_eff) - Phi(w_s)||^2 = {:.4} (>= 2.9)",
                f.slope
            ),
        ),
        Err(e) => (
            false,
            format!(
                "slope undefined: {e}; largest gap {max_gap:.1e}. The exact smoothed loss of the \
                 diagonal model differs from the effective loss by a w-independent constant, so \
                 both objectives share their minimizers"
            ),
        ),
    };

    report(
        "5b",
        "effective-loss minimizer vs smoothed-loss minimizer prediction",
        pass,
        &detail,
        t.elapsed(),
        Duration::from_secs(300),
    )
}

fn criterion_06_variance_explosion() -> bool {
    let t = Instant::now();
    let mut rng = RngStream::new(106, 0);
    let (n, d0, sigma) = (20, 10, 0.1);
    let x = gaussian(&mut rng, n, d0);
    let y = gaussian(&mut rng, n, 1);
    let settings = SweepSettings {
        family: SweepFamily::TwoLayerLinear,
        d1_grid: vec![100, 400, 1600, 6400],
        sigma,
        normalization: Normalization::Theory,
        seeds: (0..100).collect(),
        mc_samples: 100,
    };
    let cells = variance_sweep(&x, &y, &settings).unwrap();
    let excess = |mode| -> (Vec<f64>, Vec<f64>) {
        cells
            .iter()
            .filter(|c| c.mode == mode)
            .map(|c| (c.d1 as f64, c.mean - c.risk_mean))
            .unzip()
    };
    let (d1s, full) = excess(NoiseMode::Full);
    let (_, layer) = excess(NoiseMode::Layerwise);
    let (slope, _) = affine_fit(&d1s, &full);
    let predicted = sigma.powi(4) / (2.0 * n as f64) * x.frobenius_sq();
    let slope_err = (slope / predicted - 1.0).abs();
    let lo = layer.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = layer.iter().copied().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    let ok = report(
        "6",
        "variance explosion with width (two-layer linear)",
        slope_err < 0.15 && spread < 0.25,
        &format!(
            "full-noise slope {slope:.4e} vs {predicted:.4e} ({:.2}% off, < 15%), layerwise spread {:.2}% (< 25%), excess full {:?} layerwise {:?}",
            100.0 * slope_err,
            100.0 * spread,
            full.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            layer.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
        ),
        t.elapsed(),
        Duration::from_secs(120),
    );
    ok
}

fn criterion_07_lasso_equivalence() -> bool {
    let t = Instant::now();
    let mut rng = RngStream::new(107, 0);
    let x = gaussian(&mut rng, 5, 10);
    let y = gaussian(&mut rng, 5, 1);
    let e = lasso_equivalence(&x, &y, 0.1, 10, 1_000_000, &mut rng).unwrap();
    let ok = report(
        "7",
        "diagonal-network penalty minimization vs coordinate-descent Lasso",
        e.linf < 1e-3 && e.objective_gap < 1e-6 && e.converged,
        &format!(
            "l_inf(beta_GD, beta_CD) = {:.2e} (< 1e-3), objective gap = {:.2e} (< 1e-6), converged = {}",
            e.linf, e.objective_gap, e.converged
        ),
        t.elapsed(),
        Duration::from_secs(60),
    );
    ok
}

fn criterion_08_nuclear_norm_equivalence() -> bool {
    let t = Instant::now();
    let mut rng = RngStream::new(108, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = gaussian(&mut rng, 3, 4);
        let x = gaussian(&mut rng, 6, 4);
        let e = nuclear_equivalence(&m, &x, 4, &mut rng).unwrap();
        worst = worst.max(e.relative_gap);
    }
    let ok = report(
        "8",
        "factored penalty minimum vs sqrt(d2) ||X|| ||M X^T||_*",
        worst < 1e-6,
        &format!("10 random 3x4 instances, max relative gap {worst:.2e} (< 1e-6)"),
        t.elapsed(),
        Duration::from_secs(10),
    );
    ok
}

const PLANTED_SIGMA: f64 = 0.05;
const PLANTED_STEPS: usize = 10_000;

/// Final effective losses `(oracle, layerwise, full)` for one seed.
fn planted_run(seed: u64, hidden: usize) -> (f64, f64, f64) {
    let mut rng = RngStream::new(seed, 0);
    let (x, y) = make_sparse_dataset(&mut rng);
    let model = ModelSpec::two_layer_linear(x, hidden, 1).unwrap();
    let loss = LossSpec::square(y).unwrap();
    let w0 = model.scaled_init(&mut rng);
    let f = |w: &ParamVector| {
        Ok((
            effective_loss(&model, &loss, w, PLANTED_SIGMA)?.total(),
            effective_loss_grad(&model, &loss, w, PLANTED_SIGMA)?,
        ))
    };
    let opts = GdOptions {
        max_iters: 200_000,
        grad_tol: 1e-10,
        ..GdOptions::default()
    };
    let opt = minimize_gd(f, &w0, &opts).unwrap();
    assert!(opt.converged);
    let oracle = effective_loss_generic(&model, &loss, &opt.w, PLANTED_SIGMA)
        .unwrap()
        .total();
    let run = |scheme: NoiseScheme| {
        let cfg = TrainConfig {
            steps: PLANTED_STEPS,
            lr: 0.1,
            schedule: Schedule::Cosine,
            batch: Batch::Full,
            scheme,
            seed: seed + 1000,
            log_every: PLANTED_STEPS,
        };
        let out = train(&model, &loss, &w0, &cfg).unwrap();
        assert!(!out.diverged);
        out.last().unwrap().effective_loss
    };
    let lw = run(NoiseScheme::layerwise(PLANTED_SIGMA, 2).unwrap());
    let full = run(NoiseScheme::full(PLANTED_SIGMA, 2).unwrap());
    (oracle, lw, full)
}

fn criterion_09_layerwise_training_reaches_regularized_minimum() -> bool {
    let t = Instant::now();
    let wide: Vec<_> = (0..5).map(|s| planted_run(s, 300)).collect();
    let narrow: Vec<_> = (0..5).map(|s| planted_run(s, 50)).collect();
    let gap = |v: f64, o: f64| v / o - 1.0;
    let lw_close = wide.iter().all(|&(o, lw, _)| gap(lw, o).abs() <= 0.05);
    let lw_wins = wide.iter().filter(|&&(_, lw, full)| lw <= full).count();
    let narrow_close = narrow
        .iter()
        .all(|&(o, lw, full)| gap(lw, o).abs() <= 0.10 && gap(full, o).abs() <= 0.10);
    let fmt = |runs: &[(f64, f64, f64)]| {
        runs.iter()
            .map(|&(o, lw, full)| {
                format!("{:+.2}%/{:+.2}%", 100.0 * gap(lw, o), 100.0 * gap(full, o))
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let ok = report(
        "9",
        "planted-sparse two-layer training, layerwise vs full noise",
        lw_close && lw_wins >= 4 && narrow_close,
        &format!(
            "300 hidden: layerwise/full excess over oracle {} (layerwise within 5%, layerwise <= full on {lw_wins}/5); \
             50 hidden: {} (both within 10%)",
            fmt(&wide),
            fmt(&narrow)
        ),
        t.elapsed(),
        Duration::from_secs(300),
    );
    ok
}

fn criterion_10_full_scale_benchmarks_out_of_scope() {
    println!(
        "criterion 10  N/A   full-scale image-classification accuracies are not reproduced; \
         criteria 4-9 cover the same claims on desk-scale problems"
    );
}

const CRITERIA: &[Criterion] = &[
    (
        "criterion_01_derivatives_match_finite_differences",
        Check::Verdict(criterion_01_derivatives_match_finite_differences),
    ),
    (
        "criterion_02_closed_forms_match_generic_route",
        Check::Verdict(criterion_02_closed_forms_match_generic_route),
    ),
    (
        "criterion_03_exact_smoothed_loss_vs_monte_carlo",
        Check::Verdict(criterion_03_exact_smoothed_loss_vs_monte_carlo),
    ),
    (
        "criterion_04_smoothing_gap_rates",
        Check::Verdict(criterion_04_smoothing_gap_rates),
    ),
    (
        "criterion_05a_minimizer_prediction_vs_interpolation",
        Check::Verdict(criterion_05a_minimizer_prediction_vs_interpolation),
    ),
    (
        "criterion_05b_effective_vs_smoothed_minimizer_prediction",
        Check::Verdict(criterion_05b_effective_vs_smoothed_minimizer_prediction),
    ),
    (
        "criterion_06_variance_explosion",
        Check::Verdict(criterion_06_variance_explosion),
    ),
    (
        "criterion_07_lasso_equivalence",
        Check::Verdict(criterion_07_lasso_equivalence),
    ),
    (
        "criterion_08_nuclear_norm_equivalence",
        Check::Verdict(criterion_08_nuclear_norm_equivalence),
    ),
    (
        "criterion_09_layerwise_training_reaches_regularized_minimum",
        Check::Verdict(criterion_09_layerwise_training_reaches_regularized_minimum),
    ),
    (
        "criterion_10_full_scale_benchmarks_out_of_scope",
        Check::Informational(criterion_10_full_scale_benchmarks_out_of_scope),
    ),
];

fn main() -> ExitCode {
    run(CRITERIA, filter_from_args().as_deref())
}
