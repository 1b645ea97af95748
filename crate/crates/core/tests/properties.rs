use proptest::prelude::*;

use noisereg::losses::LossSpec;
use noisereg::models::{ModelSpec, ParamVector};
use noisereg::numerics::{sample_gaussian_matrix, Matrix, RngStream};
use noisereg::oracles::lasso::{lasso_coordinate_descent_traced, lasso_weights, DEFAULT_TOL};
use noisereg::oracles::nuclear::singular_values;
use noisereg::oracles::{
    factored_penalty_minimize, fit_rate, log_spaced, nuclear_penalty_closed_form,
};
use noisereg::regularizers::{
    effective_loss_generic, exact_smoothed_diagonal_full, exact_smoothed_two_layer_full, reg_lasso,
    reg_nuclear_factored, reg_relu_onehidden,
};

fn gaussian(seed: u64, r: usize, c: usize) -> Matrix {
    sample_gaussian_matrix(&mut RngStream::new(seed, 0), r, c, 1.0).unwrap()
}

fn generic_point(model: &ModelSpec, rng: &mut RngStream) -> ParamVector {
    ParamVector::new(
        model
            .layer_shapes()
            .iter()
            .map(|&(r, c)| sample_gaussian_matrix(rng, r, c, 1.0).unwrap())
            .collect(),
    )
}

fn chain_model(kind: u8, x: Matrix) -> ModelSpec {
    match kind % 4 {
        0 => ModelSpec::two_layer_linear(x, 4, 2).unwrap(),
        1 => ModelSpec::deep_linear(x, &[4, 3, 2]).unwrap(),
        2 => ModelSpec::one_hidden_relu(x, 4, 2).unwrap(),
        _ => ModelSpec::deep_relu(x, &[4, 3, 2]).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_is_associative(seed in any::<u64>(), a in 1usize..7, b in 1usize..7, c in 1usize..7, d in 1usize..7) {
        let x = gaussian(seed, a, b);
        let y = gaussian(seed ^ 1, b, c);
        let z = gaussian(seed ^ 2, c, d);
        let left = x.matmul(&y).matmul(&z);
        let right = x.matmul(&y.matmul(&z));
        let err = left.sub(&right).frobenius_sq().sqrt() / left.frobenius_sq().sqrt().max(1e-300);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn frobenius_matches_singular_values(seed in any::<u64>()) {
        let m = gaussian(seed, 5, 5);
        let sv: f64 = singular_values(&m).unwrap().iter().map(|s| s * s).sum();
        prop_assert!((m.frobenius_sq() - sv).abs() <= 1e-10 * sv);
    }

    #[test]
    fn forward_is_one_homogeneous_per_layer(seed in any::<u64>(), kind in 0u8..4, layer in 0usize..3, lambda in 0.1f64..5.0) {
        let model = chain_model(kind, gaussian(seed, 5, 3));
        let mut rng = RngStream::new(seed, 1);
        let w = generic_point(&model, &mut rng);
        let j = layer % model.layer_count();
        let mut scaled = w.clone();
        scaled.blocks_mut()[j] = w.block(j).scale(lambda);
        let a = model.forward(&scaled).unwrap();
        let b = model.forward(&w).unwrap().scale(lambda);
        prop_assert!(a.sub(&b).max_abs() <= 1e-12 * b.max_abs().max(1.0));
    }

    #[test]
    fn forward_and_jacobian_are_pure(seed in any::<u64>(), kind in 0u8..4) {
        let model = chain_model(kind, gaussian(seed, 4, 3));
        let w = generic_point(&model, &mut RngStream::new(seed, 1));
        prop_assert_eq!(model.forward(&w).unwrap(), model.forward(&w).unwrap());
        prop_assert_eq!(model.jacobian(&w).unwrap().matrix, model.jacobian(&w).unwrap().matrix);
    }

    #[test]
    fn hessian_trace_vanishes_for_layered_kinds(seed in any::<u64>(), kind in 0u8..5) {
        let x = gaussian(seed, 4, 4);
        let model = if kind == 4 { ModelSpec::group_factored(x, 2).unwrap() } else { chain_model(kind, x) };
        let w = generic_point(&model, &mut RngStream::new(seed, 1));
        prop_assert!(model.hessian_diag_trace(&w).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn logistic_hessian_bounded(seed in any::<u64>(), n in 1usize..10, scale in 0.01f64..50.0) {
        let mut rng = RngStream::new(seed, 0);
        let labels: Vec<f64> = (0..n).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect();
        let loss = LossSpec::logistic(labels).unwrap();
        let phi = sample_gaussian_matrix(&mut rng, 1, n, scale).unwrap();
        let cap = 0.25 / n as f64;
        prop_assert!(loss.loss_hess_diag(&phi).unwrap().iter().all(|h| *h > 0.0 && *h <= cap));
    }

    #[test]
    fn square_hessian_constant(seed in any::<u64>()) {
        let loss = LossSpec::square(gaussian(seed, 5, 2)).unwrap();
        let a = loss.loss_hess_diag(&gaussian(seed ^ 7, 2, 5)).unwrap();
        let b = loss.loss_hess_diag(&gaussian(seed ^ 9, 2, 5).scale(100.0)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn losses_convex_along_segments(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let labels: Vec<f64> = (0..6).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect();
        for loss in [LossSpec::square(gaussian(seed, 6, 1)).unwrap(), LossSpec::logistic(labels).unwrap()] {
            let p = sample_gaussian_matrix(&mut rng, 1, 6, 3.0).unwrap();
            let q = sample_gaussian_matrix(&mut rng, 1, 6, 3.0).unwrap();
            let mid = p.add(&q).scale(0.5);
            let lhs = loss.loss(&mid).unwrap();
            let rhs = 0.5 * (loss.loss(&p).unwrap() + loss.loss(&q).unwrap());
            prop_assert!(lhs <= rhs + 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn relu_penalty_is_two_homogeneous(seed in any::<u64>(), lambda in 0.1f64..10.0) {
        let model = ModelSpec::one_hidden_relu(gaussian(seed, 6, 3), 5, 2).unwrap();
        let loss = LossSpec::square(gaussian(seed ^ 3, 6, 2)).unwrap();
        let w = generic_point(&model, &mut RngStream::new(seed, 1));
        let mut scaled = w.clone();
        for b in scaled.blocks_mut() {
            *b = b.scale(lambda);
        }
        let a = reg_relu_onehidden(&model, &loss, &scaled, 0.1).unwrap().penalty();
        let b = reg_relu_onehidden(&model, &loss, &w, 0.1).unwrap().penalty();
        prop_assert!((a - lambda * lambda * b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn exact_minus_effective_is_the_quartic_term(seed in any::<u64>(), sigma in 1e-3f64..1.0) {
        let x = gaussian(seed, 6, 4);
        let diag = ModelSpec::diagonal(x.clone()).unwrap();
        let two = ModelSpec::two_layer_linear(x.clone(), 3, 2).unwrap();
        let y1 = LossSpec::square(gaussian(seed ^ 5, 6, 1)).unwrap();
        let y2 = LossSpec::square(gaussian(seed ^ 6, 6, 2)).unwrap();
        let mut rng = RngStream::new(seed, 1);
        let (wd, w2) = (generic_point(&diag, &mut rng), generic_point(&two, &mut rng));
        let n = 6.0;
        let xf = x.frobenius_sq();

        let ed = exact_smoothed_diagonal_full(&diag, &y1, &wd, sigma).unwrap();
        let gd = effective_loss_generic(&diag, &y1, &wd, sigma).unwrap();
        let qd = 2.0 * sigma.powi(4) / n * xf;
        prop_assert!(((ed.penalty() - gd.penalty()) - qd).abs() <= 1e-12 * ed.penalty().max(qd));

        let e2 = exact_smoothed_two_layer_full(&two, &y2, &w2, sigma).unwrap();
        let g2 = effective_loss_generic(&two, &y2, &w2, sigma).unwrap();
        let q2 = sigma.powi(4) / (2.0 * n) * 3.0 * 2.0 * xf;
        prop_assert!(((e2.penalty() - g2.penalty()) - q2).abs() <= 1e-12 * e2.penalty().max(q2));
    }

    #[test]
    fn penalties_scale_with_sigma_squared(seed in any::<u64>(), s in 0.01f64..2.0) {
        let model = ModelSpec::diagonal(gaussian(seed, 5, 4)).unwrap();
        let loss = LossSpec::square(gaussian(seed ^ 1, 5, 1)).unwrap();
        let w = generic_point(&model, &mut RngStream::new(seed, 1));
        let a = reg_lasso(&model, &loss, &w, s).unwrap().penalty();
        let b = reg_lasso(&model, &loss, &w, 1.0).unwrap().penalty();
        prop_assert!((a - s * s * b).abs() <= 1e-13 * b);
    }

    #[test]
    fn nuclear_closed_form_lower_bounds_the_factored_penalty(seed in any::<u64>()) {
        // σ²/n times the balanced value is the smallest the factored penalty can be
        let x = gaussian(seed, 6, 4);
        let model = ModelSpec::two_layer_linear(x.clone(), 3, 2).unwrap();
        let loss = LossSpec::square(gaussian(seed ^ 2, 6, 2)).unwrap();
        let w = generic_point(&model, &mut RngStream::new(seed, 1));
        let m = w.block(1).matmul(w.block(0));
        let pen = reg_nuclear_factored(&model, &loss, &w, 1.0).unwrap().penalty();
        let bound = nuclear_penalty_closed_form(&m, &x, 2).unwrap() / 6.0;
        prop_assert!(pen >= bound * (1.0 - 1e-12));
    }

    #[test]
    fn nuclear_closed_form_is_rotation_invariant(seed in any::<u64>(), angle in 0.0f64..6.3) {
        let m = gaussian(seed, 2, 4);
        let x = gaussian(seed ^ 4, 5, 4);
        let (c, s) = (angle.cos(), angle.sin());
        let u = Matrix::from_rows(&[[c, -s], [s, c]]).unwrap();
        let a = nuclear_penalty_closed_form(&m, &x, 2).unwrap();
        let b = nuclear_penalty_closed_form(&u.matmul(&m), &x, 2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn factored_minimum_never_below_closed_form(seed in any::<u64>(), d2 in 1usize..4, d0 in 1usize..5) {
        let m = gaussian(seed, d2, d0);
        let x = gaussian(seed ^ 8, d0 + 2, d0);
        let mut rng = RngStream::new(seed, 3);
        let f = factored_penalty_minimize(&m, &x, d2, d0.min(d2), &mut rng).unwrap();
        let c = nuclear_penalty_closed_form(&m, &x, d2).unwrap();
        prop_assert!(f >= c - 1e-9);
    }

    #[test]
    fn fit_rate_recovers_planted_exponents(p in 1u32..5, c in 0.01f64..100.0) {
        let grid = log_spaced(1e-3, 1e-1, 9);
        let gaps: Vec<f64> = grid.iter().map(|s| c * s.powi(p as i32)).collect();
        let f = fit_rate(&grid, &gaps).unwrap();
        prop_assert!((f.slope - p as f64).abs() < 5e-4);
        prop_assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn coordinate_descent_objective_is_monotone(seed in any::<u64>(), lam in 1e-4f64..0.5) {
        let x = gaussian(seed, 5, 8);
        let y = gaussian(seed ^ 1, 5, 1);
        let w = lasso_weights(&x);
        let (_, trace) = lasso_coordinate_descent_traced(&x, &y, &w, lam, DEFAULT_TOL).unwrap();
        prop_assert!(trace.windows(2).all(|p| p[1] <= p[0] + 1e-14 * p[0].abs()));
    }
}
