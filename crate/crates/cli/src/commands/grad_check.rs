use noisereg::oracles::{
    finite_diff_jacobian, finite_diff_loss_grad, finite_diff_loss_hess_diag, max_relative_error,
};
use noisereg::{ModelSpec, ParamVector, RngStream};

use crate::data::build_problem;
use crate::output::{num, write_table};
use crate::{CliError, CliResult, Context};

const POINT_STREAM: u64 = 6;
const H: f64 = 1e-5;
const THRESHOLD: f64 = 1e-6;
const MAX_RESAMPLES: usize = 1000;

/// A standard normal point whose ReLU pre-activations all clear `10h`.
fn test_point(model: &ModelSpec, seed: u64) -> CliResult<ParamVector> {
    let mut rng = RngStream::new(seed, POINT_STREAM);
    for attempt in 0..=MAX_RESAMPLES {
        let w = ParamVector::new(
            model
                .layer_shapes()
                .iter()
                .map(|&(r, c)| noisereg::numerics::sample_gaussian_matrix(&mut rng, r, c, 1.0))
                .collect::<noisereg::Result<_>>()?,
        );
        match model.min_preactivation_margin(&w)? {
            Some(m) if m <= 10.0 * H => {
                eprintln!(
                    "seed {seed}: point {attempt} resampled, pre-activation margin {m:e} <= {:e}",
                    10.0 * H
                );
            }
            _ => return Ok(w),
        }
    }
    Err(CliError::Failure(format!(
        "seed {seed}: no point clear of ReLU kinks after {MAX_RESAMPLES} draws"
    )))
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let (model, loss) = build_problem(cfg)?;
    let kind = model.kind().name();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &seed in ctx.seeds() {
        let w = test_point(&model, seed)?;
        let mut analytic = model.jacobian(&w)?.matrix;
        if let Some(c) = cfg.hooks.corrupt_jacobian {
            if c.row >= analytic.rows() || c.col >= analytic.cols() {
                return Err(CliError::Usage(format!(
                    "hooks.corrupt_jacobian ({}, {}) outside the {}x{} Jacobian",
                    c.row,
                    c.col,
                    analytic.rows(),
                    analytic.cols()
                )));
            }
            analytic[(c.row, c.col)] += c.delta;
        }
        let fd = finite_diff_jacobian(&model, &w, H)?;
        let jac = max_relative_error(fd.as_slice(), analytic.as_slice());
        let cols = analytic.cols();
        let (jr, jc) = (jac.index / cols, jac.index % cols);

        let phi = model.forward(&w)?;
        let g = max_relative_error(
            loss.loss_grad(&phi)?.as_slice(),
            finite_diff_loss_grad(&loss, &phi, H)?.as_slice(),
        );
        let hd = max_relative_error(
            &loss.loss_hess_diag(&phi)?,
            &finite_diff_loss_hess_diag(&loss, &phi, H)?,
        );

        for (check, err, row, col) in [
            ("jacobian", jac.max_rel, jr, jc),
            (
                "loss_grad",
                g.max_rel,
                g.index / phi.cols(),
                g.index % phi.cols(),
            ),
            (
                "loss_hess_diag",
                hd.max_rel,
                hd.index / phi.cols(),
                hd.index % phi.cols(),
            ),
        ] {
            let pass = err <= THRESHOLD;
            if !pass {
                failures.push(format!(
                    "model {kind}, point seed {seed}: {check} entry (row {row}, col {col}) relative error {err:e}"
                ));
            }
            rows.push(vec![
                kind.to_string(),
                seed.to_string(),
                check.to_string(),
                num(err),
                row.to_string(),
                col.to_string(),
                pass.to_string(),
            ]);
        }
    }
    write_table(
        &ctx.out_dir.join("summary.csv"),
        &[
            "model",
            "seed",
            "check",
            "max_rel_error",
            "row",
            "col",
            "pass",
        ],
        &rows,
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(failures.join("; ")))
    }
}
