use noisereg::numerics::sample_gaussian_matrix;
use noisereg::oracles::{group_equivalence, lasso_equivalence, lasso_weights, nuclear_equivalence};
use noisereg::RngStream;

use crate::config::{EquivalenceBlock, EquivalenceKind};
use crate::data::load_data;
use crate::output::{num, write_table};
use crate::{CliError, CliResult, Context};

const EQUIV_STREAM: u64 = 5;
const LASSO_LINF: f64 = 1e-3;
const LASSO_OBJECTIVE: f64 = 1e-6;
const RELATIVE_GAP: f64 = 1e-6;

struct Check {
    seed: u64,
    instance: usize,
    metric: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

impl Check {
    fn below(seed: u64, instance: usize, metric: &'static str, value: f64, threshold: f64) -> Self {
        Check {
            seed,
            instance,
            metric,
            value,
            threshold,
            pass: value < threshold,
        }
    }
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let Some(eq) = &cfg.equivalence else {
        return Err(CliError::Usage(
            "equivalence needs an `equivalence` block".into(),
        ));
    };
    if eq.restarts == 0 || eq.instances == 0 {
        return Err(CliError::Usage(
            "equivalence.restarts and instances must be positive".into(),
        ));
    }
    let (x, y) = load_data(&cfg.io)?;
    let mut checks = Vec::new();
    for &seed in ctx.seeds() {
        let mut rng = RngStream::new(seed, EQUIV_STREAM);
        match eq.kind {
            EquivalenceKind::Lasso => {
                if y.cols() != 1 {
                    return Err(CliError::Usage(
                        "lasso equivalence needs one target column".into(),
                    ));
                }
                let r = lasso_equivalence(
                    &x,
                    &y,
                    eq.sigma,
                    eq.restarts,
                    cfg.sweep.optimizer_budget,
                    &mut rng,
                )?;
                checks.push(Check::below(seed, 0, "beta_linf", r.linf, LASSO_LINF));
                checks.push(Check::below(
                    seed,
                    0,
                    "objective_gap",
                    r.objective_gap,
                    LASSO_OBJECTIVE,
                ));
                checks.push(Check {
                    seed,
                    instance: 0,
                    metric: "gd_converged",
                    value: if r.converged { 1.0 } else { 0.0 },
                    threshold: 1.0,
                    pass: r.converged,
                });
            }
            EquivalenceKind::Nuclear => {
                let inner = eq.inner_dim.unwrap_or(eq.m_rows.min(x.cols()));
                for i in 0..eq.instances {
                    let m = sample_gaussian_matrix(&mut rng, eq.m_rows, x.cols(), 1.0)?;
                    let r = nuclear_equivalence(&m, &x, inner, &mut rng)?;
                    checks.push(Check::below(
                        seed,
                        i,
                        "relative_gap",
                        r.relative_gap,
                        RELATIVE_GAP,
                    ));
                }
            }
            EquivalenceKind::Group => group_checks(eq, &x, seed, &mut rng, &mut checks)?,
        }
    }

    let kind = match eq.kind {
        EquivalenceKind::Lasso => "lasso",
        EquivalenceKind::Nuclear => "nuclear",
        EquivalenceKind::Group => "group",
    };
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                kind.to_string(),
                c.seed.to_string(),
                c.instance.to_string(),
                c.metric.to_string(),
                num(c.value),
                num(c.threshold),
                c.pass.to_string(),
            ]
        })
        .collect();
    write_table(
        &ctx.out_dir.join("summary.csv"),
        &[
            "kind",
            "seed",
            "instance",
            "metric",
            "value",
            "threshold",
            "pass",
        ],
        &rows,
    )?;
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| {
            format!(
                "seed {} instance {} {} = {:e}",
                c.seed, c.instance, c.metric, c.value
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(failed.join("; ")))
    }
}

fn group_checks(
    eq: &EquivalenceBlock,
    x: &noisereg::Matrix,
    seed: u64,
    rng: &mut RngStream,
    checks: &mut Vec<Check>,
) -> CliResult<()> {
    if eq.groups == 0 || !x.cols().is_multiple_of(eq.groups) {
        return Err(CliError::Usage(format!(
            "equivalence.groups = {} must divide the {} input columns",
            eq.groups,
            x.cols()
        )));
    }
    for i in 0..eq.instances {
        let beta: Vec<f64> = (0..x.cols()).map(|_| rng.standard_normal()).collect();
        let r = group_equivalence(x, eq.groups, &beta, eq.sigma, rng)?;
        checks.push(Check::below(
            seed,
            i,
            "relative_gap",
            r.relative_gap,
            RELATIVE_GAP,
        ));
        let excess = (r.balanced_penalty - r.min_rescaled_penalty)
            / r.balanced_penalty.max(f64::MIN_POSITIVE);
        checks.push(Check::below(
            seed,
            i,
            "rescaling_improvement",
            excess,
            RELATIVE_GAP,
        ));
        if eq.groups == x.cols() {
            // one column per group: the weighted Lasso penalty σ² Σ c_j |β_j|
            let lasso: f64 = lasso_weights(x)
                .iter()
                .zip(&beta)
                .map(|(c, b)| c * b.abs())
                .sum::<f64>()
                * eq.sigma
                * eq.sigma;
            let gap = (r.balanced_penalty - lasso).abs() / lasso.max(f64::MIN_POSITIVE);
            checks.push(Check::below(seed, i, "lasso_form_gap", gap, RELATIVE_GAP));
        }
    }
    Ok(())
}
