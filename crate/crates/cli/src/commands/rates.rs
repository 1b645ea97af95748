use noisereg::oracles::{fit_rate, prediction_gap_probe};
use noisereg::regularizers::{exact_smoothed_diagonal_full, reg_lasso};
use noisereg::RngStream;

use crate::config::{KindName, LossName};
use crate::data::build_problem;
use crate::output::{num, write_table};
use crate::{CliError, CliResult, Context};

const INIT_STREAM: u64 = 3;
const GAP_STREAM: u64 = 4;

struct Quantity {
    name: &'static str,
    threshold: f64,
    gaps: Vec<f64>,
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    if cfg.model.kind != KindName::Diagonal {
        return Err(CliError::Usage(
            "rate-probe needs model.kind = diagonal".into(),
        ));
    }
    if cfg.loss.kind != LossName::Square {
        return Err(CliError::Usage("rate-probe needs the square loss".into()));
    }
    let grid = &cfg.sweep.sigma_grid;
    if grid.len() < 5 {
        return Err(CliError::Usage(format!(
            "sweep.sigma_grid needs at least 5 points, got {}",
            grid.len()
        )));
    }
    let (model, loss) = build_problem(cfg)?;

    let mut gap_rows = Vec::new();
    let mut slope_rows = Vec::new();
    let mut failures = Vec::new();
    for &seed in ctx.seeds() {
        let w = model.scaled_init(&mut RngStream::new(seed, INIT_STREAM));
        let mut smooth = Vec::with_capacity(grid.len());
        let mut higher = Vec::with_capacity(grid.len());
        for &s in grid {
            let exact = exact_smoothed_diagonal_full(&model, &loss, &w, s)?;
            let eff = reg_lasso(&model, &loss, &w, s)?;
            smooth.push(exact.penalty());
            higher.push((exact.penalty() - eff.penalty()).abs());
        }
        let mut rng = RngStream::new(seed, GAP_STREAM);
        let pred = prediction_gap_probe(&model, &loss, grid, cfg.sweep.optimizer_budget, &mut rng)?;

        let mut quantities = [
            Quantity {
                name: "smoothed_minus_risk",
                threshold: 1.95,
                gaps: smooth,
            },
            Quantity {
                name: "smoothed_minus_effective",
                threshold: 2.9,
                gaps: higher,
            },
            Quantity {
                name: "minimizer_vs_interpolation",
                threshold: 1.9,
                gaps: pred.gaps_to_interp.clone(),
            },
            Quantity {
                name: "effective_vs_smoothed_minimizer",
                threshold: 2.9,
                gaps: pred.gaps_eff_vs_sigma.clone(),
            },
        ];
        if let Some(p) = cfg.hooks.planted_rate {
            for q in &mut quantities {
                q.gaps = grid.iter().map(|s| s.powf(p)).collect();
            }
        }
        for (i, &s) in grid.iter().enumerate() {
            let mut row = vec![seed.to_string(), num(s)];
            row.extend(quantities.iter().map(|q| num(q.gaps[i])));
            row.push(pred.flagged[i].to_string());
            gap_rows.push(row);
        }
        for q in &quantities {
            let (slope, r2, pass, note) = match fit_rate(grid, &q.gaps) {
                Ok(f) => (
                    num(f.slope),
                    num(f.r_squared),
                    f.slope >= q.threshold,
                    String::new(),
                ),
                Err(e) => (String::new(), String::new(), false, e.to_string()),
            };
            if !pass {
                failures.push(format!("seed {seed} {}", q.name));
            }
            slope_rows.push(vec![
                seed.to_string(),
                q.name.to_string(),
                slope,
                r2,
                num(q.threshold),
                pass.to_string(),
                note,
            ]);
        }
        let unconverged: Vec<String> = grid
            .iter()
            .zip(&pred.flagged)
            .filter(|(_, f)| **f)
            .map(|(s, _)| num(*s))
            .collect();
        if !unconverged.is_empty() {
            failures.push(format!("seed {seed} optimizer"));
            slope_rows.push(vec![
                seed.to_string(),
                "optimizer".into(),
                String::new(),
                String::new(),
                String::new(),
                "false".into(),
                format!("budget exhausted at sigma {}", unconverged.join(" ")),
            ]);
        }
    }
    write_table(
        &ctx.out_dir.join("gaps.csv"),
        &[
            "seed",
            "sigma",
            "smoothed_minus_risk",
            "smoothed_minus_effective",
            "minimizer_vs_interpolation",
            "effective_vs_smoothed_minimizer",
            "unconverged",
        ],
        &gap_rows,
    )?;
    write_table(
        &ctx.out_dir.join("summary.csv"),
        &[
            "seed",
            "quantity",
            "slope",
            "r_squared",
            "threshold",
            "pass",
            "note",
        ],
        &slope_rows,
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "below threshold: {}",
            failures.join(", ")
        )))
    }
}
