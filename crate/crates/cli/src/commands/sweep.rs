use noisereg::sweep::{affine_fit, variance_sweep, SweepFamily, SweepSettings, MIN_MC_SAMPLES};
use noisereg::NoiseMode;

use super::{mode, noise_mode_str, normalization};
use crate::config::{KindName, LossName};
use crate::data::load_data;
use crate::output::{num, write_table};
use crate::{CliError, CliResult, Context};

pub fn run(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let family = match cfg.model.kind {
        KindName::TwoLayerLinear => SweepFamily::TwoLayerLinear,
        KindName::DeepLinear => SweepFamily::DeepLinear {
            depth: cfg.model.widths.len(),
        },
        KindName::OneHiddenRelu => SweepFamily::OneHiddenRelu,
        k => {
            return Err(CliError::Usage(format!(
            "variance-sweep supports two_layer_linear, deep_linear and one_hidden_relu, not {k:?}"
        )))
        }
    };
    if cfg.loss.kind != LossName::Square {
        return Err(CliError::Usage(
            "variance-sweep needs the square loss".into(),
        ));
    }
    if cfg.sweep.mc_samples < MIN_MC_SAMPLES {
        return Err(CliError::Usage(format!(
            "sweep.mc_samples must be at least {MIN_MC_SAMPLES}, got {}",
            cfg.sweep.mc_samples
        )));
    }
    let (x, y) = load_data(&cfg.io)?;
    let settings = SweepSettings {
        family,
        d1_grid: cfg.sweep.d1_grid.clone(),
        sigma: cfg.noise.sigma,
        normalization: normalization(cfg.noise.normalization),
        seeds: ctx.seeds().to_vec(),
        mc_samples: cfg.sweep.mc_samples,
    };
    let modes: Vec<NoiseMode> = cfg.noise.modes.iter().map(|&m| mode(m)).collect();
    let cells: Vec<_> = variance_sweep(&x, &y, &settings)?
        .into_iter()
        .filter(|c| modes.contains(&c.mode))
        .collect();
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.d1.to_string(),
                noise_mode_str(c.mode).to_string(),
                num(c.mean),
                num(c.std_error),
                c.formula_id.as_str().to_string(),
            ]
        })
        .collect();
    write_table(
        &ctx.out_dir.join("variance_sweep.csv"),
        &["d1", "scheme", "mean", "std_error", "formula_id"],
        &rows,
    )?;

    let mut summary = Vec::new();
    for &mode in &modes {
        let (d1s, excess): (Vec<f64>, Vec<f64>) = cells
            .iter()
            .filter(|c| c.mode == mode)
            .map(|c| (c.d1 as f64, c.mean - c.risk_mean))
            .unzip();
        let mean = excess.iter().sum::<f64>() / excess.len() as f64;
        let spread = excess.iter().map(|e| (e - mean).abs()).fold(0.0, f64::max)
            / mean.abs().max(f64::MIN_POSITIVE);
        let slope = if d1s.len() >= 2 {
            affine_fit(&d1s, &excess).0
        } else {
            f64::NAN
        };
        summary.push(vec![
            noise_mode_str(mode).to_string(),
            num(slope),
            num(spread),
        ]);
    }
    write_table(
        &ctx.out_dir.join("summary.csv"),
        &["scheme", "excess_slope_per_d1", "excess_relative_spread"],
        &summary,
    )
}
