//! Dataset loading and model construction from a config.

use noisereg::trainer::make_planted_dataset;
use noisereg::{LossSpec, Matrix, ModelSpec, RngStream};

use crate::config::{ExperimentConfig, IoBlock, KindName, LossName, SyntheticKind};
use crate::{CliError, CliResult};

/// Inputs `X` (`n x d`) and targets `Y` (`n x k`).
pub fn load_data(io: &IoBlock) -> CliResult<(Matrix, Matrix)> {
    if let Some(s) = &io.synthetic {
        if s.n == 0 || s.d == 0 || s.outputs == 0 {
            return Err(CliError::Usage(
                "io.synthetic: n, d and outputs must be positive".into(),
            ));
        }
        let mut rng = RngStream::new(s.seed, 0);
        return Ok(match s.kind {
            SyntheticKind::Planted => {
                if s.outputs != 1 {
                    return Err(CliError::Usage(
                        "io.synthetic: planted data has one output".into(),
                    ));
                }
                make_planted_dataset(&mut rng, s.n, s.d, (s.beta[0], s.beta[1]))?
            }
            SyntheticKind::Gaussian => {
                let x = noisereg::numerics::sample_gaussian_matrix(&mut rng, s.n, s.d, 1.0)?;
                let y = noisereg::numerics::sample_gaussian_matrix(&mut rng, s.n, s.outputs, 1.0)?;
                (x, y)
            }
        });
    }
    let (Some(xp), Some(yp)) = (&io.x_csv, &io.y_csv) else {
        return Err(CliError::Usage(
            "io: x_csv and y_csv are both required".into(),
        ));
    };
    let load = |p: &std::path::Path| {
        if !p.exists() {
            return Err(CliError::Usage(format!(
                "input file not found: {}",
                p.display()
            )));
        }
        Matrix::load_csv(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
    };
    let x = load(xp)?;
    let y = load(yp)?;
    if x.rows() != y.rows() {
        return Err(CliError::Usage(format!(
            "{} has {} rows but {} has {}",
            xp.display(),
            x.rows(),
            yp.display(),
            y.rows()
        )));
    }
    Ok((x, y))
}

pub fn build_model(cfg: &ExperimentConfig, x: Matrix) -> CliResult<ModelSpec> {
    let widths = &cfg.model.widths;
    let model = match cfg.model.kind {
        KindName::Diagonal => ModelSpec::diagonal(x)?,
        KindName::GroupFactored => ModelSpec::group_factored(x, cfg.model.groups.unwrap_or(0))?,
        KindName::TwoLayerLinear => two_layer(widths, |h, o| ModelSpec::two_layer_linear(x, h, o))?,
        KindName::OneHiddenRelu => two_layer(widths, |h, o| ModelSpec::one_hidden_relu(x, h, o))?,
        KindName::DeepLinear => ModelSpec::deep_linear(x, widths)?,
        KindName::DeepRelu => ModelSpec::deep_relu(x, widths)?,
    };
    Ok(model)
}

fn two_layer(
    widths: &[usize],
    make: impl FnOnce(usize, usize) -> noisereg::Result<ModelSpec>,
) -> CliResult<ModelSpec> {
    match widths {
        [h, o] => Ok(make(*h, *o)?),
        _ => Err(CliError::Usage(format!(
            "model.widths must be [hidden, outputs] for this kind, got {widths:?}"
        ))),
    }
}

/// Square loss on `y`, or logistic loss on labels `sign(y)`.
pub fn build_loss(cfg: &ExperimentConfig, y: &Matrix) -> CliResult<LossSpec> {
    Ok(match cfg.loss.kind {
        LossName::Square => LossSpec::square(y.clone())?,
        LossName::Logistic => {
            if y.cols() != 1 {
                return Err(CliError::Usage(
                    "logistic loss needs a single target column".into(),
                ));
            }
            let labels = y
                .as_slice()
                .iter()
                .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            LossSpec::logistic(labels)?
        }
    })
}

/// Model and loss for the configured data, with matching output widths.
pub fn build_problem(cfg: &ExperimentConfig) -> CliResult<(ModelSpec, LossSpec)> {
    let (x, y) = load_data(&cfg.io)?;
    let model = build_model(cfg, x)?;
    let loss = build_loss(cfg, &y)?;
    if model.out_dim() != loss.out_dim() {
        return Err(CliError::Usage(format!(
            "model has {} outputs but the targets have {}",
            model.out_dim(),
            loss.out_dim()
        )));
    }
    Ok((model, loss))
}
