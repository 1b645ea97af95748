//! Smoothed loss at initialization across hidden widths.

use crate::error::{invalid, Result};
use crate::losses::LossSpec;
use crate::models::{ModelKind, ModelSpec};
use crate::noise::{expected_smoothed_loss_mc, NoiseMode, NoiseScheme, Normalization};
use crate::numerics::{Matrix, RngStream};
use crate::regularizers::{exact_smoothed_two_layer_full, reg_deep_linear, FormulaId};

pub const MIN_MC_SAMPLES: usize = 100;

/// Network family swept over its hidden width `d1`.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepFamily {
    TwoLayerLinear,
    /// Hidden layers of width `d1`, `depth` layers in total.
    DeepLinear {
        depth: usize,
    },
    OneHiddenRelu,
}

impl SweepFamily {
    fn build(&self, x: &Matrix, d1: usize, d2: usize) -> Result<ModelSpec> {
        match self {
            SweepFamily::TwoLayerLinear => ModelSpec::two_layer_linear(x.clone(), d1, d2),
            SweepFamily::DeepLinear { depth } => {
                if *depth < 2 {
                    return Err(invalid("deep linear sweep needs depth >= 2"));
                }
                let mut widths = vec![d1; depth - 1];
                widths.push(d2);
                ModelSpec::deep_linear(x.clone(), &widths)
            }
            SweepFamily::OneHiddenRelu => ModelSpec::one_hidden_relu(x.clone(), d1, d2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub family: SweepFamily,
    pub d1_grid: Vec<usize>,
    pub sigma: f64,
    pub normalization: Normalization,
    pub seeds: Vec<u64>,
    /// Samples per Monte-Carlo estimate (used where no exact formula applies).
    pub mc_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub d1: usize,
    pub mode: NoiseMode,
    /// Smoothed loss averaged over seeds.
    pub mean: f64,
    /// Standard error of `mean`: across seeds when there are several, otherwise
    /// the Monte-Carlo error (zero for exact formulas).
    pub std_error: f64,
    /// Unperturbed loss averaged over the same seeds.
    pub risk_mean: f64,
    pub formula_id: FormulaId,
}

struct SeedValue {
    value: f64,
    mc_se: f64,
    risk: f64,
    formula_id: FormulaId,
}

fn one_seed(
    model: &ModelSpec,
    loss: &LossSpec,
    scheme: &NoiseScheme,
    seed: u64,
    mc_samples: usize,
) -> Result<SeedValue> {
    let w = model.scaled_init(&mut RngStream::new(seed, 0));
    let linear = matches!(
        model.kind(),
        ModelKind::TwoLayerLinear | ModelKind::DeepLinear
    );
    match (scheme.mode, model.kind()) {
        (NoiseMode::Full, ModelKind::TwoLayerLinear) => {
            let e = exact_smoothed_two_layer_full(model, loss, &w, scheme.noise_std())?;
            Ok(SeedValue {
                value: e.total(),
                mc_se: 0.0,
                risk: e.risk,
                formula_id: FormulaId::Exact2l,
            })
        }
        (NoiseMode::Layerwise, _) if linear => {
            // one linear layer at a time: the second-order expansion is exact
            let e = reg_deep_linear(model, loss, &w, scheme.effective_sigma())?;
            let id = if *model.kind() == ModelKind::TwoLayerLinear {
                FormulaId::Nuclear
            } else {
                FormulaId::DeepLinear
            };
            Ok(SeedValue {
                value: e.total(),
                mc_se: 0.0,
                risk: e.risk,
                formula_id: id,
            })
        }
        _ => {
            let mut rng = RngStream::new(seed, 1);
            let est = expected_smoothed_loss_mc(model, loss, scheme, &w, mc_samples, &mut rng)?;
            let risk = loss.loss(&model.forward(&w)?)?;
            Ok(SeedValue {
                value: est.mean,
                mc_se: est.std_error,
                risk,
                formula_id: FormulaId::MonteCarlo,
            })
        }
    }
}

/// Evaluates the smoothed loss at scaled initialization for every width in the
/// grid and both noise schemes. Cells run in parallel; each seed draws its
/// initialization from stream `(seed, 0)` and Monte-Carlo noise from
/// `(seed, 1)`, so results do not depend on scheduling.
pub fn variance_sweep(x: &Matrix, y: &Matrix, settings: &SweepSettings) -> Result<Vec<SweepCell>> {
    if settings.d1_grid.is_empty() {
        return Err(invalid("d1 grid is empty"));
    }
    if settings.seeds.is_empty() {
        return Err(invalid("no seeds given"));
    }
    if settings.mc_samples < MIN_MC_SAMPLES {
        return Err(invalid(format!(
            "{} Monte-Carlo samples requested, at least {MIN_MC_SAMPLES} required",
            settings.mc_samples
        )));
    }
    let loss = LossSpec::square(y.clone())?;
    let d2 = y.cols();
    let jobs: Vec<(usize, NoiseMode)> = settings
        .d1_grid
        .iter()
        .flat_map(|&d1| [(d1, NoiseMode::Full), (d1, NoiseMode::Layerwise)])
        .collect();
    let cell = |&(d1, mode): &(usize, NoiseMode)| -> Result<SweepCell> {
        let model = settings.family.build(x, d1, d2)?;
        let scheme = NoiseScheme::new(
            mode,
            settings.sigma,
            settings.normalization,
            model.layer_count(),
        )?;
        let vals = settings
            .seeds
            .iter()
            .map(|&s| one_seed(&model, &loss, &scheme, s, settings.mc_samples))
            .collect::<Result<Vec<_>>>()?;
        let k = vals.len() as f64;
        let mean = vals.iter().map(|v| v.value).sum::<f64>() / k;
        let std_error = if vals.len() > 1 {
            let var = vals.iter().map(|v| (v.value - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            vals[0].mc_se
        };
        Ok(SweepCell {
            d1,
            mode,
            mean,
            std_error,
            risk_mean: vals.iter().map(|v| v.risk).sum::<f64>() / k,
            formula_id: vals[0].formula_id,
        })
    };
    #[cfg(feature = "parallel")]
    let cells: Vec<Result<SweepCell>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<Result<SweepCell>> = jobs.iter().map(cell).collect();
    cells.into_iter().collect()
}

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Matrix) {
        let mut rng = RngStream::new(4, 0);
        let x = crate::numerics::sample_gaussian_matrix(&mut rng, 8, 3, 1.0).unwrap();
        let y = crate::numerics::sample_gaussian_matrix(&mut rng, 8, 1, 1.0).unwrap();
        (x, y)
    }

    #[test]
    fn one_cell_per_width_and_scheme() {
        let (x, y) = data();
        let s = SweepSettings {
            family: SweepFamily::OneHiddenRelu,
            d1_grid: vec![4],
            sigma: 0.1,
            normalization: Normalization::Theory,
            seeds: vec![1],
            mc_samples: 100,
        };
        let cells = variance_sweep(&x, &y, &s).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells
            .iter()
            .all(|c| c.std_error.is_finite() && c.std_error > 0.0));
        assert!(cells.iter().all(|c| c.formula_id == FormulaId::MonteCarlo));
    }

    #[test]
    fn too_few_samples_rejected() {
        let (x, y) = data();
        let s = SweepSettings {
            family: SweepFamily::TwoLayerLinear,
            d1_grid: vec![4],
            sigma: 0.1,
            normalization: Normalization::Theory,
            seeds: vec![1],
            mc_samples: 99,
        };
        assert!(variance_sweep(&x, &y, &s).is_err());
    }

    #[test]
    fn affine_fit_recovers_line() {
        let (a, b) = affine_fit(&[1.0, 2.0, 4.0], &[5.0, 7.0, 11.0]);
        assert!((a - 2.0).abs() < 1e-14 && (b - 3.0).abs() < 1e-14);
    }
}
