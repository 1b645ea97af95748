//! Browser bindings for three small experiments: the width sweep of the
//! expected smoothed loss, the diagonal-network rate probe, and the Lasso
//! equivalence check. Each has a plain Rust entry point that the exported
//! wrapper calls.

use noisereg::numerics::sample_gaussian_matrix;
use noisereg::oracles::{fit_rate, lasso_equivalence, log_spaced, prediction_gap_probe};
use noisereg::regularizers::{exact_smoothed_diagonal_full, reg_lasso};
use noisereg::sweep::{variance_sweep, SweepFamily, SweepSettings};
use noisereg::trainer::make_planted_dataset;
use noisereg::{LossSpec, ModelSpec, NoiseMode, Normalization, RngStream};
use wasm_bindgen::prelude::*;

fn js_err(e: noisereg::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Mean expected smoothed loss per hidden width, full and layer-wise noise.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepCurves {
    pub d1: Vec<f64>,
    pub risk: Vec<f64>,
    pub full_mean: Vec<f64>,
    pub full_se: Vec<f64>,
    pub layerwise_mean: Vec<f64>,
    pub layerwise_se: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRequest {
    /// One-hidden-layer ReLU (Monte-Carlo) instead of two-layer linear (closed forms).
    pub relu: bool,
    pub sigma: f64,
    pub n: usize,
    pub d: usize,
    pub d1_grid: Vec<usize>,
    pub seeds: u64,
    pub mc_samples: usize,
    pub data_seed: u64,
}

pub fn width_sweep(req: &SweepRequest) -> noisereg::Result<SweepCurves> {
    let mut rng = RngStream::new(req.data_seed, 0);
    let x = sample_gaussian_matrix(&mut rng, req.n, req.d, 1.0)?;
    let y = sample_gaussian_matrix(&mut rng, req.n, 1, 1.0)?;
    let settings = SweepSettings {
        family: if req.relu {
            SweepFamily::OneHiddenRelu
        } else {
            SweepFamily::TwoLayerLinear
        },
        d1_grid: req.d1_grid.clone(),
        sigma: req.sigma,
        normalization: Normalization::Theory,
        seeds: (0..req.seeds.max(1)).collect(),
        mc_samples: req.mc_samples,
    };
    let mut out = SweepCurves::default();
    for c in variance_sweep(&x, &y, &settings)? {
        match c.mode {
            NoiseMode::Full => {
                out.d1.push(c.d1 as f64);
                out.risk.push(c.risk_mean);
                out.full_mean.push(c.mean);
                out.full_se.push(c.std_error);
            }
            NoiseMode::Layerwise => {
                out.layerwise_mean.push(c.mean);
                out.layerwise_se.push(c.std_error);
            }
        }
    }
    Ok(out)
}

/// Gap series over a log-spaced σ grid for the diagonal network, with fitted
/// log-log slopes (`NaN` where no slope can be fitted).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateCurves {
    pub sigmas: Vec<f64>,
    pub smoothed_minus_risk: Vec<f64>,
    pub smoothed_minus_effective: Vec<f64>,
    pub minimizer_vs_interpolation: Vec<f64>,
    pub effective_vs_smoothed_minimizer: Vec<f64>,
    pub slopes: [f64; 4],
}

pub fn rate_probe(
    n: usize,
    d: usize,
    sigma_lo: f64,
    sigma_hi: f64,
    points: usize,
    seed: u64,
) -> noisereg::Result<RateCurves> {
    let mut rng = RngStream::new(seed, 0);
    let (x, y) = make_planted_dataset(&mut rng, n, d, (1.0, -1.0))?;
    let model = ModelSpec::diagonal(x)?;
    let loss = LossSpec::square(y)?;
    let sigmas = log_spaced(sigma_lo, sigma_hi, points);
    let w = model.scaled_init(&mut rng);
    let mut out = RateCurves::default();
    for &s in &sigmas {
        let exact = exact_smoothed_diagonal_full(&model, &loss, &w, s)?;
        let eff = reg_lasso(&model, &loss, &w, s)?;
        out.smoothed_minus_risk.push(exact.penalty());
        out.smoothed_minus_effective
            .push((exact.penalty() - eff.penalty()).abs());
    }
    let gaps = prediction_gap_probe(&model, &loss, &sigmas, 100_000, &mut rng)?;
    out.minimizer_vs_interpolation = gaps.gaps_to_interp;
    out.effective_vs_smoothed_minimizer = gaps.gaps_eff_vs_sigma;
    let series = [
        &out.smoothed_minus_risk,
        &out.smoothed_minus_effective,
        &out.minimizer_vs_interpolation,
        &out.effective_vs_smoothed_minimizer,
    ];
    for (slot, g) in out.slopes.iter_mut().zip(series) {
        *slot = fit_rate(&sigmas, g).map_or(f64::NAN, |f| f.slope);
    }
    out.sigmas = sigmas;
    Ok(out)
}

/// β from the noise-regularized diagonal network next to the weighted Lasso solution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LassoComparison {
    pub beta_network: Vec<f64>,
    pub beta_lasso: Vec<f64>,
    pub linf: f64,
    pub objective_gap: f64,
}

pub fn lasso_compare(
    n: usize,
    d: usize,
    sigma: f64,
    restarts: usize,
    seed: u64,
) -> noisereg::Result<LassoComparison> {
    let mut rng = RngStream::new(seed, 0);
    let (x, y) = make_planted_dataset(&mut rng, n, d, (1.0, -1.0))?;
    let r = lasso_equivalence(&x, &y, sigma, restarts, 100_000, &mut rng)?;
    Ok(LassoComparison {
        beta_network: r.beta_gd,
        beta_lasso: r.beta_cd,
        linf: r.linf,
        objective_gap: r.objective_gap,
    })
}

#[wasm_bindgen]
pub struct SweepResult(SweepCurves);

#[wasm_bindgen]
impl SweepResult {
    #[wasm_bindgen(getter)]
    pub fn d1(&self) -> Vec<f64> {
        self.0.d1.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn risk(&self) -> Vec<f64> {
        self.0.risk.clone()
    }
    #[wasm_bindgen(getter, js_name = fullMean)]
    pub fn full_mean(&self) -> Vec<f64> {
        self.0.full_mean.clone()
    }
    #[wasm_bindgen(getter, js_name = fullSe)]
    pub fn full_se(&self) -> Vec<f64> {
        self.0.full_se.clone()
    }
    #[wasm_bindgen(getter, js_name = layerwiseMean)]
    pub fn layerwise_mean(&self) -> Vec<f64> {
        self.0.layerwise_mean.clone()
    }
    #[wasm_bindgen(getter, js_name = layerwiseSe)]
    pub fn layerwise_se(&self) -> Vec<f64> {
        self.0.layerwise_se.clone()
    }
}

#[wasm_bindgen(js_name = widthSweep)]
#[allow(clippy::too_many_arguments)]
pub fn width_sweep_js(
    relu: bool,
    sigma: f64,
    n: usize,
    d: usize,
    d1_grid: Vec<u32>,
    seeds: u32,
    mc_samples: usize,
    data_seed: u32,
) -> Result<SweepResult, JsError> {
    let req = SweepRequest {
        relu,
        sigma,
        n,
        d,
        d1_grid: d1_grid.into_iter().map(|v| v as usize).collect(),
        seeds: seeds.into(),
        mc_samples,
        data_seed: data_seed.into(),
    };
    width_sweep(&req).map(SweepResult).map_err(js_err)
}

#[wasm_bindgen]
pub struct RateResult(RateCurves);

#[wasm_bindgen]
impl RateResult {
    #[wasm_bindgen(getter)]
    pub fn sigmas(&self) -> Vec<f64> {
        self.0.sigmas.clone()
    }
    /// Gap series `k` in 0..4, in the order of [`RateCurves`].
    pub fn series(&self, k: usize) -> Vec<f64> {
        match k {
            0 => self.0.smoothed_minus_risk.clone(),
            1 => self.0.smoothed_minus_effective.clone(),
            2 => self.0.minimizer_vs_interpolation.clone(),
            _ => self.0.effective_vs_smoothed_minimizer.clone(),
        }
    }
    #[wasm_bindgen(getter)]
    pub fn slopes(&self) -> Vec<f64> {
        self.0.slopes.to_vec()
    }
}

#[wasm_bindgen(js_name = rateProbe)]
pub fn rate_probe_js(
    n: usize,
    d: usize,
    sigma_lo: f64,
    sigma_hi: f64,
    points: usize,
    seed: u32,
) -> Result<RateResult, JsError> {
    rate_probe(n, d, sigma_lo, sigma_hi, points, seed.into())
        .map(RateResult)
        .map_err(js_err)
}

#[wasm_bindgen]
pub struct LassoResult(LassoComparison);

#[wasm_bindgen]
impl LassoResult {
    #[wasm_bindgen(getter, js_name = betaNetwork)]
    pub fn beta_network(&self) -> Vec<f64> {
        self.0.beta_network.clone()
    }
    #[wasm_bindgen(getter, js_name = betaLasso)]
    pub fn beta_lasso(&self) -> Vec<f64> {
        self.0.beta_lasso.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn linf(&self) -> f64 {
        self.0.linf
    }
    #[wasm_bindgen(getter, js_name = objectiveGap)]
    pub fn objective_gap(&self) -> f64 {
        self.0.objective_gap
    }
}

#[wasm_bindgen(js_name = lassoCompare)]
pub fn lasso_compare_js(
    n: usize,
    d: usize,
    sigma: f64,
    restarts: usize,
    seed: u32,
) -> Result<LassoResult, JsError> {
    lasso_compare(n, d, sigma, restarts, seed.into())
        .map(LassoResult)
        .map_err(js_err)
}
