//! Log-log slope fitting.

use crate::error::{invalid, shape, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The σ values that entered the fit.
    pub sigma_grid: Vec<f64>,
    /// Input positions dropped because their gap was not positive.
    pub dropped: Vec<usize>,
}

pub const MIN_POINTS: usize = 5;

/// Ordinary least squares of `ln gap` on `ln σ`.
///
/// Points with a gap that is not a positive finite number are dropped with a
/// warning; fewer than [`MIN_POINTS`] survivors is an error.
pub fn fit_rate(sigma_grid: &[f64], gaps: &[f64]) -> Result<RateFit> {
    if sigma_grid.len() != gaps.len() {
        return Err(shape(format!(
            "{} sigmas but {} gaps",
            sigma_grid.len(),
            gaps.len()
        )));
    }
    if let Some(s) = sigma_grid.iter().find(|s| !s.is_finite() || **s <= 0.0) {
        return Err(invalid(format!("sigma values must be positive, got {s}")));
    }
    let mut dropped = Vec::new();
    let mut pts = Vec::new();
    for (k, (&s, &g)) in sigma_grid.iter().zip(gaps).enumerate() {
        if g > 0.0 && g.is_finite() {
            pts.push((s.ln(), g.ln(), s));
        } else {
            log::warn!("fit_rate: dropping sigma = {s:e} with gap {g:e}");
            dropped.push(k);
        }
    }
    if pts.len() < MIN_POINTS {
        return Err(invalid(format!(
            "{} usable points after dropping non-positive gaps, need {MIN_POINTS}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("all sigma values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        sigma_grid: pts.iter().map(|p| p.2).collect(),
        dropped,
    })
}

/// `k` points from `lo` to `hi`, evenly spaced in log scale.
pub fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..k)
                .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
                .collect()
        }
    }
}
