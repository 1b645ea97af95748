//! Gradient descent with backtracking, used to minimize closed-form objectives.

use crate::error::Result;
use crate::models::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GdOptions {
    pub max_iters: usize,
    /// Stop once `||∇f|| < grad_tol`.
    pub grad_tol: f64,
    pub initial_step: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// The Armijo test compares against the largest of this many recent values.
    pub memory: usize,
}

impl Default for GdOptions {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            grad_tol: 1e-10,
            initial_step: 1.0,
            armijo: 1e-4,
            memory: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GdResult {
    pub w: ParamVector,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Minimizes `f` from `w0`; `f` returns the value and gradient.
///
/// Every step is a plain gradient step. Its first trial length is the
/// Barzilai–Borwein estimate `<s,s>/<s,g_diff>` from the previous step when
/// that is positive, halved until the value drops sufficiently below the
/// largest of the last `memory` values (a non-monotone Armijo test). A slack of
/// a few ulps of the current value lets the iteration keep reducing the
/// gradient once value differences reach round-off.
pub fn minimize_gd<F>(f: F, w0: &ParamVector, opts: &GdOptions) -> Result<GdResult>
where
    F: Fn(&ParamVector) -> Result<(f64, ParamVector)>,
{
    let mut w = w0.clone();
    let (mut val, mut g) = f(&w)?;
    let mut step = opts.initial_step;
    let mut prev: Option<(ParamVector, ParamVector)> = None;
    let mut recent = std::collections::VecDeque::from([val]);
    for it in 0..opts.max_iters {
        let gn2 = g.norm_sq();
        if gn2.sqrt() < opts.grad_tol {
            return Ok(GdResult {
                w,
                value: val,
                grad_norm: gn2.sqrt(),
                iters: it,
                converged: true,
            });
        }
        if let Some((pw, pg)) = &prev {
            let mut s = w.clone();
            s.axpy(-1.0, pw);
            let mut yv = g.clone();
            yv.axpy(-1.0, pg);
            let sy: f64 = s
                .flatten()
                .iter()
                .zip(yv.flatten())
                .map(|(a, b)| a * b)
                .sum();
            if sy > 0.0 {
                step = s.norm_sq() / sy;
            }
        }
        let reference = recent.iter().copied().fold(val, f64::max);
        let slack = 4.0 * f64::EPSILON * val.abs();
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = w.clone();
            trial.axpy(-step, &g);
            let (tv, tg) = f(&trial)?;
            if tv.is_finite() && tv <= reference - opts.armijo * step * gn2 + slack {
                accepted = Some((trial, tv, tg));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, tv, tg)) = accepted else {
            // no decrease at machine precision: treat as stationary
            return Ok(GdResult {
                w,
                value: val,
                grad_norm: gn2.sqrt(),
                iters: it,
                converged: false,
            });
        };
        prev = Some((
            std::mem::replace(&mut w, trial),
            std::mem::replace(&mut g, tg),
        ));
        val = tv;
        recent.push_back(val);
        if recent.len() > opts.memory.max(1) {
            recent.pop_front();
        }
    }
    let grad_norm = g.norm_sq().sqrt();
    Ok(GdResult {
        w,
        value: val,
        grad_norm,
        iters: opts.max_iters,
        converged: grad_norm < opts.grad_tol,
    })
}
