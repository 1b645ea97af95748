//! Gradient descent with a single Gaussian perturbation per step.
//!
//! Each step draws `w + ε` from the noise scheme, evaluates the gradient of
//! `L∘Φ` there, and moves the unperturbed iterate: `w ← w − lr_t ∇(L∘Φ)(w + ε)`.
//! The expectation of that step is the gradient of the smoothed loss.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{invalid, Result};
use crate::losses::LossSpec;
use crate::models::{ModelSpec, ParamVector};
use crate::noise::{perturb, NoiseScheme, PerturbedLayer};
use crate::numerics::{Matrix, RngStream};
use crate::regularizers::{effective_loss, risk_grad};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Constant,
    /// `lr_t = lr (1 + cos(π t / steps)) / 2`, `t = 0..steps`.
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Batch {
    Full,
    MiniBatch(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub schedule: Schedule,
    pub batch: Batch,
    pub scheme: NoiseScheme,
    pub seed: u64,
    /// Record every `log_every` steps; the last step is always recorded.
    pub log_every: usize,
}

impl TrainConfig {
    pub fn lr_at(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr,
            Schedule::Cosine => {
                let c = (PI * t as f64 / self.steps.max(1) as f64).cos();
                (self.lr * (1.0 + c) / 2.0).max(0.0)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunRecord {
    pub step: usize,
    pub train_loss: f64,
    pub reg_value: f64,
    pub effective_loss: f64,
    pub lr: f64,
    /// `None` for the initial record, which has no perturbation behind it.
    pub perturbed_layer: Option<PerturbedLayer>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_w: ParamVector,
    pub records: Vec<RunRecord>,
    pub diverged: bool,
}

impl TrainOutcome {
    pub fn last(&self) -> Option<&RunRecord> {
        self.records.last()
    }
}

pub const RECORD_HEADER: &str = "step,train_loss,reg_value,effective_loss,lr,perturbed_layer";

pub fn write_records<W: Write>(records: &[RunRecord], mut out: W) -> Result<()> {
    writeln!(out, "{RECORD_HEADER}")?;
    for r in records {
        let layer = r
            .perturbed_layer
            .map_or_else(|| "none".to_string(), |l| l.to_string());
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{}",
            r.step, r.train_loss, r.reg_value, r.effective_loss, r.lr, layer
        )?;
    }
    Ok(())
}

/// Gradient of `L(Φ(w))`, i.e. `loss_grad · DΦ` contracted without forming `DΦ`.
pub fn gradient(model: &ModelSpec, loss: &LossSpec, w: &ParamVector) -> Result<ParamVector> {
    risk_grad(model, loss, w)
}

fn record(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
    step: usize,
    lr: f64,
    layer: Option<PerturbedLayer>,
) -> Result<RunRecord> {
    let e = effective_loss(model, loss, w, sigma)?;
    Ok(RunRecord {
        step,
        train_loss: e.risk,
        reg_value: e.penalty(),
        effective_loss: e.total(),
        lr,
        perturbed_layer: layer,
    })
}

fn healthy(r: &RunRecord) -> bool {
    r.train_loss.is_finite() && r.effective_loss.is_finite()
}

/// Runs `cfg.steps` noisy gradient steps from `w0`.
///
/// Noise comes from stream `(seed, 0)` and mini-batch indices from `(seed, 1)`.
/// Logged losses are always on the full dataset at the unperturbed iterate,
/// with the penalty evaluated at the scheme's effective σ. A non-finite loss
/// or gradient stops the run with `diverged = true`; records up to the last
/// healthy one are kept.
pub fn train(
    model: &ModelSpec,
    loss: &LossSpec,
    w0: &ParamVector,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    model.check_params(w0)?;
    if loss.n() != model.n() || loss.out_dim() != model.out_dim() {
        return Err(invalid(format!(
            "loss expects {} samples x {} outputs, model produces {} x {}",
            loss.n(),
            loss.out_dim(),
            model.n(),
            model.out_dim()
        )));
    }
    if !cfg.lr.is_finite() || cfg.lr < 0.0 {
        return Err(invalid(format!(
            "lr must be finite and >= 0, got {}",
            cfg.lr
        )));
    }
    if cfg.log_every == 0 {
        return Err(invalid("log_every must be positive"));
    }
    if let Batch::MiniBatch(b) = cfg.batch {
        if b == 0 || b > model.n() {
            return Err(invalid(format!("batch size {b} not in 1..={}", model.n())));
        }
    }
    let sigma_eff = cfg.scheme.effective_sigma();
    let mut noise_rng = RngStream::new(cfg.seed, 0);
    let mut batch_rng = RngStream::new(cfg.seed, 1);
    let mut w = w0.clone();
    let mut records = Vec::with_capacity(cfg.steps / cfg.log_every + 2);

    let first = record(model, loss, &w, sigma_eff, 0, cfg.lr_at(0), None)?;
    if !healthy(&first) {
        return Ok(TrainOutcome {
            final_w: w,
            records,
            diverged: true,
        });
    }
    records.push(first);

    for t in 0..cfg.steps {
        let lr = cfg.lr_at(t);
        let (wp, rec) = perturb(&cfg.scheme, model, &w, &mut noise_rng)?;
        let g = match cfg.batch {
            Batch::Full => gradient(model, loss, &wp)?,
            Batch::MiniBatch(b) => {
                let idx = batch_rng.sample_without_replacement(model.n(), b);
                gradient(&model.with_rows(&idx), &loss.with_rows(&idx), &wp)?
            }
        };
        if !g.is_finite() {
            return Ok(TrainOutcome {
                final_w: w,
                records,
                diverged: true,
            });
        }
        let mut next = w.clone();
        next.axpy(-lr, &g);
        let step = t + 1;
        if step % cfg.log_every == 0 || step == cfg.steps {
            let r = record(model, loss, &next, sigma_eff, step, lr, Some(rec.layer))?;
            if !healthy(&r) {
                return Ok(TrainOutcome {
                    final_w: w,
                    records,
                    diverged: true,
                });
            }
            records.push(r);
        } else if !next.is_finite() {
            return Ok(TrainOutcome {
                final_w: w,
                records,
                diverged: true,
            });
        }
        w = next;
    }
    Ok(TrainOutcome {
        final_w: w,
        records,
        diverged: false,
    })
}

pub const PLANTED_SAMPLES: usize = 40;
pub const PLANTED_DIM: usize = 10;
pub const PLANTED_BETA: (f64, f64) = (1.0, -1.0);

/// `n x d` standard Gaussian `X` and noiseless targets `y = β₁ X_{·1} + β₂ X_{·2}`.
pub fn make_planted_dataset(
    rng: &mut RngStream,
    n: usize,
    d: usize,
    beta: (f64, f64),
) -> Result<(Matrix, Matrix)> {
    if d < 2 || n == 0 {
        return Err(invalid("planted dataset needs n >= 1 and d >= 2"));
    }
    let x = crate::numerics::sample_gaussian_matrix(rng, n, d, 1.0)?;
    let y = Matrix::from_fn(n, 1, |i, _| beta.0 * x[(i, 0)] + beta.1 * x[(i, 1)]);
    Ok((x, y))
}

/// The 40 x 10 planted-sparse regression problem with `β = (1, -1)`.
pub fn make_sparse_dataset(rng: &mut RngStream) -> (Matrix, Matrix) {
    make_planted_dataset(rng, PLANTED_SAMPLES, PLANTED_DIM, PLANTED_BETA)
        .expect("fixed sizes are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseMode;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    fn cfg(scheme: NoiseScheme, steps: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            steps,
            lr,
            schedule: Schedule::Constant,
            batch: Batch::Full,
            scheme,
            seed: 3,
            log_every: 1,
        }
    }

    #[test]
    fn noiseless_matches_plain_gd_on_quadratic() {
        // w2 stays at its zero stationary point, so w1 follows u ← u − lr·2u(u² − 2)
        let model = ModelSpec::diagonal(scalar(1.0)).unwrap();
        let loss = LossSpec::square(scalar(2.0)).unwrap();
        let w0 = ParamVector::new(vec![scalar(0.5), scalar(0.0)]);
        let scheme = NoiseScheme::full(0.0, 2).unwrap();
        let out = train(&model, &loss, &w0, &cfg(scheme, 25, 0.05)).unwrap();
        let mut u: f64 = 0.5;
        for r in &out.records[1..] {
            u -= 0.05 * 2.0 * u * (u * u - 2.0);
            assert!((r.train_loss - 0.5 * (u * u - 2.0).powi(2)).abs() < 1e-12);
        }
        assert!((out.final_w.block(0)[(0, 0)] - u).abs() < 1e-12);
    }

    #[test]
    fn zero_lr_keeps_weights() {
        let model = ModelSpec::two_layer_linear(scalar(1.0), 1, 1).unwrap();
        let loss = LossSpec::square(scalar(1.0)).unwrap();
        let w0 = ParamVector::new(vec![scalar(0.3), scalar(-0.2)]);
        let scheme = NoiseScheme::full(0.5, 2).unwrap();
        let out = train(&model, &loss, &w0, &cfg(scheme, 1, 0.0)).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.final_w, w0);
        assert_eq!(out.records[1].perturbed_layer, Some(PerturbedLayer::All));
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let scheme = NoiseScheme::full(0.0, 2).unwrap();
        let mut c = cfg(scheme, 100, 0.1);
        c.schedule = Schedule::Cosine;
        assert_eq!(c.lr_at(0), 0.1);
        assert!((c.lr_at(50) - 0.05).abs() < 1e-15);
        assert!(c.lr_at(100).abs() < 1e-15);
        assert!((0..=100).all(|t| c.lr_at(t) >= 0.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = RngStream::new(9, 0);
        let (x, y) = make_sparse_dataset(&mut rng);
        let model = ModelSpec::two_layer_linear(x, 8, 1).unwrap();
        let loss = LossSpec::square(y).unwrap();
        let w0 = model.scaled_init(&mut rng);
        let scheme = NoiseScheme::layerwise(0.05, 2).unwrap();
        let mut c = cfg(scheme, 50, 0.1);
        c.batch = Batch::MiniBatch(10);
        let a = train(&model, &loss, &w0, &c).unwrap();
        let b = train(&model, &loss, &w0, &c).unwrap();
        assert_eq!(a.final_w, b.final_w);
        assert_eq!(a.records, b.records);
        assert!(a
            .records
            .iter()
            .skip(1)
            .all(|r| matches!(r.perturbed_layer, Some(PerturbedLayer::Layer(_)))));
    }

    #[test]
    fn divergence_is_caught() {
        let model = ModelSpec::diagonal(scalar(1.0)).unwrap();
        let loss = LossSpec::square(scalar(1.0)).unwrap();
        let w0 = ParamVector::new(vec![scalar(3.0), scalar(0.0)]);
        let scheme =
            NoiseScheme::new(NoiseMode::Full, 0.0, crate::noise::Normalization::Theory, 2).unwrap();
        let out = train(&model, &loss, &w0, &cfg(scheme, 200, 10.0)).unwrap();
        assert!(out.diverged);
        assert!(out.records.iter().all(healthy));
        assert!(out.records.len() < 200);
    }

    #[test]
    fn bad_config_rejected() {
        let model = ModelSpec::diagonal(scalar(1.0)).unwrap();
        let loss = LossSpec::square(scalar(1.0)).unwrap();
        let w0 = ParamVector::new(vec![scalar(1.0), scalar(0.0)]);
        let scheme = NoiseScheme::full(0.1, 2).unwrap();
        assert!(train(&model, &loss, &w0, &cfg(scheme, 5, -0.1)).is_err());
        let mut c = cfg(scheme, 5, 0.1);
        c.batch = Batch::MiniBatch(2);
        assert!(train(&model, &loss, &w0, &c).is_err());
    }

    #[test]
    fn planted_dataset_shape_and_coefficients() {
        let (x, y) = make_sparse_dataset(&mut RngStream::new(1, 0));
        assert_eq!(x.shape(), (40, 10));
        assert_eq!(y.shape(), (40, 1));
        let (x2, y2) = make_sparse_dataset(&mut RngStream::new(2, 0));
        assert_ne!(x, x2);
        for i in 0..40 {
            assert_eq!(y[(i, 0)], x[(i, 0)] - x[(i, 1)]);
            assert_eq!(y2[(i, 0)], x2[(i, 0)] - x2[(i, 1)]);
        }
    }

    #[test]
    fn record_csv_layout() {
        let recs = [
            RunRecord {
                step: 0,
                train_loss: 1.0,
                reg_value: 0.5,
                effective_loss: 1.5,
                lr: 0.1,
                perturbed_layer: None,
            },
            RunRecord {
                step: 1,
                train_loss: 1.0,
                reg_value: 0.5,
                effective_loss: 1.5,
                lr: 0.1,
                perturbed_layer: Some(PerturbedLayer::Layer(1)),
            },
        ];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], RECORD_HEADER);
        assert!(lines[1].ends_with(",none"));
        assert!(lines[2].ends_with(",2"));
    }
}
