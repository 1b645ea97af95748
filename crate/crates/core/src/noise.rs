//! Gaussian parameter perturbations and Monte-Carlo estimates of the smoothed loss.

use std::fmt;

use crate::error::{invalid, Result};
use crate::losses::LossSpec;
use crate::models::{ModelSpec, ParamVector};
use crate::numerics::{sample_gaussian_matrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMode {
    /// Every weight is perturbed at every draw.
    Full,
    /// One layer, chosen uniformly, is perturbed per draw.
    Layerwise,
}

/// How `sigma` maps to per-weight standard deviations.
///
/// | mode      | `Theory`      | `Experiment`   |
/// |-----------|---------------|----------------|
/// | full      | `sigma`       | `sigma / √M`   |
/// | layerwise | `sigma √M`    | `sigma`        |
///
/// Both columns give the full and layer-wise schemes the same σ²-order
/// regularizer; they differ by a global rescaling of σ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    Theory,
    Experiment,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseScheme {
    pub mode: NoiseMode,
    pub sigma: f64,
    pub normalization: Normalization,
    pub layer_count: usize,
}

impl NoiseScheme {
    pub fn new(
        mode: NoiseMode,
        sigma: f64,
        normalization: Normalization,
        layer_count: usize,
    ) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(invalid(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        if layer_count == 0 {
            return Err(invalid("layer_count must be positive"));
        }
        Ok(Self {
            mode,
            sigma,
            normalization,
            layer_count,
        })
    }

    pub fn full(sigma: f64, layer_count: usize) -> Result<Self> {
        Self::new(NoiseMode::Full, sigma, Normalization::Theory, layer_count)
    }

    pub fn layerwise(sigma: f64, layer_count: usize) -> Result<Self> {
        Self::new(
            NoiseMode::Layerwise,
            sigma,
            Normalization::Theory,
            layer_count,
        )
    }

    /// Standard deviation applied to each perturbed weight.
    pub fn noise_std(&self) -> f64 {
        let root_m = (self.layer_count as f64).sqrt();
        match (self.mode, self.normalization) {
            (NoiseMode::Full, Normalization::Theory) => self.sigma,
            (NoiseMode::Full, Normalization::Experiment) => self.sigma / root_m,
            (NoiseMode::Layerwise, Normalization::Theory) => self.sigma * root_m,
            (NoiseMode::Layerwise, Normalization::Experiment) => self.sigma,
        }
    }

    /// The σ at which the second-order regularizer of this scheme is evaluated.
    pub fn effective_sigma(&self) -> f64 {
        match self.normalization {
            Normalization::Theory => self.sigma,
            Normalization::Experiment => self.sigma / (self.layer_count as f64).sqrt(),
        }
    }
}

/// Which layer a perturbation touched. Layers are 0-based here and printed 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbedLayer {
    All,
    Layer(usize),
}

impl fmt::Display for PerturbedLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbedLayer::All => f.write_str("all"),
            PerturbedLayer::Layer(j) => write!(f, "{}", j + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PerturbationRecord {
    pub layer: PerturbedLayer,
    /// Stream position (32-bit words) after the draw.
    pub stream_position: u128,
}

/// Returns a perturbed copy of `w`; `w` itself is left untouched.
///
/// Layer-wise mode consumes one uniform variate for the layer choice before
/// the Gaussian draws.
pub fn perturb(
    scheme: &NoiseScheme,
    model: &ModelSpec,
    w: &ParamVector,
    rng: &mut RngStream,
) -> Result<(ParamVector, PerturbationRecord)> {
    model.check_params(w)?;
    let groups = model.layer_groups();
    if scheme.layer_count != groups.len() {
        return Err(invalid(format!(
            "scheme has {} layers, model has {}",
            scheme.layer_count,
            groups.len()
        )));
    }
    let std = scheme.noise_std();
    let mut out = w.clone();
    let layer = match scheme.mode {
        NoiseMode::Full => {
            for b in out.blocks_mut() {
                let e = sample_gaussian_matrix(rng, b.rows(), b.cols(), std)?;
                b.axpy(1.0, &e);
            }
            PerturbedLayer::All
        }
        NoiseMode::Layerwise => {
            let j = rng.below(groups.len());
            for &bi in &groups[j] {
                let b = &mut out.blocks_mut()[bi];
                let e = sample_gaussian_matrix(rng, b.rows(), b.cols(), std)?;
                b.axpy(1.0, &e);
            }
            PerturbedLayer::Layer(j)
        }
    };
    Ok((
        out,
        PerturbationRecord {
            layer,
            stream_position: rng.position(),
        },
    ))
}

/// Streaming mean and variance (Welford), mergeable across workers.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &RunningMoments) -> RunningMoments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        RunningMoments { count, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl From<RunningMoments> for McEstimate {
    fn from(m: RunningMoments) -> Self {
        McEstimate {
            mean: m.mean(),
            std_error: m.std_error(),
            samples: m.count(),
        }
    }
}

fn mc_moments(
    model: &ModelSpec,
    loss: &LossSpec,
    scheme: &NoiseScheme,
    w: &ParamVector,
    samples: usize,
    rng: &mut RngStream,
) -> Result<RunningMoments> {
    let mut acc = RunningMoments::default();
    for _ in 0..samples {
        let (wp, _) = perturb(scheme, model, w, rng)?;
        acc.push(loss.loss(&model.forward(&wp)?)?);
    }
    Ok(acc)
}

/// Plain Monte-Carlo estimate of `E[L(Phi(w + noise))]` under `scheme`.
pub fn expected_smoothed_loss_mc(
    model: &ModelSpec,
    loss: &LossSpec,
    scheme: &NoiseScheme,
    w: &ParamVector,
    samples: usize,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(invalid("need at least 2 Monte-Carlo samples"));
    }
    Ok(mc_moments(model, loss, scheme, w, samples, rng)?.into())
}

/// Same estimate split over `workers` streams `(seed, 0..workers)`.
///
/// Worker `k` draws `samples / workers` (plus one for the first
/// `samples % workers` workers). The partial moments are merged in worker
/// order, so the result does not depend on scheduling.
pub fn expected_smoothed_loss_mc_split(
    model: &ModelSpec,
    loss: &LossSpec,
    scheme: &NoiseScheme,
    w: &ParamVector,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(invalid("need at least 2 Monte-Carlo samples"));
    }
    let workers = workers.clamp(1, samples);
    let job = |k: usize| {
        let share = samples / workers + usize::from(k < samples % workers);
        let mut rng = RngStream::new(seed, k as u64);
        mc_moments(model, loss, scheme, w, share, &mut rng)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<RunningMoments>> = {
        use rayon::prelude::*;
        (0..workers).into_par_iter().map(job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<RunningMoments>> = (0..workers).map(job).collect();

    let mut parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    // pairwise tree merge
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|c| {
                if c.len() == 2 {
                    c[0].merge(&c[1])
                } else {
                    c[0]
                }
            })
            .collect();
    }
    Ok(parts[0].into())
}
