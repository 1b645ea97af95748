pub mod equivalence;
pub mod grad_check;
pub mod rates;
pub mod sweep;
pub mod train;

use noisereg::{NoiseMode, Normalization};

use crate::config::{ModeName, NormalizationName};

pub(crate) fn mode(m: ModeName) -> NoiseMode {
    match m {
        ModeName::Full => NoiseMode::Full,
        ModeName::Layerwise => NoiseMode::Layerwise,
    }
}

pub(crate) fn mode_name(m: ModeName) -> &'static str {
    match m {
        ModeName::Full => "full",
        ModeName::Layerwise => "layerwise",
    }
}

pub(crate) fn normalization(n: NormalizationName) -> Normalization {
    match n {
        NormalizationName::Theory => Normalization::Theory,
        NormalizationName::Experiment => Normalization::Experiment,
    }
}

pub(crate) fn noise_mode_str(m: NoiseMode) -> &'static str {
    match m {
        NoiseMode::Full => "full",
        NoiseMode::Layerwise => "layerwise",
    }
}
