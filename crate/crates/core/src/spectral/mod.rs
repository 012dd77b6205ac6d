//! The model operator family, its spectra, kernels and delocalized traces.

pub mod decay;
pub mod kernel;
pub mod operator;
pub mod sector;
pub mod trace;

pub use decay::{decay_check, BoundFit, DecayFit, DecaySample, GaussianSlope};
pub use kernel::{fold_kernel, heat_kernel, l1_norm, verify_folding, KernelSample};
pub use operator::{CoverSpec, ModelOperator, TrigKind, TrigTerm};
pub use trace::{deloc_trace, line_gap, TraceSampler, TraceValue};
pub use sector::{spectrum_on_cover, SectorSpectrum, SpectralData, SpectrumCache};
