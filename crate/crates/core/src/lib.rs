//! Cough-sound screening pipeline: WAV ingestion, low-level acoustic
//! descriptors, per-clip summary statistics, metadata fusion, from-scratch
//! classifiers and participant-grouped cross-validation with ROC-AUC.
//!
//! The signal and statistics layers are generic over [`Real`] (`f32` or
//! `f64`); the aliases below name the common instantiations.

pub mod audio;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod lld;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod scalar;
pub mod summarize;
pub mod tabular;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Real;

pub type AudioClip64 = audio::AudioClip<f64>;
pub type AudioClip32 = audio::AudioClip<f32>;
pub type Frame64 = dsp::Frame<f64>;
pub type Spectrum64 = dsp::Spectrum<f64>;
pub type Spectrum32 = dsp::Spectrum<f32>;
pub type Extractor64 = lld::Extractor<f64>;
pub type Extractor32 = lld::Extractor<f32>;
pub type LldMatrix64 = lld::LldMatrix<f64>;
pub type LldMatrix32 = lld::LldMatrix<f32>;
pub type Spectrogram64 = lld::Spectrogram<f64>;
pub type Spectrogram32 = lld::Spectrogram<f32>;
pub type FeatureVector64 = summarize::FeatureVector<f64>;
pub type FeatureVector32 = summarize::FeatureVector<f32>;
