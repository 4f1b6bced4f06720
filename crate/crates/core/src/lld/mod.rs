//! Per-frame low-level descriptors: energy, zero-crossing rate, intensity,
//! five spectral-shape measures, the log-mel spectrogram and MFCCs.

mod extract;
mod mel;
mod spectral;
mod temporal;

pub use extract::{
    extract_lld_matrix, log_mel_spectrogram, mfcc, ClipFeatures, Extractor, LldConfig, LldMatrix,
    LogMelSpectrogram, Spectrogram, TEMPORAL_SPECTRAL_NAMES,
};
pub use mel::{mel_scale, mel_to_hz, DctII, MelFilterbank, LOG_MEL_FLOOR};
pub use spectral::{
    spectral_centroid, spectral_entropy, spectral_flux, spectral_rolloff, spectral_spread,
    DEFAULT_ROLLOFF,
};
pub use temporal::{frame_energy, intensity_db, zero_crossing_rate, INTENSITY_FLOOR, INTENSITY_REF};
