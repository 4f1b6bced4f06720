//! Audio ingestion: WAV decoding, band-limited resampling and the dataset
//! manifest that ties clips to participants, labels and clinical metadata.

mod manifest;
mod resample;
mod wav;

pub use manifest::{
    dataset_stats, load_manifest, parse_manifest, write_manifest, DatasetStats, FieldValue, Label, Manifest,
    ManifestRow, MetadataRecord, Sex, MANIFEST_COLUMNS, METADATA_COLUMNS,
};
pub use resample::{resample, Resampler, KAISER_BETA, TAPS_PER_PHASE};
pub use wav::{decode_wav, decode_wav_bytes, encode_wav_pcm16};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Decoded mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<T = f64> {
    pub clip_id: String,
    pub participant_id: String,
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> AudioClip<T> {
    pub fn new(
        clip_id: impl Into<String>,
        participant_id: impl Into<String>,
        samples: Vec<T>,
        sample_rate: u32,
    ) -> Result<Self> {
        let clip = Self {
            clip_id: clip_id.into(),
            participant_id: participant_id.into(),
            samples,
            sample_rate,
        };
        clip.validate()?;
        Ok(clip)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Decode(format!("clip {}: sample rate is zero", self.clip_id)));
        }
        if self.samples.is_empty() {
            return Err(Error::Decode(format!("clip {}: no samples", self.clip_id)));
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("clip {} sample {i}", self.clip_id)));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Same clip with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * gain).collect(),
            ..self.clone()
        }
    }
}
