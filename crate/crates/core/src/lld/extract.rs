use serde::{Deserialize, Serialize};

use super::mel::{DctII, MelFilterbank, LOG_MEL_FLOOR};
use super::spectral::{
    spectral_centroid, spectral_entropy, spectral_flux, spectral_rolloff, spectral_spread,
    DEFAULT_ROLLOFF,
};
use super::temporal::{frame_energy, intensity_db, zero_crossing_rate};
use crate::audio::{resample, AudioClip};
use crate::dsp::{frame_signal, FrameConfig, Spectrum, SpectrumAnalyzer};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const TEMPORAL_SPECTRAL_NAMES: [&str; 8] = [
    "energy", "zcr", "intensity", "centroid", "spread", "rolloff", "entropy", "flux",
];

/// Parameters of both analysis grids plus the descriptor settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LldConfig {
    pub temporal: FrameConfig,
    pub spectrotemporal: FrameConfig,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub rolloff: f64,
    pub flux_p: f64,
}

impl Default for LldConfig {
    fn default() -> Self {
        Self {
            temporal: FrameConfig::temporal_spectral(),
            spectrotemporal: FrameConfig::spectrotemporal(),
            n_mels: 128,
            n_mfcc: 13,
            rolloff: DEFAULT_ROLLOFF,
            flux_p: 2.0,
        }
    }
}

impl LldConfig {
    pub fn descriptor_names(&self) -> Vec<String> {
        TEMPORAL_SPECTRAL_NAMES
            .iter()
            .map(|s| s.to_string())
            .chain((0..self.n_mfcc).map(|i| format!("mfcc{i}")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.temporal.validate()?;
        self.spectrotemporal.validate()?;
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(Error::Config(format!("rolloff fraction {} not in (0, 1]", self.rolloff)));
        }
        if self.flux_p.is_nan() || self.flux_p < 1.0 {
            return Err(Error::Config(format!("flux norm order {} < 1", self.flux_p)));
        }
        Ok(())
    }
}

/// Per-frame descriptors of one clip, stored column-wise.
///
/// The temporal/spectral columns and the MFCC columns come from different
/// frame grids, so column lengths may differ between the two groups.
#[derive(Debug, Clone, PartialEq)]
pub struct LldMatrix<T> {
    pub clip_id: String,
    pub descriptor_names: Vec<String>,
    pub columns: Vec<Vec<T>>,
}

impl<T: Real> LldMatrix<T> {
    pub fn n_descriptors(&self) -> usize {
        self.columns.len()
    }

    pub fn max_frames(&self) -> usize {
        self.columns.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.columns.iter().flatten().all(|v| v.is_finite())
    }
}

/// A `n_rows x n_frames` time-frequency matrix (log-mel or MFCC), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub n_rows: usize,
    pub n_frames: usize,
    pub values: Vec<T>,
    /// The column a silent frame produces; used when padding in time.
    pub silence: Vec<T>,
}

pub type LogMelSpectrogram<T> = Spectrogram<T>;

impl<T: Real> Spectrogram<T> {
    pub fn get(&self, row: usize, frame: usize) -> T {
        self.values[row * self.n_frames + frame]
    }

    pub fn column(&self, frame: usize) -> Vec<T> {
        (0..self.n_rows).map(|r| self.get(r, frame)).collect()
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.n_frames..(row + 1) * self.n_frames]
    }

    fn from_columns(columns: &[Vec<T>], n_rows: usize, silence: Vec<T>) -> Self {
        let n_frames = columns.len();
        let mut values = vec![T::zero(); n_rows * n_frames];
        for (t, col) in columns.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                values[r * n_frames + t] = v;
            }
        }
        Self {
            n_rows,
            n_frames,
            values,
            silence,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatures<T> {
    pub lld: LldMatrix<T>,
    pub log_mel: LogMelSpectrogram<T>,
    pub mfcc: Spectrogram<T>,
}

/// Holds FFT plans, the filterbank and the DCT basis; build once and share.
#[derive(Debug, Clone)]
pub struct Extractor<T: Real> {
    cfg: LldConfig,
    temporal_fft: SpectrumAnalyzer<T>,
    mel_fft: SpectrumAnalyzer<T>,
    filterbank: MelFilterbank<T>,
    dct: DctII<T>,
}

impl<T: Real> Extractor<T> {
    pub fn new(cfg: LldConfig) -> Result<Self> {
        cfg.validate()?;
        let filterbank = MelFilterbank::for_grid(cfg.n_mels, &cfg.spectrotemporal)?;
        let dct = DctII::new(cfg.n_mels, cfg.n_mfcc)?;
        Ok(Self {
            temporal_fft: SpectrumAnalyzer::new(cfg.temporal.fft_size),
            mel_fft: SpectrumAnalyzer::new(cfg.spectrotemporal.fft_size),
            filterbank,
            dct,
            cfg,
        })
    }

    pub fn config(&self) -> &LldConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank<T> {
        &self.filterbank
    }

    fn check_length(&self, clip: &AudioClip<T>) -> Result<()> {
        for grid in [&self.cfg.temporal, &self.cfg.spectrotemporal] {
            let n = resampled_len(clip.samples.len(), clip.sample_rate, grid.sample_rate);
            if n < grid.frame_len() {
                let t = &self.cfg.temporal;
                return Err(Error::TooShort {
                    seconds: clip.duration_s(),
                    min_seconds: t.frame_len_s.max(self.cfg.spectrotemporal.frame_len_s),
                    sample_rate: t.sample_rate,
                });
            }
        }
        Ok(())
    }

    /// The eight temporal and spectral descriptor columns.
    pub fn temporal_spectral(&self, clip: &AudioClip<T>) -> Result<Vec<Vec<T>>> {
        let grid = &self.cfg.temporal;
        let clip = resample(clip, grid.sample_rate)?;
        let frames = frame_signal(&clip, grid)?;
        let mut cols = vec![Vec::with_capacity(frames.len()); TEMPORAL_SPECTRAL_NAMES.len()];
        let mut prev: Option<Spectrum<T>> = None;
        for frame in &frames {
            let spec = self.temporal_fft.spectrum(&frame.samples, grid.sample_rate)?;
            let flux = prev
                .as_ref()
                .map_or(T::zero(), |p| spectral_flux(&spec, p, self.cfg.flux_p));
            let row = [
                frame_energy(&frame.samples),
                zero_crossing_rate(&frame.raw),
                intensity_db(&frame.samples),
                spectral_centroid(&spec),
                spectral_spread(&spec),
                T::from_usize_lossy(spectral_rolloff(&spec, self.cfg.rolloff)),
                spectral_entropy(&spec),
                flux,
            ];
            for (col, v) in cols.iter_mut().zip(row) {
                col.push(v);
            }
            prev = Some(spec);
        }
        Ok(cols)
    }

    /// `ln(max(filterbank * |X|^2, 1e-10))`, shape `(n_mels, n_frames)`.
    pub fn log_mel(&self, clip: &AudioClip<T>) -> Result<LogMelSpectrogram<T>> {
        let grid = &self.cfg.spectrotemporal;
        let clip = resample(clip, grid.sample_rate)?;
        let frames = frame_signal(&clip, grid)?;
        let floor = T::lit(LOG_MEL_FLOOR);
        let columns = frames
            .iter()
            .map(|f| {
                let spec = self.mel_fft.spectrum(&f.samples, grid.sample_rate)?;
                Ok(self
                    .filterbank
                    .apply(&spec.powers)
                    .into_iter()
                    .map(|e| e.max(floor).ln())
                    .collect())
            })
            .collect::<Result<Vec<Vec<T>>>>()?;
        Ok(Spectrogram::from_columns(
            &columns,
            self.cfg.n_mels,
            vec![floor.ln(); self.cfg.n_mels],
        ))
    }

    /// DCT-II of every log-mel column.
    pub fn mfcc_from_log_mel(&self, log_mel: &LogMelSpectrogram<T>) -> Spectrogram<T> {
        let columns: Vec<Vec<T>> = (0..log_mel.n_frames)
            .map(|t| self.dct.apply(&log_mel.column(t)))
            .collect();
        Spectrogram::from_columns(&columns, self.dct.n_out(), self.dct.apply(&log_mel.silence))
    }

    pub fn extract(&self, clip: &AudioClip<T>) -> Result<ClipFeatures<T>> {
        self.check_length(clip)?;
        let mut columns = self.temporal_spectral(clip)?;
        let log_mel = self.log_mel(clip)?;
        let mfcc = self.mfcc_from_log_mel(&log_mel);
        columns.extend((0..mfcc.n_rows).map(|r| mfcc.row(r).to_vec()));
        Ok(ClipFeatures {
            lld: LldMatrix {
                clip_id: clip.clip_id.clone(),
                descriptor_names: self.cfg.descriptor_names(),
                columns,
            },
            log_mel,
            mfcc,
        })
    }
}

fn resampled_len(n: usize, from: u32, to: u32) -> usize {
    if from == to {
        n
    } else {
        ((n as f64) * f64::from(to) / f64::from(from)).round() as usize
    }
}

pub fn log_mel_spectrogram<T: Real>(
    clip: &AudioClip<T>,
    cfg: &LldConfig,
) -> Result<LogMelSpectrogram<T>> {
    Extractor::new(cfg.clone())?.log_mel(clip)
}

/// MFCC matrix (`n_coeffs x n_frames`) of a clip.
pub fn mfcc<T: Real>(clip: &AudioClip<T>, n_coeffs: usize, cfg: &LldConfig) -> Result<Spectrogram<T>> {
    let ex = Extractor::new(LldConfig {
        n_mfcc: n_coeffs,
        ..cfg.clone()
    })?;
    Ok(ex.mfcc_from_log_mel(&ex.log_mel(clip)?))
}

/// All 21 descriptor columns with the default analysis parameters.
pub fn extract_lld_matrix<T: Real>(clip: &AudioClip<T>) -> Result<LldMatrix<T>> {
    Ok(Extractor::new(LldConfig::default())?.extract(clip)?.lld)
}
