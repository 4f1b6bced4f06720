//! Framing, windowing and one-sided FFT spectra.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
    Hamming,
    Rect,
}

/// Analysis grid: frame and hop lengths in seconds at a given rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub frame_len_s: f64,
    pub hop_len_s: f64,
    pub fft_size: usize,
    #[serde(default)]
    pub window: WindowKind,
    pub sample_rate: u32,
}

impl FrameConfig {
    /// 50 ms / 25 ms frames at 16 kHz, FFT 1024 (temporal and spectral LLDs).
    pub fn temporal_spectral() -> Self {
        Self {
            frame_len_s: 0.05,
            hop_len_s: 0.025,
            fft_size: 1024,
            window: WindowKind::Hann,
            sample_rate: 16000,
        }
    }

    /// 40 ms / 20 ms frames at 22.05 kHz, FFT 2048 (log-mel and MFCC).
    pub fn spectrotemporal() -> Self {
        Self {
            frame_len_s: 0.04,
            hop_len_s: 0.02,
            fft_size: 2048,
            window: WindowKind::Hann,
            sample_rate: 22050,
        }
    }

    pub fn frame_len(&self) -> usize {
        (self.frame_len_s * f64::from(self.sample_rate)).round() as usize
    }

    pub fn hop_len(&self) -> usize {
        (self.hop_len_s * f64::from(self.sample_rate)).round() as usize
    }

    pub fn bin_hz(&self) -> f64 {
        f64::from(self.sample_rate) / self.fft_size as f64
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if !(self.hop_len_s > 0.0 && self.hop_len_s <= self.frame_len_s) {
            return Err(Error::Config(format!(
                "need 0 < hop ({}) <= frame ({})",
                self.hop_len_s, self.frame_len_s
            )));
        }
        if self.frame_len() == 0 || self.hop_len() == 0 {
            return Err(Error::Config("frame or hop rounds to zero samples".into()));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "fft_size {} is not a power of two",
                self.fft_size
            )));
        }
        if self.fft_size < self.frame_len() {
            return Err(Error::Config(format!(
                "fft_size {} is shorter than the {}-sample frame",
                self.fft_size,
                self.frame_len()
            )));
        }
        Ok(())
    }

    /// `floor((len - L) / hop) + 1`, or zero when the signal is shorter than a frame.
    pub fn frame_count(&self, signal_len: usize) -> usize {
        frame_count(signal_len, self.frame_len(), self.hop_len())
    }
}

pub fn frame_count(signal_len: usize, frame_len: usize, hop: usize) -> usize {
    if signal_len < frame_len || frame_len == 0 || hop == 0 {
        0
    } else {
        (signal_len - frame_len) / hop + 1
    }
}

/// Symmetric window of length `len`.
pub fn make_window<T: Real>(kind: WindowKind, len: usize) -> Vec<T> {
    if len == 1 {
        return vec![T::one()];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| {
            let c = (2.0 * std::f64::consts::PI * n as f64 / denom).cos();
            T::lit(match kind {
                WindowKind::Hann => 0.5 - 0.5 * c,
                WindowKind::Hamming => 0.54 - 0.46 * c,
                WindowKind::Rect => 1.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    /// Windowed samples.
    pub samples: Vec<T>,
    /// The unwindowed slice the frame was cut from.
    pub raw: Vec<T>,
    pub index: usize,
    pub t_start: f64,
}

/// Cuts `clip` into windowed frames. The incomplete tail is dropped.
pub fn frame_signal<T: Real>(clip: &AudioClip<T>, cfg: &FrameConfig) -> Result<Vec<Frame<T>>> {
    cfg.validate()?;
    if clip.sample_rate != cfg.sample_rate {
        return Err(Error::Config(format!(
            "clip {} is at {} Hz, frame grid expects {} Hz",
            clip.clip_id, clip.sample_rate, cfg.sample_rate
        )));
    }
    let len = cfg.frame_len();
    let hop = cfg.hop_len();
    let count = frame_count(clip.samples.len(), len, hop);
    if count == 0 {
        return Err(Error::TooShort {
            seconds: clip.duration_s(),
            min_seconds: cfg.frame_len_s,
            sample_rate: cfg.sample_rate,
        });
    }
    let window = make_window::<T>(cfg.window, len);
    Ok((0..count)
        .map(|i| {
            let start = i * hop;
            let raw = clip.samples[start..start + len].to_vec();
            let samples = raw.iter().zip(&window).map(|(&x, &w)| x * w).collect();
            Frame {
                samples,
                raw,
                index: i,
                t_start: start as f64 / f64::from(cfg.sample_rate),
            }
        })
        .collect())
}

/// One-sided spectrum, bins `0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub magnitudes: Vec<T>,
    pub powers: Vec<T>,
    pub bin_hz: f64,
}

impl<T: Real> Spectrum<T> {
    pub fn from_magnitudes(magnitudes: Vec<T>, bin_hz: f64) -> Self {
        let powers = magnitudes.iter().map(|&m| m * m).collect();
        Self {
            magnitudes,
            powers,
            bin_hz,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.len()
    }
}

/// FFT plan for a fixed size; cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct SpectrumAnalyzer<T: Real> {
    fft: Arc<dyn Fft<T>>,
    size: usize,
}

impl<T: Real> std::fmt::Debug for SpectrumAnalyzer<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer").field("size", &self.size).finish()
    }
}

impl<T: Real> SpectrumAnalyzer<T> {
    pub fn new(size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(size);
        Self { fft, size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Full complex spectrum of `frame` zero-padded to the plan size.
    pub fn complex(&self, frame: &[T]) -> Result<Vec<Complex<T>>> {
        if frame.len() > self.size {
            return Err(Error::Config(format!(
                "frame of {} samples exceeds FFT size {}",
                frame.len(),
                self.size
            )));
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.size];
        for (b, &x) in buf.iter_mut().zip(frame) {
            b.re = x;
        }
        self.fft.process(&mut buf);
        Ok(buf)
    }

    pub fn spectrum(&self, frame: &[T], sample_rate: u32) -> Result<Spectrum<T>> {
        let full = self.complex(frame)?;
        let mags = full[..=self.size / 2].iter().map(|c| c.norm()).collect();
        Ok(Spectrum::from_magnitudes(
            mags,
            f64::from(sample_rate) / self.size as f64,
        ))
    }
}

/// One-off magnitude spectrum; prefer a reused [`SpectrumAnalyzer`] in loops.
pub fn fft_magnitude<T: Real>(
    frame: &Frame<T>,
    fft_size: usize,
    sample_rate: u32,
) -> Result<Spectrum<T>> {
    SpectrumAnalyzer::new(fft_size).spectrum(&frame.samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn windows_closed_form() {
        assert!(close(&make_window(WindowKind::Hann, 3), &[0.0, 1.0, 0.0], 1e-15));
        assert!(close(&make_window(WindowKind::Hamming, 3), &[0.08, 1.0, 0.08], 1e-15));
        for kind in [WindowKind::Hann, WindowKind::Hamming, WindowKind::Rect] {
            assert_eq!(make_window::<f64>(kind, 1), vec![1.0]);
            let w: Vec<f64> = make_window(kind, 17);
            for n in 0..17 {
                assert!((w[n] - w[16 - n]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn frame_count_example() {
        let clip = AudioClip::new("c", "p", vec![0.1f64; 11025], 22050).unwrap();
        let frames = frame_signal(&clip, &FrameConfig::spectrotemporal()).unwrap();
        assert_eq!(frames.len(), 24);
        assert_eq!(frames[1].t_start, 441.0 / 22050.0);
    }

    #[test]
    fn one_frame_and_too_short() {
        let cfg = FrameConfig::temporal_spectral();
        let clip = AudioClip::new("c", "p", vec![0.1f64; 800], 16000).unwrap();
        assert_eq!(frame_signal(&clip, &cfg).unwrap().len(), 1);
        let short = AudioClip::new("c", "p", vec![0.1f64; 799], 16000).unwrap();
        assert!(matches!(
            frame_signal(&short, &cfg),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn rect_window_is_raw_slice() {
        let cfg = FrameConfig {
            window: WindowKind::Rect,
            ..FrameConfig::temporal_spectral()
        };
        let samples: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.01).sin()).collect();
        let clip = AudioClip::new("c", "p", samples.clone(), 16000).unwrap();
        let frames = frame_signal(&clip, &cfg).unwrap();
        assert_eq!(frames[2].samples, samples[800..1600].to_vec());
        assert_eq!(frames[2].samples, frames[2].raw);
    }

    #[test]
    fn config_validation() {
        let mut cfg = FrameConfig::temporal_spectral();
        cfg.fft_size = 512;
        assert!(cfg.validate().is_err());
        cfg.fft_size = 1000;
        assert!(cfg.validate().is_err());
        let mut cfg = FrameConfig::temporal_spectral();
        cfg.hop_len_s = 0.06;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn impulse_and_zero_spectra() {
        let an = SpectrumAnalyzer::<f64>::new(16);
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let s = an.spectrum(&x, 16).unwrap();
        assert_eq!(s.n_bins(), 9);
        assert!(s.magnitudes.iter().all(|&m| (m - 1.0).abs() < 1e-15));
        let z = an.spectrum(&[0.0; 10], 16).unwrap();
        assert!(z.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn cosine_concentrates_in_its_bin() {
        let n = 64;
        let k0 = 5;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * (k0 * i) as f64 / n as f64).cos())
            .collect();
        let s = SpectrumAnalyzer::new(n).spectrum(&x, 64).unwrap();
        for (k, &m) in s.magnitudes.iter().enumerate() {
            if k == k0 {
                assert!((m - 32.0).abs() < 1e-9);
            } else {
                assert!(m < 1e-9);
            }
        }
    }

    #[test]
    fn oversize_frame_rejected() {
        assert!(SpectrumAnalyzer::<f64>::new(8).complex(&[0.0; 9]).is_err());
    }
}
