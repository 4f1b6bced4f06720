use crate::dsp::FrameConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Floor applied to mel energies before the natural log.
pub const LOG_MEL_FLOOR: f64 = 1e-10;

/// `2595 log10(1 + f / 700)`.
pub fn mel_scale(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with unit peaks, equally spaced on the mel scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    pub n_filters: usize,
    pub n_bins: usize,
    /// Row-major `n_filters x n_bins`.
    pub weights: Vec<T>,
    pub f_min: f64,
    pub f_max: f64,
    /// Unrounded center frequency of every filter.
    pub centers_hz: Vec<f64>,
    /// `(left, center, right)` FFT bins of every triangle.
    pub edges: Vec<(usize, usize, usize)>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn new(
        n_filters: usize,
        fft_size: usize,
        sample_rate: u32,
        f_min: f64,
        f_max: f64,
    ) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if n_filters == 0 {
            return Err(Error::Config("mel filterbank needs at least one filter".into()));
        }
        if !(0.0..nyquist + 1e-9).contains(&f_max) || f_min < 0.0 || f_min >= f_max {
            return Err(Error::Config(format!(
                "mel band [{f_min}, {f_max}] Hz invalid for Nyquist {nyquist} Hz"
            )));
        }
        let n_bins = fft_size / 2 + 1;
        let bin_hz = f64::from(sample_rate) / fft_size as f64;
        let (mel_lo, mel_hi) = (mel_scale(f_min), mel_scale(f_max));
        let step = (mel_hi - mel_lo) / (n_filters + 1) as f64;
        let points_hz: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(mel_lo + step * i as f64))
            .collect();
        let bins: Vec<usize> = points_hz
            .iter()
            .map(|&f| ((f / bin_hz).round() as usize).min(n_bins - 1))
            .collect();

        let mut weights = vec![T::zero(); n_filters * n_bins];
        let mut edges = Vec::with_capacity(n_filters);
        for m in 0..n_filters {
            let (l, c, r) = (bins[m], bins[m + 1], bins[m + 2]);
            if l >= c || c >= r {
                return Err(Error::Config(format!(
                    "{n_filters} mel filters are too many for FFT size {fft_size}: \
                     filter {m} collapses to bins ({l}, {c}, {r})"
                )));
            }
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate().take(r + 1).skip(l) {
                let v = if k <= c {
                    (k - l) as f64 / (c - l) as f64
                } else {
                    (r - k) as f64 / (r - c) as f64
                };
                *w = T::lit(v);
            }
            edges.push((l, c, r));
        }
        Ok(Self {
            n_filters,
            n_bins,
            weights,
            f_min,
            f_max,
            centers_hz: points_hz[1..=n_filters].to_vec(),
            edges,
        })
    }

    /// Full-band filterbank for a frame grid.
    pub fn for_grid(n_filters: usize, cfg: &FrameConfig) -> Result<Self> {
        Self::new(
            n_filters,
            cfg.fft_size,
            cfg.sample_rate,
            0.0,
            f64::from(cfg.sample_rate) / 2.0,
        )
    }

    pub fn filter(&self, m: usize) -> &[T] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Mel-band energies of a power spectrum.
    pub fn apply(&self, powers: &[T]) -> Vec<T> {
        (0..self.n_filters)
            .map(|m| {
                let (l, _, r) = self.edges[m];
                let row = self.filter(m);
                (l..=r).map(|k| row[k] * powers[k]).sum()
            })
            .collect()
    }
}

/// Orthonormal DCT-II, truncated to the first `n_out` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DctII<T> {
    n_in: usize,
    n_out: usize,
    basis: Vec<T>,
}

impl<T: Real> DctII<T> {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_out > n_in || n_in == 0 {
            return Err(Error::Config(format!(
                "cannot keep {n_out} cepstral coefficients from {n_in} mel bands"
            )));
        }
        let m = n_in as f64;
        let mut basis = Vec::with_capacity(n_in * n_out);
        for k in 0..n_out {
            let s = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            for i in 0..n_in {
                let arg = std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * m);
                basis.push(T::lit(s * arg.cos()));
            }
        }
        Ok(Self { n_in, n_out, basis })
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_in);
        self.basis
            .chunks_exact(self.n_in)
            .map(|row| row.iter().zip(x).map(|(&b, &v)| b * v).sum())
            .collect()
    }
}
