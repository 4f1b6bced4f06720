//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
//!
//! Output sample `j` sits at input position `j * M / L` (ratio `L/M` in
//! lowest terms). Its fractional offset selects one of `L` precomputed
//! phases, each holding `TAPS_PER_PHASE` taps normalized to unit DC gain.
//! When downsampling, the sinc cutoff drops to the output Nyquist.

use super::AudioClip;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const TAPS_PER_PHASE: usize = 64;
pub const KAISER_BETA: f64 = 8.6;

const HALF: usize = TAPS_PER_PHASE / 2;

#[derive(Debug, Clone)]
pub struct Resampler {
    source_rate: u32,
    target_rate: u32,
    up: u64,
    down: u64,
    phases: Vec<[f64; TAPS_PER_PHASE]>,
}

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Result<Self> {
        if source_rate == 0 || target_rate == 0 {
            return Err(Error::Config(format!(
                "invalid resampling rates {source_rate} -> {target_rate}"
            )));
        }
        let g = gcd(u64::from(source_rate), u64::from(target_rate));
        let up = u64::from(target_rate) / g;
        let down = u64::from(source_rate) / g;
        let cutoff = (up as f64 / down as f64).min(1.0);
        let i0_beta = bessel_i0(KAISER_BETA);

        let phases = if up == down {
            Vec::new()
        } else {
            (0..up)
                .map(|p| {
                    let frac = p as f64 / up as f64;
                    let mut taps = [0.0; TAPS_PER_PHASE];
                    for (i, tap) in taps.iter_mut().enumerate() {
                        // distance from the output instant to input sample (base - HALF + 1 + i)
                        let tau = frac + (HALF - 1) as f64 - i as f64;
                        let r = tau / HALF as f64;
                        let window = if r.abs() >= 1.0 {
                            0.0
                        } else {
                            bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
                        };
                        *tap = cutoff * sinc(cutoff * tau) * window;
                    }
                    let sum: f64 = taps.iter().sum();
                    taps.iter_mut().for_each(|t| *t /= sum);
                    taps
                })
                .collect()
        };

        Ok(Self {
            source_rate,
            target_rate,
            up,
            down,
            phases,
        })
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        ((input_len as u128 * u128::from(self.up) * 2 + u128::from(self.down))
            / (2 * u128::from(self.down))) as usize
    }

    pub fn process<T: Real>(&self, input: &[T]) -> Vec<T> {
        if self.up == self.down {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let n_in = input.len() as i64;
        (0..n_out as u64)
            .map(|j| {
                let pos = j * self.down;
                let base = (pos / self.up) as i64;
                let taps = &self.phases[(pos % self.up) as usize];
                let first = base - (HALF as i64 - 1);
                let mut acc = 0.0;
                for (i, &h) in taps.iter().enumerate() {
                    let k = first + i as i64;
                    if (0..n_in).contains(&k) {
                        acc += h * input[k as usize].to_f64_lossy();
                    }
                }
                T::lit(acc)
            })
            .collect()
    }

    pub fn source_rate(&self) -> u32 {
        self.source_rate
    }

    pub fn target_rate(&self) -> u32 {
        self.target_rate
    }
}

/// Resamples `clip` to `target_rate`. Same-rate input is returned unchanged.
pub fn resample<T: Real>(clip: &AudioClip<T>, target_rate: u32) -> Result<AudioClip<T>> {
    if target_rate == 0 {
        return Err(Error::Config("target sample rate must be positive".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let r = Resampler::new(clip.sample_rate, target_rate)?;
    Ok(AudioClip {
        clip_id: clip.clip_id.clone(),
        participant_id: clip.participant_id.clone(),
        samples: r.process(&clip.samples),
        sample_rate: target_rate,
    })
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
