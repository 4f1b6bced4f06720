//! Spectral shape descriptors over one-sided bins. Centroid and spread are
//! in bin units and magnitude-weighted; rolloff, entropy and flux use the
//! power spectrum. A frame with no energy yields 0 for every descriptor.

use crate::dsp::Spectrum;
use crate::scalar::Real;

pub const DEFAULT_ROLLOFF: f64 = 0.90;

pub fn spectral_centroid<T: Real>(spec: &Spectrum<T>) -> T {
    let total: T = spec.magnitudes.iter().copied().sum();
    if total <= T::zero() {
        return T::zero();
    }
    let weighted: T = spec
        .magnitudes
        .iter()
        .enumerate()
        .map(|(k, &m)| T::from_usize_lossy(k) * m)
        .sum();
    weighted / total
}

pub fn spectral_spread<T: Real>(spec: &Spectrum<T>) -> T {
    let total: T = spec.magnitudes.iter().copied().sum();
    if total <= T::zero() {
        return T::zero();
    }
    let c = spectral_centroid(spec);
    let var: T = spec
        .magnitudes
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let d = T::from_usize_lossy(k) - c;
            d * d * m
        })
        .sum::<T>()
        / total;
    var.max(T::zero()).sqrt()
}

/// Smallest bin whose cumulative power reaches `fraction` of the total.
pub fn spectral_rolloff<T: Real>(spec: &Spectrum<T>, fraction: f64) -> usize {
    let total: T = spec.powers.iter().copied().sum();
    if total <= T::zero() {
        return 0;
    }
    let target = T::lit(fraction) * total;
    let mut cum = T::zero();
    for (k, &p) in spec.powers.iter().enumerate() {
        cum = cum + p;
        if cum >= target {
            return k;
        }
    }
    spec.powers.len() - 1
}

/// Shannon entropy of the normalized power spectrum, divided by
/// `log2(n_bins)` so the result lies in `[0, 1]`.
pub fn spectral_entropy<T: Real>(spec: &Spectrum<T>) -> T {
    let n = spec.powers.len();
    let total: T = spec.powers.iter().copied().sum();
    if total <= T::zero() || n < 2 {
        return T::zero();
    }
    let h: T = spec
        .powers
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| {
            let q = p / total;
            -q * q.log2()
        })
        .sum();
    (h / T::from_usize_lossy(n).log2()).max(T::zero()).min(T::one())
}

/// `P`-norm distance between consecutive L1-normalized power spectra.
pub fn spectral_flux<T: Real>(current: &Spectrum<T>, previous: &Spectrum<T>, p: f64) -> T {
    let norm = |s: &Spectrum<T>| -> T { s.powers.iter().copied().sum() };
    let (tc, tp) = (norm(current), norm(previous));
    let scale = |v: T, t: T| if t > T::zero() { v / t } else { T::zero() };
    let pw = T::lit(p);
    let sum: T = current
        .powers
        .iter()
        .zip(&previous.powers)
        .map(|(&a, &b)| (scale(a, tc) - scale(b, tp)).abs().powf(pw))
        .sum();
    sum.powf(T::one() / pw)
}
