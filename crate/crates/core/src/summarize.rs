//! Per-clip summary statistics over the frames of each descriptor.

use serde::{Deserialize, Serialize};

use crate::audio::Label;
use crate::error::{Error, Result};
use crate::lld::LldMatrix;
use crate::scalar::Real;

pub const STAT_SUFFIXES: [&str; 4] = ["mean", "std", "skew", "kurt"];

pub fn mean<T: Real>(v: &[T]) -> Result<T> {
    if v.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    Ok(v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len()))
}

/// Sum of squared deviations, or `None` when the spread is indistinguishable
/// from rounding noise at the data's magnitude.
fn central_sums<T: Real>(v: &[T], m: T) -> (Option<T>, T, T) {
    let (mut s2, mut s3, mut s4) = (T::zero(), T::zero(), T::zero());
    let mut max_abs = T::zero();
    for &x in v {
        let d = x - m;
        let d2 = d * d;
        s2 = s2 + d2;
        s3 = s3 + d2 * d;
        s4 = s4 + d2 * d2;
        max_abs = max_abs.max(x.abs());
    }
    let noise = T::epsilon() * T::lit(16.0) * max_abs;
    let degenerate = s2 <= T::from_usize_lossy(v.len()) * noise * noise;
    (if degenerate { None } else { Some(s2) }, s3, s4)
}

/// Sample standard deviation (`N - 1` denominator).
pub fn std<T: Real>(v: &[T]) -> Result<T> {
    if v.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: v.len(),
        });
    }
    let m = mean(v)?;
    let (s2, _, _) = central_sums(v, m);
    Ok(s2.map_or(T::zero(), |s2| (s2 / T::from_usize_lossy(v.len() - 1)).sqrt()))
}

/// `(1/N) sum d^3 / [(1/(N-1)) sum d^2]^(3/2)`; zero for constant input.
pub fn skewness<T: Real>(v: &[T]) -> Result<T> {
    if v.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: v.len(),
        });
    }
    let m = mean(v)?;
    let (s2, s3, _) = central_sums(v, m);
    let Some(s2) = s2 else { return Ok(T::zero()) };
    let n = T::from_usize_lossy(v.len());
    let var = s2 / (n - T::one());
    Ok((s3 / n) / (var * var.sqrt()))
}

/// Bias-corrected excess kurtosis
/// `(N+1)N(N-1) / ((N-2)(N-3)) * sum d^4 / (sum d^2)^2 - 3 (N-1)^2 / ((N-2)(N-3))`;
/// zero for constant input.
pub fn kurtosis<T: Real>(v: &[T]) -> Result<T> {
    if v.len() < 4 {
        return Err(Error::InsufficientSamples {
            needed: 4,
            got: v.len(),
        });
    }
    let m = mean(v)?;
    let (s2, _, s4) = central_sums(v, m);
    let Some(s2) = s2 else { return Ok(T::zero()) };
    let n = T::from_usize_lossy(v.len());
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let lead = (n + one) * n * (n - one) / ((n - two) * (n - three));
    let tail = three * (n - one) * (n - one) / ((n - two) * (n - three));
    Ok(lead * s4 / (s2 * s2) - tail)
}

/// Fixed-length per-clip vector: `[mean, std, skew, kurt]` per descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T = f64> {
    pub values: Vec<T>,
    pub names: Vec<String>,
    pub clip_id: String,
    pub participant_id: String,
    pub label: Option<Label>,
    /// Descriptors that had too few frames for the higher moments.
    #[serde(default)]
    pub short_columns: Vec<String>,
}

impl<T: Real> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Summarizes every column of `m`. Columns with fewer than four frames keep
/// their mean; their remaining statistics fall back to zero.
pub fn summarize_clip<T: Real>(m: &LldMatrix<T>) -> Result<FeatureVector<T>> {
    if m.columns.is_empty() || m.columns.iter().any(Vec::is_empty) {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut values = Vec::with_capacity(4 * m.columns.len());
    let mut names = Vec::with_capacity(4 * m.columns.len());
    let mut short_columns = Vec::new();
    for (name, col) in m.descriptor_names.iter().zip(&m.columns) {
        values.push(mean(col)?);
        if col.len() < 4 {
            log::warn!(
                "clip {}: descriptor {name} has {} frames; higher moments set to 0",
                m.clip_id,
                col.len()
            );
            short_columns.push(name.clone());
            values.extend([T::zero(); 3]);
        } else {
            values.push(std(col)?);
            values.push(skewness(col)?);
            values.push(kurtosis(col)?);
        }
        names.extend(STAT_SUFFIXES.iter().map(|s| format!("{name}_{s}")));
    }
    Ok(FeatureVector {
        values,
        names,
        clip_id: m.clip_id.clone(),
        participant_id: String::new(),
        label: None,
        short_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(columns: Vec<Vec<f64>>) -> LldMatrix<f64> {
        LldMatrix {
            clip_id: "c".into(),
            descriptor_names: (0..columns.len()).map(|i| format!("d{i}")).collect(),
            columns,
        }
    }

    #[test]
    fn basic_values() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(std(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(skewness(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(skewness(&[0.0, 0.0, 0.0, 1.0]).unwrap() > 0.0);
        assert_eq!(std(&[0.1; 7]).unwrap(), 0.0);
        assert_eq!(skewness(&[0.1; 7]).unwrap(), 0.0);
        assert_eq!(kurtosis(&[0.1; 7]).unwrap(), 0.0);
    }

    #[test]
    fn sample_size_errors() {
        assert!(mean::<f64>(&[]).is_err());
        assert!(std(&[1.0]).is_err());
        assert!(skewness(&[1.0, 2.0]).is_err());
        assert!(kurtosis(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn two_point_kurtosis_tends_to_minus_two() {
        let v: Vec<f64> = (0..20000).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        assert!((kurtosis(&v).unwrap() + 2.0).abs() < 1e-3);
    }

    #[test]
    fn summarize_layout() {
        let cols: Vec<Vec<f64>> = (0..21)
            .map(|j| (0..10).map(|i| ((i * (j + 3)) % 7) as f64).collect())
            .collect();
        let fv = summarize_clip(&matrix(cols)).unwrap();
        assert_eq!(fv.len(), 84);
        assert_eq!(fv.names[0], "d0_mean");
        assert_eq!(fv.names[83], "d20_kurt");
        assert!(fv.short_columns.is_empty());
    }

    #[test]
    fn constant_matrix() {
        let fv = summarize_clip(&matrix(vec![vec![3.5; 6], vec![-1.25; 6]])).unwrap();
        assert_eq!(fv.values, vec![3.5, 0.0, 0.0, 0.0, -1.25, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn short_columns_fall_back() {
        let fv = summarize_clip(&matrix(vec![vec![1.0, 2.0, 6.0], vec![1.0, 2.0, 3.0, 4.0]])).unwrap();
        assert_eq!(&fv.values[..4], &[3.0, 0.0, 0.0, 0.0]);
        assert_eq!(fv.short_columns, vec!["d0".to_string()]);
        assert!(summarize_clip(&matrix(vec![vec![]])).is_err());
    }

    #[test]
    fn column_permutation_permutes_blocks() {
        let a: Vec<f64> = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        let b: Vec<f64> = vec![0.5, 0.1, 0.9, 0.3, 0.2];
        let ab = summarize_clip(&matrix(vec![a.clone(), b.clone()])).unwrap();
        let ba = summarize_clip(&matrix(vec![b, a])).unwrap();
        assert_eq!(&ab.values[..4], &ba.values[4..]);
        assert_eq!(&ab.values[4..], &ba.values[..4]);
    }
}
