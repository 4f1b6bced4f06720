use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which side of a split a block of rows comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    /// Training rows of the given fold.
    Train(usize),
    /// Held-out rows (test or validation) of the given fold.
    Holdout(usize),
    /// The whole dataset, for a final model with no held-out part.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Fitted {
    mean: Vec<f64>,
    std: Vec<f64>,
    constant: Vec<bool>,
    partition: Partition,
}

/// Per-column z-scoring. Constant columns map to 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    fitted: Option<Fitted>,
}

impl Scaler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Learns column means and sample standard deviations. Refuses held-out rows.
    pub fn fit(&mut self, rows: &Matrix, partition: Partition) -> Result<()> {
        if let Partition::Holdout(fold) = partition {
            return Err(Error::Leakage(format!(
                "refusing to fit scaler on held-out rows of fold {fold}"
            )));
        }
        if rows.n_rows() == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let n = rows.n_rows() as f64;
        let d = rows.n_cols();
        let mut mean = vec![0.0; d];
        for r in rows.rows() {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut ss = vec![0.0; d];
        let mut max_abs = vec![0.0f64; d];
        for r in rows.rows() {
            for j in 0..d {
                let dv = r[j] - mean[j];
                ss[j] += dv * dv;
                max_abs[j] = max_abs[j].max(r[j].abs());
            }
        }
        let mut std = vec![1.0; d];
        let mut constant = vec![false; d];
        for j in 0..d {
            let noise = f64::EPSILON * 16.0 * max_abs[j];
            if rows.n_rows() < 2 || ss[j] <= n * noise * noise {
                constant[j] = true;
            } else {
                std[j] = (ss[j] / (n - 1.0)).sqrt();
            }
        }
        self.fitted = Some(Fitted {
            mean,
            std,
            constant,
            partition,
        });
        Ok(())
    }

    pub fn fitted_on(&self) -> Option<Partition> {
        self.fitted.as_ref().map(|f| f.partition)
    }

    pub fn n_features(&self) -> Option<usize> {
        self.fitted.as_ref().map(|f| f.mean.len())
    }

    pub fn apply_row(&self, row: &mut [f64]) -> Result<()> {
        let f = self
            .fitted
            .as_ref()
            .ok_or_else(|| Error::State("scaler applied before fit".into()))?;
        if row.len() != f.mean.len() {
            return Err(Error::Layout {
                expected: f.mean.len(),
                actual: row.len(),
            });
        }
        for (j, v) in row.iter_mut().enumerate() {
            *v = if f.constant[j] {
                0.0
            } else {
                (*v - f.mean[j]) / f.std[j]
            };
        }
        Ok(())
    }

    pub fn apply(&self, rows: &Matrix) -> Result<Matrix> {
        let mut out = rows.clone();
        for i in 0..out.n_rows() {
            self.apply_row(out.row_mut(i))?;
        }
        Ok(out)
    }
}
