//! Discrete SAMME boosting over decision stumps.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::codec::{ParamReader, ParamWriter};
use super::linear::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// `+1` votes positive above the threshold, `-1` below it.
    pub polarity: f64,
}

impl Stump {
    pub fn vote(&self, row: &[f64]) -> f64 {
        if row[self.feature] > self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoost {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
    /// Weighted training error of each accepted round.
    pub errors: Vec<f64>,
}

/// Per-feature row order, computed once since only the weights change.
fn sorted_orders(x: &Matrix) -> Vec<Vec<usize>> {
    (0..x.n_cols())
        .map(|f| {
            let mut o: Vec<usize> = (0..x.n_rows()).collect();
            o.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
            o
        })
        .collect()
}

fn best_stump(x: &Matrix, y: &[f64], w: &[f64], orders: &[Vec<usize>]) -> Option<(Stump, f64)> {
    let (mut tot_pos, mut tot_neg) = (0.0, 0.0);
    for (&yi, &wi) in y.iter().zip(w) {
        if yi > 0.5 {
            tot_pos += wi;
        } else {
            tot_neg += wi;
        }
    }
    let mut best: Option<(Stump, f64)> = None;
    for (f, order) in orders.iter().enumerate() {
        let (mut cum_pos, mut cum_neg) = (0.0, 0.0);
        for j in 0..order.len() - 1 {
            let i = order[j];
            if y[i] > 0.5 {
                cum_pos += w[i];
            } else {
                cum_neg += w[i];
            }
            let (a, b) = (x.get(i, f), x.get(order[j + 1], f));
            if a == b {
                continue;
            }
            let right_pos = tot_pos - cum_pos;
            let right_neg = tot_neg - cum_neg;
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            for (polarity, err) in [(1.0, cum_pos + right_neg), (-1.0, cum_neg + right_pos)] {
                if best.is_none_or(|(_, e)| err < e) {
                    best = Some((
                        Stump {
                            feature: f,
                            threshold,
                            polarity,
                        },
                        err,
                    ));
                }
            }
        }
    }
    best
}

pub fn train_adaboost(x: &Matrix, y: &[f64], n_estimators: usize, learning_rate: f64) -> Result<AdaBoost> {
    x.ensure_finite()?;
    if y.len() != x.n_rows() || x.n_rows() == 0 {
        return Err(Error::Layout {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if n_estimators == 0 || !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::Config(format!(
            "AdaBoost needs n_estimators >= 1 and a positive learning rate (got {n_estimators}, {learning_rate})"
        )));
    }
    let n = x.n_rows();
    let orders = sorted_orders(x);
    let mut w = vec![1.0 / n as f64; n];
    let mut model = AdaBoost {
        stumps: Vec::new(),
        alphas: Vec::new(),
        errors: Vec::new(),
    };
    for _ in 0..n_estimators {
        let Some((stump, err)) = best_stump(x, y, &w, &orders) else {
            break;
        };
        if err <= 0.0 {
            model.stumps.push(stump);
            model.alphas.push(1.0);
            model.errors.push(0.0);
            break;
        }
        if err >= 0.5 {
            break;
        }
        let alpha = learning_rate * ((1.0 - err) / err).ln();
        model.stumps.push(stump);
        model.alphas.push(alpha);
        model.errors.push(err);
        let boost = alpha.exp();
        let mut total = 0.0;
        for (i, wi) in w.iter_mut().enumerate() {
            let truth = if y[i] > 0.5 { 1.0 } else { -1.0 };
            if stump.vote(x.row(i)) != truth {
                *wi *= boost;
            }
            total += *wi;
        }
        w.iter_mut().for_each(|v| *v /= total);
    }
    Ok(model)
}

impl AdaBoost {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.stumps
            .iter()
            .zip(&self.alphas)
            .map(|(s, a)| a * s.vote(row))
            .sum()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }

    pub(crate) fn encode(&self, w: &mut ParamWriter) {
        w.usize(self.stumps.len());
        for s in &self.stumps {
            w.usize(s.feature);
            w.f64(s.threshold);
            w.f64(s.polarity);
        }
        w.f64s(&self.alphas);
        w.f64s(&self.errors);
    }

    pub(crate) fn decode(r: &mut ParamReader<'_>) -> Result<Self> {
        let n = r.usize()?;
        let stumps = (0..n)
            .map(|_| {
                Ok(Stump {
                    feature: r.usize()?,
                    threshold: r.f64()?,
                    polarity: r.f64()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let alphas = r.f64s()?;
        let errors = r.f64s()?;
        if alphas.len() != n || errors.len() != n {
            return Err(Error::Decode("AdaBoost block length mismatch".into()));
        }
        Ok(Self {
            stumps,
            alphas,
            errors,
        })
    }
}
