//! L2-regularized logistic regression fitted with L-BFGS.
//!
//! Objective: mean binary cross-entropy plus `||w||^2 / (2 C n)`; the bias
//! is not penalized. Iteration stops when the gradient infinity-norm drops
//! below `1e-6`, after 5000 iterations, or when the line search stalls.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::codec::{ParamReader, ParamWriter};

pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 5000;
const HISTORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Per-iteration record of a fit: accepted losses and termination reason.
#[derive(Debug, Clone, PartialEq)]
pub struct LrTrace {
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Loss and gradient at `params = [w..., b]`.
pub fn lr_objective(params: &[f64], x: &Matrix, y: &[f64], c: f64) -> (f64, Vec<f64>) {
    let d = x.n_cols();
    let n = x.n_rows() as f64;
    let (w, b) = (&params[..d], params[d]);
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (row, &yi) in x.rows().zip(y) {
        let z = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        for (g, &xj) in grad[..d].iter_mut().zip(row) {
            *g += r * xj;
        }
        grad[d] += r;
    }
    let reg = 1.0 / (c * n);
    let wsq: f64 = w.iter().map(|v| v * v).sum();
    loss = loss / n + 0.5 * reg * wsq;
    for (g, &wj) in grad[..d].iter_mut().zip(w) {
        *g = *g / n + reg * wj;
    }
    grad[d] /= n;
    (loss, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn train_lr(x: &Matrix, y: &[f64], c: f64) -> Result<LogisticModel> {
    train_lr_traced(x, y, c).map(|(m, _)| m)
}

pub fn train_lr_traced(x: &Matrix, y: &[f64], c: f64) -> Result<(LogisticModel, LrTrace)> {
    x.ensure_finite()?;
    if y.len() != x.n_rows() {
        return Err(Error::Layout {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    if x.n_rows() == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let d = x.n_cols();
    let mut params = vec![0.0; d + 1];
    let (mut loss, mut grad) = lr_objective(&params, x, y, c);
    let mut losses = vec![loss];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut converged = inf_norm(&grad) < GRAD_TOL;
    let mut iterations = 0;

    while !converged && iterations < MAX_ITER {
        iterations += 1;
        let mut dir = two_loop(&grad, &history);
        let mut slope = dot(&dir, &grad);
        if slope >= 0.0 {
            // curvature pairs went stale; fall back to steepest descent
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }
        let mut step = if history.is_empty() {
            (1.0 / inf_norm(&grad)).min(1.0)
        } else {
            1.0
        };
        let accepted = loop {
            let trial: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p + step * d).collect();
            let (tl, tg) = lr_objective(&trial, x, y, c);
            if tl.is_finite() && tl <= loss + ARMIJO_C1 * step * slope {
                break Some((trial, tl, tg));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((trial, tl, tg)) = accepted else {
            break;
        };
        let s: Vec<f64> = trial.iter().zip(&params).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = tg.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == HISTORY {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        params = trial;
        loss = tl;
        grad = tg;
        losses.push(loss);
        converged = inf_norm(&grad) < GRAD_TOL;
    }

    let bias = params.pop().expect("bias present");
    Ok((
        LogisticModel {
            weights: params,
            bias,
        },
        LrTrace {
            losses,
            iterations,
            converged,
        },
    ))
}

fn two_loop(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(row, &self.weights) + self.bias
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }

    pub(crate) fn encode(&self, w: &mut ParamWriter) {
        w.f64s(&self.weights);
        w.f64(self.bias);
    }

    pub(crate) fn decode(r: &mut ParamReader<'_>) -> Result<Self> {
        Ok(Self {
            weights: r.f64s()?,
            bias: r.f64()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let t = i as f64 / 60.0;
                vec![(t * 7.0).sin() + t, (t * 3.0).cos() - 0.5 * t, t * t]
            })
            .collect();
        let y = rows
            .iter()
            .enumerate()
            .map(|(i, r)| f64::from(r[0] + 0.3 * r[1] + 0.2 * ((i * 7) % 5) as f64 > 0.9))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_1d() {
        let x = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let m = train_lr(&x, &[0.0, 1.0], 1.0).unwrap();
        assert!(m.predict_row(&[1.0]) > m.predict_row(&[-1.0]));
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn converges_and_decreases() {
        let (x, y) = data();
        let (_, trace) = train_lr_traced(&x, &y, 1.0).unwrap();
        assert!(trace.converged);
        assert!(trace.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn regularization_shrinks_weights() {
        let (x, y) = data();
        let norm = |c| {
            let m = train_lr(&x, &y, c).unwrap();
            m.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
        };
        let cs = [1e-5, 1e-3, 1e-1, 1.0];
        let norms: Vec<f64> = cs.iter().map(|&c| norm(c)).collect();
        assert!(norms.windows(2).all(|w| w[0] < w[1]), "{norms:?}");
    }

    #[test]
    fn finite_difference_gradient() {
        let (x, y) = data();
        let p = vec![0.3, -0.7, 1.1, 0.05];
        let (_, g) = lr_objective(&p, &x, &y, 0.5);
        let h = 1e-6;
        for j in 0..p.len() {
            let mut a = p.clone();
            let mut b = p.clone();
            a[j] += h;
            b[j] -= h;
            let fd = (lr_objective(&a, &x, &y, 0.5).0 - lr_objective(&b, &x, &y, 0.5).0) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-4 * g[j].abs().max(1e-3), "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let x = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(matches!(train_lr(&x, &[1.0], 1.0), Err(Error::NonFinite(_))));
    }
}
