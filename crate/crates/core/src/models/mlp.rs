//! Multilayer perceptron: ReLU hidden layers, sigmoid output, cross-entropy
//! loss with an L2 penalty on weights, trained with Adam on seeded
//! mini-batches for a fixed number of epochs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::codec::{ParamReader, ParamWriter};
use super::linear::{sigmoid, softplus};

pub const MLP_DEPTH: usize = 5;
pub const MLP_WIDTHS: [usize; 7] = [256, 128, 64, 32, 16, 8, 4];
pub const LEARNING_RATE: f64 = 0.001;
pub const EPOCHS: usize = 200;
pub const BATCH_SIZE: usize = 32;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out x n_in`.
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Checks the hidden-layer schedule: five strictly decreasing widths drawn
/// from 256, 128, ..., 4.
pub fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() != MLP_DEPTH {
        return Err(Error::Config(format!(
            "MLP needs {MLP_DEPTH} hidden layers, got {}",
            widths.len()
        )));
    }
    if let Some(w) = widths.iter().find(|w| !MLP_WIDTHS.contains(w)) {
        return Err(Error::Config(format!("hidden width {w} not in {MLP_WIDTHS:?}")));
    }
    if widths.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::Config(format!(
            "hidden widths must strictly decrease: {widths:?}"
        )));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform initialization for layer sizes `[in, hidden..., 1]`.
    pub fn new_random(n_features: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![n_features];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|p| {
                let (n_in, n_out) = (p[0], p[1]);
                let bound = (6.0 / (n_in + n_out) as f64).sqrt();
                let mut draw = || rng.gen_range(-bound..bound);
                Dense {
                    n_in,
                    n_out,
                    w: (0..n_in * n_out).map(|_| draw()).collect(),
                    b: (0..n_out).map(|_| draw()).collect(),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters flattened layer by layer as `[W, b]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    fn forward(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        acts.clear();
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let input = &acts[li];
            let mut z: Vec<f64> = l
                .w
                .chunks_exact(l.n_in)
                .zip(&l.b)
                .map(|(row, &b)| row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + b)
                .collect();
            if li < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts[last + 1][0]
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        self.forward(x, &mut acts)
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Mean cross-entropy over `rows` plus `alpha / (2 |rows|) * sum W^2`,
    /// with the gradient in [`Mlp::params`] order.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[f64], rows: &[usize], alpha: f64) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
            .collect();
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut loss = 0.0;
        for &i in rows {
            let z = self.forward(x.row(i), &mut acts);
            let yi = y[i];
            loss += softplus(z) - yi * z;
            let mut delta = vec![sigmoid(z) - yi];
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &mut gw[o * l.n_in..(o + 1) * l.n_in];
                    row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
                }
                if li > 0 {
                    let mut prev = vec![0.0; l.n_in];
                    for (o, &d) in delta.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        let wrow = &l.w[o * l.n_in..(o + 1) * l.n_in];
                        prev.iter_mut().zip(wrow).for_each(|(p, w)| *p += d * w);
                    }
                    // ReLU derivative from the stored activation
                    prev.iter_mut()
                        .zip(input)
                        .for_each(|(p, &a)| if a <= 0.0 { *p = 0.0 });
                    delta = prev;
                }
            }
        }
        let n = rows.len() as f64;
        let wsq: f64 = self.layers.iter().flat_map(|l| &l.w).map(|w| w * w).sum();
        loss = loss / n + 0.5 * alpha * wsq / n;
        let mut out = Vec::with_capacity(self.n_params());
        for (l, (gw, gb)) in self.layers.iter().zip(grads) {
            out.extend(gw.iter().zip(&l.w).map(|(g, w)| g / n + alpha * w / n));
            out.extend(gb.iter().map(|g| g / n));
        }
        (loss, out)
    }

    pub(crate) fn encode(&self, w: &mut ParamWriter) {
        w.usize(self.layers.len());
        for l in &self.layers {
            w.usize(l.n_in);
            w.usize(l.n_out);
            w.f64s(&l.w);
            w.f64s(&l.b);
        }
    }

    pub(crate) fn decode(r: &mut ParamReader<'_>) -> Result<Self> {
        let n = r.usize()?;
        let layers = (0..n)
            .map(|_| {
                let n_in = r.usize()?;
                let n_out = r.usize()?;
                let w = r.f64s()?;
                let b = r.f64s()?;
                if w.len() != n_in * n_out || b.len() != n_out {
                    return Err(Error::Decode("MLP layer shape mismatch".into()));
                }
                Ok(Dense { n_in, n_out, w, b })
            })
            .collect::<Result<Vec<_>>>()?;
        if layers.is_empty() {
            return Err(Error::Decode("MLP without layers".into()));
        }
        Ok(Self { layers })
    }
}

/// Trains with the fixed optimizer schedule; `seed` drives both the
/// initialization and the per-epoch shuffling.
pub fn train_mlp(x: &Matrix, y: &[f64], alpha: f64, widths: &[usize], seed: u64) -> Result<Mlp> {
    validate_widths(widths)?;
    train_mlp_unchecked(x, y, alpha, widths, seed, EPOCHS)
}

/// Same optimizer without the width-schedule check.
pub fn train_mlp_unchecked(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    widths: &[usize],
    seed: u64,
    epochs: usize,
) -> Result<Mlp> {
    x.ensure_finite()?;
    if y.len() != x.n_rows() || x.n_rows() == 0 {
        return Err(Error::Layout {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be non-negative, got {alpha}")));
    }
    let mut net = Mlp::new_random(x.n_cols(), widths, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut params = net.params();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let mut t = 0i32;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(BATCH_SIZE) {
            t += 1;
            let (_, g) = net.loss_and_grad(x, y, batch, alpha);
            let c1 = 1.0 - BETA1.powi(t);
            let c2 = 1.0 - BETA2.powi(t);
            for j in 0..params.len() {
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
                params[j] -= LEARNING_RATE * (m[j] / c1) / ((v[j] / c2).sqrt() + ADAM_EPS);
            }
            net.set_params(&params);
        }
    }
    Ok(net)
}
