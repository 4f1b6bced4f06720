//! CART trees and the random forest built from them.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::codec::{ParamReader, ParamWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of a node holding `pos` positives out of `n`.
    pub fn impurity(self, pos: f64, n: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        let p = pos / n;
        match self {
            Criterion::Gini => 2.0 * p * (1.0 - p),
            Criterion::Entropy => {
                let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
                h(p) + h(1.0 - p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    /// Every feature at every node; used for single-tree checks.
    All,
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
            MaxFeatures::All => d,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Best split found on one node.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: TreeParams,
    k_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len() as f64;
        let pos: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(if n > 0.0 { pos / n } else { 0.5 }));
        if depth >= self.params.max_depth || idx.len() < 2 || pos == 0.0 || pos == n {
            return slot;
        }
        let Some(best) = self.best_split(idx) else {
            return slot;
        };
        let (f, t) = (best.feature, best.threshold);
        let mut cut = 0;
        for j in 0..idx.len() {
            if self.x.get(idx[j], f) <= t {
                idx.swap(cut, j);
                cut += 1;
            }
        }
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        slot
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let d = self.x.n_cols();
        let mut features: Vec<usize> = if self.k_features >= d {
            (0..d).collect()
        } else {
            sample(&mut self.rng, d, self.k_features).into_vec()
        };
        features.sort_unstable();
        let n = idx.len() as f64;
        let total_pos: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let mut best: Option<Candidate> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(idx.len());
        for f in features {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0.0;
            for j in 0..pairs.len() - 1 {
                left_pos += pairs[j].1;
                let (a, b) = (pairs[j].0, pairs[j + 1].0);
                if a == b {
                    continue;
                }
                let nl = (j + 1) as f64;
                let nr = n - nl;
                let score = nl * self.params.criterion.impurity(left_pos, nl)
                    + nr * self.params.criterion.impurity(total_pos - left_pos, nr);
                if best.is_none_or(|c| score < c.score) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

impl Tree {
    pub fn fit(x: &Matrix, y: &[f64], rows: &[usize], params: TreeParams, seed: u64) -> Self {
        let mut b = Builder {
            x,
            y,
            params,
            k_features: params.max_features.resolve(x.n_cols()),
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
        };
        let mut idx = rows.to_vec();
        b.grow(&mut idx, 0);
        Tree { nodes: b.nodes }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Root split as `(feature, threshold)`, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf(_) => None,
        }
    }

    fn encode(&self, w: &mut ParamWriter) {
        w.usize(self.nodes.len());
        for n in &self.nodes {
            match *n {
                Node::Leaf(p) => {
                    w.u64(0);
                    w.f64(p);
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    w.u64(1);
                    w.usize(feature);
                    w.f64(threshold);
                    w.usize(left);
                    w.usize(right);
                }
            }
        }
    }

    fn decode(r: &mut ParamReader<'_>, n_features: usize) -> Result<Self> {
        let n = r.usize()?;
        let mut nodes = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            nodes.push(match r.u64()? {
                0 => Node::Leaf(r.f64()?),
                1 => Node::Split {
                    feature: r.usize()?,
                    threshold: r.f64()?,
                    left: r.usize()?,
                    right: r.usize()?,
                },
                t => return Err(Error::Decode(format!("unknown tree node tag {t}"))),
            });
        }
        let ok = !nodes.is_empty()
            && nodes.iter().enumerate().all(|(i, node)| match *node {
                Node::Leaf(_) => true,
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => feature < n_features && left > i && right > i && left < n && right < n,
            });
        if !ok {
            return Err(Error::Decode("malformed tree".into()));
        }
        Ok(Tree { nodes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    n_features: usize,
}

pub fn train_rf(x: &Matrix, y: &[f64], params: ForestParams, seed: u64) -> Result<RandomForest> {
    x.ensure_finite()?;
    if y.len() != x.n_rows() || x.n_rows() == 0 {
        return Err(Error::Layout {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if params.n_estimators == 0 {
        return Err(Error::Config("random forest needs at least one tree".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..params.n_estimators).map(|_| rng.gen()).collect();
    let n = x.n_rows();
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| r.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Tree::fit(x, y, &rows, params.tree, r.gen())
        })
        .collect();
    Ok(RandomForest {
        trees,
        n_features: x.n_cols(),
    })
}

impl RandomForest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn tree_probabilities(&self, row: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(row)).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub(crate) fn encode(&self, w: &mut ParamWriter) {
        w.usize(self.n_features);
        w.usize(self.trees.len());
        for t in &self.trees {
            t.encode(w);
        }
    }

    pub(crate) fn decode(r: &mut ParamReader<'_>) -> Result<Self> {
        let n_features = r.usize()?;
        let n = r.usize()?;
        let trees = (0..n)
            .map(|_| Tree::decode(r, n_features))
            .collect::<Result<Vec<_>>>()?;
        if trees.is_empty() {
            return Err(Error::Decode("forest without trees".into()));
        }
        Ok(Self { trees, n_features })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, depth: usize, mf: MaxFeatures, crit: Criterion, bootstrap: bool) -> ForestParams {
        ForestParams {
            n_estimators: n,
            tree: TreeParams {
                max_depth: depth,
                max_features: mf,
                criterion: crit,
            },
            bootstrap,
        }
    }

    #[test]
    fn max_features_rules() {
        assert_eq!(MaxFeatures::Sqrt.resolve(84), 9);
        assert_eq!(MaxFeatures::Log2.resolve(84), 6);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::Log2.resolve(1), 1);
        assert_eq!(MaxFeatures::Log2.resolve(100), 6);
    }

    #[test]
    fn impurity_values() {
        assert_eq!(Criterion::Gini.impurity(5.0, 10.0), 0.5);
        assert_eq!(Criterion::Entropy.impurity(5.0, 10.0), 1.0);
        assert_eq!(Criterion::Gini.impurity(0.0, 10.0), 0.0);
        assert_eq!(Criterion::Entropy.impurity(10.0, 10.0), 0.0);
    }

    #[test]
    fn constant_features_give_base_rate() {
        let x = Matrix::from_rows(&vec![vec![1.0, 2.0]; 8]).unwrap();
        let y = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let rf = train_rf(&x, &y, params(5, 4, MaxFeatures::Sqrt, Criterion::Gini, false), 3).unwrap();
        for probe in [[0.0, 0.0], [1.0, 2.0], [-5.0, 9.0]] {
            assert_eq!(rf.predict_row(&probe), 3.0 / 8.0);
        }
    }

    #[test]
    fn single_leaf_class_fraction() {
        let x = Matrix::from_rows(&[[0.0], [0.0], [0.0], [0.0]]).unwrap();
        let rf = train_rf(&x, &[1.0, 1.0, 1.0, 0.0], params(1, 4, MaxFeatures::All, Criterion::Gini, false), 0).unwrap();
        assert_eq!(rf.predict_row(&[0.0]), 0.75);
    }

    #[test]
    fn depth_one_recovers_threshold() {
        let xs: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| f64::from(i >= 13)).collect();
        let x = Matrix::from_rows(&xs).unwrap();
        let rf = train_rf(&x, &y, params(1, 1, MaxFeatures::All, Criterion::Gini, false), 0).unwrap();
        assert_eq!(rf.trees()[0].root_split(), Some((0, 12.5)));
        for (r, t) in xs.iter().zip(&y) {
            assert_eq!(rf.predict_row(r), *t);
        }
    }

    #[test]
    fn gini_and_entropy_agree_on_clean_clusters() {
        let xs: Vec<[f64; 1]> = [0.1, 0.3, 0.2, 0.4, 2.0, 2.2, 2.5, 2.1, 0.25, 2.4]
            .iter()
            .map(|&v| [v])
            .collect();
        let y: Vec<f64> = xs.iter().map(|r| f64::from(r[0] > 1.0)).collect();
        let x = Matrix::from_rows(&xs).unwrap();
        let rows: Vec<usize> = (0..xs.len()).collect();
        let tp = |c| TreeParams {
            max_depth: 1,
            max_features: MaxFeatures::All,
            criterion: c,
        };
        let g = Tree::fit(&x, &y, &rows, tp(Criterion::Gini), 0).root_split();
        let e = Tree::fit(&x, &y, &rows, tp(Criterion::Entropy), 0).root_split();
        assert_eq!(g, e);
        // brute force over every midpoint
        let mut sorted: Vec<f64> = xs.iter().map(|r| r[0]).collect();
        sorted.sort_by(f64::total_cmp);
        let best = sorted
            .windows(2)
            .map(|w| w[0] + (w[1] - w[0]) / 2.0)
            .find(|&t| xs.iter().zip(&y).all(|(r, &l)| (r[0] > t) == (l > 0.5)))
            .unwrap();
        assert_eq!(g, Some((0, best)));
    }

    #[test]
    fn forest_mean_of_trees_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| f64::from(r[0] + r[3] > 0.0)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let rf = train_rf(&x, &y, params(15, 4, MaxFeatures::Log2, Criterion::Entropy, true), 7).unwrap();
        for r in &rows {
            let per = rf.tree_probabilities(r);
            let mean = per.iter().sum::<f64>() / per.len() as f64;
            assert_eq!(mean, rf.predict_row(r));
            assert!((0.0..=1.0).contains(&mean));
        }
        assert!(rf.trees().iter().all(|t| t.depth() <= 4));
        let again = train_rf(&x, &y, params(15, 4, MaxFeatures::Log2, Criterion::Entropy, true), 7).unwrap();
        assert_eq!(rf, again);
    }
}
