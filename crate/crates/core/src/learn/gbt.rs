//! Gradient boosting with logistic loss. Each round fits a regression tree
//! to the gradient with Newton leaf values and exact threshold search.

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{logit, sigmoid, Dataset};
use crate::error::{Error, Result};

/// L2 penalty on leaf values.
const LEAF_L2: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub depth: usize,
    pub shrinkage: f64,
    /// Fraction of rows drawn (without replacement) per round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self { n_rounds: 100, depth: 3, shrinkage: 0.1, subsample: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Leaf(f64),
    /// `x[feature] <= threshold` goes to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                RegNode::Leaf(v) => return v,
                RegNode::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base: f64,
    pub shrinkage: f64,
    pub trees: Vec<RegTree>,
}

impl GbtModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

struct Fitter<'a> {
    x: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    /// Row indices sorted by each feature's value.
    order: &'a [Vec<usize>],
    max_depth: usize,
    nodes: Vec<RegNode>,
}

impl Fitter<'_> {
    fn leaf_value(&self, rows: &[bool]) -> f64 {
        let (g, h) = self.sums(rows);
        -g / (h + LEAF_L2)
    }

    fn sums(&self, rows: &[bool]) -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for (i, &m) in rows.iter().enumerate() {
            if m {
                g += self.grad[i];
                h += self.hess[i];
            }
        }
        (g, h)
    }

    fn best_split(&self, rows: &[bool]) -> Option<(usize, f64)> {
        let (g, h) = self.sums(rows);
        let parent = g * g / (h + LEAF_L2);
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, order) in self.order.iter().enumerate() {
            let mut gl = 0.0;
            let mut hl = 0.0;
            let mut prev: Option<f64> = None;
            for &i in order.iter().filter(|&&i| rows[i]) {
                let v = self.x[i][f];
                if let Some(p) = prev {
                    if v > p {
                        let gr = g - gl;
                        let hr = h - hl;
                        let gain = gl * gl / (hl + LEAF_L2) + gr * gr / (hr + LEAF_L2) - parent;
                        if gain > 1e-12 && best.is_none_or(|(b, _, _)| gain > b) {
                            best = Some((gain, f, p + (v - p) / 2.0));
                        }
                    }
                }
                gl += self.grad[i];
                hl += self.hess[i];
                prev = Some(v);
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, rows: Vec<bool>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(RegNode::Leaf(self.leaf_value(&rows)));
        if depth >= self.max_depth {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            return id;
        };
        let mut left = vec![false; rows.len()];
        let mut right = vec![false; rows.len()];
        for (i, &m) in rows.iter().enumerate() {
            if m {
                if self.x[i][feature] <= threshold {
                    left[i] = true;
                } else {
                    right[i] = true;
                }
            }
        }
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = RegNode::Split { feature, threshold, left: l, right: r };
        id
    }
}

pub fn train_gbt(ds: &Dataset, cfg: &GbtConfig) -> Result<GbtModel> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(Error::InvalidArgument("subsample must be in (0, 1]".into()));
    }
    if cfg.shrinkage.is_nan() || cfg.shrinkage < 0.0 {
        return Err(Error::InvalidArgument("shrinkage must be ≥ 0".into()));
    }
    let n = ds.len();
    let base = logit(ds.n_positive() as f64 / n as f64);
    let mut model = GbtModel { base, shrinkage: cfg.shrinkage, trees: Vec::new() };
    if ds.is_single_class() {
        log::warn!("training data has a single class; predicting the prior");
        return Ok(model);
    }
    if cfg.shrinkage == 0.0 {
        return Ok(model);
    }
    let order: Vec<Vec<usize>> = (0..ds.feature_dim)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| ds.features[a][f].total_cmp(&ds.features[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut margin = vec![base; n];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let take = ((n as f64 * cfg.subsample).round() as usize).clamp(1, n);
    for _ in 0..cfg.n_rounds {
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - if ds.labels[i] { 1.0 } else { 0.0 };
            hess[i] = (p * (1.0 - p)).max(1e-12);
        }
        let mut rows = vec![take == n; n];
        if take < n {
            for i in sample(&mut rng, n, take).iter() {
                rows[i] = true;
            }
        }
        let mut fitter = Fitter {
            x: &ds.features,
            grad: &grad,
            hess: &hess,
            order: &order,
            max_depth: cfg.depth,
            nodes: Vec::new(),
        };
        fitter.grow(rows, 0);
        let tree = RegTree { nodes: fitter.nodes };
        for (m, x) in margin.iter_mut().zip(&ds.features) {
            *m += cfg.shrinkage * tree.predict(x);
        }
        model.trees.push(tree);
    }
    Ok(model)
}
