//! L2-regularized logistic regression, full-batch gradient descent on
//! z-scored features.

use serde::{Deserialize, Serialize};

use super::{logit, sigmoid, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { lr: 0.1, epochs: 500, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub means: Vec<f64>,
    /// Column scale; zero marks a constant column, which is ignored.
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        standardize_row(x, &self.means, &self.scales)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let z: f64 = self.standardize(x).iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.bias;
        sigmoid(z)
    }
}

fn standardize_row(x: &[f64], means: &[f64], scales: &[f64]) -> Vec<f64> {
    x.iter().zip(means.iter().zip(scales)).map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 }).collect()
}

/// Per-column mean and standard deviation (zero for constant columns).
pub fn column_stats(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let n = ds.len().max(1) as f64;
    let d = ds.feature_dim;
    let mut means = vec![0.0; d];
    for row in &ds.features {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut scales = vec![0.0; d];
    for row in &ds.features {
        for ((s, v), m) in scales.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut scales {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 0.0;
        }
    }
    (means, scales)
}

/// Mean cross-entropy plus `l2/2 * |w|^2` and its gradient with respect to
/// `(weights, bias)`. `x` must already be standardized.
pub fn loss_and_gradient(x: &[Vec<f64>], y: &[bool], weights: &[f64], bias: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len().max(1) as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z: f64 = row.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() + bias;
        let t = if label { 1.0 } else { 0.0 };
        // log(1 + e^z) - t z, computed stably
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        loss += (softplus - t * z) / n;
        let err = (sigmoid(z) - t) / n;
        for (g, a) in gw.iter_mut().zip(row) {
            *g += err * a;
        }
        gb += err;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in gw.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (loss, gw, gb)
}

pub fn train_logistic(ds: &Dataset, cfg: &LogisticConfig) -> Result<LogisticModel> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let (means, scales) = column_stats(ds);
    let prior = ds.n_positive() as f64 / ds.len() as f64;
    let mut model = LogisticModel { weights: vec![0.0; ds.feature_dim], bias: logit(prior), means, scales };
    if ds.is_single_class() {
        log::warn!("training data has a single class; predicting the prior");
        return Ok(model);
    }
    let x: Vec<Vec<f64>> = ds.features.iter().map(|r| model.standardize(r)).collect();
    for _ in 0..cfg.epochs {
        let (_, gw, gb) = loss_and_gradient(&x, &ds.labels, &model.weights, model.bias, cfg.l2);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= cfg.lr * g;
        }
        model.bias -= cfg.lr * gb;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn separable() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..200 {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            if (a + 2.0 * b).abs() < 0.1 {
                continue;
            }
            x.push(vec![a, b]);
            y.push(a + 2.0 * b > 0.0);
        }
        Dataset::ungrouped(x, y).unwrap()
    }

    #[test]
    fn separable_training_accuracy() {
        let ds = separable();
        let m = train_logistic(&ds, &LogisticConfig::default()).unwrap();
        let correct = ds.features.iter().zip(&ds.labels).filter(|(x, &y)| (m.predict_proba(x) >= 0.5) == y).count();
        assert!(correct as f64 / ds.len() as f64 >= 0.99);
    }

    #[test]
    fn constant_features_predict_prior() {
        let ds = Dataset::ungrouped(vec![vec![3.0, 1.0]; 10], (0..10).map(|i| i < 7).collect()).unwrap();
        let m = train_logistic(&ds, &LogisticConfig::default()).unwrap();
        assert!((m.predict_proba(&[3.0, 1.0]) - 0.7).abs() < 1e-9);
        assert!((m.predict_proba(&[100.0, -5.0]) - 0.7).abs() < 1e-9);
    }

    #[test]
    fn single_class_degenerate() {
        let ds = Dataset::ungrouped(vec![vec![1.0], vec![2.0]], vec![false, false]).unwrap();
        let m = train_logistic(&ds, &LogisticConfig::default()).unwrap();
        assert!(m.predict_proba(&[1.0]) < 1e-6);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        // overlapping classes so the optimum is finite
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let y: Vec<bool> = x.iter().map(|r| r[0] + rng.gen_range(-1.0..1.0) > 0.0).collect();
        let ds = Dataset::ungrouped(x, y).unwrap();
        let cfg = LogisticConfig { lr: 0.5, epochs: 5000, l2: 1e-3 };
        let m = train_logistic(&ds, &cfg).unwrap();
        let xs: Vec<Vec<f64>> = ds.features.iter().map(|r| m.standardize(r)).collect();
        let (_, gw, gb) = loss_and_gradient(&xs, &ds.labels, &m.weights, m.bias, cfg.l2);
        assert!(gw.iter().all(|g| g.abs() < 1e-4) && gb.abs() < 1e-4, "{gw:?} {gb}");
    }
}
