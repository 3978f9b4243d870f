//! Threshold metrics and rank-based AUCs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    /// Recall of the positive class.
    pub recall: f64,
    pub f1: f64,
    /// NaN when the evaluation set holds a single class.
    pub auc_roc: f64,
    pub auc_pr: f64,
}

impl Metrics {
    pub const FIELDS: [&'static str; 6] = ["accuracy", "precision", "recall", "f1", "auc_roc", "auc_pr"];

    pub fn values(&self) -> [f64; 6] {
        [self.accuracy, self.precision, self.recall, self.f1, self.auc_roc, self.auc_pr]
    }

    /// Field-wise mean. NaN entries are skipped.
    pub fn mean(all: &[Metrics]) -> Metrics {
        let mut sums = [0.0; 6];
        let mut counts = [0usize; 6];
        for m in all {
            for (i, v) in m.values().into_iter().enumerate() {
                if !v.is_nan() {
                    sums[i] += v;
                    counts[i] += 1;
                }
            }
        }
        let v: Vec<f64> = (0..6).map(|i| if counts[i] == 0 { f64::NAN } else { sums[i] / counts[i] as f64 }).collect();
        Metrics { accuracy: v[0], precision: v[1], recall: v[2], f1: v[3], auc_roc: v[4], auc_pr: v[5] }
    }

    /// Metrics for probability scores thresholded at 0.5.
    pub fn from_scores(scores: &[f64], labels: &[bool]) -> Metrics {
        let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= 0.5, y) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fneg += 1,
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        let n_pos = tp + fneg;
        if n_pos == 0 || n_pos == labels.len() {
            log::warn!("evaluation set has a single class; AUCs are undefined");
        }
        Metrics {
            accuracy: ratio(tp + tn, labels.len()),
            precision,
            recall,
            f1,
            auc_roc: auc_roc(scores, labels),
            auc_pr: auc_pr(scores, labels),
        }
    }
}

/// Mann-Whitney statistic with average ranks for ties.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return f64::NAN;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

/// Step-interpolated average precision; tied scores form one threshold.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return f64::NAN;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        tp += idx[i..=j].iter().filter(|&&k| labels[k]).count();
        seen += j - i + 1;
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - prev_recall) * tp as f64 / seen as f64;
        prev_recall = recall;
        i = j + 1;
    }
    ap
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    PerRow,
    #[default]
    PerTupleMean,
}

impl std::str::FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "per_row" | "row" => Ok(Aggregate::PerRow),
            "per_tuple_mean" | "tuple" => Ok(Aggregate::PerTupleMean),
            other => Err(Error::InvalidArgument(format!("unknown aggregation `{other}`"))),
        }
    }
}

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregate::PerRow => "per_row",
            Aggregate::PerTupleMean => "per_tuple_mean",
        })
    }
}

/// Scores and labels after aggregation, in order of first appearance of
/// each group under `PerTupleMean`.
pub fn aggregate_scores(scores: &[f64], ds: &Dataset, how: Aggregate) -> (Vec<f64>, Vec<bool>) {
    match how {
        Aggregate::PerRow => (scores.to_vec(), ds.labels.clone()),
        Aggregate::PerTupleMean => {
            let mut groups: BTreeMap<usize, (usize, f64, usize, bool)> = BTreeMap::new();
            for (i, (&s, &g)) in scores.iter().zip(&ds.groups).enumerate() {
                let e = groups.entry(g).or_insert((i, 0.0, 0, ds.labels[i]));
                e.1 += s;
                e.2 += 1;
            }
            let mut v: Vec<(usize, f64, bool)> =
                groups.into_values().map(|(first, sum, n, y)| (first, sum / n as f64, y)).collect();
            v.sort_by_key(|e| e.0);
            (v.iter().map(|e| e.1).collect(), v.iter().map(|e| e.2).collect())
        }
    }
}

pub fn evaluate(model: &Classifier, ds: &Dataset, how: Aggregate) -> Result<Metrics> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty dataset".into()));
    }
    let scores: Vec<f64> = ds.features.iter().map(|x| model.predict_proba(x)).collect();
    let (s, y) = aggregate_scores(&scores, ds, how);
    Ok(Metrics::from_scores(&s, &y))
}
