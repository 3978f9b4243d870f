//! Discriminative classifiers over embedding rows and their evaluation.

pub mod gbt;
pub mod logistic;
pub mod metrics;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounder::{EmbeddingRow, EmbeddingTable};
use crate::kb::KnowledgeBase;

pub use gbt::{train_gbt, GbtConfig, GbtModel};
pub use logistic::{train_logistic, LogisticConfig, LogisticModel};
pub use metrics::{auc_pr, auc_roc, evaluate, Aggregate, Metrics};

/// Rows of real-valued features with binary labels. `groups[i]` identifies
/// the query tuple row `i` was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub groups: Vec<usize>,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<bool>, groups: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() || features.len() != groups.len() {
            return Err(Error::InvalidArgument("dataset columns differ in length".into()));
        }
        let feature_dim = features.first().map_or(0, Vec::len);
        if features.iter().any(|f| f.len() != feature_dim) {
            return Err(Error::InvalidArgument("feature vectors differ in length".into()));
        }
        Ok(Self { features, labels, groups, feature_dim })
    }

    /// One group per row.
    pub fn ungrouped(features: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        let groups = (0..labels.len()).collect();
        Self::new(features, labels, groups)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn is_single_class(&self) -> bool {
        let p = self.n_positive();
        p == 0 || p == self.len()
    }

    pub fn from_rows(rows: &[EmbeddingRow]) -> Result<Self> {
        let mut ids: HashMap<&[crate::kb::EntityId], usize> = HashMap::new();
        let groups = rows
            .iter()
            .map(|r| {
                let n = ids.len();
                *ids.entry(r.tuple.as_slice()).or_insert(n)
            })
            .collect();
        Self::new(
            rows.iter().map(|r| r.counts.iter().map(|&c| c as f64).collect()).collect(),
            rows.iter().map(|r| r.label.is_positive()).collect(),
            groups,
        )
    }

    pub fn from_table(table: &EmbeddingTable) -> Result<Self> {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let groups = table
            .rows
            .iter()
            .map(|r| {
                let n = ids.len();
                *ids.entry(r.tuple.as_str()).or_insert(n)
            })
            .collect();
        let ds = Self::new(
            table.rows.iter().map(|r| r.counts.iter().map(|&c| c as f64).collect()).collect(),
            table.rows.iter().map(|r| r.label == 1).collect(),
            groups,
        )?;
        if ds.feature_dim != table.n_features && !ds.is_empty() {
            return Err(Error::InvalidArgument("embedding rows disagree with header width".into()));
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lr,
    Gb,
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(ClassifierKind::Lr),
            "gb" | "gbt" | "boosting" => Ok(ClassifierKind::Gb),
            other => Err(Error::InvalidArgument(format!("unknown classifier `{other}`"))),
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassifierKind::Lr => "lr",
            ClassifierKind::Gb => "gb",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Logistic(LogisticModel),
    Boosted(GbtModel),
}

impl Classifier {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Logistic(m) => m.predict_proba(x),
            Classifier::Boosted(m) => m.predict_proba(x),
        }
    }

    pub fn train(kind: ClassifierKind, ds: &Dataset, lr: &LogisticConfig, gb: &GbtConfig) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::Lr => Classifier::Logistic(train_logistic(ds, lr)?),
            ClassifierKind::Gb => Classifier::Boosted(train_gbt(ds, gb)?),
        })
    }
}

/// Embedding rows for a knowledge base, as a dataset.
pub fn dataset_from_embedding(kb: &KnowledgeBase, rows: &[EmbeddingRow], n_features: usize) -> Result<Dataset> {
    Dataset::from_table(&EmbeddingTable::from_rows(kb, rows, n_features))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}
