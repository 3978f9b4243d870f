//! End-to-end link-prediction pipeline: negatives, rule learning,
//! neighborhood embedding, classifier training and cross-validation.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clause::{Clause, ClauseSource};
use crate::error::{Error, Result};
use crate::gaifman::{build_gaifman_graph, GaifmanGraph, GraphOptions, NeighborhoodParams};
use crate::grounder::lge_embed_with_graph;
use crate::kb::{generate_negatives, positive_tuples, KnowledgeBase, LabeledTuple};
use crate::learn::{evaluate, Aggregate, Classifier, ClassifierKind, Dataset, GbtConfig, LogisticConfig, Metrics};
use crate::rules::ilp::{learn_clauses, IlpConfig};
use crate::rules::relocc::{learn_distance_model, RelOccConfig};
use crate::rules::rw::{build_schema_graph, sample_walks};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub facts_path: String,
    /// Overrides the `@target` directive when set.
    pub target: Option<String>,
    pub method: ClauseSource,
    pub r: usize,
    pub k: usize,
    pub w: usize,
    pub lambda: f64,
    pub neg_ratio: f64,
    pub classifier: ClassifierKind,
    pub aggregate: Aggregate,
    pub seed: u64,
    pub folds: usize,
    pub output_dir: String,
    pub rw_max_len: usize,
    pub rw_walks: usize,
    pub ilp_max_rules: usize,
    pub ilp_max_len: usize,
    pub ilp_beam: usize,
    pub ilp_min_score: i64,
    pub relocc_trees: usize,
    pub relocc_depth: usize,
    pub lr_rate: f64,
    pub lr_epochs: usize,
    pub lr_l2: f64,
    pub gb_rounds: usize,
    pub gb_depth: usize,
    pub gb_shrinkage: f64,
    pub gb_subsample: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lr = LogisticConfig::default();
        let gb = GbtConfig::default();
        let ilp = IlpConfig::default();
        let rel = RelOccConfig::default();
        Self {
            facts_path: String::new(),
            target: None,
            method: ClauseSource::Ilp,
            r: 1,
            k: 10,
            w: 5,
            lambda: rel.lambda,
            neg_ratio: 1.0,
            classifier: ClassifierKind::Gb,
            aggregate: Aggregate::PerTupleMean,
            seed: 0,
            folds: 5,
            output_dir: "out".into(),
            rw_max_len: 4,
            rw_walks: 20,
            ilp_max_rules: ilp.max_rules,
            ilp_max_len: ilp.max_len,
            ilp_beam: ilp.beam,
            ilp_min_score: ilp.min_score,
            relocc_trees: rel.n_trees,
            relocc_depth: rel.max_depth,
            lr_rate: lr.lr,
            lr_epochs: lr.epochs,
            lr_l2: lr.l2,
            gb_rounds: gb.n_rounds,
            gb_depth: gb.depth,
            gb_shrinkage: gb.shrinkage,
            gb_subsample: gb.subsample,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 29] = [
        "facts_path",
        "target",
        "method",
        "r",
        "k",
        "w",
        "lambda",
        "neg_ratio",
        "classifier",
        "aggregate",
        "seed",
        "folds",
        "output_dir",
        "rw_max_len",
        "rw_walks",
        "ilp_max_rules",
        "ilp_max_len",
        "ilp_beam",
        "ilp_min_score",
        "relocc_trees",
        "relocc_depth",
        "lr_rate",
        "lr_epochs",
        "lr_l2",
        "gb_rounds",
        "gb_depth",
        "gb_shrinkage",
        "gb_subsample",
        "threads",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "facts_path" => self.facts_path = v.to_string(),
            "target" => self.target = (!v.is_empty()).then(|| v.to_string()),
            "method" => self.method = parse_value(key, v)?,
            "r" => self.r = parse_value(key, v)?,
            "k" => self.k = parse_value(key, v)?,
            "w" => self.w = parse_value(key, v)?,
            "lambda" => self.lambda = parse_value(key, v)?,
            "neg_ratio" => self.neg_ratio = parse_value(key, v)?,
            "classifier" => self.classifier = parse_value(key, v)?,
            "aggregate" => self.aggregate = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "folds" => self.folds = parse_value(key, v)?,
            "output_dir" => self.output_dir = v.to_string(),
            "rw_max_len" => self.rw_max_len = parse_value(key, v)?,
            "rw_walks" => self.rw_walks = parse_value(key, v)?,
            "ilp_max_rules" => self.ilp_max_rules = parse_value(key, v)?,
            "ilp_max_len" => self.ilp_max_len = parse_value(key, v)?,
            "ilp_beam" => self.ilp_beam = parse_value(key, v)?,
            "ilp_min_score" => self.ilp_min_score = parse_value(key, v)?,
            "relocc_trees" => self.relocc_trees = parse_value(key, v)?,
            "relocc_depth" => self.relocc_depth = parse_value(key, v)?,
            "lr_rate" => self.lr_rate = parse_value(key, v)?,
            "lr_epochs" => self.lr_epochs = parse_value(key, v)?,
            "lr_l2" => self.lr_l2 = parse_value(key, v)?,
            "gb_rounds" => self.gb_rounds = parse_value(key, v)?,
            "gb_depth" => self.gb_depth = parse_value(key, v)?,
            "gb_shrinkage" => self.gb_shrinkage = parse_value(key, v)?,
            "gb_subsample" => self.gb_subsample = parse_value(key, v)?,
            // Execution-only; outputs do not depend on it.
            "threads" => {
                let _: usize = parse_value(key, v)?;
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("facts_path", self.facts_path.clone());
        kv("target", self.target.clone().unwrap_or_default());
        kv("method", self.method.to_string());
        kv("r", self.r.to_string());
        kv("k", self.k.to_string());
        kv("w", self.w.to_string());
        kv("lambda", self.lambda.to_string());
        kv("neg_ratio", self.neg_ratio.to_string());
        kv("classifier", self.classifier.to_string());
        kv("aggregate", self.aggregate.to_string());
        kv("seed", self.seed.to_string());
        kv("folds", self.folds.to_string());
        kv("output_dir", self.output_dir.clone());
        kv("rw_max_len", self.rw_max_len.to_string());
        kv("rw_walks", self.rw_walks.to_string());
        kv("ilp_max_rules", self.ilp_max_rules.to_string());
        kv("ilp_max_len", self.ilp_max_len.to_string());
        kv("ilp_beam", self.ilp_beam.to_string());
        kv("ilp_min_score", self.ilp_min_score.to_string());
        kv("relocc_trees", self.relocc_trees.to_string());
        kv("relocc_depth", self.relocc_depth.to_string());
        kv("lr_rate", self.lr_rate.to_string());
        kv("lr_epochs", self.lr_epochs.to_string());
        kv("lr_l2", self.lr_l2.to_string());
        kv("gb_rounds", self.gb_rounds.to_string());
        kv("gb_depth", self.gb_depth.to_string());
        kv("gb_shrinkage", self.gb_shrinkage.to_string());
        kv("gb_subsample", self.gb_subsample.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.neighborhood().validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.neg_ratio >= 0.0 && self.neg_ratio.is_finite()) {
            return Err(Error::Config(format!("neg_ratio must be ≥ 0, got {}", self.neg_ratio)));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be ≥ 2".into()));
        }
        Ok(())
    }

    pub fn neighborhood(&self) -> NeighborhoodParams {
        NeighborhoodParams { r: self.r, k: self.k, w: self.w }
    }

    pub fn ilp(&self) -> IlpConfig {
        IlpConfig {
            max_rules: self.ilp_max_rules,
            max_len: self.ilp_max_len,
            beam: self.ilp_beam,
            min_score: self.ilp_min_score,
        }
    }

    pub fn relocc(&self) -> RelOccConfig {
        RelOccConfig { n_trees: self.relocc_trees, lambda: self.lambda, max_depth: self.relocc_depth }
    }

    pub fn logistic(&self) -> LogisticConfig {
        LogisticConfig { lr: self.lr_rate, epochs: self.lr_epochs, l2: self.lr_l2 }
    }

    pub fn gbt(&self) -> GbtConfig {
        GbtConfig {
            n_rounds: self.gb_rounds,
            depth: self.gb_depth,
            shrinkage: self.gb_shrinkage,
            subsample: self.gb_subsample,
            seed: self.seed,
        }
    }

    pub fn train_classifier(&self, ds: &Dataset) -> Result<Classifier> {
        Classifier::train(self.classifier, ds, &self.logistic(), &self.gbt())
    }
}

/// Parses a fact file, applying a target override if given.
pub fn load_kb(text: &str, target: Option<&str>) -> Result<KnowledgeBase> {
    match target {
        None => crate::kb::parse_facts(text),
        Some(t) => crate::kb::parse_facts(&format!("{text}\n@target {t}\n")),
    }
}

/// Positive tuples and closed-world negatives for the configured ratio.
pub fn examples(kb: &KnowledgeBase, cfg: &PipelineConfig) -> Result<(Vec<LabeledTuple>, Vec<LabeledTuple>)> {
    let pos = positive_tuples(kb)?;
    let neg = generate_negatives(kb, cfg.neg_ratio, cfg.seed)?;
    if let Some(w) = &neg.warning {
        log::warn!("{w}");
    }
    Ok((pos, neg.tuples))
}

/// Runs the configured rule learner on the given training tuples.
pub fn learn_features(
    kb: &KnowledgeBase,
    pos: &[LabeledTuple],
    neg: &[LabeledTuple],
    cfg: &PipelineConfig,
) -> Result<Vec<Clause>> {
    match cfg.method {
        ClauseSource::Rw => {
            let sg = build_schema_graph(kb);
            let res = sample_walks(&sg, kb.target_schema()?, cfg.rw_max_len, cfg.rw_walks, cfg.seed)?;
            if let Some(w) = &res.warning {
                log::warn!("{w}");
            }
            Ok(res.clauses)
        }
        ClauseSource::Ilp => Ok(learn_clauses(kb, pos, neg, &cfg.ilp())?.into_iter().map(|c| c.clause).collect()),
        ClauseSource::Relocc => Ok(learn_distance_model(kb, pos, neg, &cfg.relocc())?.1),
    }
}

/// Fold index per tuple, stratified by label. Each class is shuffled with
/// `seed` and dealt round-robin, negatives continuing where positives
/// stopped so fold sizes differ by at most one.
pub fn fold_partition(tuples: &[LabeledTuple], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config("folds must be ≥ 2".into()));
    }
    let n_pos = tuples.iter().filter(|t| t.label.is_positive()).count();
    if n_pos < folds {
        return Err(Error::Config(format!("{n_pos} positive tuples cannot fill {folds} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; tuples.len()];
    let mut next = 0;
    for positive in [true, false] {
        let mut idx: Vec<usize> = (0..tuples.len()).filter(|&i| tuples[i].label.is_positive() == positive).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub rules: f64,
    pub embed: f64,
    pub train: f64,
    pub eval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Metrics,
    /// Wall-clock seconds; excluded from the metrics table.
    pub seconds: StageTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: ClauseSource,
    pub classifier: ClassifierKind,
    pub folds: Vec<FoldResult>,
    pub mean: Metrics,
}

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

impl CvReport {
    /// One row per fold plus a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("fold,method,classifier,{}\n", Metrics::FIELDS.join(","));
        let rows = self
            .folds
            .iter()
            .map(|f| (f.fold.to_string(), f.metrics))
            .chain(std::iter::once(("mean".to_string(), self.mean)));
        for (fold, m) in rows {
            let vals: Vec<String> = m.values().iter().map(|&v| fmt_metric(v)).collect();
            let _ = writeln!(out, "{fold},{},{},{}", self.method, self.classifier, vals.join(","));
        }
        out
    }

    /// Same rows as JSON (NaN becomes null).
    pub fn to_json(&self) -> String {
        let row = |fold: serde_json::Value, m: &Metrics| {
            let mut obj = serde_json::Map::new();
            obj.insert("fold".into(), fold);
            obj.insert("method".into(), self.method.to_string().into());
            obj.insert("classifier".into(), self.classifier.to_string().into());
            for (k, v) in Metrics::FIELDS.iter().zip(m.values()) {
                let rounded = (v * 1e6).round() / 1e6;
                obj.insert(
                    (*k).into(),
                    serde_json::Number::from_f64(rounded).map_or(serde_json::Value::Null, Into::into),
                );
            }
            serde_json::Value::Object(obj)
        };
        let mut rows: Vec<serde_json::Value> = self.folds.iter().map(|f| row(f.fold.into(), &f.metrics)).collect();
        rows.push(row("mean".into(), &self.mean));
        serde_json::to_string_pretty(&rows).unwrap_or_default() + "\n"
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("fold,n_features,n_train,n_test,rules_s,embed_s,train_s,eval_s\n");
        for f in &self.folds {
            let t = f.seconds;
            let _ = writeln!(
                out,
                "{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
                f.fold, f.n_features, f.n_train, f.n_test, t.rules, t.embed, t.train, t.eval
            );
        }
        out
    }
}

fn run_fold(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    tuples: &[LabeledTuple],
    assignment: &[usize],
    fold: usize,
    cfg: &PipelineConfig,
) -> Result<FoldResult> {
    let split = |test: bool, positive: bool| -> Vec<LabeledTuple> {
        tuples
            .iter()
            .zip(assignment)
            .filter(|(t, &a)| (a == fold) == test && t.label.is_positive() == positive)
            .map(|(t, _)| t.clone())
            .collect()
    };
    let (train_pos, train_neg) = (split(false, true), split(false, false));
    let (test_pos, test_neg) = (split(true, true), split(true, false));
    let mut seconds = StageTimes::default();

    let t = Instant::now();
    let features = learn_features(kb, &train_pos, &train_neg, cfg)?;
    seconds.rules = t.elapsed().as_secs_f64();
    if features.is_empty() {
        return Err(Error::Model(format!("fold {fold}: the {} learner produced no features", cfg.method)));
    }

    let t = Instant::now();
    let nb = cfg.neighborhood();
    let train_rows = lge_embed_with_graph(kb, graph, &features, &train_pos, &train_neg, nb, cfg.seed)?;
    let test_rows = lge_embed_with_graph(kb, graph, &features, &test_pos, &test_neg, nb, cfg.seed)?;
    seconds.embed = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let train = Dataset::from_rows(&train_rows)?;
    let model = cfg.train_classifier(&train)?;
    seconds.train = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let test = Dataset::from_rows(&test_rows)?;
    let metrics = evaluate(&model, &test, cfg.aggregate)?;
    seconds.eval = t.elapsed().as_secs_f64();

    Ok(FoldResult {
        fold,
        n_features: features.len(),
        n_train: train_pos.len() + train_neg.len(),
        n_test: test_pos.len() + test_neg.len(),
        metrics,
        seconds,
    })
}

/// Tuple-level stratified k-fold cross-validation. Rule learning and
/// embedding see only each fold's training tuples.
pub fn cross_validate(kb: &KnowledgeBase, cfg: &PipelineConfig) -> Result<CvReport> {
    cfg.validate()?;
    let (pos, neg) = examples(kb, cfg)?;
    cross_validate_examples(kb, &pos, &neg, cfg)
}

pub fn cross_validate_examples(
    kb: &KnowledgeBase,
    pos: &[LabeledTuple],
    neg: &[LabeledTuple],
    cfg: &PipelineConfig,
) -> Result<CvReport> {
    cfg.validate()?;
    let tuples: Vec<LabeledTuple> = pos.iter().chain(neg).cloned().collect();
    let assignment = fold_partition(&tuples, cfg.folds, cfg.seed)?;
    let graph = build_gaifman_graph(kb, GraphOptions::default());
    let fold_ids: Vec<usize> = (0..cfg.folds).collect();
    let folds = crate::par::map(&fold_ids, |&f| run_fold(kb, &graph, &tuples, &assignment, f, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mean = Metrics::mean(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    Ok(CvReport { method: cfg.method, classifier: cfg.classifier, folds, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    R,
    K,
    W,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "r" => Ok(SweepParam::R),
            "k" => Ok(SweepParam::K),
            "w" => Ok(SweepParam::W),
            other => Err(Error::InvalidArgument(format!("cannot sweep `{other}`; use r, k or w"))),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::R => "r",
            SweepParam::K => "k",
            SweepParam::W => "w",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: usize,
    pub rows: usize,
    /// Fastest of the timed embedding repeats, in seconds.
    pub embed_seconds: f64,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub repeats: usize,
    /// Also run cross-validation at each value.
    pub with_metrics: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { repeats: 3, with_metrics: true }
    }
}

/// Embedding wall time (all tuples, features learned once on all tuples)
/// and optionally CV metrics at each parameter value.
pub fn sweep(
    kb: &KnowledgeBase,
    cfg: &PipelineConfig,
    param: SweepParam,
    values: &[usize],
    opts: SweepOptions,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let (pos, neg) = examples(kb, cfg)?;
    let features = learn_features(kb, &pos, &neg, cfg)?;
    if features.is_empty() {
        return Err(Error::Model(format!("the {} learner produced no features", cfg.method)));
    }
    let graph = build_gaifman_graph(kb, GraphOptions::default());
    let configs: Vec<PipelineConfig> = values
        .iter()
        .map(|&value| {
            let mut c = cfg.clone();
            match param {
                SweepParam::R => c.r = value,
                SweepParam::K => c.k = value,
                SweepParam::W => c.w = value,
            }
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    // Repeats are interleaved across values so that load spikes do not
    // favor one value.
    let mut best = vec![f64::INFINITY; values.len()];
    let mut rows = vec![0; values.len()];
    for _ in 0..opts.repeats.max(1) {
        for (i, c) in configs.iter().enumerate() {
            let t = Instant::now();
            rows[i] = lge_embed_with_graph(kb, &graph, &features, &pos, &neg, c.neighborhood(), c.seed)?.len();
            best[i] = best[i].min(t.elapsed().as_secs_f64());
        }
    }
    let mut out = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        let metrics = if opts.with_metrics { Some(cross_validate_examples(kb, &pos, &neg, c)?.mean) } else { None };
        out.push(SweepRow { param, value: values[i], rows: rows[i], embed_seconds: best[i], metrics });
    }
    Ok(out)
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!("param,value,rows,embed_seconds,{}\n", Metrics::FIELDS.join(","));
    for r in rows {
        let metrics = match &r.metrics {
            Some(m) => m.values().iter().map(|&v| fmt_metric(v)).collect::<Vec<_>>().join(","),
            None => vec![""; Metrics::FIELDS.len()].join(","),
        };
        let _ = writeln!(out, "{},{},{},{:.6},{metrics}", r.param, r.value, r.rows, r.embed_seconds);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::EntityId;

    #[test]
    fn config_round_trip_and_overrides() {
        let mut cfg = PipelineConfig::from_text("method = relocc\nw = 7 # samples\n\nlambda=0.5\n").unwrap();
        assert_eq!(cfg.method, ClauseSource::Relocc);
        assert_eq!((cfg.w, cfg.lambda), (7, 0.5));
        cfg.set("classifier", "lr").unwrap();
        assert_eq!(PipelineConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        assert!(PipelineConfig::from_text("bogus = 1").is_err());
        assert!(PipelineConfig::from_text("r = x").is_err());
    }

    #[test]
    fn validation() {
        for bad in ["r = 0", "k = 0", "w = 0", "lambda = 0", "lambda = -1", "folds = 1"] {
            assert!(PipelineConfig::from_text(bad).unwrap().validate().is_err(), "{bad}");
        }
        assert!(PipelineConfig::default().validate().is_ok());
    }

    fn tuples(n_pos: usize, n_neg: usize) -> Vec<LabeledTuple> {
        (0..n_pos + n_neg)
            .map(|i| {
                let args = vec![EntityId(i as u32)];
                if i < n_pos {
                    LabeledTuple::positive(args)
                } else {
                    LabeledTuple::negative(args)
                }
            })
            .collect()
    }

    #[test]
    fn folds_even_and_stratified() {
        let t = tuples(50, 50);
        let a = fold_partition(&t, 5, 3).unwrap();
        for f in 0..5 {
            assert_eq!(a.iter().filter(|&&x| x == f).count(), 20);
            assert_eq!(a[..50].iter().filter(|&&x| x == f).count(), 10);
        }
        assert_eq!(a, fold_partition(&t, 5, 3).unwrap());
        assert!(fold_partition(&tuples(4, 10), 5, 0).is_err());
    }
}
