//! `dgm`: stage-by-stage and end-to-end driver for the pipeline.
//!
//! Every stage reads a flat `key = value` config (flags win), writes its
//! artifacts atomically into `output_dir` and leaves a
//! `<stage>.manifest.json` with the effective config and SHA-256 hashes of
//! its inputs and outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dgm_core::clause::{clauses_to_text, parse_clauses};
use dgm_core::grounder::{lge_embed, EmbeddingTable};
use dgm_core::kb::KnowledgeBase;
use dgm_core::learn::{evaluate, Classifier, Dataset, Metrics};
use dgm_core::pipeline::{
    cross_validate_examples, examples, learn_features, load_kb, sweep, sweep_table, PipelineConfig, SweepOptions,
    SweepParam,
};
use dgm_core::{build_gaifman_graph, GraphOptions};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "dgm", version, about = "Rule features and Gaifman-neighborhood embeddings for link prediction")]
struct Cli {
    /// Worker thread cap. Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gaifman graph edge list and stats.
    Graph(Common),
    /// Learn rule features into clauses.txt.
    Rules(Common),
    /// Count embedding of all examples into embedding.csv.
    Embed {
        #[command(flatten)]
        common: Common,
        /// Clause file (default: <output_dir>/clauses.txt).
        #[arg(long)]
        clauses: Option<PathBuf>,
    },
    /// Train a classifier on an embedding into model.json.
    Train {
        #[command(flatten)]
        common: Common,
        /// Embedding CSV (default: <output_dir>/embedding.csv).
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Score a trained model on an embedding into eval_metrics.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// All stages on the full data plus k-fold cross-validation.
    Run(Common),
    /// Embedding time (and CV metrics) across values of r, k or w.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Timing only, no cross-validation per value.
        #[arg(long)]
        no_metrics: bool,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Fact file; may also be given positionally.
    #[arg(long)]
    facts: Option<String>,
    #[arg(value_name = "FACTS")]
    facts_pos: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(short)]
    r: Option<String>,
    #[arg(short)]
    k: Option<String>,
    #[arg(short)]
    w: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    neg_ratio: Option<String>,
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    aggregate: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long, short)]
    output_dir: Option<String>,
    #[arg(long)]
    max_rules: Option<String>,
    #[arg(long)]
    max_clause_len: Option<String>,
    #[arg(long)]
    beam: Option<String>,
    #[arg(long)]
    min_score: Option<String>,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// An error tagged with the stage it came from.
struct StageError {
    stage: &'static str,
    message: String,
}

type Res<T> = Result<T, StageError>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Res<T>;
}

impl<T, E: std::fmt::Display> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Res<T> {
        self.map_err(|e| StageError { stage, message: e.to_string() })
    }
}

impl Common {
    fn config(&self) -> Res<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| StageError { stage: "config", message: format!("{}: {e}", p.display()) })?;
                PipelineConfig::from_text(&text).stage("config")?
            }
            None => PipelineConfig::default(),
        };
        let flags = [
            ("facts_path", self.facts.as_ref().or(self.facts_pos.as_ref())),
            ("target", self.target.as_ref()),
            ("method", self.method.as_ref()),
            ("r", self.r.as_ref()),
            ("k", self.k.as_ref()),
            ("w", self.w.as_ref()),
            ("lambda", self.lambda.as_ref()),
            ("neg_ratio", self.neg_ratio.as_ref()),
            ("classifier", self.classifier.as_ref()),
            ("aggregate", self.aggregate.as_ref()),
            ("seed", self.seed.as_ref()),
            ("folds", self.folds.as_ref()),
            ("output_dir", self.output_dir.as_ref()),
            ("ilp_max_rules", self.max_rules.as_ref()),
            ("ilp_max_len", self.max_clause_len.as_ref()),
            ("ilp_beam", self.beam.as_ref()),
            ("ilp_min_score", self.min_score.as_ref()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).stage("config")?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| StageError { stage: "config", message: format!("`--set {kv}`: expected KEY=VALUE") })?;
            cfg.set(k, v).stage("config")?;
        }
        cfg.validate().stage("config")?;
        Ok(cfg)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One stage invocation: collects input hashes and writes outputs
/// atomically. Outputs written so far are removed unless `finish` runs.
struct Run {
    stage: &'static str,
    cfg: PipelineConfig,
    dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    written: Vec<PathBuf>,
    done: bool,
}

impl Run {
    fn new(stage: &'static str, cfg: PipelineConfig) -> Res<Self> {
        let dir = PathBuf::from(&cfg.output_dir);
        fs::create_dir_all(&dir).map_err(|e| StageError { stage, message: format!("{}: {e}", dir.display()) })?;
        Ok(Self {
            stage,
            cfg,
            dir,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            written: Vec::new(),
            done: false,
        })
    }

    fn read(&mut self, path: &Path) -> Res<String> {
        let text = fs::read_to_string(path)
            .map_err(|e| StageError { stage: self.stage, message: format!("{}: {e}", path.display()) })?;
        self.inputs.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    }

    fn kb(&mut self) -> Res<KnowledgeBase> {
        if self.cfg.facts_path.is_empty() {
            return Err(StageError { stage: self.stage, message: "no fact file given (--facts or facts_path)".into() });
        }
        let path = PathBuf::from(&self.cfg.facts_path);
        let text = self.read(&path)?;
        load_kb(&text, self.cfg.target.as_deref())
            .map_err(|e| StageError { stage: self.stage, message: format!("{}: {e}", path.display()) })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes via a temp file in the same directory, then renames.
    fn write_file(&mut self, name: &str, contents: &str, hashed: bool) -> Res<PathBuf> {
        let path = self.path(name);
        let io = |e: std::io::Error| StageError { stage: self.stage, message: format!("{}: {e}", path.display()) };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(contents.as_bytes()).map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        self.written.push(path.clone());
        if hashed {
            self.outputs.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        }
        Ok(path)
    }

    fn write(&mut self, name: &str, contents: &str) -> Res<PathBuf> {
        self.write_file(name, contents, true)
    }

    fn finish(mut self) -> Res<()> {
        let manifest = serde_json::json!({
            "stage": self.stage,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.cfg.seed,
            "config": self.cfg.to_text(),
            "inputs": self.inputs,
            "outputs": self.outputs,
        });
        let text = serde_json::to_string_pretty(&manifest).stage(self.stage)? + "\n";
        let name = format!("{}.manifest.json", self.stage);
        self.write_file(&name, &text, false)?;
        self.done = true;
        Ok(())
    }
}

impl Drop for Run {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn metrics_csv(m: &Metrics) -> String {
    let values: Vec<String> =
        m.values().iter().map(|v| if v.is_nan() { "nan".into() } else { format!("{v:.6}") }).collect();
    format!("{}\n{}\n", Metrics::FIELDS.join(","), values.join(","))
}

fn graph_stage(run: &mut Run, kb: &KnowledgeBase) -> Res<String> {
    let g = build_gaifman_graph(kb, GraphOptions::default());
    run.write("graph.edges", &g.edge_list_text(kb))?;
    let hist: Vec<String> = g.degree_histogram().iter().enumerate().map(|(d, n)| format!("{d}:{n}")).collect();
    let stats = format!("nodes {}\nedges {}\ndegree_histogram {}", g.num_nodes(), g.num_edges(), hist.join(" "));
    let stats = stats.trim_end().to_string() + "\n";
    run.write("graph_stats.txt", &stats)?;
    Ok(stats)
}

fn cmd_graph(common: &Common) -> Res<()> {
    let mut run = Run::new("graph", common.config()?)?;
    let kb = run.kb()?;
    let stats = graph_stage(&mut run, &kb)?;
    print!("{stats}");
    run.finish()
}

fn cmd_rules(common: &Common) -> Res<()> {
    let mut run = Run::new("rules", common.config()?)?;
    let kb = run.kb()?;
    let (pos, neg) = examples(&kb, &run.cfg).stage("rules")?;
    let clauses = learn_features(&kb, &pos, &neg, &run.cfg).stage("rules")?;
    let path = run.write("clauses.txt", &clauses_to_text(&clauses))?;
    println!("{} clauses -> {}", clauses.len(), path.display());
    run.finish()
}

fn cmd_embed(common: &Common, clauses: Option<&Path>) -> Res<()> {
    let mut run = Run::new("embed", common.config()?)?;
    let kb = run.kb()?;
    let clause_path = clauses.map(Path::to_path_buf).unwrap_or_else(|| run.path("clauses.txt"));
    let clauses = parse_clauses(&run.read(&clause_path)?)
        .map_err(|e| StageError { stage: "embed", message: format!("{}: {e}", clause_path.display()) })?;
    let (pos, neg) = examples(&kb, &run.cfg).stage("embed")?;
    let rows = lge_embed(&kb, &clauses, &pos, &neg, run.cfg.neighborhood(), run.cfg.seed).stage("embed")?;
    let table = EmbeddingTable::from_rows(&kb, &rows, clauses.len());
    let path = run.write("embedding.csv", &table.to_csv())?;
    println!("{} rows x {} features -> {}", table.rows.len(), table.n_features, path.display());
    run.finish()
}

fn read_table(run: &mut Run, path: &Path) -> Res<Dataset> {
    let stage = run.stage;
    let table = EmbeddingTable::from_csv(&run.read(path)?)
        .map_err(|e| StageError { stage, message: format!("{}: {e}", path.display()) })?;
    Dataset::from_table(&table).stage(stage)
}

fn cmd_train(common: &Common, embedding: Option<&Path>) -> Res<()> {
    let mut run = Run::new("train", common.config()?)?;
    let path = embedding.map(Path::to_path_buf).unwrap_or_else(|| run.path("embedding.csv"));
    let ds = read_table(&mut run, &path)?;
    let model = run.cfg.train_classifier(&ds).stage("train")?;
    let json = serde_json::to_string_pretty(&model).stage("train")? + "\n";
    let out = run.write("model.json", &json)?;
    println!("{} model on {} rows -> {}", run.cfg.classifier, ds.len(), out.display());
    run.finish()
}

fn cmd_eval(common: &Common, model: Option<&Path>, embedding: Option<&Path>) -> Res<()> {
    let mut run = Run::new("eval", common.config()?)?;
    let model_path = model.map(Path::to_path_buf).unwrap_or_else(|| run.path("model.json"));
    let model: Classifier = serde_json::from_str(&run.read(&model_path)?)
        .map_err(|e| StageError { stage: "eval", message: format!("{}: {e}", model_path.display()) })?;
    let path = embedding.map(Path::to_path_buf).unwrap_or_else(|| run.path("embedding.csv"));
    let ds = read_table(&mut run, &path)?;
    let m = evaluate(&model, &ds, run.cfg.aggregate).stage("eval")?;
    let csv = metrics_csv(&m);
    run.write("eval_metrics.csv", &csv)?;
    print!("{csv}");
    run.finish()
}

fn cmd_run(common: &Common) -> Res<()> {
    let mut run = Run::new("run", common.config()?)?;
    let kb = run.kb()?;
    graph_stage(&mut run, &kb)?;
    let (pos, neg) = examples(&kb, &run.cfg).stage("rules")?;
    let clauses = learn_features(&kb, &pos, &neg, &run.cfg).stage("rules")?;
    run.write("clauses.txt", &clauses_to_text(&clauses))?;
    let rows = lge_embed(&kb, &clauses, &pos, &neg, run.cfg.neighborhood(), run.cfg.seed).stage("embed")?;
    let table = EmbeddingTable::from_rows(&kb, &rows, clauses.len());
    run.write("embedding.csv", &table.to_csv())?;
    let ds = Dataset::from_table(&table).stage("train")?;
    let model = run.cfg.train_classifier(&ds).stage("train")?;
    run.write("model.json", &(serde_json::to_string_pretty(&model).stage("train")? + "\n"))?;
    let report = cross_validate_examples(&kb, &pos, &neg, &run.cfg).stage("eval")?;
    let csv = report.to_csv();
    run.write("metrics.csv", &csv)?;
    run.write("metrics.json", &report.to_json())?;
    // wall-clock times vary between runs, so they stay out of the manifest
    run.write_file("timings.csv", &report.timings_csv(), false)?;
    print!("{csv}");
    run.finish()
}

fn cmd_sweep(common: &Common, param: SweepParam, values: &[usize], repeats: usize, no_metrics: bool) -> Res<()> {
    let mut run = Run::new("sweep", common.config()?)?;
    let kb = run.kb()?;
    let opts = SweepOptions { repeats, with_metrics: !no_metrics };
    let rows = sweep(&kb, &run.cfg, param, values, opts).stage("sweep")?;
    let table = sweep_table(&rows);
    // timings again: recorded, not hashed
    run.write_file(&format!("sweep_{param}.csv"), &table, false)?;
    print!("{table}");
    run.finish()
}

fn dispatch(command: &Command) -> Res<()> {
    match command {
        Command::Graph(c) => cmd_graph(c),
        Command::Rules(c) => cmd_rules(c),
        Command::Embed { common, clauses } => cmd_embed(common, clauses.as_deref()),
        Command::Train { common, embedding } => cmd_train(common, embedding.as_deref()),
        Command::Eval { common, model, embedding } => cmd_eval(common, model.as_deref(), embedding.as_deref()),
        Command::Run(c) => cmd_run(c),
        Command::Sweep { common, param, values, repeats, no_metrics } => {
            cmd_sweep(common, *param, values, *repeats, *no_metrics)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli.command)),
        Err(e) => Err(StageError { stage: "threads", message: e.to_string() }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.stage, e.message);
            ExitCode::FAILURE
        }
    }
}
