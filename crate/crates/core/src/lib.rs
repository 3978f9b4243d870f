//! Structure learning for discriminative Gaifman models: relational rule
//! features, count embeddings over sampled Gaifman neighborhoods, and
//! link-prediction classifiers.
//!
//! ```
//! use dgm_core::pipeline::{cross_validate, PipelineConfig};
//! use dgm_core::synth::{planted_ddi, SynthConfig};
//!
//! let kb = planted_ddi(&SynthConfig::default())?;
//! let cfg = PipelineConfig { method: "relocc".parse()?, ..Default::default() };
//! let report = cross_validate(&kb, &cfg)?;
//! assert!(report.mean.auc_roc > 0.9);
//! # Ok::<(), dgm_core::Error>(())
//! ```

pub mod clause;
pub mod error;
pub mod gaifman;
pub mod grounder;
pub mod kb;
pub mod learn;
pub mod par;
pub mod pipeline;
pub mod rules;
pub mod synth;

pub use clause::{parse_clauses, Clause, ClauseSource, Literal, Term};
pub use error::{Error, Result};
pub use gaifman::{build_gaifman_graph, generate_neighborhoods, GaifmanGraph, GraphOptions, NeighborhoodParams};
pub use grounder::{lge_embed, CompiledClause, EmbeddingRow, EmbeddingTable};
pub use kb::{generate_negatives, parse_facts, positive_tuples, EntityId, KnowledgeBase, LabeledTuple};
pub use pipeline::PipelineConfig;
