//! Browser bindings for the demo page in `www/`. Each export takes fact
//! text plus parameters and returns a JSON string; errors come back as
//! JS exceptions carrying the message.

use dgm_core::clause::{clauses_to_text, parse_clauses};
use dgm_core::grounder::{embed_tuple, CompiledClause};
use dgm_core::kb::{generate_negatives, positive_tuples, KnowledgeBase, LabeledTuple};
use dgm_core::rules::relocc::{density_estimate, learn_distance_model, RelOccConfig};
use dgm_core::{build_gaifman_graph, generate_neighborhoods, parse_facts, GraphOptions, NeighborhoodParams};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn kb_from(facts: &str) -> Result<KnowledgeBase, String> {
    parse_facts(facts).map_err(|e| format!("facts: {e}"))
}

fn tuple_from(kb: &KnowledgeBase, text: &str) -> Result<Vec<dgm_core::EntityId>, String> {
    text.split(',').map(|s| kb.entity_or_err(s.trim()).map_err(|e| e.to_string())).collect()
}

/// Whole Gaifman graph, the hop distance of every node from `entity`
/// (null when unreachable) and `w` sampled neighborhoods of it.
pub fn neighborhood_json(facts: &str, entity: &str, r: usize, k: usize, w: usize, seed: u64) -> Result<String, String> {
    let kb = kb_from(facts)?;
    let center = kb.entity_or_err(entity.trim()).map_err(|e| e.to_string())?;
    let g = build_gaifman_graph(&kb, GraphOptions::default());
    let nodes: Vec<&str> = kb.entities().map(|e| kb.symbol(e)).collect();
    let edges: Vec<[u32; 2]> = g.edges().map(|(a, b)| [a.0, b.0]).collect();
    let distance: Vec<Option<usize>> =
        kb.entities().map(|e| g.hop_distance(center, e)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let ball = g.r_neighborhood(center, r).map_err(|e| e.to_string())?;
    let samples =
        generate_neighborhoods(&g, &[center], NeighborhoodParams { r, k, w }, seed).map_err(|e| e.to_string())?;
    let out = json!({
        "nodes": nodes,
        "edges": edges,
        "center": center.0,
        "distance": distance,
        "ball": ball.iter().map(|e| e.0).collect::<Vec<_>>(),
        "samples": samples.iter().map(|s| s.members.iter().map(|e| e.0).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    Ok(out.to_string())
}

/// Count rows of one query tuple (`a,b`) for the given clauses.
pub fn embed_json(
    facts: &str,
    clauses: &str,
    tuple: &str,
    r: usize,
    k: usize,
    w: usize,
    seed: u64,
) -> Result<String, String> {
    let kb = kb_from(facts)?;
    let clauses = parse_clauses(clauses).map_err(|e| format!("clauses: {e}"))?;
    let args = tuple_from(&kb, tuple)?;
    let target = kb.target().map_err(|e| e.to_string())?;
    let label = kb.contains(target, &args);
    let t = if label { LabeledTuple::positive(args) } else { LabeledTuple::negative(args) };
    let g = build_gaifman_graph(&kb, GraphOptions::default());
    let compiled: Vec<CompiledClause> = clauses.iter().map(|c| CompiledClause::new(c, &kb)).collect();
    let rows = embed_tuple(&kb, &g, &compiled, &t, NeighborhoodParams { r, k, w }, seed).map_err(|e| e.to_string())?;
    let out = json!({
        "features": clauses.iter().map(|c| c.to_text()).collect::<Vec<_>>(),
        "positive": label,
        "rows": rows.iter().map(|r| json!({"neighborhood": r.neighborhood_index, "counts": r.counts})).collect::<Vec<Value>>(),
    });
    Ok(out.to_string())
}

/// Learns a relOCC distance model on the positives plus as many sampled
/// negatives, and scores every example with the density estimate.
pub fn relocc_json(facts: &str, lambda: f64, trees: usize, depth: usize, seed: u64) -> Result<String, String> {
    let kb = kb_from(facts)?;
    let pos = positive_tuples(&kb).map_err(|e| e.to_string())?;
    let neg = generate_negatives(&kb, 1.0, seed).map_err(|e| e.to_string())?.tuples;
    let cfg = RelOccConfig { n_trees: trees, lambda, max_depth: depth };
    let (model, clauses) = learn_distance_model(&kb, &pos, &neg, &cfg).map_err(|e| e.to_string())?;
    let scored: Vec<Value> = pos
        .iter()
        .chain(&neg)
        .map(|t| {
            density_estimate(&model, t, &kb).map(
                |d| json!({"tuple": kb.format_tuple(&t.args, ","), "positive": t.label.is_positive(), "density": d}),
            )
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let out = json!({
        "clauses": clauses_to_text(&clauses),
        "trees": model.dump(&kb),
        "examples": scored,
    });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn neighborhood(facts: &str, entity: &str, r: usize, k: usize, w: usize, seed: u32) -> Result<String, JsValue> {
    neighborhood_json(facts, entity, r, k, w, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn embed(
    facts: &str,
    clauses: &str,
    tuple: &str,
    r: usize,
    k: usize,
    w: usize,
    seed: u32,
) -> Result<String, JsValue> {
    embed_json(facts, clauses, tuple, r, k, w, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn relocc(facts: &str, lambda: f64, trees: usize, depth: usize, seed: u32) -> Result<String, JsValue> {
    relocc_json(facts, lambda, trees, depth, seed as u64).map_err(|e| JsValue::from_str(&e))
}
