//! Greedy sequential covering: each round beam-searches for the clause
//! maximizing `pos_covered - neg_covered` over the still-uncovered
//! positives and all negatives, then removes the positives it covers.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::refinements;
use crate::clause::{Clause, ClauseSource};
use crate::error::{Error, Result};
use crate::grounder::CompiledClause;
use crate::kb::{KnowledgeBase, LabeledTuple};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlpConfig {
    pub max_rules: usize,
    pub max_len: usize,
    pub beam: usize,
    pub min_score: i64,
}

impl Default for IlpConfig {
    fn default() -> Self {
        Self { max_rules: 20, max_len: 3, beam: 10, min_score: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClauseScore {
    pub pos_covered: usize,
    pub neg_covered: usize,
    pub score: i64,
}

impl ClauseScore {
    fn new(pos_covered: usize, neg_covered: usize) -> Self {
        Self { pos_covered, neg_covered, score: pos_covered as i64 - neg_covered as i64 }
    }
}

/// Coverage of `clause` over the given examples, counted with `covers`.
pub fn score_clause(clause: &Clause, kb: &KnowledgeBase, pos: &[LabeledTuple], neg: &[LabeledTuple]) -> ClauseScore {
    let c = CompiledClause::new(clause, kb);
    let p = pos.iter().filter(|t| c.covers(kb, &t.args)).count();
    let n = neg.iter().filter(|t| c.covers(kb, &t.args)).count();
    ClauseScore::new(p, n)
}

#[derive(Debug, Clone)]
struct Candidate {
    clause: Clause,
    text: String,
    /// Indices into the positive pool / negative list that are covered.
    pos: Vec<usize>,
    neg: Vec<usize>,
    score: ClauseScore,
}

/// Higher score first, then fewer literals, then serialization.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .score
        .cmp(&a.score.score)
        .then(a.clause.body.len().cmp(&b.clause.body.len()))
        .then_with(|| a.text.cmp(&b.text))
}

fn best_clause(kb: &KnowledgeBase, pool: &[&LabeledTuple], neg: &[LabeledTuple], cfg: &IlpConfig) -> Option<Candidate> {
    let target = kb.target().ok()?;
    let arity = kb.schema(target).arity();
    let root = Clause::empty(&kb.schema(target).name, arity, ClauseSource::Ilp);
    let mut beam = vec![Candidate {
        text: root.to_text(),
        clause: root,
        pos: (0..pool.len()).collect(),
        neg: (0..neg.len()).collect(),
        score: ClauseScore::new(pool.len(), neg.len()),
    }];
    let mut best: Option<Candidate> = None;

    for _ in 0..cfg.max_len {
        let mut seen = HashSet::new();
        let mut proposals: Vec<(usize, Clause, String)> = Vec::new();
        for (bi, parent) in beam.iter().enumerate() {
            for lit in refinements(&parent.clause, kb, target) {
                let mut c = parent.clause.with_literal(lit);
                c.canonicalize();
                let text = c.to_text();
                if seen.insert(text.clone()) {
                    proposals.push((bi, c, text));
                }
            }
        }
        let scored: Vec<Candidate> = par::map(&proposals, |(bi, clause, text)| {
            let parent = &beam[*bi];
            let compiled = CompiledClause::new(clause, kb);
            // Coverage only shrinks under refinement.
            let pos: Vec<usize> = parent.pos.iter().copied().filter(|&i| compiled.covers(kb, &pool[i].args)).collect();
            let neg_cov: Vec<usize> =
                parent.neg.iter().copied().filter(|&i| compiled.covers(kb, &neg[i].args)).collect();
            let score = ClauseScore::new(pos.len(), neg_cov.len());
            Candidate { clause: clause.clone(), text: text.clone(), pos, neg: neg_cov, score }
        });
        let mut next: Vec<Candidate> = scored.into_iter().filter(|c| !c.pos.is_empty()).collect();
        next.sort_by(rank);
        for c in &next {
            if c.clause.head_vars_covered() && best.as_ref().is_none_or(|b| rank(c, b) == Ordering::Less) {
                best = Some(c.clone());
            }
        }
        next.truncate(cfg.beam.max(1));
        if next.is_empty() {
            break;
        }
        beam = next;
    }
    best
}

#[derive(Debug, Clone)]
pub struct LearnedClause {
    pub clause: Clause,
    /// Score on the pool the clause was selected on.
    pub score: ClauseScore,
}

pub fn learn_clauses(
    kb: &KnowledgeBase,
    pos: &[LabeledTuple],
    neg: &[LabeledTuple],
    cfg: &IlpConfig,
) -> Result<Vec<LearnedClause>> {
    if cfg.max_rules == 0 || cfg.max_len == 0 {
        return Err(Error::InvalidArgument("max_rules and max_len must be ≥ 1".into()));
    }
    kb.target()?;
    let mut pool: Vec<&LabeledTuple> = pos.iter().collect();
    let mut rules = Vec::new();
    while rules.len() < cfg.max_rules && !pool.is_empty() {
        let Some(best) = best_clause(kb, &pool, neg, cfg) else {
            break;
        };
        if best.score.score < cfg.min_score {
            break;
        }
        let covered: HashSet<usize> = best.pos.iter().copied().collect();
        pool = pool.into_iter().enumerate().filter(|(i, _)| !covered.contains(i)).map(|(_, t)| t).collect();
        rules.push(LearnedClause { clause: best.clause, score: best.score });
    }
    Ok(rules)
}
