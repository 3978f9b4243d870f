//! Relational random walks over the schema graph. A walk starts at the
//! first target argument's type and must end at the second's; each step
//! follows a predicate edge (or its inverse) between entity types.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clause::{Clause, ClauseSource, Literal, Term};
use crate::error::{Error, Result};
use crate::kb::{types_compatible, KnowledgeBase, PredicateSchema};

/// Oversampling budget: attempts per requested walk.
pub const ATTEMPTS_PER_WALK: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SchemaEdge {
    pub from: String,
    pub to: String,
    pub predicate: String,
    pub inverse: bool,
    pub arity: usize,
    pub from_pos: usize,
    pub to_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaGraph {
    pub nodes: BTreeSet<String>,
    pub edges: Vec<SchemaEdge>,
}

/// One directed edge per ordered pair of distinct argument positions of
/// every non-target predicate. Edges that run against argument order are
/// inverse edges.
pub fn build_schema_graph(kb: &KnowledgeBase) -> SchemaGraph {
    let target = kb.target().ok();
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    for p in kb.predicates() {
        let schema = kb.schema(p);
        nodes.extend(schema.arg_types.iter().cloned());
        if Some(p) == target {
            continue;
        }
        for i in 0..schema.arity() {
            for j in 0..schema.arity() {
                if i != j {
                    edges.push(SchemaEdge {
                        from: schema.arg_types[i].clone(),
                        to: schema.arg_types[j].clone(),
                        predicate: schema.name.clone(),
                        inverse: i > j,
                        arity: schema.arity(),
                        from_pos: i,
                        to_pos: j,
                    });
                }
            }
        }
    }
    edges.sort();
    SchemaGraph { nodes, edges }
}

impl SchemaGraph {
    pub fn outgoing<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = &'a SchemaEdge> + 'a {
        self.edges.iter().filter(move |e| types_compatible(&e.from, ty))
    }
}

/// The literal for one walk step from variable `from` to variable `to`;
/// other argument positions get fresh variables starting at `*next_var`.
fn step_literal(edge: &SchemaEdge, from: u32, to: u32, next_var: &mut u32) -> Literal {
    let mut args: Vec<Term> = (0..edge.arity)
        .map(|pos| {
            if pos == edge.from_pos {
                Term::Var(from)
            } else if pos == edge.to_pos {
                Term::Var(to)
            } else {
                *next_var += 1;
                Term::Var(*next_var - 1)
            }
        })
        .collect();
    if edge.inverse {
        args.reverse();
        Literal::inverse(edge.predicate.clone(), args)
    } else {
        Literal::new(edge.predicate.clone(), args)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkResult {
    pub clauses: Vec<Clause>,
    pub warning: Option<String>,
}

/// Samples up to `n_walks` distinct type-sound walks of length
/// `1..=max_len` chaining `D0` to `D1`.
pub fn sample_walks(
    sg: &SchemaGraph,
    target: &PredicateSchema,
    max_len: usize,
    n_walks: usize,
    seed: u64,
) -> Result<WalkResult> {
    if target.arity() != 2 {
        return Err(Error::InvalidArgument(format!(
            "random walks need a binary target, `{}` has arity {}",
            target.name,
            target.arity()
        )));
    }
    if max_len == 0 {
        return Err(Error::InvalidArgument("max walk length must be ≥ 1".into()));
    }
    let (start, end) = (&target.arg_types[0], &target.arg_types[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: BTreeMap<String, Clause> = BTreeMap::new();
    let budget = n_walks.saturating_mul(ATTEMPTS_PER_WALK);

    for _ in 0..budget {
        if found.len() >= n_walks {
            break;
        }
        let len = rng.gen_range(1..=max_len);
        let mut clause = Clause::empty(&target.name, 2, ClauseSource::Rw);
        let mut ty: &str = start;
        let mut current = 0u32;
        let mut next_var = 2u32;
        let mut ok = true;
        for step in 0..len {
            let out: Vec<&SchemaEdge> = sg.outgoing(ty).collect();
            if out.is_empty() {
                ok = false;
                break;
            }
            let edge = out[rng.gen_range(0..out.len())];
            let to = if step + 1 == len {
                1
            } else {
                next_var += 1;
                next_var - 1
            };
            clause.body.push(step_literal(edge, current, to, &mut next_var));
            current = to;
            ty = &edge.to;
        }
        if !ok || !types_compatible(ty, end) {
            continue;
        }
        clause.canonicalize();
        found.entry(clause.to_text()).or_insert(clause);
    }

    let clauses: Vec<Clause> = found.into_values().collect();
    let warning = clauses.is_empty().then(|| {
        let w = format!("no type-sound walk of length ≤ {max_len} links the target arguments");
        log::warn!("{w}");
        w
    });
    Ok(WalkResult { clauses, warning })
}

/// Replays a walk clause against the schema graph: each literal must be an
/// edge leaving the previous chain variable's type, and the chain must run
/// from `D0` to `D1`.
pub fn replay_walk(sg: &SchemaGraph, target: &PredicateSchema, clause: &Clause) -> bool {
    if clause.body.is_empty() || clause.head_arity() != 2 {
        return false;
    }
    let mut var = 0u32;
    let mut ty: &str = &target.arg_types[0];
    for (i, lit) in clause.body.iter().enumerate() {
        let fact_args: Vec<&Term> = lit.fact_order_args();
        let from_pos = fact_args.iter().position(|t| **t == Term::Var(var));
        let Some(from_pos) = from_pos else {
            return false;
        };
        let edge = sg.edges.iter().find(|e| {
            e.predicate == lit.predicate
                && e.inverse == lit.inverse
                && e.from_pos == from_pos
                && types_compatible(&e.from, ty)
                && e.arity == lit.args.len()
        });
        let Some(edge) = edge else {
            return false;
        };
        let Term::Var(next) = fact_args[edge.to_pos] else {
            return false;
        };
        let last = i + 1 == clause.body.len();
        if last != (*next == 1) {
            return false;
        }
        var = *next;
        ty = &edge.to;
    }
    var == 1 && types_compatible(ty, &target.arg_types[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::parse_clauses;
    use crate::kb::parse_facts;

    const DDI_SCHEMA: &str = "\
@schema Interacts(drug,drug)
@schema TargetInhib(drug,target)
@schema TransporterSubstr(drug,transporter)
@schema TransporterInhib(drug,transporter)
@target Interacts
";

    #[test]
    fn ddi_schema_edges() {
        let kb = parse_facts(DDI_SCHEMA).unwrap();
        let sg = build_schema_graph(&kb);
        assert_eq!(sg.edges.len(), 6);
        let ti: Vec<_> = sg.edges.iter().filter(|e| e.predicate == "TargetInhib").collect();
        assert_eq!(ti.len(), 2);
        assert!(ti.iter().any(|e| !e.inverse && e.from == "drug" && e.to == "target"));
        assert!(ti.iter().any(|e| e.inverse && e.from == "target" && e.to == "drug"));
        assert!(sg.edges.iter().all(|e| e.predicate != "Interacts"));
    }

    #[test]
    fn unary_and_ternary() {
        let kb = parse_facts("@schema D(drug)\nD(a).").unwrap();
        assert!(build_schema_graph(&kb).edges.is_empty());
        let kb = parse_facts("@schema P(a,b,c)\nP(x,y,z).").unwrap();
        let sg = build_schema_graph(&kb);
        assert_eq!(sg.edges.len(), 6);
        assert_eq!(sg.edges.iter().filter(|e| e.inverse).count(), 3);
    }

    #[test]
    fn target_inhib_round_trip_walk_replays() {
        let kb = parse_facts(DDI_SCHEMA).unwrap();
        let sg = build_schema_graph(&kb);
        let c = parse_clauses(
            "Interacts(D0,D3) :- TargetInhib(D0,T0), _TargetInhib(T0,D1), \
             TransporterSubstr(D1,T2), _TransporterInhib(T2,D3).",
        )
        .unwrap()
        .remove(0);
        let target = kb.target_schema().unwrap();
        assert!(replay_walk(&sg, target, &c));
        let walks = sample_walks(&sg, target, 4, 10_000, 5).unwrap();
        assert!(walks.clauses.iter().any(|w| w.to_text() == c.to_text()));
        for w in &walks.clauses {
            assert!(replay_walk(&sg, target, w), "{w}");
        }
    }

    #[test]
    fn no_connecting_predicate() {
        let kb = parse_facts(DDI_SCHEMA).unwrap();
        let sg = build_schema_graph(&kb);
        let r = sample_walks(&sg, kb.target_schema().unwrap(), 1, 50, 0).unwrap();
        assert!(r.clauses.is_empty());
        assert!(r.warning.is_some());
    }

    #[test]
    fn single_connecting_predicate() {
        // exhaustive: length-1 walks drug->target over {P, _P}; only P fits
        let kb = parse_facts("@schema I(drug,target)\n@schema P(drug,target)\n@target I\n").unwrap();
        let sg = build_schema_graph(&kb);
        for n in [1, 5, 100] {
            let r = sample_walks(&sg, kb.target_schema().unwrap(), 1, n, 9).unwrap();
            let texts: Vec<String> = r.clauses.iter().map(Clause::to_text).collect();
            assert_eq!(texts, vec!["I(D0,D1) :- P(D0,D1)."]);
        }
        // a same-typed predicate has two length-1 walks: P and its inverse
        let kb = parse_facts("@schema I(drug,drug)\n@schema P(drug,drug)\n@target I\n").unwrap();
        let sg = build_schema_graph(&kb);
        let r = sample_walks(&sg, kb.target_schema().unwrap(), 1, 100, 9).unwrap();
        let texts: Vec<String> = r.clauses.iter().map(Clause::to_text).collect();
        assert_eq!(texts, vec!["I(D0,D1) :- P(D0,D1).", "I(D0,D1) :- _P(D0,D1)."]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let kb = parse_facts("@schema I(a,b,c)\n@target I\n").unwrap();
        let sg = build_schema_graph(&kb);
        assert!(sample_walks(&sg, kb.target_schema().unwrap(), 2, 5, 0).is_err());
        let kb = parse_facts(DDI_SCHEMA).unwrap();
        assert!(sample_walks(&sg, kb.target_schema().unwrap(), 0, 5, 0).is_err());
    }
}
