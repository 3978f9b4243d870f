//! Partial grounding of clauses with query tuples, backtracking enumeration
//! of satisfying substitutions, neighborhood-restricted counting and the
//! embedding pipeline that turns a feature set into count vectors.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::clause::{Clause, Term};
use crate::error::{Error, Result};
use crate::gaifman::{
    build_gaifman_graph, generate_neighborhoods, GaifmanGraph, GraphOptions, NeighborhoodParams, NeighborhoodSample,
};
use crate::kb::{types_compatible, EntityId, KnowledgeBase, Label, LabeledTuple, PredId};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Var(u32),
    Const(EntityId),
}

#[derive(Debug, Clone)]
struct CompiledLiteral {
    predicate: PredId,
    /// Slots in the order of the stored fact (inverse literals reversed).
    args: Vec<Slot>,
}

/// A clause resolved against a knowledge base: predicate and constant
/// names become ids, inverse literals become argument permutations.
#[derive(Debug, Clone)]
pub struct CompiledClause {
    clause: Clause,
    literals: Vec<CompiledLiteral>,
    var_types: Vec<String>,
    num_vars: usize,
    /// False when the clause names an unknown predicate or constant, uses a
    /// literal with the wrong arity, or has inconsistent variable types.
    satisfiable: bool,
}

impl CompiledClause {
    pub fn new(clause: &Clause, kb: &KnowledgeBase) -> Self {
        let num_vars = clause.num_vars().max(clause.head_arity());
        let mut satisfiable = true;
        let mut literals = Vec::with_capacity(clause.body.len());
        for lit in &clause.body {
            let Some(pid) = kb.predicate(&lit.predicate) else {
                satisfiable = false;
                continue;
            };
            if kb.schema(pid).arity() != lit.args.len() {
                satisfiable = false;
                continue;
            }
            let mut args = Vec::with_capacity(lit.args.len());
            for term in lit.fact_order_args() {
                match term {
                    Term::Var(v) => args.push(Slot::Var(*v)),
                    Term::Const(name) => match kb.entity(name) {
                        Some(e) => args.push(Slot::Const(e)),
                        None => satisfiable = false,
                    },
                }
            }
            if satisfiable {
                literals.push(CompiledLiteral { predicate: pid, args });
            }
        }
        let var_types = match clause.variable_types(kb) {
            Some(t) => t,
            None => {
                satisfiable = false;
                vec![crate::kb::UNTYPED.to_string(); num_vars]
            }
        };
        let mut var_types = var_types;
        var_types.resize(num_vars, crate::kb::UNTYPED.to_string());
        Self { clause: clause.clone(), literals, var_types, num_vars, satisfiable }
    }

    pub fn clause(&self) -> &Clause {
        &self.clause
    }

    /// Substitutes the tuple for the head variables. `None` when the tuple
    /// does not partially ground the clause (arity or type mismatch).
    pub fn partial_ground(&self, kb: &KnowledgeBase, tuple: &[EntityId]) -> Option<PartialGrounding<'_>> {
        if tuple.len() != self.clause.head_arity() {
            return None;
        }
        let mut bindings = vec![None; self.num_vars];
        for (i, &e) in tuple.iter().enumerate() {
            if e.index() >= kb.num_entities() || !types_compatible(kb.entity_type(e), &self.var_types[i]) {
                return None;
            }
            bindings[i] = Some(e);
        }
        Some(PartialGrounding { compiled: self, bindings })
    }

    /// Existential coverage: the partially grounded body has at least one
    /// satisfying grounding.
    pub fn covers(&self, kb: &KnowledgeBase, tuple: &[EntityId]) -> bool {
        self.partial_ground(kb, tuple).is_some_and(|pg| pg.is_satisfied(kb))
    }
}

/// A full assignment of a clause's free (non-query) variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution {
    pub bindings: Vec<(u32, EntityId)>,
}

impl Substitution {
    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.bindings.iter().map(|&(_, e)| e)
    }
}

#[derive(Debug, Clone)]
pub struct PartialGrounding<'a> {
    compiled: &'a CompiledClause,
    bindings: Vec<Option<EntityId>>,
}

impl PartialGrounding<'_> {
    /// Variables still free after substituting the query tuple.
    pub fn free_vars(&self) -> Vec<u32> {
        (0..self.bindings.len() as u32).filter(|&v| self.bindings[v as usize].is_none()).collect()
    }

    pub fn to_text(&self, kb: &KnowledgeBase) -> String {
        let clause = &self.compiled.clause;
        let head = clause.head_arity() as u32;
        let mut out = String::new();
        for (i, lit) in clause.body.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let args: Vec<String> = lit
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => match self.bindings.get(*v as usize).copied().flatten() {
                        Some(e) => kb.symbol(e).to_string(),
                        None if *v < head => format!("D{v}"),
                        None => format!("V{}", v - head),
                    },
                    Term::Const(c) => c.clone(),
                })
                .collect();
            let _ = write!(out, "{}{}({})", if lit.inverse { "_" } else { "" }, lit.predicate, args.join(","));
        }
        out
    }

    pub fn is_satisfied(&self, kb: &KnowledgeBase) -> bool {
        let mut found = false;
        self.search(kb, &|_| true, &mut |_| {
            found = true;
            ControlFlow::Break(())
        });
        found
    }

    /// All substitutions of the free variables that make every body literal
    /// a fact, in sorted order.
    pub fn satisfying_groundings(&self, kb: &KnowledgeBase) -> Vec<Substitution> {
        self.groundings_within(kb, &|_| true)
    }

    /// Satisfying substitutions whose bound entities all pass `allowed`.
    pub fn groundings_within(&self, kb: &KnowledgeBase, allowed: &dyn Fn(EntityId) -> bool) -> Vec<Substitution> {
        let free = self.free_vars();
        let mut out = Vec::new();
        self.search(kb, allowed, &mut |b| {
            out.push(Substitution {
                bindings: free.iter().map(|&v| (v, b[v as usize].expect("free var bound"))).collect(),
            });
            ControlFlow::Continue(())
        });
        out.sort();
        out
    }

    /// Number of satisfying substitutions whose bound entities all lie in
    /// the neighborhood.
    pub fn count_in_neighborhood(&self, kb: &KnowledgeBase, nb: &NeighborhoodSample) -> usize {
        let mut n = 0;
        self.search(kb, &|e| nb.members.contains(&e), &mut |_| {
            n += 1;
            ControlFlow::Continue(())
        });
        n
    }

    fn search(
        &self,
        kb: &KnowledgeBase,
        allowed: &dyn Fn(EntityId) -> bool,
        visit: &mut dyn FnMut(&[Option<EntityId>]) -> ControlFlow<()>,
    ) {
        if !self.compiled.satisfiable {
            return;
        }
        let mut bindings = self.bindings.clone();
        let mut done = vec![false; self.compiled.literals.len()];
        let _ = backtrack(&self.compiled.literals, kb, &mut bindings, &mut done, allowed, visit);
    }
}

/// Candidate fact indices for a literal under the current bindings.
fn candidates<'k>(lit: &CompiledLiteral, kb: &'k KnowledgeBase, bindings: &[Option<EntityId>]) -> &'k [u32] {
    let mut best: Option<&[u32]> = None;
    for (pos, slot) in lit.args.iter().enumerate() {
        let bound = match *slot {
            Slot::Const(e) => Some(e),
            Slot::Var(v) => bindings[v as usize],
        };
        if let Some(e) = bound {
            let postings = kb.facts_with(lit.predicate, pos, e);
            if best.is_none_or(|b| postings.len() < b.len()) {
                best = Some(postings);
            }
        }
    }
    best.unwrap_or_else(|| kb.facts_of(lit.predicate))
}

fn backtrack(
    literals: &[CompiledLiteral],
    kb: &KnowledgeBase,
    bindings: &mut Vec<Option<EntityId>>,
    done: &mut Vec<bool>,
    allowed: &dyn Fn(EntityId) -> bool,
    visit: &mut dyn FnMut(&[Option<EntityId>]) -> ControlFlow<()>,
) -> ControlFlow<()> {
    // Most constrained literal first.
    let mut pick: Option<(usize, &[u32])> = None;
    for (i, lit) in literals.iter().enumerate() {
        if done[i] {
            continue;
        }
        let c = candidates(lit, kb, bindings);
        if pick.is_none_or(|(_, p)| c.len() < p.len()) {
            pick = Some((i, c));
        }
    }
    let Some((li, cands)) = pick else {
        return visit(bindings);
    };
    let lit = &literals[li];
    done[li] = true;
    let mut newly: Vec<u32> = Vec::with_capacity(lit.args.len());
    for &fi in cands {
        let fact = kb.fact(fi);
        let mut ok = true;
        for (slot, &value) in lit.args.iter().zip(&fact.args) {
            match *slot {
                Slot::Const(e) => ok = e == value,
                Slot::Var(v) => match bindings[v as usize] {
                    Some(b) => ok = b == value,
                    None => {
                        if allowed(value) {
                            bindings[v as usize] = Some(value);
                            newly.push(v);
                        } else {
                            ok = false;
                        }
                    }
                },
            }
            if !ok {
                break;
            }
        }
        let flow = if ok { backtrack(literals, kb, bindings, done, allowed, visit) } else { ControlFlow::Continue(()) };
        for v in newly.drain(..) {
            bindings[v as usize] = None;
        }
        if flow.is_break() {
            done[li] = false;
            return flow;
        }
    }
    done[li] = false;
    ControlFlow::Continue(())
}

/// Convenience wrapper: compile, partially ground and test coverage.
pub fn covers(clause: &Clause, tuple: &LabeledTuple, kb: &KnowledgeBase) -> bool {
    CompiledClause::new(clause, kb).covers(kb, &tuple.args)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingRow {
    pub tuple: Vec<EntityId>,
    pub neighborhood_index: usize,
    pub counts: Vec<u64>,
    pub label: Label,
}

/// Stable per-tuple seed that does not depend on interning order.
pub fn tuple_seed(kb: &KnowledgeBase, tuple: &[EntityId], seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, &e) in tuple.iter().enumerate() {
        if i > 0 {
            h = (h ^ 0x1f).wrapping_mul(0x0100_0000_01b3);
        }
        for b in kb.symbol(e).bytes() {
            h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        }
    }
    splitmix64(h ^ splitmix64(seed))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Count rows for one tuple: `w` rows of `|features|` counts.
pub fn embed_tuple(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    features: &[CompiledClause],
    tuple: &LabeledTuple,
    params: NeighborhoodParams,
    seed: u64,
) -> Result<Vec<EmbeddingRow>> {
    let samples = generate_neighborhoods(graph, &tuple.args, params, tuple_seed(kb, &tuple.args, seed))?;
    let mut rows: Vec<EmbeddingRow> = samples
        .iter()
        .map(|s| EmbeddingRow {
            tuple: tuple.args.clone(),
            neighborhood_index: s.index,
            counts: vec![0; features.len()],
            label: tuple.label,
        })
        .collect();
    for (fi, feature) in features.iter().enumerate() {
        let Some(pg) = feature.partial_ground(kb, &tuple.args) else {
            continue;
        };
        for (row, sample) in rows.iter_mut().zip(&samples) {
            row.counts[fi] = pg.count_in_neighborhood(kb, sample) as u64;
        }
    }
    Ok(rows)
}

/// Embeds positive then negative tuples (each sorted by symbol), `w` rows
/// per tuple.
pub fn lge_embed(
    kb: &KnowledgeBase,
    features: &[Clause],
    pos: &[LabeledTuple],
    neg: &[LabeledTuple],
    params: NeighborhoodParams,
    seed: u64,
) -> Result<Vec<EmbeddingRow>> {
    let graph = build_gaifman_graph(kb, GraphOptions::default());
    lge_embed_with_graph(kb, &graph, features, pos, neg, params, seed)
}

pub fn lge_embed_with_graph(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    features: &[Clause],
    pos: &[LabeledTuple],
    neg: &[LabeledTuple],
    params: NeighborhoodParams,
    seed: u64,
) -> Result<Vec<EmbeddingRow>> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("feature set is empty".into()));
    }
    params.validate()?;
    let target = kb.target_schema()?;
    let compiled: Vec<CompiledClause> = features.iter().map(|c| CompiledClause::new(c, kb)).collect();
    for c in features {
        if c.head_arity() != target.arity() {
            return Err(Error::InvalidArgument(format!(
                "feature `{c}` has head arity {} but the target has arity {}",
                c.head_arity(),
                target.arity()
            )));
        }
    }
    let mut pos = pos.to_vec();
    let mut neg = neg.to_vec();
    kb.sort_tuples(&mut pos);
    kb.sort_tuples(&mut neg);
    let tuples: Vec<LabeledTuple> = pos.into_iter().chain(neg).collect();
    let per_tuple = par::map(&tuples, |t| embed_tuple(kb, graph, &compiled, t, params, seed));
    let mut rows = Vec::with_capacity(tuples.len() * params.w);
    for r in per_tuple {
        rows.extend(r?);
    }
    Ok(rows)
}

/// KB-independent embedding table, as written to and read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub n_features: usize,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub tuple: String,
    pub neighborhood: usize,
    pub label: u8,
    pub counts: Vec<u64>,
}

impl EmbeddingTable {
    pub fn from_rows(kb: &KnowledgeBase, rows: &[EmbeddingRow], n_features: usize) -> Self {
        Self {
            n_features,
            rows: rows
                .iter()
                .map(|r| TableRow {
                    tuple: kb.format_tuple(&r.tuple, "|"),
                    neighborhood: r.neighborhood_index,
                    label: r.label.is_positive() as u8,
                    counts: r.counts.clone(),
                })
                .collect(),
        }
    }

    /// CSV with header `tuple,neighborhood,label,f1,..,fn`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tuple,neighborhood,label");
        for i in 1..=self.n_features {
            let _ = write!(out, ",f{i}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{}", r.tuple, r.neighborhood, r.label);
            for c in &r.counts {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty embedding file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[..3] != ["tuple", "neighborhood", "label"] {
            return Err(Error::parse(1, "expected header `tuple,neighborhood,label,f1..`"));
        }
        let n_features = cols.len() - 3;
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::parse(i + 1, format!("expected {} columns, got {}", cols.len(), f.len())));
            }
            let num = |s: &str| -> Result<u64> {
                s.trim().parse().map_err(|_| Error::parse(i + 1, format!("invalid number `{s}`")))
            };
            let label = num(f[2])?;
            if label > 1 {
                return Err(Error::parse(i + 1, "label must be 0 or 1"));
            }
            rows.push(TableRow {
                tuple: f[0].to_string(),
                neighborhood: num(f[1])? as usize,
                label: label as u8,
                counts: f[3..].iter().map(|s| num(s)).collect::<Result<_>>()?,
            });
        }
        Ok(Self { n_features, rows })
    }

    /// One JSON object per row.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("row serializes"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::{parse_clauses, ClauseSource, Literal};
    use crate::kb::parse_facts;

    const FOUR_DRUGS: &str = "\
@schema Interacts(drug, drug)
@schema EnzymeInhib(drug, enzyme)
@target Interacts
TransportSubstr(Pravastatin, BileSaltExportPump).
TransportInhib(Simvastatin, MultidrugResistProtein1).
EnzymeInhib(Pravastatin, CytochromeP4502C9).
EnzymeSubstr(Acetaminophen, CytochromeP4502C9).
EnzymeInhib(Simvastatin, CytochromeP4502C9).
Interacts(Pravastatin, Simvastatin).
";

    fn enzyme_clause() -> Clause {
        parse_clauses("Interacts(D0,D1) :- EnzymeInhib(D0,T0), _EnzymeInhib(T0,D1).").unwrap().remove(0)
    }

    #[test]
    fn four_drugs_partial_grounding_and_count() {
        let kb = parse_facts(FOUR_DRUGS).unwrap();
        let c = CompiledClause::new(&enzyme_clause(), &kb);
        let t = [kb.entity("Pravastatin").unwrap(), kb.entity("Simvastatin").unwrap()];
        let pg = c.partial_ground(&kb, &t).unwrap();
        assert_eq!(pg.to_text(&kb), "EnzymeInhib(Pravastatin,V0), _EnzymeInhib(V0,Simvastatin)");
        let g = pg.satisfying_groundings(&kb);
        let cyp = kb.entity("CytochromeP4502C9").unwrap();
        assert_eq!(g, vec![Substitution { bindings: vec![(2, cyp)] }]);

        let graph = build_gaifman_graph(&kb, GraphOptions::default());
        let nb = generate_neighborhoods(&graph, &t, NeighborhoodParams { r: 1, k: 10, w: 1 }, 0).unwrap();
        assert_eq!(pg.count_in_neighborhood(&kb, &nb[0]), 1);
        let mut without = nb[0].clone();
        without.members.remove(&cyp);
        assert_eq!(pg.count_in_neighborhood(&kb, &without), 0);
    }

    #[test]
    fn wrong_type_is_not_groundable() {
        let kb = parse_facts(FOUR_DRUGS).unwrap();
        let c = CompiledClause::new(&enzyme_clause(), &kb);
        let t = [kb.entity("Pravastatin").unwrap(), kb.entity("CytochromeP4502C9").unwrap()];
        assert!(c.partial_ground(&kb, &t).is_none());
        assert!(c.partial_ground(&kb, &t[..1]).is_none());
    }

    #[test]
    fn ground_and_absent() {
        let kb = parse_facts(FOUR_DRUGS).unwrap();
        let ground =
            parse_clauses("Interacts(D0,D1) :- EnzymeInhib('Pravastatin','CytochromeP4502C9').").unwrap().remove(0);
        let c = CompiledClause::new(&ground, &kb);
        let t = [kb.entity("Acetaminophen").unwrap(), kb.entity("Simvastatin").unwrap()];
        let pg = c.partial_ground(&kb, &t).unwrap();
        assert_eq!(pg.satisfying_groundings(&kb).len(), 1);
        assert!(pg.satisfying_groundings(&kb)[0].bindings.is_empty());

        let absent = parse_clauses("Interacts(D0,D1) :- EnzymeInhib(D0,'Nope').").unwrap().remove(0);
        let c = CompiledClause::new(&absent, &kb);
        assert!(c.partial_ground(&kb, &t).unwrap().satisfying_groundings(&kb).is_empty());

        // a clause that never mentions the head variables keeps its body
        let free = parse_clauses("Interacts(D0,D1) :- EnzymeInhib(X,Y).").unwrap().remove(0);
        let c = CompiledClause::new(&free, &kb);
        let pg = c.partial_ground(&kb, &t).unwrap();
        assert_eq!(pg.to_text(&kb), "EnzymeInhib(V0,V1)");
        assert_eq!(pg.satisfying_groundings(&kb).len(), 2);
    }

    #[test]
    fn coverage() {
        let kb = parse_facts(FOUR_DRUGS).unwrap();
        let t = LabeledTuple::positive(vec![kb.entity("Pravastatin").unwrap(), kb.entity("Simvastatin").unwrap()]);
        assert!(covers(&enzyme_clause(), &t, &kb));
        assert!(covers(&Clause::empty("Interacts", 2, ClauseSource::Ilp), &t, &kb));
        let mut none = Clause::empty("Interacts", 2, ClauseSource::Ilp);
        none.body.push(Literal::new("NoSuchPredicate", vec![Term::Var(0)]));
        assert!(!covers(&none, &t, &kb));
    }

    #[test]
    fn embed_shape_and_zero_column() {
        let kb = parse_facts(FOUR_DRUGS).unwrap();
        let mut features = vec![enzyme_clause(); 9];
        features.push(parse_clauses("Interacts(D0,D1) :- EnzymeInhib(D0,'Nope').").unwrap().remove(0));
        let pos = crate::kb::positive_tuples(&kb).unwrap();
        let rows = lge_embed(&kb, &features, &pos, &[], NeighborhoodParams { r: 1, k: 10, w: 5 }, 0).unwrap();
        assert_eq!(rows.len(), 5);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.counts.len(), 10);
            assert_eq!(r.neighborhood_index, i);
            assert_eq!(r.counts[0], 1);
            assert_eq!(r.counts[9], 0);
        }
        assert!(lge_embed(&kb, &[], &pos, &[], NeighborhoodParams::default(), 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let kb = parse_facts(FOUR_DRUGS).unwrap();
        let pos = crate::kb::positive_tuples(&kb).unwrap();
        let rows = lge_embed(&kb, &[enzyme_clause()], &pos, &[], NeighborhoodParams::default(), 0).unwrap();
        let table = EmbeddingTable::from_rows(&kb, &rows, 1);
        let csv = table.to_csv();
        assert!(csv.starts_with("tuple,neighborhood,label,f1\nPravastatin|Simvastatin,0,1,1\n"));
        assert_eq!(EmbeddingTable::from_csv(&csv).unwrap(), table);
        assert_eq!(table.to_jsonl().lines().count(), 5);
        assert!(EmbeddingTable::from_csv("tuple,neighborhood,label,f1\na,0,2,1\n").is_err());
    }
}
