//! Typed knowledge base: interned entities, predicate schemas and a
//! duplicate-free, indexed fact store.
//!
//! Fact files are line oriented:
//!
//! ```text
//! % comment
//! @schema EnzymeInhib(drug, enzyme)
//! @target Interacts
//! EnzymeInhib(Pravastatin, CytochromeP4502C9).
//! ```
//!
//! Undeclared predicates get a schema from their first use with every
//! argument typed [`UNTYPED`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel entity type; compatible with every other type.
pub const UNTYPED: &str = "untyped";

/// Enumerating every candidate negative is cheaper than rejection sampling
/// below this many type-compatible tuples.
const ENUMERATION_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PredId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub fn types_compatible(a: &str, b: &str) -> bool {
    a == b || a == UNTYPED || b == UNTYPED
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub name: String,
    pub arg_types: Vec<String>,
}

impl PredicateSchema {
    pub fn arity(&self) -> usize {
        self.arg_types.len()
    }

    pub fn is_untyped(&self) -> bool {
        self.arg_types.iter().all(|t| t == UNTYPED)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: PredId,
    pub args: Vec<EntityId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledTuple {
    pub args: Vec<EntityId>,
    pub label: Label,
}

impl LabeledTuple {
    pub fn positive(args: Vec<EntityId>) -> Self {
        Self { args, label: Label::Positive }
    }

    pub fn negative(args: Vec<EntityId>) -> Self {
        Self { args, label: Label::Negative }
    }
}

#[derive(Debug, Clone, Default)]
struct EntityType {
    name: Option<String>,
    conflicted: bool,
}

/// Incrementally assembles a [`KnowledgeBase`]. Used by the parser and by
/// synthetic generators.
#[derive(Debug, Default)]
pub struct KbBuilder {
    symbols: Vec<String>,
    symbol_ids: HashMap<String, EntityId>,
    types: Vec<EntityType>,
    schemas: Vec<PredicateSchema>,
    declared: Vec<bool>,
    pred_ids: HashMap<String, PredId>,
    facts: HashSet<GroundAtom>,
    target: Option<String>,
}

impl KbBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_schema(&mut self, name: &str, arg_types: &[&str]) -> Result<PredId> {
        if arg_types.is_empty() {
            return Err(Error::InvalidArgument(format!("predicate `{name}` has arity 0")));
        }
        if let Some(&id) = self.pred_ids.get(name) {
            let existing = &self.schemas[id.index()];
            if existing.arity() != arg_types.len() {
                return Err(Error::InvalidArgument(format!(
                    "predicate `{name}` declared with arity {} but already has arity {}",
                    arg_types.len(),
                    existing.arity()
                )));
            }
            if self.declared[id.index()] {
                let same = existing.arg_types.iter().zip(arg_types).all(|(a, b)| a == b);
                if !same {
                    return Err(Error::InvalidArgument(format!("conflicting @schema declarations for `{name}`")));
                }
            }
            self.schemas[id.index()].arg_types = arg_types.iter().map(|s| s.to_string()).collect();
            self.declared[id.index()] = true;
            return Ok(id);
        }
        let id = PredId(self.schemas.len() as u32);
        self.schemas.push(PredicateSchema {
            name: name.to_string(),
            arg_types: arg_types.iter().map(|s| s.to_string()).collect(),
        });
        self.declared.push(true);
        self.pred_ids.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn set_target(&mut self, name: &str) {
        self.target = Some(name.to_string());
    }

    pub fn entity(&mut self, symbol: &str) -> EntityId {
        if let Some(&id) = self.symbol_ids.get(symbol) {
            return id;
        }
        let id = EntityId(self.symbols.len() as u32);
        self.symbols.push(symbol.to_string());
        self.types.push(EntityType::default());
        self.symbol_ids.insert(symbol.to_string(), id);
        id
    }

    /// Adds a fact, inferring an untyped schema when the predicate is new.
    /// Returns `false` when the fact was already present.
    pub fn add_fact(&mut self, predicate: &str, args: &[&str]) -> Result<bool> {
        if args.is_empty() {
            return Err(Error::InvalidArgument(format!("fact `{predicate}` has no arguments")));
        }
        if args.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidArgument(format!("empty constant in `{predicate}` fact")));
        }
        let pid = match self.pred_ids.get(predicate) {
            Some(&id) => id,
            None => {
                let id = PredId(self.schemas.len() as u32);
                self.schemas.push(PredicateSchema {
                    name: predicate.to_string(),
                    arg_types: vec![UNTYPED.to_string(); args.len()],
                });
                self.declared.push(false);
                self.pred_ids.insert(predicate.to_string(), id);
                id
            }
        };
        let arity = self.schemas[pid.index()].arity();
        if arity != args.len() {
            return Err(Error::InvalidArgument(format!(
                "`{predicate}` used with {} arguments but has arity {arity}",
                args.len()
            )));
        }
        let ids: Vec<EntityId> = args.iter().map(|a| self.entity(a)).collect();
        Ok(self.facts.insert(GroundAtom { predicate: pid, args: ids }))
    }

    pub fn build(self) -> Result<KnowledgeBase> {
        let KbBuilder { symbols, symbol_ids, mut types, schemas, pred_ids, facts, target, .. } = self;

        // Type entities from the (now final) schemas, in a deterministic order.
        let mut facts: Vec<GroundAtom> = facts.into_iter().collect();
        facts.sort();
        for fact in &facts {
            let schema = &schemas[fact.predicate.index()];
            for (arg, ty) in fact.args.iter().zip(&schema.arg_types) {
                if ty == UNTYPED {
                    continue;
                }
                let slot = &mut types[arg.index()];
                match &slot.name {
                    None if !slot.conflicted => slot.name = Some(ty.clone()),
                    Some(existing) if existing != ty => {
                        log::warn!(
                            "entity `{}` used as both `{existing}` and `{ty}`; downgraded to untyped",
                            symbols[arg.index()]
                        );
                        slot.name = None;
                        slot.conflicted = true;
                    }
                    _ => {}
                }
            }
        }
        let entity_types = types.into_iter().map(|t| t.name.unwrap_or_else(|| UNTYPED.to_string())).collect();

        let target = match target {
            None => None,
            Some(name) => match pred_ids.get(&name) {
                Some(&id) => Some(id),
                None => return Err(Error::Config(format!("target `{name}` has neither a @schema nor any facts"))),
            },
        };

        let mut by_pred = vec![Vec::new(); schemas.len()];
        let mut by_arg: HashMap<(PredId, usize, EntityId), Vec<u32>> = HashMap::new();
        for (i, fact) in facts.iter().enumerate() {
            by_pred[fact.predicate.index()].push(i as u32);
            for (pos, &arg) in fact.args.iter().enumerate() {
                by_arg.entry((fact.predicate, pos, arg)).or_default().push(i as u32);
            }
        }
        let fact_set = facts.iter().cloned().collect();

        Ok(KnowledgeBase {
            symbols,
            symbol_ids,
            entity_types,
            schemas,
            pred_ids,
            facts,
            fact_set,
            by_pred,
            by_arg,
            target,
        })
    }
}

/// An immutable knowledge base. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    symbols: Vec<String>,
    symbol_ids: HashMap<String, EntityId>,
    entity_types: Vec<String>,
    schemas: Vec<PredicateSchema>,
    pred_ids: HashMap<String, PredId>,
    facts: Vec<GroundAtom>,
    fact_set: HashSet<GroundAtom>,
    by_pred: Vec<Vec<u32>>,
    by_arg: HashMap<(PredId, usize, EntityId), Vec<u32>>,
    target: Option<PredId>,
}

impl KnowledgeBase {
    pub fn num_entities(&self) -> usize {
        self.symbols.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.symbols.len() as u32).map(EntityId)
    }

    pub fn entity(&self, symbol: &str) -> Option<EntityId> {
        self.symbol_ids.get(symbol).copied()
    }

    pub fn entity_or_err(&self, symbol: &str) -> Result<EntityId> {
        self.entity(symbol).ok_or_else(|| Error::UnknownEntity(symbol.to_string()))
    }

    pub fn symbol(&self, id: EntityId) -> &str {
        &self.symbols[id.index()]
    }

    pub fn entity_type(&self, id: EntityId) -> &str {
        &self.entity_types[id.index()]
    }

    pub fn schemas(&self) -> &[PredicateSchema] {
        &self.schemas
    }

    pub fn schema(&self, id: PredId) -> &PredicateSchema {
        &self.schemas[id.index()]
    }

    pub fn predicate(&self, name: &str) -> Option<PredId> {
        self.pred_ids.get(name).copied()
    }

    pub fn predicates(&self) -> impl Iterator<Item = PredId> + '_ {
        (0..self.schemas.len() as u32).map(PredId)
    }

    pub fn facts(&self) -> &[GroundAtom] {
        &self.facts
    }

    pub fn fact(&self, index: u32) -> &GroundAtom {
        &self.facts[index as usize]
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    /// Indices of all facts of `predicate`.
    pub fn facts_of(&self, predicate: PredId) -> &[u32] {
        self.by_pred.get(predicate.index()).map_or(&[], Vec::as_slice)
    }

    /// Indices of facts of `predicate` whose argument `position` is `entity`.
    pub fn facts_with(&self, predicate: PredId, position: usize, entity: EntityId) -> &[u32] {
        self.by_arg.get(&(predicate, position, entity)).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, predicate: PredId, args: &[EntityId]) -> bool {
        // Avoid allocating on the hot path: pick the shortest posting list.
        if args.is_empty() {
            return false;
        }
        let postings = args
            .iter()
            .enumerate()
            .map(|(pos, &a)| self.facts_with(predicate, pos, a))
            .min_by_key(|p| p.len())
            .unwrap_or(&[]);
        postings.iter().any(|&i| self.facts[i as usize].args == args)
    }

    pub fn contains_atom(&self, atom: &GroundAtom) -> bool {
        self.fact_set.contains(atom)
    }

    pub fn target(&self) -> Result<PredId> {
        self.target.ok_or_else(|| Error::Config("no @target predicate declared".to_string()))
    }

    pub fn target_schema(&self) -> Result<&PredicateSchema> {
        Ok(self.schema(self.target()?))
    }

    /// Symbol strings of a tuple, used as a canonical sort key.
    pub fn tuple_key(&self, args: &[EntityId]) -> Vec<&str> {
        args.iter().map(|&a| self.symbol(a)).collect()
    }

    pub fn format_tuple(&self, args: &[EntityId], sep: &str) -> String {
        self.tuple_key(args).join(sep)
    }

    pub fn format_atom(&self, atom: &GroundAtom) -> String {
        format!("{}({})", self.schema(atom.predicate).name, self.format_tuple(&atom.args, ","))
    }

    /// Canonical text: schemas sorted by name, the target, then facts
    /// sorted lexicographically.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let mut schemas: Vec<&PredicateSchema> = self.schemas.iter().collect();
        schemas.sort_by(|a, b| a.name.cmp(&b.name));
        for s in schemas {
            let _ = writeln!(out, "@schema {}({})", s.name, s.arg_types.join(","));
        }
        if let Some(t) = self.target {
            let _ = writeln!(out, "@target {}", self.schema(t).name);
        }
        let mut lines: Vec<String> = self.facts.iter().map(|f| self.format_atom(f)).collect();
        lines.sort();
        for l in lines {
            let _ = writeln!(out, "{l}.");
        }
        out
    }

    /// Set of facts rendered as text, independent of interning order.
    pub fn fact_strings(&self) -> std::collections::BTreeSet<String> {
        self.facts.iter().map(|f| self.format_atom(f)).collect()
    }

    pub fn schema_map(&self) -> BTreeMap<String, Vec<String>> {
        self.schemas.iter().map(|s| (s.name.clone(), s.arg_types.clone())).collect()
    }

    pub fn sort_tuples(&self, tuples: &mut [LabeledTuple]) {
        tuples.sort_by(|a, b| self.tuple_key(&a.args).cmp(&self.tuple_key(&b.args)));
    }
}

fn is_predicate_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic()) && chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn is_constant(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | ',' | '%'))
}

/// Splits `Name(a, b, c)` into its name and trimmed argument list.
pub(crate) fn split_atom(text: &str) -> Option<(&str, Vec<&str>)> {
    let open = text.find('(')?;
    let body = text.strip_suffix(')')?;
    let name = text[..open].trim();
    let inner = &body[open + 1..];
    if inner.contains('(') || inner.contains(')') {
        return None;
    }
    let args: Vec<&str> = inner.split(',').map(str::trim).collect();
    Some((name, args))
}

/// Parses fact-file text into a knowledge base.
pub fn parse_facts(text: &str) -> Result<KnowledgeBase> {
    let mut builder = KbBuilder::new();
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('%').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();

    // Directives first so schemas may follow the facts that use them.
    for &(n, line) in &lines {
        if let Some(rest) = line.strip_prefix("@schema") {
            let rest = rest.trim().trim_end_matches('.').trim();
            let (name, types) =
                split_atom(rest).ok_or_else(|| Error::parse(n, format!("malformed @schema `{line}`")))?;
            if !is_predicate_name(name) {
                return Err(Error::parse(n, format!("invalid predicate name `{name}`")));
            }
            if types.iter().any(|t| t.is_empty() || !is_predicate_name(t)) {
                return Err(Error::parse(n, format!("invalid type list in `{line}`")));
            }
            builder.declare_schema(name, &types).map_err(|e| Error::parse(n, e.to_string()))?;
        } else if let Some(rest) = line.strip_prefix("@target") {
            let name = rest.trim().trim_end_matches('.').trim();
            if !is_predicate_name(name) {
                return Err(Error::parse(n, format!("invalid @target `{line}`")));
            }
            builder.set_target(name);
        } else if line.starts_with('@') {
            return Err(Error::parse(n, format!("unknown directive `{line}`")));
        }
    }

    for &(n, line) in &lines {
        if line.starts_with('@') {
            continue;
        }
        let atom = line.strip_suffix('.').unwrap_or(line).trim_end();
        let (name, args) = split_atom(atom).ok_or_else(|| Error::parse(n, format!("malformed fact `{line}`")))?;
        if !is_predicate_name(name) {
            return Err(Error::parse(n, format!("invalid predicate name `{name}`")));
        }
        if let Some(bad) = args.iter().find(|a| !is_constant(a)) {
            return Err(Error::parse(n, format!("invalid constant `{bad}` in `{line}`")));
        }
        builder.add_fact(name, &args).map_err(|e| Error::parse(n, e.to_string()))?;
    }
    builder.build()
}

/// Argument tuples of all target facts, labeled positive, sorted by symbol.
pub fn positive_tuples(kb: &KnowledgeBase) -> Result<Vec<LabeledTuple>> {
    let target = kb.target()?;
    let mut out: Vec<LabeledTuple> =
        kb.facts_of(target).iter().map(|&i| LabeledTuple::positive(kb.fact(i).args.clone())).collect();
    kb.sort_tuples(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample {
    pub tuples: Vec<LabeledTuple>,
    pub warning: Option<String>,
}

/// Entities admissible at each target argument position.
fn argument_domains(kb: &KnowledgeBase, target: PredId) -> Vec<Vec<EntityId>> {
    let schema = kb.schema(target);
    (0..schema.arity())
        .map(|pos| {
            let seen: HashSet<EntityId> = kb.facts_of(target).iter().map(|&i| kb.fact(i).args[pos]).collect();
            let ty = &schema.arg_types[pos];
            let mut dom: Vec<EntityId> = kb
                .entities()
                .filter(|&e| {
                    if ty == UNTYPED {
                        seen.contains(&e)
                    } else {
                        let et = kb.entity_type(e);
                        et == ty || (et == UNTYPED && seen.contains(&e))
                    }
                })
                .collect();
            dom.sort_by(|a, b| kb.symbol(*a).cmp(kb.symbol(*b)));
            dom
        })
        .collect()
}

/// Closed-world negatives: a uniform sample, without replacement, of
/// type-compatible target tuples that are not facts.
pub fn generate_negatives(kb: &KnowledgeBase, ratio: f64, seed: u64) -> Result<NegativeSample> {
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative ratio {ratio} must be ≥ 0")));
    }
    let target = kb.target()?;
    let schema = kb.schema(target);
    let n_pos = kb.facts_of(target).len();
    let wanted = (ratio * n_pos as f64).round() as usize;
    if wanted == 0 {
        return Ok(NegativeSample { tuples: Vec::new(), warning: None });
    }

    let domains = argument_domains(kb, target);
    let arg_types = &schema.arg_types;
    let admissible = |args: &[EntityId]| {
        for i in 0..args.len() {
            for j in i + 1..args.len() {
                if args[i] == args[j] && arg_types[i] == arg_types[j] {
                    return false;
                }
            }
        }
        !kb.contains(target, args)
    };

    let total = domains.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len())).unwrap_or(usize::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut chosen: Vec<Vec<EntityId>> = if total <= ENUMERATION_LIMIT {
        let mut candidates = Vec::new();
        let mut current = vec![EntityId(0); domains.len()];
        enumerate_product(&domains, 0, &mut current, &mut |t| {
            if admissible(t) {
                candidates.push(t.to_vec());
            }
        });
        let take = wanted.min(candidates.len());
        index::sample(&mut rng, candidates.len(), take).into_iter().map(|i| candidates[i].clone()).collect()
    } else {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let budget = wanted.saturating_mul(100).max(10_000);
        for _ in 0..budget {
            if out.len() == wanted {
                break;
            }
            let t: Vec<EntityId> = domains.iter().map(|d| d[rng.gen_range(0..d.len())]).collect();
            if admissible(&t) && seen.insert(t.clone()) {
                out.push(t);
            }
        }
        out
    };

    let warning = if chosen.is_empty() {
        Some("no unobserved type-compatible target tuples; no negatives generated".to_string())
    } else if chosen.len() < wanted {
        Some(format!("only {} of {wanted} requested negatives available", chosen.len()))
    } else {
        None
    };
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    chosen.sort_by(|a, b| kb.tuple_key(a).cmp(&kb.tuple_key(b)));
    Ok(NegativeSample { tuples: chosen.into_iter().map(LabeledTuple::negative).collect(), warning })
}

fn enumerate_product(
    domains: &[Vec<EntityId>],
    depth: usize,
    current: &mut Vec<EntityId>,
    visit: &mut dyn FnMut(&[EntityId]),
) {
    if depth == domains.len() {
        visit(current);
        return;
    }
    for &e in &domains[depth] {
        current[depth] = e;
        enumerate_product(domains, depth + 1, current, visit);
    }
}
