//! Independent oracles shared by the integration tests. None of these go
//! through the library's indexes or search; they work on plain symbol
//! strings.

#![allow(dead_code)]

use std::collections::HashSet;

use dgm_core::clause::{Clause, Term};
use dgm_core::kb::{EntityId, KnowledgeBase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FOUR_DRUGS: &str = "\
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

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All-pairs shortest hop counts by Floyd-Warshall; `None` = unreachable.
pub fn all_pairs(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<Option<usize>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(a, b) in edges {
        if a != b {
            d[a as usize][b as usize] = Some(1);
            d[b as usize][a as usize] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| x + y < c) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> (usize, Vec<(u32, u32)>) {
    let n = rng.gen_range(1..=max_nodes);
    let p: f64 = rng.gen_range(0.0..0.15);
    let mut edges = Vec::new();
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    (n, edges)
}

/// Facts as `(predicate, symbols)` strings.
pub struct FactOracle {
    facts: HashSet<(String, Vec<String>)>,
    by_pred: Vec<(String, Vec<String>)>,
}

impl FactOracle {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let by_pred: Vec<(String, Vec<String>)> = kb
            .facts()
            .iter()
            .map(|f| (kb.schema(f.predicate).name.clone(), f.args.iter().map(|&e| kb.symbol(e).to_string()).collect()))
            .collect();
        Self { facts: by_pred.iter().cloned().collect(), by_pred }
    }

    fn literal_holds(&self, clause: &Clause, lit: usize, binding: &[Option<String>]) -> Option<bool> {
        let l = &clause.body[lit];
        let mut args: Vec<String> = Vec::new();
        for t in &l.args {
            match t {
                Term::Const(c) => args.push(c.clone()),
                Term::Var(v) => args.push(binding[*v as usize].clone()?),
            }
        }
        if l.inverse {
            args.reverse();
        }
        Some(self.facts.contains(&(l.predicate.clone(), args)))
    }

    /// Number of assignments of the free variables to entities in `domain`
    /// that satisfy every body literal. Plain exhaustive enumeration.
    pub fn count_exhaustive(&self, clause: &Clause, tuple: &[String], domain: &[String]) -> usize {
        let h = clause.head_arity();
        let n = clause.num_vars().max(h);
        let free = n - h;
        let mut binding: Vec<Option<String>> = tuple.iter().cloned().map(Some).collect();
        binding.resize(n, None);
        let total = domain.len().pow(free as u32);
        let mut count = 0;
        for mut code in 0..total {
            for v in 0..free {
                binding[h + v] = Some(domain[code % domain.len()].clone());
                code /= domain.len();
            }
            if (0..clause.body.len()).all(|i| self.literal_holds(clause, i, &binding) == Some(true)) {
                count += 1;
            }
        }
        count
    }

    /// Whether some substitution satisfies the body, matching literals in
    /// order against a linear scan of the facts.
    pub fn exists(&self, clause: &Clause, tuple: &[String]) -> bool {
        let n = clause.num_vars().max(clause.head_arity());
        let mut binding: Vec<Option<String>> = tuple.iter().cloned().map(Some).collect();
        binding.resize(n, None);
        self.scan(clause, 0, &mut binding)
    }

    fn scan(&self, clause: &Clause, i: usize, binding: &mut Vec<Option<String>>) -> bool {
        let Some(l) = clause.body.get(i) else {
            return true;
        };
        let terms: Vec<&Term> = if l.inverse { l.args.iter().rev().collect() } else { l.args.iter().collect() };
        for (pred, args) in &self.by_pred {
            if *pred != l.predicate || args.len() != terms.len() {
                continue;
            }
            let saved = binding.clone();
            let mut ok = true;
            for (t, a) in terms.iter().zip(args) {
                match t {
                    Term::Const(c) => ok &= c == a,
                    Term::Var(v) => match &binding[*v as usize] {
                        Some(b) => ok &= b == a,
                        None => binding[*v as usize] = Some(a.clone()),
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok && self.scan(clause, i + 1, binding) {
                *binding = saved;
                return true;
            }
            *binding = saved;
        }
        false
    }
}

pub fn symbols(kb: &KnowledgeBase, ids: impl IntoIterator<Item = EntityId>) -> Vec<String> {
    ids.into_iter().map(|e| kb.symbol(e).to_string()).collect()
}

/// Untyped random KB text: `n_entities` constants `e0..`, predicates
/// `P0..` of arity 1-3 and a binary target `T`.
pub fn random_kb_text(rng: &mut ChaCha8Rng, max_entities: usize, max_preds: usize) -> (String, Vec<usize>) {
    let n = rng.gen_range(2..=max_entities);
    let n_preds = rng.gen_range(1..=max_preds);
    let arities: Vec<usize> = (0..n_preds).map(|_| rng.gen_range(1..=3)).collect();
    let mut text = String::from("@target T\n");
    for (p, &a) in arities.iter().enumerate() {
        let n_facts = rng.gen_range(0..=3 * n);
        for _ in 0..n_facts {
            let args: Vec<String> = (0..a).map(|_| format!("e{}", rng.gen_range(0..n))).collect();
            text += &format!("P{p}({}).\n", args.join(","));
        }
    }
    for _ in 0..rng.gen_range(1..=n) {
        text += &format!("T(e{},e{}).\n", rng.gen_range(0..n), rng.gen_range(0..n));
    }
    (text, arities)
}

/// Random body over predicates `P0..` with ≤ `max_lits` literals and at
/// most two free variables, head `T(D0,D1)`.
pub fn random_clause_text(rng: &mut ChaCha8Rng, arities: &[usize], max_lits: usize, consts: usize) -> String {
    let n_lits = rng.gen_range(1..=max_lits);
    let pool = ["D0", "D1", "X", "Y"];
    let mut lits = Vec::new();
    for _ in 0..n_lits {
        let p = rng.gen_range(0..arities.len());
        let args: Vec<String> = (0..arities[p])
            .map(|_| {
                if consts > 0 && rng.gen_bool(0.1) {
                    format!("e{}", rng.gen_range(0..consts))
                } else {
                    pool[rng.gen_range(0..pool.len())].to_string()
                }
            })
            .collect();
        let inv = if arities[p] == 2 && rng.gen_bool(0.3) { "_" } else { "" };
        lits.push(format!("{inv}P{p}({})", args.join(",")));
    }
    format!("T(D0,D1) :- {}.", lits.join(", "))
}
