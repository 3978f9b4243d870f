//! Relational feature learners: schema random walks, greedy ILP covering
//! and relational one-class trees. All three emit [`Clause`]s headed by
//! the target predicate.

pub mod ilp;
pub mod relocc;
pub mod rw;

use crate::clause::{Clause, Literal, Term};
use crate::kb::{types_compatible, KnowledgeBase, PredId};

/// One-literal refinements of `clause`: every non-target predicate with
/// each argument either an existing type-compatible variable or a fresh
/// variable, sharing at least one existing variable. Literals implied by
/// one already in the body are skipped. Output order is deterministic.
pub fn refinements(clause: &Clause, kb: &KnowledgeBase, target: PredId) -> Vec<Literal> {
    let Some(var_types) = clause.variable_types(kb) else {
        return Vec::new();
    };
    let n_vars = var_types.len().max(clause.head_arity()) as u32;
    let mut preds: Vec<PredId> = kb.predicates().filter(|&p| p != target).collect();
    preds.sort_by(|a, b| kb.schema(*a).name.cmp(&kb.schema(*b).name));

    let mut out = Vec::new();
    for p in preds {
        let schema = kb.schema(p);
        let options: Vec<Vec<Option<u32>>> = schema
            .arg_types
            .iter()
            .map(|ty| {
                let mut o: Vec<Option<u32>> =
                    (0..n_vars).filter(|&v| types_compatible(&var_types[v as usize], ty)).map(Some).collect();
                o.push(None);
                o
            })
            .collect();
        for picked in cartesian(&options) {
            if picked.iter().all(Option::is_none) {
                continue;
            }
            let mut fresh = n_vars;
            let args: Vec<Term> = picked
                .iter()
                .map(|v| match v {
                    Some(v) => Term::Var(*v),
                    None => {
                        fresh += 1;
                        Term::Var(fresh - 1)
                    }
                })
                .collect();
            let lit = Literal::new(schema.name.clone(), args);
            if !implied_by_body(&lit, clause, n_vars) {
                out.push(lit);
            }
        }
    }
    out
}

fn cartesian<T: Copy>(options: &[Vec<T>]) -> Vec<Vec<T>> {
    options.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&o| {
                    let mut p = prefix.clone();
                    p.push(o);
                    p
                })
            })
            .collect()
    })
}

/// `lit` adds nothing when some body literal of the same predicate agrees
/// with it on every position where `lit` does not use a fresh variable.
fn implied_by_body(lit: &Literal, clause: &Clause, n_vars: u32) -> bool {
    clause.body.iter().any(|b| {
        b.predicate == lit.predicate
            && b.fact_order_args()
                .into_iter()
                .zip(lit.fact_order_args())
                .all(|(bt, lt)| bt == lt || matches!(lt, Term::Var(v) if *v >= n_vars))
    })
}
