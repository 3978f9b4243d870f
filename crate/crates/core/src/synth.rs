//! Seeded synthetic drug-interaction knowledge base with one planted rule:
//! `Interacts(x,y)` holds iff some transporter `t` has
//! `TransporterSubstr(x,t)` and `TransporterInhib(y,t)`, for `x != y`.
//! Enzyme and target links are noise.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kb::{parse_facts, KnowledgeBase};

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub drugs: usize,
    pub transporters: usize,
    pub enzymes: usize,
    pub targets: usize,
    pub positives: usize,
    /// Per-drug cap on substrate links, and separately on inhibitor links.
    pub max_links: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { drugs: 40, transporters: 15, enzymes: 15, targets: 10, positives: 200, max_links: 2, seed: DEFAULT_SEED }
    }
}

fn pairs(substr: &[BTreeSet<usize>], inhib: &[BTreeSet<usize>]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (s, i) in substr.iter().zip(inhib) {
        for &x in s {
            for &y in i {
                if x != y {
                    out.insert((x, y));
                }
            }
        }
    }
    out
}

/// Fact-file text for the synthetic KB.
pub fn planted_ddi_text(cfg: &SynthConfig) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let drug = |i: usize| format!("d{i:02}");
    // substr[t] / inhib[t]: drugs linked to transporter t
    let mut substr = vec![BTreeSet::new(); cfg.transporters];
    let mut inhib = vec![BTreeSet::new(); cfg.transporters];
    let mut n_substr = vec![0; cfg.drugs];
    let mut n_inhib = vec![0; cfg.drugs];

    let mut candidates: Vec<(bool, usize, usize)> =
        (0..cfg.drugs).flat_map(|d| (0..cfg.transporters).flat_map(move |t| [(true, d, t), (false, d, t)])).collect();
    candidates.shuffle(&mut rng);
    let mut count = 0;
    for (is_substr, d, t) in candidates {
        if count == cfg.positives {
            break;
        }
        let (links, per_drug) = if is_substr { (&mut substr, &mut n_substr) } else { (&mut inhib, &mut n_inhib) };
        if per_drug[d] >= cfg.max_links || links[t].contains(&d) {
            continue;
        }
        links[t].insert(d);
        let n = pairs(&substr, &inhib).len();
        if n > cfg.positives {
            let links = if is_substr { &mut substr } else { &mut inhib };
            links[t].remove(&d);
            continue;
        }
        if is_substr {
            n_substr[d] += 1;
        } else {
            n_inhib[d] += 1;
        }
        count = n;
    }
    if count != cfg.positives {
        return Err(Error::InvalidArgument(format!("could only plant {count} of {} interactions", cfg.positives)));
    }
    // Every transporter appears in some fact.
    for t in 0..cfg.transporters {
        if substr[t].is_empty() && inhib[t].is_empty() {
            let d = (0..cfg.drugs).min_by_key(|&d| (n_substr[d], d)).unwrap_or(0);
            substr[t].insert(d);
            n_substr[d] += 1;
        }
    }
    debug_assert_eq!(pairs(&substr, &inhib).len(), cfg.positives);

    let mut out = String::new();
    out += "% synthetic drug interactions with one planted transporter rule\n";
    out += "@schema Interacts(drug, drug)\n";
    out += "@schema TransporterSubstr(drug, transporter)\n";
    out += "@schema TransporterInhib(drug, transporter)\n";
    out += "@schema EnzymeSubstr(drug, enzyme)\n";
    out += "@schema EnzymeInhib(drug, enzyme)\n";
    out += "@schema TargetInhib(drug, target)\n";
    out += "@target Interacts\n";
    for (t, ds) in substr.iter().enumerate() {
        for &d in ds {
            let _ = writeln!(out, "TransporterSubstr({}, tr{t:02}).", drug(d));
        }
    }
    for (t, ds) in inhib.iter().enumerate() {
        for &d in ds {
            let _ = writeln!(out, "TransporterInhib({}, tr{t:02}).", drug(d));
        }
    }
    // Noise: one enzyme link of each kind and one target per drug, with
    // every enzyme and target used at least once.
    for (pred, n) in [("EnzymeSubstr", cfg.enzymes), ("EnzymeInhib", cfg.enzymes)] {
        let mut order: Vec<usize> = (0..cfg.drugs).collect();
        order.shuffle(&mut rng);
        for (i, d) in order.into_iter().enumerate() {
            let e = if i < n { i } else { rng.gen_range(0..n) };
            let _ = writeln!(out, "{pred}({}, en{e:02}).", drug(d));
        }
    }
    let mut order: Vec<usize> = (0..cfg.drugs).collect();
    order.shuffle(&mut rng);
    for (i, d) in order.into_iter().enumerate() {
        let g = if i < cfg.targets { i } else { rng.gen_range(0..cfg.targets) };
        let _ = writeln!(out, "TargetInhib({}, tg{g:02}).", drug(d));
    }
    for (x, y) in pairs(&substr, &inhib) {
        let _ = writeln!(out, "Interacts({}, {}).", drug(x), drug(y));
    }
    Ok(out)
}

pub fn planted_ddi(cfg: &SynthConfig) -> Result<KnowledgeBase> {
    parse_facts(&planted_ddi_text(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::parse_clauses;
    use crate::grounder::CompiledClause;
    use crate::kb::positive_tuples;

    #[test]
    fn shape_and_rule() {
        let cfg = SynthConfig::default();
        let kb = planted_ddi(&cfg).unwrap();
        assert_eq!(kb.num_entities(), 80);
        let pos = positive_tuples(&kb).unwrap();
        assert_eq!(pos.len(), 200);
        let rule = &parse_clauses("Interacts(D0,D1) :- TransporterSubstr(D0,V0), TransporterInhib(D1,V0).").unwrap()[0];
        let c = CompiledClause::new(rule, &kb);
        let drugs: Vec<_> = kb.entities().filter(|&e| kb.entity_type(e) == "drug").collect();
        assert_eq!(drugs.len(), 40);
        let target = kb.target().unwrap();
        for &x in &drugs {
            for &y in &drugs {
                if x != y {
                    assert_eq!(c.covers(&kb, &[x, y]), kb.contains(target, &[x, y]));
                }
            }
        }
    }

    #[test]
    fn seeded() {
        let a = planted_ddi_text(&SynthConfig::default()).unwrap();
        assert_eq!(a, planted_ddi_text(&SynthConfig::default()).unwrap());
        assert_ne!(a, planted_ddi_text(&SynthConfig { seed: 8, ..SynthConfig::default() }).unwrap());
    }
}
