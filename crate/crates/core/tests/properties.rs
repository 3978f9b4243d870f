mod common;

use std::collections::{BTreeSet, HashSet};

use common::{random_clause_text, random_kb_text, rng};
use dgm_core::clause::{parse_clauses, ClauseSource};
use dgm_core::gaifman::{build_gaifman_graph, generate_neighborhoods, GraphOptions, NeighborhoodParams};
use dgm_core::kb::{generate_negatives, parse_facts, positive_tuples, LabeledTuple};
use dgm_core::learn::{auc_pr, auc_roc, Metrics};
use dgm_core::pipeline::fold_partition;
use dgm_core::rules::ilp::{learn_clauses, score_clause, IlpConfig};
use dgm_core::rules::rw::{build_schema_graph, replay_walk, sample_walks};
use proptest::prelude::*;

const TYPED: &str = "\
@schema R(a, a)
@schema S(a, b)
@schema Q(b, c)
@schema Z(c, a)
@target R
";

fn typed_kb_text(facts: &[(u8, u8, u8)]) -> String {
    let mut text = TYPED.to_string();
    for &(p, x, y) in facts {
        text += &match p % 4 {
            0 => format!("R(a{x}, a{y}).\n"),
            1 => format!("S(a{x}, b{y}).\n"),
            2 => format!("Q(b{x}, c{y}).\n"),
            _ => format!("Z(c{x}, a{y}).\n"),
        };
    }
    text += "R(a0, a1).\n";
    text
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_text_round_trips(seed in any::<u64>()) {
        let (text, _) = random_kb_text(&mut rng(seed), 20, 4);
        let kb = parse_facts(&text).unwrap();
        let canon = kb.to_canonical_string();
        let again = parse_facts(&canon).unwrap();
        prop_assert_eq!(again.to_canonical_string(), canon);
        prop_assert_eq!(again.fact_strings(), kb.fact_strings());
    }

    #[test]
    fn negatives_are_unique_non_facts(seed in any::<u64>(), ratio in 0.0f64..3.0) {
        let (text, _) = random_kb_text(&mut rng(seed), 20, 3);
        let kb = parse_facts(&text).unwrap();
        let target = kb.target().unwrap();
        let neg = generate_negatives(&kb, ratio, seed).unwrap();
        let mut seen = HashSet::new();
        for t in &neg.tuples {
            prop_assert!(!t.label.is_positive());
            prop_assert!(!kb.contains(target, &t.args));
            prop_assert!(seen.insert(t.args.clone()));
        }
        let wanted = (ratio * positive_tuples(&kb).unwrap().len() as f64).round() as usize;
        prop_assert!(neg.tuples.len() <= wanted);
        if neg.tuples.len() < wanted {
            prop_assert!(neg.warning.is_some());
        }
    }

    #[test]
    fn graph_is_symmetric_and_samples_stay_in_balls(
        seed in any::<u64>(), r in 1usize..4, k in 1usize..12, w in 1usize..4,
    ) {
        let (text, _) = random_kb_text(&mut rng(seed), 25, 4);
        let kb = parse_facts(&text).unwrap();
        let g = build_gaifman_graph(&kb, GraphOptions::default());
        for (a, b) in g.edges() {
            prop_assert!(g.neighbors(a).contains(&b) && g.neighbors(b).contains(&a));
            prop_assert_eq!(g.hop_distance(a, b).unwrap(), Some(1));
        }
        let tuple = positive_tuples(&kb).unwrap().remove(0).args;
        let params = NeighborhoodParams { r, k, w };
        let hoods = generate_neighborhoods(&g, &tuple, params, seed).unwrap();
        prop_assert_eq!(hoods.len(), w);
        let mut union = BTreeSet::new();
        for &e in &tuple {
            union.extend(g.r_neighborhood(e, r).unwrap());
        }
        for nb in &hoods {
            prop_assert!(nb.members.len() <= k * tuple.len());
            prop_assert!(nb.members.iter().all(|m| union.contains(m)));
        }
        prop_assert_eq!(hoods, generate_neighborhoods(&g, &tuple, params, seed).unwrap());
    }

    #[test]
    fn clause_text_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (_, arities) = random_kb_text(&mut r, 10, 4);
        let text = random_clause_text(&mut r, &arities, 4, 5);
        let mut c = parse_clauses(&text).unwrap().remove(0);
        c.canonicalize();
        let printed = c.to_text();
        let mut back = parse_clauses(&printed).unwrap().remove(0);
        back.canonicalize();
        prop_assert_eq!(back.to_text(), printed);
    }

    #[test]
    fn walks_replay_and_chain(seed in any::<u64>(), max_len in 1usize..6, n in 1usize..30) {
        let kb = parse_facts(&typed_kb_text(&[])).unwrap();
        let sg = build_schema_graph(&kb);
        let target = kb.target_schema().unwrap();
        let res = sample_walks(&sg, target, max_len, n, seed).unwrap();
        prop_assert!(res.clauses.len() <= n);
        let texts: BTreeSet<String> = res.clauses.iter().map(|c| c.to_text()).collect();
        prop_assert_eq!(texts.len(), res.clauses.len());
        for c in &res.clauses {
            prop_assert_eq!(c.source, ClauseSource::Rw);
            prop_assert!(c.body.len() <= max_len);
            prop_assert!(c.head_vars_covered());
            prop_assert!(replay_walk(&sg, target, c));
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(
        pairs in prop::collection::vec((0u8..20, any::<bool>()), 2..60),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 20.0).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        let (a, b) = (auc_roc(&scores, &labels), auc_roc(&mapped, &labels));
        prop_assert!(a == b || (a.is_nan() && b.is_nan()));
        let (p, q) = (auc_pr(&scores, &labels), auc_pr(&mapped, &labels));
        prop_assert!(p == q || (p.is_nan() && q.is_nan()));
    }

    #[test]
    fn metrics_in_unit_interval(
        pairs in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..60),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let m = Metrics::from_scores(&scores, &labels);
        for v in m.values() {
            prop_assert!(v.is_nan() || (0.0..=1.0).contains(&v));
        }
        let single = labels.iter().all(|&l| l) || labels.iter().all(|&l| !l);
        prop_assert_eq!(m.auc_roc.is_nan(), single);
        let f1 = if m.precision + m.recall > 0.0 {
            2.0 * m.precision * m.recall / (m.precision + m.recall)
        } else {
            0.0
        };
        prop_assert!((m.f1 - f1).abs() < 1e-12);
    }

    #[test]
    fn folds_partition_and_stratify(n_pos in 1usize..40, n_neg in 0usize..40, folds in 2usize..7, seed in any::<u64>()) {
        let tuples: Vec<LabeledTuple> = (0..n_pos)
            .map(|i| LabeledTuple::positive(vec![dgm_core::EntityId(i as u32)]))
            .chain((0..n_neg).map(|i| LabeledTuple::negative(vec![dgm_core::EntityId(i as u32)])))
            .collect();
        if n_pos < folds {
            prop_assert!(fold_partition(&tuples, folds, seed).is_err());
            return Ok(());
        }
        let assign = fold_partition(&tuples, folds, seed).unwrap();
        prop_assert_eq!(assign.len(), tuples.len());
        prop_assert!(assign.iter().all(|&f| f < folds));
        for positive in [true, false] {
            let mut per = vec![0usize; folds];
            for (t, &f) in tuples.iter().zip(&assign) {
                if t.label.is_positive() == positive {
                    per[f] += 1;
                }
            }
            let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }
        let mut sizes = vec![0usize; folds];
        for &f in &assign {
            sizes[f] += 1;
        }
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(assign, fold_partition(&tuples, folds, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ilp_clauses_cover_some_positive(
        facts in prop::collection::vec((0u8..4, 0u8..6, 0u8..6), 5..40),
        seed in any::<u64>(),
    ) {
        let kb = parse_facts(&typed_kb_text(&facts)).unwrap();
        let pos = positive_tuples(&kb).unwrap();
        let neg = generate_negatives(&kb, 1.0, seed).unwrap().tuples;
        let cfg = IlpConfig { max_rules: 5, max_len: 2, beam: 4, min_score: 1 };
        for learned in learn_clauses(&kb, &pos, &neg, &cfg).unwrap() {
            prop_assert!(learned.clause.head_vars_covered());
            let s = score_clause(&learned.clause, &kb, &pos, &neg);
            prop_assert!(s.pos_covered >= 1);
        }
    }
}
