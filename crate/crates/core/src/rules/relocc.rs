//! Relational one-class classification.
//!
//! Each relational tree routes an example by existential tests (left =
//! test holds). Two examples are at distance 0 when they reach the same
//! leaf and `exp(-lambda * depth(lca))` otherwise. A weighted ensemble of
//! trees gives the combined distance `D`, and the α-weighted distance to
//! the labeled examples gives the density estimate `E(z not in class)`.
//!
//! Trees are grown greedily: every node picks the literal whose split
//! minimizes the cross-branch squared error
//!
//! ```text
//! sum_{z in R} (I(z) - E(z) - c * A(L))^2 + sum_{z in L} (I(z) - E(z) - c * A(R))^2
//! ```
//!
//! with `c = beta * exp(-lambda * depth)`, `A(X)` the α-mass of labeled
//! examples in branch `X`, and `I(z) = 1` for unlabeled examples.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::refinements;
use crate::clause::{Clause, ClauseSource, Literal};
use crate::error::{Error, Result};
use crate::grounder::CompiledClause;
use crate::kb::{KnowledgeBase, LabeledTuple, PredId};
use crate::par;

/// Minimum decrease of the node objective for a split to count.
const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelOccConfig {
    pub n_trees: usize,
    pub lambda: f64,
    pub max_depth: usize,
}

impl Default for RelOccConfig {
    fn default() -> Self {
        Self { n_trees: 5, lambda: 1.0, max_depth: 3 }
    }
}

#[derive(Debug, Clone)]
pub enum TreeNode {
    Leaf {
        depth: usize,
    },
    Split {
        depth: usize,
        test: Literal,
        /// Conjunction of the tests on the true-branch path to this node,
        /// followed by `test`. An example goes left when it satisfies it.
        query: Clause,
        compiled: Box<CompiledClause>,
        /// Node objective at the chosen split.
        objective: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { depth } | TreeNode::Split { depth, .. } => *depth,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    /// Builds a split node, compiling its query against `kb`.
    pub fn split(
        kb: &KnowledgeBase,
        depth: usize,
        context: &Clause,
        test: Literal,
        left: TreeNode,
        right: TreeNode,
    ) -> Self {
        let query = context.with_literal(test.clone());
        let compiled = Box::new(CompiledClause::new(&query, kb));
        TreeNode::Split {
            depth,
            test,
            query,
            compiled,
            objective: f64::NAN,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.count() + right.count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelationalTree {
    pub root: TreeNode,
    pub lambda: f64,
}

impl RelationalTree {
    pub fn new(root: TreeNode, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(Self { root, lambda })
    }

    /// Branch decisions from the root to a leaf (`true` = left).
    pub fn route(&self, kb: &KnowledgeBase, x: &LabeledTuple) -> Vec<bool> {
        let mut path = Vec::new();
        let mut node = &self.root;
        while let TreeNode::Split { compiled, left, right, .. } = node {
            let goes_left = compiled.covers(kb, &x.args);
            path.push(goes_left);
            node = if goes_left { left } else { right };
        }
        path
    }

    /// Distance between two routings of this tree.
    pub fn path_distance(&self, a: &[bool], b: &[bool]) -> f64 {
        if a == b {
            return 0.0;
        }
        let lca_depth = a.iter().zip(b).take_while(|(x, y)| x == y).count();
        (-self.lambda * lca_depth as f64).exp()
    }

    /// The all-true path as a clause.
    pub fn left_branch(&self) -> Clause {
        let mut node = &self.root;
        let mut last: Option<&Clause> = None;
        while let TreeNode::Split { query, left, .. } = node {
            last = Some(query);
            node = left;
        }
        match last {
            Some(q) => q.clone(),
            None => Clause::empty("", 0, ClauseSource::Relocc),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.root.count()
    }
}

pub fn tree_distance(tree: &RelationalTree, x1: &LabeledTuple, x2: &LabeledTuple, kb: &KnowledgeBase) -> f64 {
    tree.path_distance(&tree.route(kb, x1), &tree.route(kb, x2))
}

#[derive(Debug, Clone)]
pub struct DistanceModel {
    pub trees: Vec<(RelationalTree, f64)>,
    pub alphas: Vec<f64>,
    pub training_examples: Vec<LabeledTuple>,
}

impl DistanceModel {
    fn check(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Model("distance model has no trees".into()));
        }
        Ok(())
    }

    /// Routes of the training examples, one vector per tree.
    fn training_routes(&self, kb: &KnowledgeBase) -> Vec<Vec<Vec<bool>>> {
        self.trees.iter().map(|(t, _)| self.training_examples.iter().map(|x| t.route(kb, x)).collect()).collect()
    }

    pub fn dump(&self, kb: &KnowledgeBase) -> String {
        let mut out = String::new();
        let _ =
            writeln!(out, "relocc-model trees={} training_examples={}", self.trees.len(), self.training_examples.len());
        let alpha = self.alphas.first().copied().unwrap_or(0.0);
        let uniform = self.alphas.iter().all(|&a| a == alpha);
        if uniform {
            let _ = writeln!(out, "alpha uniform={alpha}");
        } else {
            for (x, a) in self.training_examples.iter().zip(&self.alphas) {
                let _ = writeln!(out, "alpha {} {a}", kb.format_tuple(&x.args, "|"));
            }
        }
        for (i, (tree, beta)) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {i} beta={beta} lambda={} nodes={}", tree.lambda, tree.num_nodes());
            dump_node(&tree.root, &mut out, "  ");
        }
        out
    }
}

fn dump_node(node: &TreeNode, out: &mut String, indent: &str) {
    match node {
        TreeNode::Leaf { .. } => {
            let _ = writeln!(out, "{indent}leaf");
        }
        TreeNode::Split { test, query, objective, left, right, .. } => {
            let test_text = query.literal_text(test);
            let _ = writeln!(out, "{indent}test {test_text} objective={objective:.6}");
            let deeper = format!("{indent}  ");
            let _ = writeln!(out, "{indent}true:");
            dump_node(left, out, &deeper);
            let _ = writeln!(out, "{indent}false:");
            dump_node(right, out, &deeper);
        }
    }
}

pub fn combined_distance(
    model: &DistanceModel,
    x1: &LabeledTuple,
    x2: &LabeledTuple,
    kb: &KnowledgeBase,
) -> Result<f64> {
    model.check()?;
    Ok(model.trees.iter().map(|(t, beta)| beta * tree_distance(t, x1, x2, kb)).sum())
}

/// `E(z not in class) = sum_j alpha_j * D(x_j, z)`.
pub fn density_estimate(model: &DistanceModel, z: &LabeledTuple, kb: &KnowledgeBase) -> Result<f64> {
    model.check()?;
    if model.training_examples.is_empty() {
        return Err(Error::Model("distance model has no training examples".into()));
    }
    let routes = model.training_routes(kb);
    Ok(density_with_routes(model, &routes, z, kb))
}

fn density_with_routes(model: &DistanceModel, routes: &[Vec<Vec<bool>>], z: &LabeledTuple, kb: &KnowledgeBase) -> f64 {
    model
        .trees
        .iter()
        .zip(routes)
        .map(|((tree, beta), train)| {
            let zr = tree.route(kb, z);
            beta * train.iter().zip(&model.alphas).map(|(xr, a)| a * tree.path_distance(xr, &zr)).sum::<f64>()
        })
        .sum()
}

/// Examples a tree is grown on, with per-example indicator, prior density
/// estimate and α weight (zero for unlabeled examples).
#[derive(Debug, Clone, Copy)]
pub struct TreePool<'a> {
    pub examples: &'a [LabeledTuple],
    pub unlabeled: &'a [bool],
    pub prior: &'a [f64],
    pub alpha: &'a [f64],
}

impl TreePool<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.examples.len();
        if self.unlabeled.len() != n || self.prior.len() != n || self.alpha.len() != n {
            return Err(Error::InvalidArgument("tree pool vectors differ in length".into()));
        }
        Ok(())
    }
}

/// Node objective for a split of `members` into `left` (mask) and right.
pub fn split_objective(pool: &TreePool<'_>, members: &[usize], goes_left: &[bool], scale: f64) -> f64 {
    let mass = |side: bool| -> f64 {
        members.iter().zip(goes_left).filter(|(_, &l)| l == side).map(|(&i, _)| pool.alpha[i]).sum()
    };
    let (mass_left, mass_right) = (mass(true), mass(false));
    members
        .iter()
        .zip(goes_left)
        .map(|(&i, &left)| {
            let target = if pool.unlabeled[i] { 1.0 } else { 0.0 };
            let other = if left { mass_right } else { mass_left };
            let r = target - pool.prior[i] - scale * other;
            r * r
        })
        .sum()
}

/// Splits must send at least half of the labeled α-mass left, so that the
/// left-most path describes the labeled class. The objective alone is
/// symmetric under swapping the branches.
pub fn is_admissible_split(pool: &TreePool<'_>, members: &[usize], goes_left: &[bool]) -> bool {
    let (mut left, mut right) = (0.0, 0.0);
    for (&i, &l) in members.iter().zip(goes_left) {
        if l {
            left += pool.alpha[i];
        } else {
            right += pool.alpha[i];
        }
    }
    left >= right
}

struct Grower<'a> {
    kb: &'a KnowledgeBase,
    pool: TreePool<'a>,
    target: PredId,
    beta: f64,
    lambda: f64,
    max_depth: usize,
}

impl Grower<'_> {
    fn grow(&self, context: &Clause, members: Vec<usize>, depth: usize) -> TreeNode {
        if depth >= self.max_depth || members.is_empty() {
            return TreeNode::Leaf { depth };
        }
        let scale = self.beta * (-self.lambda * depth as f64).exp();
        let no_split = vec![true; members.len()];
        let baseline = split_objective(&self.pool, &members, &no_split, scale);

        let candidates = refinements(context, self.kb, self.target);
        let scored: Vec<(f64, Vec<bool>)> = par::map(&candidates, |lit| {
            let compiled = CompiledClause::new(&context.with_literal(lit.clone()), self.kb);
            let mask: Vec<bool> =
                members.iter().map(|&i| compiled.covers(self.kb, &self.pool.examples[i].args)).collect();
            let obj = if is_admissible_split(&self.pool, &members, &mask) {
                split_objective(&self.pool, &members, &mask, scale)
            } else {
                f64::INFINITY
            };
            (obj, mask)
        });
        // First minimum in candidate order.
        let best = scored.iter().enumerate().filter(|(_, (obj, _))| obj.is_finite()).fold(
            None::<(usize, f64)>,
            |acc, (i, (obj, _))| match acc {
                Some((_, b)) if b <= *obj => acc,
                _ => Some((i, *obj)),
            },
        );
        let Some((bi, objective)) = best else {
            return TreeNode::Leaf { depth };
        };
        if objective >= baseline - IMPROVEMENT_EPS {
            return TreeNode::Leaf { depth };
        }
        let mask = &scored[bi].1;
        let (left, right): (Vec<usize>, Vec<usize>) = {
            let mut l = Vec::new();
            let mut r = Vec::new();
            for (&i, &m) in members.iter().zip(mask) {
                if m {
                    l.push(i);
                } else {
                    r.push(i);
                }
            }
            (l, r)
        };
        let test = candidates[bi].clone();
        let query = context.with_literal(test.clone());
        let left_node = self.grow(&query, left, depth + 1);
        let right_node = self.grow(context, right, depth + 1);
        let mut node = TreeNode::split(self.kb, depth, context, test, left_node, right_node);
        if let TreeNode::Split { objective: o, .. } = &mut node {
            *o = objective;
        }
        node
    }
}

/// Greedy top-down growth of one relational tree.
pub fn learn_tree(
    kb: &KnowledgeBase,
    pool: TreePool<'_>,
    beta: f64,
    lambda: f64,
    max_depth: usize,
) -> Result<RelationalTree> {
    pool.validate()?;
    let target = kb.target()?;
    let schema = kb.schema(target);
    let root = Clause::empty(&schema.name, schema.arity(), ClauseSource::Relocc);
    let grower = Grower { kb, pool, target, beta, lambda, max_depth };
    let members: Vec<usize> = (0..pool.examples.len()).collect();
    RelationalTree::new(grower.grow(&root, members, 0), lambda)
}

/// Learns up to `n_trees` trees; positives covered by a tree's left
/// branch are removed from the next tree's pool. Returns the model (with
/// uniform tree and example weights) and the non-empty left branches.
pub fn learn_distance_model(
    kb: &KnowledgeBase,
    pos: &[LabeledTuple],
    neg: &[LabeledTuple],
    cfg: &RelOccConfig,
) -> Result<(DistanceModel, Vec<Clause>)> {
    if cfg.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be ≥ 1".into()));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {}", cfg.lambda)));
    }
    kb.target()?;
    let alpha_each = if pos.is_empty() { 0.0 } else { 1.0 / pos.len() as f64 };
    let mut model =
        DistanceModel { trees: Vec::new(), alphas: vec![alpha_each; pos.len()], training_examples: pos.to_vec() };
    let mut remaining: Vec<LabeledTuple> = pos.to_vec();
    let mut clauses: Vec<Clause> = Vec::new();

    while model.trees.len() < cfg.n_trees && !remaining.is_empty() {
        let n_after = model.trees.len() + 1;
        let beta = 1.0 / n_after as f64;
        let examples: Vec<LabeledTuple> = remaining.iter().chain(neg).cloned().collect();
        let unlabeled: Vec<bool> = (0..examples.len()).map(|i| i >= remaining.len()).collect();
        let alpha: Vec<f64> = unlabeled.iter().map(|&u| if u { 0.0 } else { alpha_each }).collect();

        // Density under the earlier trees, reweighted to the new uniform beta.
        let prior: Vec<f64> = if model.trees.is_empty() {
            vec![0.0; examples.len()]
        } else {
            let routes = model.training_routes(kb);
            let mut reweighted = model.clone();
            for (_, b) in &mut reweighted.trees {
                *b = beta;
            }
            par::map(&examples, |z| density_with_routes(&reweighted, &routes, z, kb))
        };

        let pool = TreePool { examples: &examples, unlabeled: &unlabeled, prior: &prior, alpha: &alpha };
        let tree = learn_tree(kb, pool, beta, cfg.lambda, cfg.max_depth)?;
        let branch = tree.left_branch();
        model.trees.push((tree, beta));
        for (_, b) in &mut model.trees {
            *b = beta;
        }

        if branch.body.is_empty() {
            log::warn!("relOCC tree {} is a single leaf; no feature extracted", model.trees.len() - 1);
            break;
        }
        let compiled = CompiledClause::new(&branch, kb);
        let before = remaining.len();
        remaining.retain(|t| !compiled.covers(kb, &t.args));
        let text = branch.to_text();
        if !clauses.iter().any(|c| c.to_text() == text) {
            clauses.push(branch);
        }
        if remaining.len() == before {
            // The next tree would see the same pool.
            break;
        }
    }
    Ok((model, clauses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::Term;
    use crate::kb::{generate_negatives, parse_facts, positive_tuples};

    fn planted() -> (KnowledgeBase, Vec<LabeledTuple>, Vec<LabeledTuple>) {
        let mut text = String::from(
            "@schema Interacts(drug,drug)\n@schema Substr(drug,tr)\n@schema Inhib(drug,tr)\n\
             @schema Enz(drug,enz)\n@target Interacts\n",
        );
        let substr = [(0, 0), (1, 0), (2, 1), (3, 2), (4, 1)];
        let inhib = [(5, 0), (6, 1), (7, 2), (2, 0), (8, 3)];
        for (d, t) in substr {
            text += &format!("Substr(d{d},t{t}).\n");
        }
        for (d, t) in inhib {
            text += &format!("Inhib(d{d},t{t}).\n");
        }
        for d in 0..10 {
            text += &format!("Enz(d{d},e{}).\n", d % 3);
        }
        for (x, tx) in substr {
            for (y, ty) in inhib {
                if tx == ty && x != y {
                    text += &format!("Interacts(d{x},d{y}).\n");
                }
            }
        }
        let kb = parse_facts(&text).unwrap();
        let pos = positive_tuples(&kb).unwrap();
        let neg = generate_negatives(&kb, 2.0, 3).unwrap().tuples;
        (kb, pos, neg)
    }

    fn leaf(depth: usize) -> TreeNode {
        TreeNode::Leaf { depth }
    }

    #[test]
    fn path_distances() {
        let tree = RelationalTree::new(leaf(0), 0.7).unwrap();
        assert_eq!(tree.path_distance(&[true, false], &[true, false]), 0.0);
        assert_eq!(tree.path_distance(&[true, true, false], &[true, true, true]), (-1.4f64).exp());
        assert_eq!(tree.path_distance(&[true], &[false]), 1.0);
        assert!(RelationalTree::new(leaf(0), 0.0).is_err());
    }

    #[test]
    fn single_tree_model_equals_tree_distance() {
        let (kb, pos, neg) = planted();
        let (model, _) =
            learn_distance_model(&kb, &pos, &neg, &RelOccConfig { n_trees: 1, ..Default::default() }).unwrap();
        assert_eq!(model.trees.len(), 1);
        assert_eq!(model.trees[0].1, 1.0);
        for a in pos.iter().chain(&neg).take(6) {
            for b in neg.iter().take(6) {
                let d = tree_distance(&model.trees[0].0, a, b, &kb);
                assert_eq!(combined_distance(&model, a, b, &kb).unwrap(), d);
            }
        }
    }

    #[test]
    fn two_tree_convexity() {
        let (kb, pos, neg) = planted();
        // tree A: splits on Substr(D0,V) at the root; tree B: a single leaf.
        let ctx = Clause::empty("Interacts", 2, ClauseSource::Relocc);
        let test = Literal::new("Substr", vec![Term::Var(0), Term::Var(2)]);
        let a = RelationalTree::new(TreeNode::split(&kb, 0, &ctx, test, leaf(1), leaf(1)), 1.0).unwrap();
        let b = RelationalTree::new(leaf(0), 1.0).unwrap();
        let model = DistanceModel {
            trees: vec![(a, 0.5), (b, 0.5)],
            alphas: vec![1.0],
            training_examples: vec![pos[0].clone()],
        };
        // pos[0] has a substrate; find a negative whose first drug has none
        let x = neg.iter().find(|t| kb.facts_with(kb.predicate("Substr").unwrap(), 0, t.args[0]).is_empty()).unwrap();
        assert_eq!(tree_distance(&model.trees[0].0, &pos[0], x, &kb), 1.0);
        assert_eq!(tree_distance(&model.trees[1].0, &pos[0], x, &kb), 0.0);
        assert_eq!(combined_distance(&model, &pos[0], x, &kb).unwrap(), 0.5);
        assert_eq!(density_estimate(&model, x, &kb).unwrap(), 0.5);
        assert_eq!(density_estimate(&model, &pos[0], &kb).unwrap(), 0.0);

        let empty = DistanceModel { trees: vec![], alphas: vec![], training_examples: vec![] };
        assert!(combined_distance(&empty, x, x, &kb).is_err());
    }

    #[test]
    fn depth_zero_and_uninformative() {
        let (kb, pos, neg) = planted();
        let examples: Vec<LabeledTuple> = pos.iter().chain(&neg).cloned().collect();
        let unl: Vec<bool> = (0..examples.len()).map(|i| i >= pos.len()).collect();
        let prior = vec![0.0; examples.len()];
        let alpha: Vec<f64> = unl.iter().map(|&u| if u { 0.0 } else { 1.0 / pos.len() as f64 }).collect();
        let pool = TreePool { examples: &examples, unlabeled: &unl, prior: &prior, alpha: &alpha };
        let t = learn_tree(&kb, pool, 1.0, 1.0, 0).unwrap();
        assert!(t.root.is_leaf());

        // the same tuple repeated: every test sends all copies the same way
        let same = vec![pos[0].clone(); 4];
        let unl = vec![false, true, false, true];
        let prior = vec![0.0; 4];
        let alpha = vec![0.5, 0.0, 0.5, 0.0];
        let pool = TreePool { examples: &same, unlabeled: &unl, prior: &prior, alpha: &alpha };
        assert!(learn_tree(&kb, pool, 1.0, 1.0, 3).unwrap().root.is_leaf());
    }

    #[test]
    fn planted_rule_is_extracted() {
        let (kb, pos, neg) = planted();
        let cfg = RelOccConfig { n_trees: 3, lambda: 1.0, max_depth: 3 };
        let (model, clauses) = learn_distance_model(&kb, &pos, &neg, &cfg).unwrap();
        assert!(!clauses.is_empty() && clauses.len() <= 3);
        let beta = 1.0 / model.trees.len() as f64;
        assert!(model.trees.iter().all(|(_, b)| *b == beta));
        let c = CompiledClause::new(&clauses[0], &kb);
        assert!(pos.iter().all(|t| c.covers(&kb, &t.args)), "{}", clauses[0]);
        assert!(neg.iter().all(|t| !c.covers(&kb, &t.args)), "{}", clauses[0]);
        assert!(model.dump(&kb).contains("tree 0 beta="));
    }
}
