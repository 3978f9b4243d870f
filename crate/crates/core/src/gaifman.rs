//! The Gaifman (primal) graph of a knowledge base and the neighborhood
//! queries built on it.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kb::{EntityId, KnowledgeBase};

/// Undirected co-occurrence graph over all entities of a knowledge base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaifmanGraph {
    adjacency: Vec<Vec<EntityId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphOptions {
    /// Leave target-predicate facts out so the predicted link cannot leak
    /// into the neighborhoods.
    pub exclude_target: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self { exclude_target: true }
    }
}

pub fn build_gaifman_graph(kb: &KnowledgeBase, options: GraphOptions) -> GaifmanGraph {
    let skip = if options.exclude_target { kb.target().ok() } else { None };
    let mut adjacency: Vec<BTreeSet<EntityId>> = vec![BTreeSet::new(); kb.num_entities()];
    for fact in kb.facts() {
        if Some(fact.predicate) == skip {
            continue;
        }
        for (i, &a) in fact.args.iter().enumerate() {
            for &b in &fact.args[i + 1..] {
                if a != b {
                    adjacency[a.index()].insert(b);
                    adjacency[b.index()].insert(a);
                }
            }
        }
    }
    GaifmanGraph { adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect() }
}

impl GaifmanGraph {
    /// Builds a graph directly from an edge list over `n` nodes.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut adjacency: Vec<BTreeSet<EntityId>> = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a != b {
                adjacency[a as usize].insert(EntityId(b));
                adjacency[b as usize].insert(EntityId(a));
            }
        }
        Self { adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn contains(&self, a: EntityId) -> bool {
        a.index() < self.adjacency.len()
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, a: EntityId) -> &[EntityId] {
        self.adjacency.get(a.index()).map_or(&[], Vec::as_slice)
    }

    pub fn degree(&self, a: EntityId) -> usize {
        self.neighbors(a).len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `histogram[d]` = number of nodes with degree `d`.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.max_degree() + 1];
        if self.adjacency.is_empty() {
            return Vec::new();
        }
        for adj in &self.adjacency {
            hist[adj.len()] += 1;
        }
        hist
    }

    pub fn edges(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, adj)| {
            let a = EntityId(a as u32);
            adj.iter().filter(move |&&b| a < b).map(move |&b| (a, b))
        })
    }

    fn check(&self, a: EntityId) -> Result<()> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(Error::UnknownEntity(format!("#{}", a.0)))
        }
    }

    /// Shortest hop count from `a` to `b`; `None` when unreachable.
    pub fn hop_distance(&self, a: EntityId, b: EntityId) -> Result<Option<usize>> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Ok(Some(0));
        }
        let mut dist = vec![usize::MAX; self.num_nodes()];
        let mut queue = VecDeque::from([a]);
        dist[a.index()] = 0;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if dist[v.index()] == usize::MAX {
                    dist[v.index()] = dist[u.index()] + 1;
                    if v == b {
                        return Ok(Some(dist[v.index()]));
                    }
                    queue.push_back(v);
                }
            }
        }
        Ok(None)
    }

    /// All nodes other than `a` within `r` hops of `a`.
    pub fn r_neighborhood(&self, a: EntityId, r: usize) -> Result<BTreeSet<EntityId>> {
        self.check(a)?;
        if r == 0 {
            return Err(Error::InvalidArgument("neighborhood depth r must be ≥ 1".into()));
        }
        Ok(self.ball(a, r))
    }

    fn ball(&self, a: EntityId, r: usize) -> BTreeSet<EntityId> {
        let mut seen = BTreeSet::from([a]);
        let mut frontier = vec![a];
        for _ in 0..r {
            let mut next = Vec::new();
            for u in frontier {
                for &v in self.neighbors(u) {
                    if seen.insert(v) {
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        seen.remove(&a);
        seen
    }

    /// Edge list as `a<TAB>b` lines sorted by symbol.
    pub fn edge_list_text(&self, kb: &KnowledgeBase) -> String {
        let mut lines: Vec<(&str, &str)> = self
            .edges()
            .map(|(a, b)| {
                let (sa, sb) = (kb.symbol(a), kb.symbol(b));
                if sa <= sb {
                    (sa, sb)
                } else {
                    (sb, sa)
                }
            })
            .collect();
        lines.sort();
        let mut out = String::new();
        for (a, b) in lines {
            let _ = writeln!(out, "{a}\t{b}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodSample {
    pub tuple: Vec<EntityId>,
    pub members: BTreeSet<EntityId>,
    pub r: usize,
    pub k: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborhoodParams {
    /// Depth.
    pub r: usize,
    /// Per-entity sample cap.
    pub k: usize,
    /// Number of neighborhoods per tuple.
    pub w: usize,
}

impl NeighborhoodParams {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.k == 0 || self.w == 0 {
            return Err(Error::InvalidArgument(format!(
                "neighborhood parameters must be ≥ 1 (r={}, k={}, w={})",
                self.r, self.k, self.w
            )));
        }
        Ok(())
    }
}

impl Default for NeighborhoodParams {
    fn default() -> Self {
        Self { r: 1, k: 10, w: 5 }
    }
}

/// Draws `w` neighborhoods for a query tuple. For every tuple entity the
/// r-neighborhood is subsampled to at most `k` members; the draws are
/// unioned. Draw `i` is seeded with `seed ^ i`.
pub fn generate_neighborhoods(
    g: &GaifmanGraph,
    tuple: &[EntityId],
    params: NeighborhoodParams,
    seed: u64,
) -> Result<Vec<NeighborhoodSample>> {
    params.validate()?;
    let balls: Vec<Vec<EntityId>> = tuple
        .iter()
        .map(|&e| {
            if g.contains(e) {
                g.ball(e, params.r).into_iter().collect()
            } else {
                log::warn!("entity #{} is not in the graph; empty neighborhood", e.0);
                Vec::new()
            }
        })
        .collect();
    let samples = (0..params.w)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let mut members = BTreeSet::new();
            for ball in &balls {
                if ball.len() > params.k {
                    members.extend(index::sample(&mut rng, ball.len(), params.k).into_iter().map(|j| ball[j]));
                } else {
                    members.extend(ball.iter().copied());
                }
            }
            NeighborhoodSample { tuple: tuple.to_vec(), members, r: params.r, k: params.k, index: i }
        })
        .collect();
    Ok(samples)
}
