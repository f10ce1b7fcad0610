//! Shared helpers for integration tests: random DAGs, random candidate edge
//! sets, and a brute-force chain-extraction oracle that mirrors the stated
//! tie-breaks by exhaustive enumeration.

use std::collections::BTreeSet;

use storyline::chains::{ChainPolicy, ScoredEdge, TemporalGraph};
use storyline::rng::SeededRng;

/// Random DAG: a hidden node permutation orients every sampled edge, so
/// edges may point from higher ids to lower ids while staying acyclic.
pub fn random_dag(rng: &mut SeededRng, max_nodes: usize, edge_prob: f64) -> TemporalGraph {
    let n = rng.range_inclusive(1, max_nodes);
    // Node ids: sorted distinct draws from a wider range than n.
    let mut ids = BTreeSet::new();
    while ids.len() < n {
        ids.insert(rng.below(2 * max_nodes));
    }
    let nodes: Vec<usize> = ids.into_iter().collect();
    let mut order = nodes.clone();
    rng.shuffle(&mut order);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.bernoulli(edge_prob) {
                edges.push((order[i], order[j]));
            }
        }
    }
    TemporalGraph::with_edges(nodes, edges).expect("construction preserves acyclicity")
}

/// Random candidate edge set over up to `max_nodes` nodes, scores in (0, 1),
/// duplicates and both directions allowed.
pub fn random_candidates(rng: &mut SeededRng, max_nodes: usize) -> (Vec<usize>, Vec<ScoredEdge>) {
    let n = rng.range_inclusive(2, max_nodes);
    let nodes: Vec<usize> = (0..n).collect();
    let m = rng.below(3 * n) + 1;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let src = rng.below(n);
        let mut dst = rng.below(n);
        if dst == src {
            dst = (dst + 1) % n;
        }
        // Coarse scores make ties common enough to exercise the tie-break.
        let score = (rng.below(9) as f64 + 1.0) / 10.0;
        edges.push(ScoredEdge { src, dst, score });
    }
    (nodes, edges)
}

/// Longest, lexicographically smallest simple path from `source` through
/// `allowed` nodes, by exhaustive depth-first enumeration.
fn best_path_exhaustive(
    graph: &TemporalGraph,
    source: usize,
    allowed: &BTreeSet<usize>,
) -> Vec<usize> {
    fn dfs(
        graph: &TemporalGraph,
        allowed: &BTreeSet<usize>,
        path: &mut Vec<usize>,
        best: &mut Vec<usize>,
    ) {
        let better = path.len() > best.len()
            || (path.len() == best.len() && path.as_slice() < best.as_slice());
        if better {
            *best = path.clone();
        }
        let cur = *path.last().unwrap();
        let next: Vec<usize> = graph
            .successors(cur)
            .filter(|v| allowed.contains(v) && !path.contains(v))
            .collect();
        for v in next {
            path.push(v);
            dfs(graph, allowed, path, best);
            path.pop();
        }
    }
    let mut path = vec![source];
    let mut best = vec![source];
    dfs(graph, allowed, &mut path, &mut best);
    best
}

/// Reference implementation of chain extraction: identical source selection,
/// exhaustive path search instead of dynamic programming.
pub fn oracle_chains(graph: &TemporalGraph, policy: ChainPolicy) -> Vec<Vec<usize>> {
    let topo = graph.topological_order().expect("oracle requires a DAG");
    let all: BTreeSet<usize> = graph.nodes().iter().copied().collect();
    let mut visited: BTreeSet<usize> = BTreeSet::new();
    let mut chains = Vec::new();
    while visited.len() < graph.nodes().len() {
        let mut blocked: BTreeSet<usize> = BTreeSet::new();
        for (src, dst) in graph.edges() {
            if !visited.contains(&src) {
                blocked.insert(dst);
            }
        }
        let source = *topo
            .iter()
            .find(|u| !visited.contains(u) && !blocked.contains(u))
            .expect("DAG must have a source");
        let allowed = match policy {
            ChainPolicy::Partition => all.difference(&visited).copied().collect(),
            ChainPolicy::Overlapping => all.clone(),
        };
        let path = best_path_exhaustive(graph, source, &allowed);
        visited.extend(path.iter().copied());
        chains.push(path);
    }
    chains
}
