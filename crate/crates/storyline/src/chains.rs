//! Temporal event graphs and linear chain extraction.
//!
//! Node ids are event indices into the owning document, and event lists are
//! kept in document position order, so smaller node id means earlier text
//! position. Every deterministic tie-break below leans on that contract.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// A candidate BEFORE edge with the extractor's confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredEdge {
    pub src: usize,
    pub dst: usize,
    pub score: f64,
}

/// Directed acyclic BEFORE graph over a document's events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalGraph {
    nodes: Vec<usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl TemporalGraph {
    /// Edgeless graph. Node ids must be strictly increasing (text order).
    pub fn new(nodes: Vec<usize>) -> Result<Self> {
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Graph("node ids must be strictly increasing".into()));
        }
        Ok(TemporalGraph { nodes, edges: BTreeSet::new() })
    }

    /// Build a graph from trusted edges, revalidating every invariant:
    /// membership, no self-loops, antisymmetry, acyclicity.
    pub fn with_edges(nodes: Vec<usize>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut graph = TemporalGraph::new(nodes)?;
        let members: BTreeSet<usize> = graph.nodes.iter().copied().collect();
        for (src, dst) in edges {
            if src == dst {
                return Err(Error::SelfLoop(src));
            }
            if !members.contains(&src) || !members.contains(&dst) {
                return Err(Error::Graph(format!("edge ({src}, {dst}) references a non-node")));
            }
            if graph.edges.contains(&(dst, src)) {
                return Err(Error::Graph(format!(
                    "edges ({src}, {dst}) and ({dst}, {src}) are both present"
                )));
            }
            graph.edges.insert((src, dst));
        }
        graph.topological_order()?;
        Ok(graph)
    }

    /// Gold BEFORE graph of a document: all events as nodes, annotated
    /// relations as edges.
    pub fn from_gold(doc: &Document) -> Result<Self> {
        let relations = doc
            .gold()
            .and_then(|g| g.relations.as_ref())
            .ok_or_else(|| Error::MissingArtifact {
                mode: "gold graph".into(),
                artifact: "gold relations".into(),
            })?;
        TemporalGraph::with_edges((0..doc.events.len()).collect(), relations.clone())
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.contains(&(src, dst))
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((node, 0)..=(node, usize::MAX))
            .map(|(_, dst)| *dst)
    }

    fn reachable(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(u) = stack.pop() {
            if u == to {
                return true;
            }
            if seen.insert(u) {
                stack.extend(self.successors(u));
            }
        }
        false
    }

    /// Kahn's algorithm; among simultaneously available nodes, the earliest
    /// text position (smallest id) comes first.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let mut indegree: BTreeMap<usize, usize> =
            self.nodes.iter().map(|n| (*n, 0)).collect();
        for (_, dst) in &self.edges {
            *indegree.get_mut(dst).unwrap() += 1;
        }
        let mut heap: BinaryHeap<Reverse<usize>> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| Reverse(*n))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(u)) = heap.pop() {
            order.push(u);
            for v in self.successors(u) {
                let d = indegree.get_mut(&v).unwrap();
                *d -= 1;
                if *d == 0 {
                    heap.push(Reverse(v));
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(Error::CycleDetected);
        }
        Ok(order)
    }

    /// Restrict to `keep`, optionally adding a shortcut edge u -> w for every
    /// kept pair connected by a path whose interior lies entirely in removed
    /// nodes. DAG paths cannot create cycles or antisymmetry violations.
    pub fn contract(&self, keep: &BTreeSet<usize>, add_shortcuts: bool) -> TemporalGraph {
        let nodes: Vec<usize> = self.nodes.iter().copied().filter(|n| keep.contains(n)).collect();
        let mut edges = BTreeSet::new();
        for u in &nodes {
            if add_shortcuts {
                // BFS from u through removed nodes; kept nodes terminate paths.
                let mut queue: Vec<usize> = self.successors(*u).collect();
                let mut seen = BTreeSet::new();
                while let Some(x) = queue.pop() {
                    if !seen.insert(x) {
                        continue;
                    }
                    if keep.contains(&x) {
                        edges.insert((*u, x));
                    } else {
                        queue.extend(self.successors(x));
                    }
                }
            } else {
                for v in self.successors(*u) {
                    if keep.contains(&v) {
                        edges.insert((*u, v));
                    }
                }
            }
        }
        TemporalGraph { nodes, edges }
    }
}

/// Greedy consistency repair: highest score first (ties by (src, dst) text
/// order), rejecting any edge that would form a 2-cycle or directed cycle.
pub fn repair_consistency(nodes: Vec<usize>, candidates: &[ScoredEdge]) -> Result<TemporalGraph> {
    let mut graph = TemporalGraph::new(nodes)?;
    let members: BTreeSet<usize> = graph.nodes.iter().copied().collect();
    for e in candidates {
        if e.src == e.dst {
            return Err(Error::SelfLoop(e.src));
        }
        if !members.contains(&e.src) || !members.contains(&e.dst) {
            return Err(Error::Graph(format!(
                "candidate ({}, {}) references a non-node",
                e.src, e.dst
            )));
        }
        if !(e.score > 0.0 && e.score < 1.0) {
            return Err(Error::Graph(format!(
                "candidate ({}, {}) score {} outside (0, 1)",
                e.src, e.dst, e.score
            )));
        }
    }
    let mut order: Vec<&ScoredEdge> = candidates.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| (a.src, a.dst).cmp(&(b.src, b.dst)))
    });
    for e in order {
        if graph.edges.contains(&(e.dst, e.src)) {
            continue;
        }
        if graph.reachable(e.dst, e.src) {
            continue;
        }
        graph.edges.insert((e.src, e.dst));
    }
    Ok(graph)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainOrder {
    Temporal,
    Textual,
}

impl std::str::FromStr for ChainOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(ChainOrder::Temporal),
            "textual" => Ok(ChainOrder::Textual),
            other => Err(Error::InvalidConfig(format!(
                "chain order must be 'temporal' or 'textual', got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for ChainOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChainOrder::Temporal => "temporal",
            ChainOrder::Textual => "textual",
        })
    }
}

/// Whether extracted chains consume nodes or may share them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainPolicy {
    /// Nodes are visited once; chains partition the node set.
    #[default]
    Partition,
    /// Paths may pass through already-visited nodes; only sources are fresh.
    Overlapping,
}

/// Linear chain of event indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventChain {
    pub events: Vec<usize>,
    pub order: ChainOrder,
}

impl EventChain {
    /// Check the chain's structural invariants. Temporal steps are checked
    /// against the graph when given; textual order is checked against the
    /// document's mention positions when given.
    pub fn validate(&self, graph: Option<&TemporalGraph>, doc: Option<&Document>) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::EmptyInput("event chain".into()));
        }
        let unique: BTreeSet<usize> = self.events.iter().copied().collect();
        if unique.len() != self.events.len() {
            return Err(Error::Graph("chain repeats an event".into()));
        }
        match self.order {
            ChainOrder::Textual => {
                if let Some(d) = doc {
                    let pos = |i: usize| (d.events[i].sent, d.events[i].tok);
                    if self.events.windows(2).any(|w| pos(w[0]) >= pos(w[1])) {
                        return Err(Error::Graph("textual chain not in document order".into()));
                    }
                }
            }
            ChainOrder::Temporal => {
                if let Some(g) = graph {
                    for w in self.events.windows(2) {
                        if !g.has_edge(w[0], w[1]) {
                            return Err(Error::Graph(format!(
                                "temporal chain step ({}, {}) is not an edge",
                                w[0], w[1]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Longest-path table over `allowed` nodes: for each node, path length and
/// preferred next hop (earliest text position among maximal continuations).
fn longest_paths(
    graph: &TemporalGraph,
    topo: &[usize],
    allowed: &BTreeSet<usize>,
) -> BTreeMap<usize, (usize, Option<usize>)> {
    let mut table: BTreeMap<usize, (usize, Option<usize>)> = BTreeMap::new();
    for u in topo.iter().rev() {
        if !allowed.contains(u) {
            continue;
        }
        let mut best_len = 1;
        let mut best_next = None;
        for v in graph.successors(*u) {
            if let Some((len, _)) = table.get(&v) {
                let candidate = len + 1;
                // Strict > keeps the smallest qualifying successor id since
                // BTreeSet iteration yields successors in ascending order.
                if candidate > best_len {
                    best_len = candidate;
                    best_next = Some(v);
                }
            }
        }
        table.insert(*u, (best_len, best_next));
    }
    table
}

/// Decompose a graph into linear chains: repeatedly take the unvisited
/// source earliest in topological order and walk the longest path from it.
pub fn extract_chains(graph: &TemporalGraph, policy: ChainPolicy) -> Result<Vec<EventChain>> {
    let topo = graph.topological_order()?;
    let mut visited: BTreeSet<usize> = BTreeSet::new();
    let mut chains = Vec::new();
    let all: BTreeSet<usize> = graph.nodes().iter().copied().collect();
    while visited.len() < graph.nodes().len() {
        // Sources: unvisited nodes with no incoming edge from unvisited nodes.
        let mut blocked: BTreeSet<usize> = BTreeSet::new();
        for (src, dst) in graph.edges() {
            if !visited.contains(&src) {
                blocked.insert(dst);
            }
        }
        let source = *topo
            .iter()
            .find(|n| !visited.contains(n) && !blocked.contains(n))
            .expect("a DAG always has an unvisited source");
        let allowed = match policy {
            ChainPolicy::Partition => all.difference(&visited).copied().collect(),
            ChainPolicy::Overlapping => all.clone(),
        };
        let table = longest_paths(graph, &topo, &allowed);
        let mut path = vec![source];
        let mut cursor = source;
        while let Some((_, Some(next))) = table.get(&cursor) {
            path.push(*next);
            cursor = *next;
        }
        visited.extend(path.iter().copied());
        chains.push(EventChain { events: path, order: ChainOrder::Temporal });
    }
    Ok(chains)
}

/// All events in document position order; empty vec when the document has
/// no events.
pub fn textual_chains(doc: &Document) -> Vec<EventChain> {
    if doc.events.is_empty() {
        return Vec::new();
    }
    let mut indices: Vec<usize> = (0..doc.events.len()).collect();
    indices.sort_by_key(|i| (doc.events[*i].sent, doc.events[*i].tok));
    vec![EventChain { events: indices, order: ChainOrder::Textual }]
}
