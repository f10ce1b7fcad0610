//! Line-delimited interchange records for graphs, chains, salience scores,
//! and discourse labels, plus generic JSONL helpers.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::chains::{extract_chains, ChainOrder, ChainPolicy, EventChain, TemporalGraph};
use crate::corpus::{DiscourseLabel, Document, Mention};
use crate::error::{Error, Result};
use crate::extract::DecodedGraph;
use crate::ioutil;

/// One event in an interchange record: its head-token position and lemma.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRef {
    pub sent: usize,
    pub tok: usize,
    pub lemma: String,
}

/// A document's temporal graph: events in node order, edges as index pairs
/// into that list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub doc_id: String,
    pub events: Vec<EventRef>,
    pub edges: Vec<(usize, usize)>,
}

impl GraphRecord {
    /// Snapshot a graph over a document's events; nodes index `doc.events`.
    pub fn from_graph(doc: &Document, graph: &TemporalGraph) -> Self {
        let node_pos = |n: usize| {
            graph.nodes().iter().position(|x| *x == n).expect("edge endpoints are nodes")
        };
        GraphRecord {
            doc_id: doc.doc_id.clone(),
            events: graph
                .nodes()
                .iter()
                .map(|n| event_ref(doc, &doc.events[*n]))
                .collect(),
            edges: graph.edges().map(|(s, d)| (node_pos(s), node_pos(d))).collect(),
        }
    }

    /// Snapshot a decoded graph; nodes index the decoded event list.
    pub fn from_decoded(doc: &Document, decoded: &DecodedGraph) -> Self {
        GraphRecord {
            doc_id: doc.doc_id.clone(),
            events: decoded.events.iter().map(|m| event_ref(doc, m)).collect(),
            edges: decoded.graph.edges().collect(),
        }
    }

    /// Rebuild the graph with nodes renumbered 0..events.len().
    pub fn to_graph(&self) -> Result<TemporalGraph> {
        TemporalGraph::with_edges((0..self.events.len()).collect(), self.edges.clone())
    }
}

fn event_ref(doc: &Document, m: &Mention) -> EventRef {
    EventRef { sent: m.sent, tok: m.tok, lemma: doc.mention_lemma(m) }
}

/// A document's chains, each event carrying its lemma and position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub doc_id: String,
    pub order: ChainOrder,
    pub chains: Vec<Vec<EventRef>>,
}

impl ChainRecord {
    /// Chains over a graph record's events.
    pub fn from_chains(record: &GraphRecord, order: ChainOrder, chains: &[EventChain]) -> Self {
        ChainRecord {
            doc_id: record.doc_id.clone(),
            order,
            chains: chains
                .iter()
                .map(|c| c.events.iter().map(|i| record.events[*i].clone()).collect())
                .collect(),
        }
    }

    /// Lemma sequences of every chain.
    pub fn lemma_chains(&self) -> Vec<Vec<String>> {
        self.chains
            .iter()
            .map(|c| c.iter().map(|e| e.lemma.clone()).collect())
            .collect()
    }
}

/// Chains over a graph record alone: textual order sorts events by head
/// position, temporal order decomposes the recorded graph.
pub fn record_chains(
    record: &GraphRecord,
    order: ChainOrder,
    policy: ChainPolicy,
) -> Result<ChainRecord> {
    let chains = match order {
        ChainOrder::Textual => {
            if record.events.is_empty() {
                Vec::new()
            } else {
                let mut events: Vec<usize> = (0..record.events.len()).collect();
                events.sort_by_key(|i| (record.events[*i].sent, record.events[*i].tok));
                vec![EventChain { events, order: ChainOrder::Textual }]
            }
        }
        ChainOrder::Temporal => extract_chains(&record.to_graph()?, policy)?,
    };
    Ok(ChainRecord::from_chains(record, order, &chains))
}

/// Per-event salience scores in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub doc_id: String,
    pub scores: Vec<f64>,
}

/// Per-sentence discourse labels in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub doc_id: String,
    pub labels: Vec<DiscourseLabel>,
}

/// Load a JSONL file, one record per non-empty line.
pub fn load_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = ioutil::read_file(path)?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Serialize records to JSONL atomically, one per line.
pub fn save_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    ioutil::write_atomic(path, out.as_bytes())
}

/// Index records by doc_id, requiring exactly one record per document.
pub fn align_by_doc<'a, T>(
    records: &'a [T],
    docs: &[Document],
    doc_id: impl Fn(&T) -> &str,
    what: &str,
) -> Result<Vec<&'a T>> {
    docs.iter()
        .map(|doc| {
            records.iter().find(|r| doc_id(r) == doc.doc_id).ok_or_else(|| {
                Error::MissingArtifact {
                    mode: what.to_string(),
                    artifact: format!("record for {}", doc.doc_id),
                }
            })
        })
        .collect()
}
