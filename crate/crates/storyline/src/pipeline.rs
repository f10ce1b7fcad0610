//! End-to-end orchestration: salience scoring, discourse labeling, event
//! filtering under five modes, chain extraction in two orders, and the
//! language-model and QA evaluations over every requested cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chains::{
    extract_chains, ChainOrder, ChainPolicy, EventChain, TemporalGraph,
};
use crate::corpus::{load_documents, DiscourseLabel, Document};
use crate::discourse::{train_discourse, DiscourseConfig, DiscourseModel};
use crate::error::{Error, Result};
use crate::event_lm::{
    chain_lemmas, classifier_accuracy, cloze_accuracy, make_windows, train_ending_classifier,
    train_mlm, ClozeStory, EventLmConfig,
};
use crate::extract::{train_extractor, ExtractorConfig};
use crate::formats::{load_jsonl, save_jsonl, GraphRecord, LabelRecord, ScoreRecord};
use crate::ioutil;
use crate::qa::{
    metrics as qa_metrics, train_qa, PrefixTable, QaConfig, QaExample, QaMetrics,
    TemporalQuestion,
};
use crate::rng::SeededRng;
use crate::salience::{filter_salient, train_salience, KernelBank, SalienceConfig};

const SALIENCE_SALT: u64 = 0x50_49_50_01;
const DISCOURSE_SALT: u64 = 0x50_49_50_02;
const EXTRACTOR_SALT: u64 = 0x50_49_50_03;

/// The five event-filtering regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    All,
    Salient,
    Discourse,
    SalienceAwareDiscourse,
    SalientPlusDiscourse,
}

impl FilterMode {
    pub const ALL_MODES: [FilterMode; 5] = [
        FilterMode::All,
        FilterMode::Salient,
        FilterMode::Discourse,
        FilterMode::SalienceAwareDiscourse,
        FilterMode::SalientPlusDiscourse,
    ];
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterMode::All => "all",
            FilterMode::Salient => "salient",
            FilterMode::Discourse => "discourse",
            FilterMode::SalienceAwareDiscourse => "salience_aware_discourse",
            FilterMode::SalientPlusDiscourse => "salient_plus_discourse",
        })
    }
}

/// Where temporal graphs come from: gold annotations or the trained
/// relation extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSource {
    #[default]
    Gold,
    Extractor,
}

fn default_true() -> bool {
    true
}
fn default_classifier_epochs() -> usize {
    300
}
fn default_classifier_learning_rate() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Master seed for the shared upstream stages (salience, discourse,
    /// extractor); their per-model seed fields are overridden from this.
    pub seed: u64,
    pub train_docs: PathBuf,
    pub eval_docs: PathBuf,
    pub stories: PathBuf,
    /// Labeled stories for the supervised ending classifier; without them
    /// the supervised column is omitted.
    #[serde(default)]
    pub dev_stories: Option<PathBuf>,
    pub modes: Vec<FilterMode>,
    pub orders: Vec<ChainOrder>,
    /// Training seeds for the per-cell models; cell metrics average these.
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub graph_source: GraphSource,
    #[serde(default)]
    pub chain_policy: ChainPolicy,
    /// Bridge removed nodes with transitive edges when contracting graphs.
    #[serde(default = "default_true")]
    pub filter_shortcuts: bool,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub salience: SalienceConfig,
    #[serde(default)]
    pub discourse: DiscourseConfig,
    #[serde(default)]
    pub extractor: ExtractorConfig,
    #[serde(default)]
    pub lm: EventLmConfig,
    #[serde(default)]
    pub qa: QaConfig,
    #[serde(default = "default_classifier_epochs")]
    pub classifier_epochs: usize,
    #[serde(default = "default_classifier_learning_rate")]
    pub classifier_learning_rate: f64,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: PipelineConfig = ioutil::read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidConfig("pipeline needs at least one filter mode".into()));
        }
        if self.orders.is_empty() {
            return Err(Error::InvalidConfig("pipeline needs at least one chain order".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("pipeline needs at least one seed".into()));
        }
        if self.classifier_learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("classifier learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Metrics for one training seed within a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub cloze_accuracy: f64,
    pub supervised_accuracy: Option<f64>,
    pub qa: QaMetrics,
}

/// One (filter mode, chain order) cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub mode: FilterMode,
    pub order: ChainOrder,
    pub per_seed: Vec<SeedReport>,
    pub mean_cloze_accuracy: f64,
    pub mean_supervised_accuracy: Option<f64>,
    pub mean_qa_macro_f1: f64,
    pub mean_qa_exact_match: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellReport>,
}

impl MetricsReport {
    pub fn cell(&self, mode: FilterMode, order: ChainOrder) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.mode == mode && c.order == order)
    }

    /// Rows are filter modes, column groups are chain orders.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let orders: Vec<ChainOrder> = {
            let mut seen = Vec::new();
            for c in &self.cells {
                if !seen.contains(&c.order) {
                    seen.push(c.order);
                }
            }
            seen
        };
        let modes: Vec<FilterMode> = {
            let mut seen = Vec::new();
            for c in &self.cells {
                if !seen.contains(&c.mode) {
                    seen.push(c.mode);
                }
            }
            seen
        };
        out.push_str(&format!("{:<26}", "filter mode"));
        for order in &orders {
            out.push_str(&format!(
                " | {o:>8} cloze | {o:>8} sup | {o:>8} qaF1 | {o:>8} qaEM",
                o = order
            ));
        }
        out.push('\n');
        for mode in &modes {
            out.push_str(&format!("{mode:<26}"));
            for order in &orders {
                match self.cell(*mode, *order) {
                    Some(cell) => {
                        let sup = cell
                            .mean_supervised_accuracy
                            .map_or_else(|| format!("{:>14}", "-"), |v| format!("{v:>14.4}"));
                        out.push_str(&format!(
                            " | {:>14.4} | {sup} | {:>13.4} | {:>13.4}",
                            cell.mean_cloze_accuracy,
                            cell.mean_qa_macro_f1,
                            cell.mean_qa_exact_match,
                        ));
                    }
                    None => out.push_str(&format!(
                        " | {:>14} | {:>14} | {:>13} | {:>13}",
                        "-", "-", "-", "-"
                    )),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn stage_err(stage: &str, doc_id: &str, e: Error) -> Error {
    Error::Stage { stage: stage.into(), doc_id: doc_id.into(), source: Box::new(e) }
}

fn stage<T>(name: &str, doc_id: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| stage_err(name, doc_id, e))
}

/// Event indices surviving a filter mode, in document order. Each mode
/// consumes only the artifacts it needs and fails when they are missing.
pub fn filter_events(
    doc: &Document,
    mode: FilterMode,
    scores: Option<&[f64]>,
    base_labels: Option<&[DiscourseLabel]>,
    aware_labels: Option<&[DiscourseLabel]>,
) -> Result<Vec<usize>> {
    fn need<'a, T: ?Sized>(
        value: Option<&'a T>,
        len: impl Fn(&T) -> usize,
        expected: usize,
        mode: FilterMode,
        what: String,
    ) -> Result<&'a T> {
        let v = value.ok_or_else(|| Error::MissingArtifact {
            mode: mode.to_string(),
            artifact: what.clone(),
        })?;
        if len(v) != expected {
            return Err(Error::DimensionMismatch { context: what, expected, got: len(v) });
        }
        Ok(v)
    }
    let need_scores = || {
        need(
            scores,
            <[f64]>::len,
            doc.events.len(),
            mode,
            format!("salience scores for {}", doc.doc_id),
        )
    };
    let need_labels = |labels, which: &str| {
        need(
            labels,
            <[DiscourseLabel]>::len,
            doc.sentences.len(),
            mode,
            format!("{which} labels for {}", doc.doc_id),
        )
    };
    let events_in_kept_sentences = |labels: &[DiscourseLabel]| -> Vec<usize> {
        (0..doc.events.len()).filter(|i| labels[doc.events[*i].sent].is_kept()).collect()
    };
    match mode {
        FilterMode::All => Ok((0..doc.events.len()).collect()),
        FilterMode::Salient => Ok(filter_salient(need_scores()?, 0.5)),
        FilterMode::Discourse => {
            Ok(events_in_kept_sentences(need_labels(base_labels, "base discourse")?))
        }
        FilterMode::SalienceAwareDiscourse => {
            Ok(events_in_kept_sentences(need_labels(aware_labels, "salience-aware discourse")?))
        }
        FilterMode::SalientPlusDiscourse => {
            let salient: BTreeSet<usize> =
                filter_salient(need_scores()?, 0.5).into_iter().collect();
            let kept =
                events_in_kept_sentences(need_labels(aware_labels, "salience-aware discourse")?);
            Ok(kept.into_iter().filter(|i| salient.contains(i)).collect())
        }
    }
}

/// Chains over the surviving events: the single text-order chain, or the
/// decomposition of the contracted temporal graph.
pub fn document_chains(
    doc: &Document,
    kept: &[usize],
    order: ChainOrder,
    graph: &TemporalGraph,
    policy: ChainPolicy,
    shortcuts: bool,
) -> Result<Vec<EventChain>> {
    match order {
        ChainOrder::Textual => {
            if kept.is_empty() {
                return Ok(Vec::new());
            }
            let mut events = kept.to_vec();
            events.sort_by_key(|i| (doc.events[*i].sent, doc.events[*i].tok));
            Ok(vec![EventChain { events, order: ChainOrder::Textual }])
        }
        ChainOrder::Temporal => {
            let keep: BTreeSet<usize> = kept.iter().copied().collect();
            extract_chains(&graph.contract(&keep, shortcuts), policy)
        }
    }
}

/// Concatenated chain lemmas plus the content position of each event.
fn chain_content(doc: &Document, chains: &[EventChain]) -> (Vec<String>, BTreeMap<usize, usize>) {
    let mut content = Vec::new();
    let mut positions = BTreeMap::new();
    for chain in chains {
        for i in &chain.events {
            positions.insert(*i, content.len());
            content.push(doc.event_lemma(*i));
        }
    }
    (content, positions)
}

/// Questions over a document's chain content; gold answers are mapped to
/// content positions, dropping events the filter removed. Documents whose
/// chains are empty yield no examples.
fn qa_examples(doc: &Document, chains: &[EventChain], table: &PrefixTable) -> Vec<QaExample> {
    let (content, positions) = chain_content(doc, chains);
    if content.is_empty() {
        return Vec::new();
    }
    let Some(items) = doc.gold().and_then(|g| g.qa.as_ref()) else {
        return Vec::new();
    };
    items
        .iter()
        .map(|item| {
            let gold: BTreeSet<usize> = item
                .answer_event_indices
                .iter()
                .filter_map(|i| positions.get(i).copied())
                .collect();
            let mut question = TemporalQuestion {
                tokens: item.question.clone(),
                gold,
                category: crate::qa::QuestionCategory::Other,
            };
            question.category = table.categorize(&question.text());
            QaExample { question, content: content.clone() }
        })
        .collect()
}

/// Per-document upstream artifacts shared by every cell.
struct DocArtifacts {
    scores: Vec<f64>,
    base_labels: Vec<DiscourseLabel>,
    aware_labels: Vec<DiscourseLabel>,
    graph: TemporalGraph,
}

struct Upstream {
    train: Vec<DocArtifacts>,
    eval: Vec<DocArtifacts>,
}

/// The slice of the configuration that determines upstream artifacts.
#[derive(Serialize)]
struct UpstreamKey<'a> {
    seed: u64,
    graph_source: GraphSource,
    salience: &'a SalienceConfig,
    discourse: &'a DiscourseConfig,
    extractor: &'a ExtractorConfig,
}

fn upstream_cache_key(
    config: &PipelineConfig,
    train_bytes: &[u8],
    eval_bytes: &[u8],
) -> Result<u64> {
    let key = UpstreamKey {
        seed: config.seed,
        graph_source: config.graph_source,
        salience: &config.salience,
        discourse: &config.discourse,
        extractor: &config.extractor,
    };
    let mut bytes = serde_json::to_vec(&key)?;
    bytes.extend_from_slice(train_bytes);
    bytes.extend_from_slice(eval_bytes);
    Ok(fnv1a64(&bytes))
}

const CACHE_FILES: [&str; 8] = [
    "scores_train.jsonl",
    "scores_eval.jsonl",
    "labels_base_train.jsonl",
    "labels_base_eval.jsonl",
    "labels_aware_train.jsonl",
    "labels_aware_eval.jsonl",
    "graphs_train.jsonl",
    "graphs_eval.jsonl",
];

/// Rebuild a document's graph from its cached record; nodes are matched to
/// document events by head position.
fn graph_from_record(doc: &Document, record: &GraphRecord) -> Result<TemporalGraph> {
    let mut by_pos: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, m) in doc.events.iter().enumerate() {
        by_pos.insert((m.sent, m.tok), i);
    }
    let nodes: Vec<usize> = record
        .events
        .iter()
        .map(|e| {
            by_pos.get(&(e.sent, e.tok)).copied().ok_or_else(|| Error::InvalidDocument {
                doc_id: doc.doc_id.clone(),
                message: format!("cached graph event at ({}, {}) is not a document event", e.sent, e.tok),
            })
        })
        .collect::<Result<_>>()?;
    let edges: Vec<(usize, usize)> =
        record.edges.iter().map(|(s, d)| (nodes[*s], nodes[*d])).collect();
    TemporalGraph::with_edges(nodes, edges)
}

fn load_cached_split(
    dir: &Path,
    suffix: &str,
    docs: &[Document],
) -> Result<Vec<DocArtifacts>> {
    let scores: Vec<ScoreRecord> = load_jsonl(&dir.join(format!("scores_{suffix}.jsonl")))?;
    let base: Vec<LabelRecord> = load_jsonl(&dir.join(format!("labels_base_{suffix}.jsonl")))?;
    let aware: Vec<LabelRecord> = load_jsonl(&dir.join(format!("labels_aware_{suffix}.jsonl")))?;
    let graphs: Vec<GraphRecord> = load_jsonl(&dir.join(format!("graphs_{suffix}.jsonl")))?;
    if [scores.len(), base.len(), aware.len(), graphs.len()].iter().any(|n| *n != docs.len()) {
        return Err(Error::Checkpoint(format!(
            "cache in {} does not cover the {suffix} corpus",
            dir.display()
        )));
    }
    docs.iter()
        .enumerate()
        .map(|(i, doc)| {
            let ids_match = scores[i].doc_id == doc.doc_id
                && base[i].doc_id == doc.doc_id
                && aware[i].doc_id == doc.doc_id
                && graphs[i].doc_id == doc.doc_id;
            if !ids_match {
                return Err(Error::Checkpoint(format!(
                    "cache in {} is not aligned with document {}",
                    dir.display(),
                    doc.doc_id
                )));
            }
            Ok(DocArtifacts {
                scores: scores[i].scores.clone(),
                base_labels: base[i].labels.clone(),
                aware_labels: aware[i].labels.clone(),
                graph: graph_from_record(doc, &graphs[i])?,
            })
        })
        .collect()
}

fn save_cached_split(
    dir: &Path,
    suffix: &str,
    docs: &[Document],
    artifacts: &[DocArtifacts],
) -> Result<()> {
    let scores: Vec<ScoreRecord> = docs
        .iter()
        .zip(artifacts)
        .map(|(d, a)| ScoreRecord { doc_id: d.doc_id.clone(), scores: a.scores.clone() })
        .collect();
    let base: Vec<LabelRecord> = docs
        .iter()
        .zip(artifacts)
        .map(|(d, a)| LabelRecord { doc_id: d.doc_id.clone(), labels: a.base_labels.clone() })
        .collect();
    let aware: Vec<LabelRecord> = docs
        .iter()
        .zip(artifacts)
        .map(|(d, a)| LabelRecord { doc_id: d.doc_id.clone(), labels: a.aware_labels.clone() })
        .collect();
    let graphs: Vec<GraphRecord> = docs
        .iter()
        .zip(artifacts)
        .map(|(d, a)| GraphRecord::from_graph(d, &a.graph))
        .collect();
    save_jsonl(&dir.join(format!("scores_{suffix}.jsonl")), &scores)?;
    save_jsonl(&dir.join(format!("labels_base_{suffix}.jsonl")), &base)?;
    save_jsonl(&dir.join(format!("labels_aware_{suffix}.jsonl")), &aware)?;
    save_jsonl(&dir.join(format!("graphs_{suffix}.jsonl")), &graphs)
}

/// Map a decoded graph onto document event indices by head position;
/// predicted events with no matching document event are dropped.
fn decoded_to_doc_graph(
    doc: &Document,
    decoded: &crate::extract::DecodedGraph,
) -> Result<TemporalGraph> {
    let mut by_pos: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, m) in doc.events.iter().enumerate() {
        by_pos.insert((m.sent, m.tok), i);
    }
    let mapped: Vec<Option<usize>> = decoded
        .events
        .iter()
        .map(|m| by_pos.get(&(m.sent, m.tok)).copied())
        .collect();
    if mapped.iter().any(Option::is_none) {
        log::warn!(
            "{}: {} predicted events match no annotated event and are dropped",
            doc.doc_id,
            mapped.iter().filter(|m| m.is_none()).count()
        );
    }
    let nodes: Vec<usize> = mapped.iter().flatten().copied().collect();
    let edges: Vec<(usize, usize)> = decoded
        .graph
        .edges()
        .filter_map(|(s, d)| Some((mapped[s]?, mapped[d]?)))
        .collect();
    TemporalGraph::with_edges(nodes, edges)
}

fn compute_upstream(
    config: &PipelineConfig,
    train_docs: &[Document],
    eval_docs: &[Document],
) -> Result<Upstream> {
    let salience_config = SalienceConfig {
        seed: SeededRng::derive(config.seed, SALIENCE_SALT).below(u32::MAX as usize) as u64,
        ..config.salience.clone()
    };
    let salience = stage(
        "salience-train",
        "*",
        train_salience(train_docs, KernelBank::default(), salience_config),
    )?;
    let score_split = |docs: &[Document]| -> Vec<Vec<f64>> {
        docs.iter().map(|d| salience.score_document(d)).collect()
    };
    let train_scores = score_split(train_docs);
    let eval_scores = score_split(eval_docs);
    let flags_of = |scores: &[Vec<f64>]| -> Vec<Vec<bool>> {
        scores.iter().map(|s| s.iter().map(|p| *p > 0.5).collect()).collect()
    };
    let train_flags = flags_of(&train_scores);
    let eval_flags = flags_of(&eval_scores);

    let discourse_seed =
        SeededRng::derive(config.seed, DISCOURSE_SALT).below(u32::MAX as usize) as u64;
    let train_parser = |aware: bool| -> Result<DiscourseModel> {
        let dc = DiscourseConfig {
            seed: discourse_seed,
            salience_aware: aware,
            ..config.discourse.clone()
        };
        let (model, _) = train_discourse(train_docs, &train_flags, dc)?;
        Ok(model)
    };
    let base_parser = stage("discourse-train-base", "*", train_parser(false))?;
    let aware_parser = stage("discourse-train-aware", "*", train_parser(true))?;
    let label_split = |parser: &DiscourseModel,
                       docs: &[Document],
                       flags: &[Vec<bool>]|
     -> Result<Vec<Vec<DiscourseLabel>>> {
        docs.iter()
            .zip(flags)
            .map(|(doc, f)| {
                let classified = stage(
                    "discourse-label",
                    &doc.doc_id,
                    parser.classify_document(doc, f),
                )?;
                Ok(classified.into_iter().map(|c| c.label).collect())
            })
            .collect()
    };
    let train_base_labels = label_split(&base_parser, train_docs, &train_flags)?;
    let eval_base_labels = label_split(&base_parser, eval_docs, &eval_flags)?;
    let train_aware_labels = label_split(&aware_parser, train_docs, &train_flags)?;
    let eval_aware_labels = label_split(&aware_parser, eval_docs, &eval_flags)?;

    let graphs_of = |docs: &[Document]| -> Result<Vec<TemporalGraph>> {
        match config.graph_source {
            GraphSource::Gold => docs
                .iter()
                .map(|d| stage("graph-gold", &d.doc_id, TemporalGraph::from_gold(d)))
                .collect(),
            GraphSource::Extractor => {
                let extractor_config = ExtractorConfig {
                    seed: SeededRng::derive(config.seed, EXTRACTOR_SALT).below(u32::MAX as usize)
                        as u64,
                    ..config.extractor.clone()
                };
                let extractor = stage(
                    "extractor-train",
                    "*",
                    train_extractor(train_docs, extractor_config),
                )?;
                docs.iter()
                    .map(|d| {
                        let decoded = stage("graph-extract", &d.doc_id, extractor.decode(d))?;
                        stage("graph-extract", &d.doc_id, decoded_to_doc_graph(d, &decoded))
                    })
                    .collect()
            }
        }
    };
    let train_graphs = graphs_of(train_docs)?;
    let eval_graphs = graphs_of(eval_docs)?;

    let assemble = |scores: Vec<Vec<f64>>,
                    base: Vec<Vec<DiscourseLabel>>,
                    aware: Vec<Vec<DiscourseLabel>>,
                    graphs: Vec<TemporalGraph>|
     -> Vec<DocArtifacts> {
        scores
            .into_iter()
            .zip(base)
            .zip(aware)
            .zip(graphs)
            .map(|(((scores, base_labels), aware_labels), graph)| DocArtifacts {
                scores,
                base_labels,
                aware_labels,
                graph,
            })
            .collect()
    };
    Ok(Upstream {
        train: assemble(train_scores, train_base_labels, train_aware_labels, train_graphs),
        eval: assemble(eval_scores, eval_base_labels, eval_aware_labels, eval_graphs),
    })
}

/// Upstream artifacts, loaded from the on-disk cache when a complete entry
/// for this configuration and corpus content exists.
fn prepare_upstream(
    config: &PipelineConfig,
    train_docs: &[Document],
    eval_docs: &[Document],
    train_bytes: &[u8],
    eval_bytes: &[u8],
) -> Result<Upstream> {
    let key = upstream_cache_key(config, train_bytes, eval_bytes)?;
    let dir = config.out_dir.join("cache").join(format!("{key:016x}"));
    if CACHE_FILES.iter().all(|f| dir.join(f).is_file()) {
        let train = load_cached_split(&dir, "train", train_docs)?;
        let eval = load_cached_split(&dir, "eval", eval_docs)?;
        return Ok(Upstream { train, eval });
    }
    let upstream = compute_upstream(config, train_docs, eval_docs)?;
    save_cached_split(&dir, "train", train_docs, &upstream.train)?;
    save_cached_split(&dir, "eval", eval_docs, &upstream.eval)?;
    Ok(upstream)
}

fn mode_artifacts(
    doc: &Document,
    mode: FilterMode,
    artifacts: &DocArtifacts,
) -> Result<Vec<usize>> {
    filter_events(
        doc,
        mode,
        Some(&artifacts.scores),
        Some(&artifacts.base_labels),
        Some(&artifacts.aware_labels),
    )
}

fn split_chains(
    config: &PipelineConfig,
    docs: &[Document],
    artifacts: &[DocArtifacts],
    mode: FilterMode,
    order: ChainOrder,
) -> Result<Vec<Vec<EventChain>>> {
    docs.iter()
        .zip(artifacts)
        .map(|(doc, art)| {
            let kept = stage("filter", &doc.doc_id, mode_artifacts(doc, mode, art))?;
            stage(
                "chains",
                &doc.doc_id,
                document_chains(doc, &kept, order, &art.graph, config.chain_policy, config.filter_shortcuts),
            )
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

fn run_cell(
    config: &PipelineConfig,
    mode: FilterMode,
    order: ChainOrder,
    upstream: &Upstream,
    train_docs: &[Document],
    eval_docs: &[Document],
    stories: &[ClozeStory],
    dev_stories: Option<&[ClozeStory]>,
    table: &PrefixTable,
) -> Result<CellReport> {
    let train_chains = split_chains(config, train_docs, &upstream.train, mode, order)?;
    let eval_chains = split_chains(config, eval_docs, &upstream.eval, mode, order)?;

    let mut windows = Vec::new();
    for (doc, chains) in train_docs.iter().zip(&train_chains) {
        for chain in chains {
            windows.extend(make_windows(&chain_lemmas(doc, chain), config.lm.window));
        }
    }

    let train_examples: Vec<QaExample> = train_docs
        .iter()
        .zip(&train_chains)
        .flat_map(|(doc, chains)| qa_examples(doc, chains, table))
        .collect();
    let eval_examples: Vec<QaExample> = eval_docs
        .iter()
        .zip(&eval_chains)
        .flat_map(|(doc, chains)| qa_examples(doc, chains, table))
        .collect();
    let eval_questions: Vec<TemporalQuestion> =
        eval_examples.iter().map(|e| e.question.clone()).collect();

    let cell_id = format!("{mode}/{order}");
    let mut per_seed = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let lm = stage(
            "lm-train",
            &cell_id,
            train_mlm(&windows, EventLmConfig { seed, ..config.lm.clone() }),
        )?;
        let cloze = stage("cloze-eval", &cell_id, cloze_accuracy(&lm, stories))?;
        let supervised = match dev_stories {
            Some(dev) => {
                let clf = stage(
                    "classifier-train",
                    &cell_id,
                    train_ending_classifier(
                        &lm,
                        dev,
                        config.classifier_epochs,
                        config.classifier_learning_rate,
                    ),
                )?;
                Some(stage("classifier-eval", &cell_id, classifier_accuracy(&clf, &lm, stories))?)
            }
            None => None,
        };

        let qa_model = stage(
            "qa-train",
            &cell_id,
            train_qa(&train_examples, QaConfig { seed, ..config.qa.clone() }),
        )?;
        let predictions: Vec<BTreeSet<usize>> = eval_examples
            .iter()
            .map(|ex| {
                stage("qa-eval", &cell_id, qa_model.answer(&ex.question.tokens, &ex.content))
            })
            .collect::<Result<_>>()?;
        let qa = stage("qa-eval", &cell_id, qa_metrics(&predictions, &eval_questions))?;

        per_seed.push(SeedReport { seed, cloze_accuracy: cloze, supervised_accuracy: supervised, qa });
    }

    let n = per_seed.len();
    let mean_supervised_accuracy = if per_seed.iter().all(|s| s.supervised_accuracy.is_some()) {
        Some(mean(per_seed.iter().map(|s| s.supervised_accuracy.unwrap()), n))
    } else {
        None
    };
    Ok(CellReport {
        mode,
        order,
        mean_cloze_accuracy: mean(per_seed.iter().map(|s| s.cloze_accuracy), n),
        mean_supervised_accuracy,
        mean_qa_macro_f1: mean(per_seed.iter().map(|s| s.qa.macro_f1), n),
        mean_qa_exact_match: mean(per_seed.iter().map(|s| s.qa.exact_match), n),
        per_seed,
    })
}

/// Execute the full sweep and write `report.json` and `report.txt` under
/// the output directory. Identical config and corpora produce byte-identical
/// reports.
pub fn run(config: &PipelineConfig) -> Result<MetricsReport> {
    config.validate()?;
    let train_bytes = ioutil::read_file(&config.train_docs)?.into_bytes();
    let eval_bytes = ioutil::read_file(&config.eval_docs)?.into_bytes();
    let train_docs = stage("load-corpus", "*", load_documents(&config.train_docs))?;
    let eval_docs = stage("load-corpus", "*", load_documents(&config.eval_docs))?;
    let stories: Vec<ClozeStory> =
        stage("load-stories", "*", load_jsonl(&config.stories))?;
    let dev_stories: Option<Vec<ClozeStory>> = match &config.dev_stories {
        Some(path) => Some(stage("load-stories", "*", load_jsonl(path))?),
        None => None,
    };

    let upstream = prepare_upstream(config, &train_docs, &eval_docs, &train_bytes, &eval_bytes)?;

    let table = PrefixTable::default();
    let mut cells = Vec::new();
    for mode in &config.modes {
        for order in &config.orders {
            cells.push(run_cell(
                config,
                *mode,
                *order,
                &upstream,
                &train_docs,
                &eval_docs,
                &stories,
                dev_stories.as_deref(),
                &table,
            )?);
        }
    }

    let report = MetricsReport {
        config_hash: format!("{:016x}", fnv1a64(&serde_json::to_vec(config)?)),
        seeds: config.seeds.clone(),
        cells,
    };
    let mut body = serde_json::to_vec_pretty(&report)?;
    body.push(b'\n');
    ioutil::write_atomic(&config.out_dir.join("report.json"), &body)?;
    ioutil::write_atomic(&config.out_dir.join("report.txt"), report.to_table().as_bytes())?;
    Ok(report)
}
