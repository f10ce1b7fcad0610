//! Joint event and temporal-relation extraction: a recurrent token encoder
//! with a per-token event head and a pairwise BEFORE head, decoded under
//! consistency repair so the output graph is always acyclic and antisymmetric.
//!
//! Pairs are scored in text order only; a BEFORE probability below 0.5 means
//! no edge. Edges that run against text order are therefore out of reach of
//! this extractor by design.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chains::{repair_consistency, ScoredEdge, TemporalGraph};
use crate::corpus::{Document, Mention};
use crate::error::{Error, Result};
use crate::nn::{
    checkpoint, Adam, AdamConfig, BiLstm, Init, ParamId, ParamSet, Tape, Var, INIT_SCALE,
};
use crate::rng::SeededRng;
use crate::vocab::Vocab;

const INIT_SALT: u64 = 0x45_58_54_01;
const TRAIN_SALT: u64 = 0x45_58_54_02;
const UNK: usize = 0;

/// Directed BEFORE candidate between two entries of a candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredRelation {
    pub src: usize,
    pub dst: usize,
    pub prob: f64,
}

/// Predicted events plus the repaired temporal graph over them. Graph nodes
/// index into `events`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedGraph {
    pub events: Vec<Mention>,
    pub graph: TemporalGraph,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub pair_hidden: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            seed: 11,
            embed_dim: 16,
            hidden_dim: 16,
            pair_hidden: 16,
            epochs: 40,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExtractorMeta {
    config: ExtractorConfig,
    vocab: Vocab,
}

#[derive(Debug, Clone)]
pub struct ExtractorModel {
    config: ExtractorConfig,
    vocab: Vocab,
    params: ParamSet,
    emb: ParamId,
    encoder: BiLstm,
    ev_w: ParamId,
    ev_b: ParamId,
    pair_w1: ParamId,
    pair_b1: ParamId,
    pair_w2: ParamId,
    pair_b2: ParamId,
}

impl ExtractorModel {
    pub fn new(config: ExtractorConfig, vocab: Vocab) -> Self {
        let mut rng = SeededRng::derive(config.seed, INIT_SALT);
        let mut params = ParamSet::new();
        let emb = params.register(
            "extract.emb",
            vocab.len(),
            config.embed_dim,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let encoder = BiLstm::new(
            "extract.enc",
            config.embed_dim,
            config.hidden_dim,
            &mut params,
            &mut rng,
            INIT_SCALE,
        );
        let enc_dim = encoder.output_dim();
        let ev_w =
            params.register("extract.ev_w", 1, enc_dim, Init::Uniform(INIT_SCALE), &mut rng);
        let ev_b = params.register("extract.ev_b", 1, 1, Init::Zeros, &mut rng);
        let pair_w1 = params.register(
            "extract.pair_w1",
            config.pair_hidden,
            2 * enc_dim,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let pair_b1 =
            params.register("extract.pair_b1", config.pair_hidden, 1, Init::Zeros, &mut rng);
        let pair_w2 = params.register(
            "extract.pair_w2",
            1,
            config.pair_hidden,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let pair_b2 = params.register("extract.pair_b2", 1, 1, Init::Zeros, &mut rng);
        ExtractorModel {
            config,
            vocab,
            params,
            emb,
            encoder,
            ev_w,
            ev_b,
            pair_w1,
            pair_b1,
            pair_w2,
            pair_b2,
        }
    }

    pub fn build_vocab(docs: &[Document]) -> Vocab {
        crate::vocab::token_vocab(docs)
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Token encodings for the flattened document, one per token.
    fn encode_tokens(&self, tape: &mut Tape, params: &ParamSet, doc: &Document) -> Vec<Var> {
        let emb = tape.param(params, self.emb);
        let xs: Vec<Var> = doc
            .sentences
            .iter()
            .flatten()
            .map(|tok| tape.row(emb, self.vocab.get_or(tok, UNK), self.config.embed_dim))
            .collect();
        self.encoder.encode(tape, params, &xs)
    }

    fn event_logits(&self, tape: &mut Tape, params: &ParamSet, hidden: &[Var]) -> Vec<Var> {
        let w = tape.param(params, self.ev_w);
        let b = tape.param(params, self.ev_b);
        hidden
            .iter()
            .map(|h| {
                let z = tape.matvec(w, *h, 1, self.encoder.output_dim());
                let zb = tape.add(z, b);
                tape.sigmoid(zb)
            })
            .collect()
    }

    fn pair_prob(&self, tape: &mut Tape, params: &ParamSet, hi: Var, hj: Var) -> Var {
        let w1 = tape.param(params, self.pair_w1);
        let b1 = tape.param(params, self.pair_b1);
        let w2 = tape.param(params, self.pair_w2);
        let b2 = tape.param(params, self.pair_b2);
        let cat = tape.concat(&[hi, hj]);
        let a = tape.affine(w1, cat, b1, self.config.pair_hidden, 2 * self.encoder.output_dim());
        let t = tape.tanh(a);
        let z = tape.matvec(w2, t, 1, self.config.pair_hidden);
        let zb = tape.add(z, b2);
        tape.sigmoid(zb)
    }

    /// Event probability for every token, shaped like the sentence list.
    pub fn score_events(&self, doc: &Document) -> Result<Vec<Vec<f64>>> {
        if doc.sentences.is_empty() {
            return Err(Error::EmptyInput(format!("document {} has no sentences", doc.doc_id)));
        }
        let mut tape = Tape::new();
        let hidden = self.encode_tokens(&mut tape, &self.params, doc);
        let probs = self.event_logits(&mut tape, &self.params, &hidden);
        let mut out = Vec::with_capacity(doc.sentences.len());
        let mut it = probs.iter();
        for sent in &doc.sentences {
            out.push(sent.iter().map(|_| tape.scalar(*it.next().unwrap())).collect());
        }
        Ok(out)
    }

    /// BEFORE probability for every text-ordered candidate pair. Indices in
    /// the result refer to the candidates slice.
    pub fn score_relations(
        &self,
        doc: &Document,
        candidates: &[Mention],
    ) -> Result<Vec<ScoredRelation>> {
        validate_candidates(doc, candidates)?;
        if candidates.len() < 2 {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let hidden = self.encode_tokens(&mut tape, &self.params, doc);
        let flat = flat_index(doc);
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by_key(|i| (candidates[*i].sent, candidates[*i].tok));
        let mut out = Vec::with_capacity(order.len() * (order.len() - 1) / 2);
        for a in 0..order.len() {
            for b in a + 1..order.len() {
                let (i, j) = (order[a], order[b]);
                let hi = hidden[flat(&candidates[i])];
                let hj = hidden[flat(&candidates[j])];
                let p = self.pair_prob(&mut tape, &self.params, hi, hj);
                out.push(ScoredRelation { src: i, dst: j, prob: tape.scalar(p) });
            }
        }
        Ok(out)
    }

    /// Full constrained decode: threshold events, threshold pairs among the
    /// kept events, then repair the edge set into an acyclic graph.
    pub fn decode(&self, doc: &Document) -> Result<DecodedGraph> {
        let probs = self.score_events(doc)?;
        let mut candidates = Vec::new();
        let mut event_probs = Vec::new();
        for (s, sent) in probs.iter().enumerate() {
            for (t, p) in sent.iter().enumerate() {
                if *p > 0.5 {
                    candidates.push(Mention::single(s, t));
                    event_probs.push((Mention::single(s, t), *p));
                }
            }
        }
        let relations = self.score_relations(doc, &candidates)?;
        decode_from_scores(&event_probs, &relations)
    }

    /// Joint loss on one document: mean token BCE plus mean pair BCE.
    pub fn doc_loss_with(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        doc: &Document,
    ) -> Result<Var> {
        let relations = doc
            .gold()
            .and_then(|g| g.relations.as_ref())
            .ok_or_else(|| Error::MissingArtifact {
                mode: "extractor training".into(),
                artifact: format!("gold relations for {}", doc.doc_id),
            })?;
        if doc.sentences.is_empty() {
            return Err(Error::EmptyInput(format!("document {} has no sentences", doc.doc_id)));
        }
        let hidden = self.encode_tokens(tape, params, doc);
        let probs = self.event_logits(tape, params, &hidden);

        let heads: BTreeSet<(usize, usize)> =
            doc.events.iter().map(|m| (m.sent, m.tok)).collect();
        let mut token_losses = Vec::with_capacity(probs.len());
        let mut fi = 0usize;
        for (s, sent) in doc.sentences.iter().enumerate() {
            for (t, _) in sent.iter().enumerate() {
                let y = f64::from(heads.contains(&(s, t)));
                token_losses.push(tape.bce(probs[fi], y));
                fi += 1;
            }
        }
        let token_total = tape.add_many(&token_losses);
        let mut loss = tape.scale(token_total, 1.0 / token_losses.len() as f64);

        let gold_edges: BTreeSet<((usize, usize), (usize, usize))> = relations
            .iter()
            .map(|(i, j)| {
                let a = &doc.events[*i];
                let b = &doc.events[*j];
                ((a.sent, a.tok), (b.sent, b.tok))
            })
            .collect();
        let flat = flat_index(doc);
        let mut order: Vec<&Mention> = doc.events.iter().collect();
        order.sort_by_key(|m| (m.sent, m.tok));
        let mut pair_losses = Vec::new();
        for a in 0..order.len() {
            for b in a + 1..order.len() {
                let hi = hidden[flat(order[a])];
                let hj = hidden[flat(order[b])];
                let p = self.pair_prob(tape, params, hi, hj);
                let key = ((order[a].sent, order[a].tok), (order[b].sent, order[b].tok));
                let y = f64::from(gold_edges.contains(&key));
                pair_losses.push(tape.bce(p, y));
            }
        }
        if !pair_losses.is_empty() {
            let pair_total = tape.add_many(&pair_losses);
            let pair_mean = tape.scale(pair_total, 1.0 / pair_losses.len() as f64);
            loss = tape.add(loss, pair_mean);
        }
        Ok(loss)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = ExtractorMeta { config: self.config.clone(), vocab: self.vocab.clone() };
        checkpoint::save(path, &meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, tensors) = checkpoint::load::<ExtractorMeta>(path)?;
        let mut model = ExtractorModel::new(meta.config, meta.vocab);
        checkpoint::restore(&mut model.params, &tensors)?;
        Ok(model)
    }
}

/// Flat token index for a mention head; sentences are concatenated in order.
fn flat_index(doc: &Document) -> impl Fn(&Mention) -> usize + '_ {
    let mut starts = Vec::with_capacity(doc.sentences.len());
    let mut acc = 0usize;
    for sent in &doc.sentences {
        starts.push(acc);
        acc += sent.len();
    }
    move |m: &Mention| starts[m.sent] + m.tok
}

fn validate_candidates(doc: &Document, candidates: &[Mention]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for m in candidates {
        if m.sent >= doc.sentences.len() || m.tok >= doc.sentences[m.sent].len() {
            return Err(Error::InvalidDocument {
                doc_id: doc.doc_id.clone(),
                message: format!("relation candidate at ({}, {}) out of range", m.sent, m.tok),
            });
        }
        if !seen.insert((m.sent, m.tok)) {
            return Err(Error::InvalidDocument {
                doc_id: doc.doc_id.clone(),
                message: format!("duplicate relation candidate at ({}, {})", m.sent, m.tok),
            });
        }
    }
    Ok(())
}

/// Threshold events and edges, drop edges touching non-events, repair the
/// rest into an acyclic antisymmetric graph. Relation indices refer to the
/// candidates slice; the result re-indexes events densely in text order.
pub fn decode_from_scores(
    candidates: &[(Mention, f64)],
    relations: &[ScoredRelation],
) -> Result<DecodedGraph> {
    let mut kept: Vec<usize> =
        (0..candidates.len()).filter(|i| candidates[*i].1 > 0.5).collect();
    kept.sort_by_key(|i| (candidates[*i].0.sent, candidates[*i].0.tok));
    let remap: std::collections::BTreeMap<usize, usize> =
        kept.iter().enumerate().map(|(new, old)| (*old, new)).collect();
    let events: Vec<Mention> = kept.iter().map(|i| candidates[*i].0.clone()).collect();

    let mut edges = Vec::new();
    for r in relations {
        if r.src >= candidates.len() || r.dst >= candidates.len() {
            return Err(Error::PositionOutOfRange {
                position: r.src.max(r.dst),
                len: candidates.len(),
            });
        }
        if r.prob <= 0.5 {
            continue;
        }
        let (Some(src), Some(dst)) = (remap.get(&r.src), remap.get(&r.dst)) else {
            continue;
        };
        edges.push(ScoredEdge { src: *src, dst: *dst, score: r.prob });
    }
    let nodes: Vec<usize> = (0..events.len()).collect();
    let graph = repair_consistency(nodes, &edges)?;
    Ok(DecodedGraph { events, graph })
}

/// Precision, recall, and F1 of decoded edges against gold relations, both
/// sides keyed by head token positions. Empty against empty scores 1.
pub fn edge_f1(decoded: &DecodedGraph, doc: &Document) -> (f64, f64, f64) {
    let gold: BTreeSet<((usize, usize), (usize, usize))> = doc
        .gold()
        .and_then(|g| g.relations.as_ref())
        .map(|rels| {
            rels.iter()
                .map(|(i, j)| {
                    let a = &doc.events[*i];
                    let b = &doc.events[*j];
                    ((a.sent, a.tok), (b.sent, b.tok))
                })
                .collect()
        })
        .unwrap_or_default();
    let pred: BTreeSet<((usize, usize), (usize, usize))> = decoded
        .graph
        .edges()
        .map(|(s, d)| {
            let a = &decoded.events[s];
            let b = &decoded.events[d];
            ((a.sent, a.tok), (b.sent, b.tok))
        })
        .collect();
    set_f1(&pred, &gold)
}

/// Precision, recall, and F1 of predicted event heads against gold heads.
pub fn event_f1(decoded: &DecodedGraph, doc: &Document) -> (f64, f64, f64) {
    let gold: BTreeSet<(usize, usize)> = doc.events.iter().map(|m| (m.sent, m.tok)).collect();
    let pred: BTreeSet<(usize, usize)> =
        decoded.events.iter().map(|m| (m.sent, m.tok)).collect();
    set_f1(&pred, &gold)
}

/// Set precision/recall/F1 with the empty-agreement convention: two empty
/// sets score 1.0 on all three.
pub fn set_f1<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> (f64, f64, f64) {
    if pred.is_empty() && gold.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    let tp = pred.intersection(gold).count() as f64;
    let p = if pred.is_empty() { 0.0 } else { tp / pred.len() as f64 };
    let r = if gold.is_empty() { 0.0 } else { tp / gold.len() as f64 };
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Train both heads with per-document Adam steps; deterministic per seed.
pub fn train_extractor(docs: &[Document], config: ExtractorConfig) -> Result<ExtractorModel> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("extractor training corpus is empty".into()));
    }
    let vocab = ExtractorModel::build_vocab(docs);
    let mut model = ExtractorModel::new(config, vocab);
    let mut adam = Adam::new(model.config.adam, &model.params);
    let mut rng = SeededRng::derive(model.config.seed, TRAIN_SALT);
    for _epoch in 0..model.config.epochs {
        let mut order: Vec<usize> = (0..docs.len()).collect();
        rng.shuffle(&mut order);
        for di in order {
            let mut tape = Tape::new();
            let loss = model.doc_loss_with(&mut tape, &model.params, &docs[di])?;
            if !tape.scalar(loss).is_finite() {
                return Err(Error::NonFiniteLoss(format!(
                    "extractor training on {}",
                    docs[di].doc_id
                )));
            }
            tape.backward(loss);
            tape.apply_grads(&mut model.params);
            adam.step(&mut model.params)?;
        }
    }
    Ok(model)
}
