//! Sentence-level discourse role classification over the eight content
//! labels, with an optional channel that injects the hidden vectors of
//! salient events into each sentence representation, and the keep-set
//! sentence filter.
//!
//! Per sentence: word encodings pool into S_t; the mean of word encodings at
//! salient event heads is E_t (zero when the set is empty or the channel is
//! off). A sentence-level encoder over [S_t; E_t] yields H_t, a document
//! attention pool yields D, and [H_t; H_t*D; H_t-D] feeds a two-layer
//! classifier.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{DiscourseLabel, Document};
use crate::error::{Error, Result};
use crate::nn::{
    checkpoint, Adam, AdamConfig, AttentionPool, BiLstm, Init, ParamId, ParamSet, Tape, Var,
    INIT_SCALE,
};
use crate::rng::SeededRng;
use crate::vocab::{token_vocab, Vocab};

const INIT_SALT: u64 = 0x44_49_53_01;
const TRAIN_SALT: u64 = 0x44_49_53_02;
const UNK: usize = 0;
const NUM_LABELS: usize = 8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscourseConfig {
    pub seed: u64,
    pub embed_dim: usize,
    pub word_hidden: usize,
    pub sent_hidden: usize,
    pub attn_dim: usize,
    pub ff_hidden: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub salience_aware: bool,
    /// Stop once training micro F1 reaches this value, if set.
    pub early_stop_accuracy: Option<f64>,
}

impl Default for DiscourseConfig {
    fn default() -> Self {
        DiscourseConfig {
            seed: 23,
            embed_dim: 16,
            word_hidden: 16,
            sent_hidden: 16,
            attn_dim: 16,
            ff_hidden: 32,
            epochs: 60,
            adam: AdamConfig::default(),
            salience_aware: true,
            early_stop_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiscourseMeta {
    config: DiscourseConfig,
    vocab: Vocab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedSentence {
    pub label: DiscourseLabel,
    pub probs: Vec<f64>,
}

/// Per-class, macro, and micro F1 over a label sequence. Classes absent
/// from both prediction and gold score 0 by convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscourseF1 {
    pub per_class: Vec<f64>,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

pub fn discourse_f1(pred: &[DiscourseLabel], gold: &[DiscourseLabel]) -> DiscourseF1 {
    assert_eq!(pred.len(), gold.len(), "label sequences must align");
    let mut tp = [0usize; NUM_LABELS];
    let mut fp = [0usize; NUM_LABELS];
    let mut fnn = [0usize; NUM_LABELS];
    let mut hits = 0usize;
    for (p, g) in pred.iter().zip(gold) {
        if p == g {
            tp[p.index()] += 1;
            hits += 1;
        } else {
            fp[p.index()] += 1;
            fnn[g.index()] += 1;
        }
    }
    let per_class: Vec<f64> = (0..NUM_LABELS)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fnn[c];
            if denom == 0 { 0.0 } else { 2.0 * tp[c] as f64 / denom as f64 }
        })
        .collect();
    let macro_f1 = per_class.iter().sum::<f64>() / NUM_LABELS as f64;
    let micro_f1 = if pred.is_empty() { 0.0 } else { hits as f64 / pred.len() as f64 };
    DiscourseF1 { per_class, macro_f1, micro_f1 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub f1: DiscourseF1,
}

#[derive(Debug, Clone)]
pub struct DiscourseModel {
    config: DiscourseConfig,
    vocab: Vocab,
    params: ParamSet,
    emb: ParamId,
    word_enc: BiLstm,
    word_pool: AttentionPool,
    sent_enc: BiLstm,
    doc_pool: AttentionPool,
    ff1_w: ParamId,
    ff1_b: ParamId,
    ff2_w: ParamId,
    ff2_b: ParamId,
}

impl DiscourseModel {
    pub fn new(config: DiscourseConfig, vocab: Vocab) -> Self {
        let mut rng = SeededRng::derive(config.seed, INIT_SALT);
        let mut params = ParamSet::new();
        let emb = params.register(
            "discourse.emb",
            vocab.len(),
            config.embed_dim,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let word_enc = BiLstm::new(
            "discourse.word",
            config.embed_dim,
            config.word_hidden,
            &mut params,
            &mut rng,
            INIT_SCALE,
        );
        let word_dim = word_enc.output_dim();
        let word_pool = AttentionPool::new(
            "discourse.word_pool",
            word_dim,
            config.attn_dim,
            &mut params,
            &mut rng,
            INIT_SCALE,
        );
        // S_t and E_t share the word-encoder output width.
        let sent_enc = BiLstm::new(
            "discourse.sent",
            2 * word_dim,
            config.sent_hidden,
            &mut params,
            &mut rng,
            INIT_SCALE,
        );
        let sent_dim = sent_enc.output_dim();
        let doc_pool = AttentionPool::new(
            "discourse.doc_pool",
            sent_dim,
            config.attn_dim,
            &mut params,
            &mut rng,
            INIT_SCALE,
        );
        let ff1_w = params.register(
            "discourse.ff1_w",
            config.ff_hidden,
            3 * sent_dim,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let ff1_b = params.register("discourse.ff1_b", config.ff_hidden, 1, Init::Zeros, &mut rng);
        let ff2_w = params.register(
            "discourse.ff2_w",
            NUM_LABELS,
            config.ff_hidden,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let ff2_b = params.register("discourse.ff2_b", NUM_LABELS, 1, Init::Zeros, &mut rng);
        DiscourseModel {
            config,
            vocab,
            params,
            emb,
            word_enc,
            word_pool,
            sent_enc,
            doc_pool,
            ff1_w,
            ff1_b,
            ff2_w,
            ff2_b,
        }
    }

    pub fn build_vocab(docs: &[Document]) -> Vocab {
        token_vocab(docs)
    }

    pub fn config(&self) -> &DiscourseConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Same parameters with the salient-event channel toggled.
    pub fn with_salience_aware(&self, on: bool) -> Self {
        let mut m = self.clone();
        m.config.salience_aware = on;
        m
    }

    fn word_hiddens(&self, tape: &mut Tape, params: &ParamSet, tokens: &[String]) -> Vec<Var> {
        let emb = tape.param(params, self.emb);
        let xs: Vec<Var> = tokens
            .iter()
            .map(|tok| tape.row(emb, self.vocab.get_or(tok, UNK), self.config.embed_dim))
            .collect();
        self.word_enc.encode(tape, params, &xs)
    }

    /// Attention-pooled sentence vector S_t.
    pub fn sentence_encoding(&self, tokens: &[String]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("sentence has no tokens".into()));
        }
        let mut tape = Tape::new();
        let hs = self.word_hiddens(&mut tape, &self.params, tokens);
        let s = self.word_pool.attend(&mut tape, &self.params, &hs);
        Ok(tape.value(s).to_vec())
    }

    /// Mean word encoding at salient head positions, E_t; zero when empty.
    pub fn salient_event_encoding(
        &self,
        tokens: &[String],
        salient_heads: &[usize],
    ) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("sentence has no tokens".into()));
        }
        if let Some(bad) = salient_heads.iter().find(|p| **p >= tokens.len()) {
            return Err(Error::PositionOutOfRange { position: *bad, len: tokens.len() });
        }
        let mut tape = Tape::new();
        let hs = self.word_hiddens(&mut tape, &self.params, tokens);
        let e = salient_mean(&mut tape, &hs, salient_heads, self.word_enc.output_dim());
        Ok(tape.value(e).to_vec())
    }

    /// Per-sentence probability vectors on the given tape. `salient_heads`
    /// maps sentence index to the head positions of salient events there.
    fn doc_probs(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        doc: &Document,
        salient_heads: &BTreeMap<usize, Vec<usize>>,
    ) -> Vec<Var> {
        let word_dim = self.word_enc.output_dim();
        let mut sent_inputs = Vec::with_capacity(doc.sentences.len());
        for (t, sent) in doc.sentences.iter().enumerate() {
            let hs = self.word_hiddens(tape, params, sent);
            let s_t = self.word_pool.attend(tape, params, &hs);
            let e_t = match salient_heads.get(&t) {
                Some(heads) => salient_mean(tape, &hs, heads, word_dim),
                None => tape.zeros(word_dim),
            };
            sent_inputs.push(tape.concat(&[s_t, e_t]));
        }
        let h = self.sent_enc.encode(tape, params, &sent_inputs);
        let d = self.doc_pool.attend(tape, params, &h);
        let sent_dim = self.sent_enc.output_dim();
        let ff1 = tape.param(params, self.ff1_w);
        let fb1 = tape.param(params, self.ff1_b);
        let ff2 = tape.param(params, self.ff2_w);
        let fb2 = tape.param(params, self.ff2_b);
        h.iter()
            .map(|h_t| {
                let prod = tape.mul(*h_t, d);
                let diff = tape.sub(*h_t, d);
                let rep = tape.concat(&[*h_t, prod, diff]);
                let a1 = tape.affine(ff1, rep, fb1, self.config.ff_hidden, 3 * sent_dim);
                let t1 = tape.tanh(a1);
                let logits = tape.affine(ff2, t1, fb2, NUM_LABELS, self.config.ff_hidden);
                tape.softmax(logits)
            })
            .collect()
    }

    /// Heads of flagged events grouped by sentence; empty when the salient
    /// channel is off.
    fn head_map(
        &self,
        doc: &Document,
        salience_flags: &[bool],
    ) -> Result<BTreeMap<usize, Vec<usize>>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        if !self.config.salience_aware {
            return Ok(map);
        }
        if salience_flags.len() != doc.events.len() {
            return Err(Error::DimensionMismatch {
                context: format!("salience flags for {}", doc.doc_id),
                expected: doc.events.len(),
                got: salience_flags.len(),
            });
        }
        for (m, flag) in doc.events.iter().zip(salience_flags) {
            if *flag {
                map.entry(m.sent).or_default().push(m.tok);
            }
        }
        for heads in map.values_mut() {
            heads.sort_unstable();
        }
        Ok(map)
    }

    /// Label and probability vector per sentence. Flags align with
    /// `doc.events`; they are ignored when the salient channel is off.
    pub fn classify_document(
        &self,
        doc: &Document,
        salience_flags: &[bool],
    ) -> Result<Vec<ClassifiedSentence>> {
        if doc.sentences.is_empty() {
            return Err(Error::EmptyInput(format!("document {} has no sentences", doc.doc_id)));
        }
        let heads = self.head_map(doc, salience_flags)?;
        let mut tape = Tape::new();
        let probs = self.doc_probs(&mut tape, &self.params, doc, &heads);
        Ok(probs
            .iter()
            .map(|p| {
                let v = tape.value(*p).to_vec();
                let best = v
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                let label = DiscourseLabel::from_index(best).expect("argmax over 8 classes");
                ClassifiedSentence { label, probs: v }
            })
            .collect())
    }

    /// Mean cross-entropy over the document's sentences.
    pub fn doc_loss_with(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        doc: &Document,
        salience_flags: &[bool],
        labels: &[DiscourseLabel],
    ) -> Result<Var> {
        if doc.sentences.is_empty() {
            return Err(Error::EmptyInput(format!("document {} has no sentences", doc.doc_id)));
        }
        if labels.len() != doc.sentences.len() {
            return Err(Error::DimensionMismatch {
                context: format!("discourse labels for {}", doc.doc_id),
                expected: doc.sentences.len(),
                got: labels.len(),
            });
        }
        let heads = self.head_map(doc, salience_flags)?;
        let probs = self.doc_probs(tape, params, doc, &heads);
        let losses: Vec<Var> = probs
            .iter()
            .zip(labels)
            .map(|(p, l)| tape.cross_entropy(*p, l.index()))
            .collect();
        let total = tape.add_many(&losses);
        Ok(tape.scale(total, 1.0 / losses.len() as f64))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = DiscourseMeta { config: self.config.clone(), vocab: self.vocab.clone() };
        checkpoint::save(path, &meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, tensors) = checkpoint::load::<DiscourseMeta>(path)?;
        let mut model = DiscourseModel::new(meta.config, meta.vocab);
        checkpoint::restore(&mut model.params, &tensors)?;
        Ok(model)
    }
}

fn salient_mean(tape: &mut Tape, hiddens: &[Var], heads: &[usize], dim: usize) -> Var {
    if heads.is_empty() {
        return tape.zeros(dim);
    }
    let picked: Vec<Var> = heads.iter().map(|p| hiddens[*p]).collect();
    tape.mean_many(&picked)
}

/// Sentence indices whose label is in the keep-set, in order.
pub fn filter_by_discourse(labels: &[DiscourseLabel]) -> Vec<usize> {
    (0..labels.len()).filter(|i| labels[*i].is_kept()).collect()
}

fn gold_labels(doc: &Document) -> Result<&Vec<DiscourseLabel>> {
    doc.gold().and_then(|g| g.discourse.as_ref()).ok_or_else(|| Error::MissingArtifact {
        mode: "discourse training".into(),
        artifact: format!("gold discourse labels for {}", doc.doc_id),
    })
}

/// Train with per-document Adam steps; reports training-set F1 per epoch.
/// `salience_flags[d]` aligns with `docs[d].events`.
pub fn train_discourse(
    docs: &[Document],
    salience_flags: &[Vec<bool>],
    config: DiscourseConfig,
) -> Result<(DiscourseModel, Vec<EpochMetrics>)> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("discourse training corpus is empty".into()));
    }
    if salience_flags.len() != docs.len() {
        return Err(Error::DimensionMismatch {
            context: "per-document salience flags".into(),
            expected: docs.len(),
            got: salience_flags.len(),
        });
    }
    for doc in docs {
        gold_labels(doc)?;
    }
    let vocab = DiscourseModel::build_vocab(docs);
    let mut model = DiscourseModel::new(config, vocab);
    let mut adam = Adam::new(model.config.adam, &model.params);
    let mut rng = SeededRng::derive(model.config.seed, TRAIN_SALT);
    let mut history = Vec::new();
    for epoch in 0..model.config.epochs {
        let mut order: Vec<usize> = (0..docs.len()).collect();
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for di in order {
            let doc = &docs[di];
            let mut tape = Tape::new();
            let loss = model.doc_loss_with(
                &mut tape,
                &model.params,
                doc,
                &salience_flags[di],
                gold_labels(doc)?,
            )?;
            let l = tape.scalar(loss);
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss(format!("discourse training on {}", doc.doc_id)));
            }
            loss_sum += l;
            tape.backward(loss);
            tape.apply_grads(&mut model.params);
            adam.step(&mut model.params)?;
        }

        let mut pred = Vec::new();
        let mut gold = Vec::new();
        for (di, doc) in docs.iter().enumerate() {
            for c in model.classify_document(doc, &salience_flags[di])? {
                pred.push(c.label);
            }
            gold.extend(gold_labels(doc)?.iter().copied());
        }
        let f1 = discourse_f1(&pred, &gold);
        let stop = model
            .config
            .early_stop_accuracy
            .is_some_and(|target| f1.micro_f1 >= target);
        history.push(EpochMetrics { epoch, mean_loss: loss_sum / docs.len() as f64, f1 });
        if stop {
            break;
        }
    }
    Ok((model, history))
}

/// Gold salience flags per document, for training against gold annotations.
pub fn gold_flags(docs: &[Document]) -> Result<Vec<Vec<bool>>> {
    docs.iter().map(crate::salience::event_labels).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, Mention, SyntheticConfig};
    use crate::nn::{grad_check, GRAD_CHECK_EPS, GRAD_CHECK_TOL};

    fn tiny_doc() -> Document {
        Document {
            doc_id: "d".into(),
            sentences: vec![
                vec!["cue".into(), "Org".into(), "strike".into(), ".".into()],
                vec!["cue".into(), "Org".into(), "waver".into(), ".".into()],
                vec!["alt".into(), "Org".into(), "retreat".into(), ".".into()],
            ],
            events: vec![Mention::single(0, 2), Mention::single(1, 2), Mention::single(2, 2)],
            entities: vec![Mention::single(0, 1)],
            gold: Some(crate::corpus::Gold {
                relations: None,
                salience: None,
                discourse: Some(vec![DiscourseLabel::M1, DiscourseLabel::D1, DiscourseLabel::C1]),
                abstract_tokens: None,
                qa: None,
            }),
        }
    }

    #[test]
    fn probability_vectors_normalize() {
        let doc = tiny_doc();
        let model = DiscourseModel::new(
            DiscourseConfig::default(),
            DiscourseModel::build_vocab(std::slice::from_ref(&doc)),
        );
        let out = model.classify_document(&doc, &[true, false, true]).unwrap();
        assert_eq!(out.len(), 3);
        for c in &out {
            assert_eq!(c.probs.len(), 8);
            assert!((c.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(c.probs.iter().all(|p| *p > 0.0 && *p < 1.0));
        }
    }

    #[test]
    fn sentence_encoding_identities() {
        let doc = tiny_doc();
        let model = DiscourseModel::new(
            DiscourseConfig::default(),
            DiscourseModel::build_vocab(std::slice::from_ref(&doc)),
        );
        assert!(model.sentence_encoding(&[]).is_err());

        // A singleton sentence pools to its own hidden vector, which is also
        // E_t when that token is the one salient head.
        let tokens = vec!["strike".to_string()];
        let s = model.sentence_encoding(&tokens).unwrap();
        let e = model.salient_event_encoding(&tokens, &[0]).unwrap();
        for (a, b) in s.iter().zip(&e) {
            assert!((a - b).abs() < 1e-12);
        }

        let zero = model.salient_event_encoding(&tokens, &[]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
        assert!(model.salient_event_encoding(&tokens, &[3]).is_err());
    }

    #[test]
    fn salient_mean_is_elementwise_average() {
        let doc = tiny_doc();
        let model = DiscourseModel::new(
            DiscourseConfig::default(),
            DiscourseModel::build_vocab(std::slice::from_ref(&doc)),
        );
        let tokens: Vec<String> =
            ["cue", "Org", "strike", "."].iter().map(|s| s.to_string()).collect();
        let a = model.salient_event_encoding(&tokens, &[1]).unwrap();
        let b = model.salient_event_encoding(&tokens, &[2]).unwrap();
        let ab = model.salient_event_encoding(&tokens, &[1, 2]).unwrap();
        for i in 0..ab.len() {
            assert!((ab[i] - 0.5 * (a[i] + b[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_flags_equal_base_model_exactly() {
        let doc = tiny_doc();
        let aware = DiscourseModel::new(
            DiscourseConfig { salience_aware: true, ..DiscourseConfig::default() },
            DiscourseModel::build_vocab(std::slice::from_ref(&doc)),
        );
        let base = aware.with_salience_aware(false);
        let a = aware.classify_document(&doc, &[false, false, false]).unwrap();
        let b = base.classify_document(&doc, &[]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.probs, y.probs, "bitwise-equal forward passes");
            assert_eq!(x.label, y.label);
        }
    }

    #[test]
    fn flags_change_aware_output_only() {
        let doc = tiny_doc();
        let aware = DiscourseModel::new(
            DiscourseConfig::default(),
            DiscourseModel::build_vocab(std::slice::from_ref(&doc)),
        );
        let off = aware.classify_document(&doc, &[false, false, false]).unwrap();
        let on = aware.classify_document(&doc, &[true, true, true]).unwrap();
        assert_ne!(off[0].probs, on[0].probs, "salient channel is live");

        let base = aware.with_salience_aware(false);
        let b_off = base.classify_document(&doc, &[false, false, false]).unwrap();
        let b_on = base.classify_document(&doc, &[true, true, true]).unwrap();
        for (x, y) in b_off.iter().zip(&b_on) {
            assert_eq!(x.probs, y.probs, "base model ignores flags");
        }
    }

    #[test]
    fn keep_set_filtering() {
        use DiscourseLabel::*;
        assert_eq!(filter_by_discourse(&[M1, D3]), vec![0]);
        assert_eq!(filter_by_discourse(&[D1, D1, D1]), Vec::<usize>::new());
        assert_eq!(filter_by_discourse(&[C2, C2]), vec![0, 1]);
        assert_eq!(filter_by_discourse(&[M1, D2, C1, D4, M2, C2]), vec![0, 2, 4, 5]);
        // Second pass over kept labels keeps everything.
        let labels = [M1, D2, C1];
        let kept: Vec<DiscourseLabel> =
            filter_by_discourse(&labels).into_iter().map(|i| labels[i]).collect();
        assert_eq!(filter_by_discourse(&kept).len(), kept.len());
    }

    #[test]
    fn f1_arithmetic() {
        use DiscourseLabel::*;
        let gold = [M1, M2, D1, D1];
        let pred = [M1, D1, D1, D1];
        let f = discourse_f1(&pred, &gold);
        assert!((f.micro_f1 - 0.75).abs() < 1e-12);
        assert!((f.per_class[M1.index()] - 1.0).abs() < 1e-12);
        assert!((f.per_class[M2.index()] - 0.0).abs() < 1e-12);
        // D1: tp=2, fp=1, fn=0 so F1 = 4/5.
        assert!((f.per_class[D1.index()] - 0.8).abs() < 1e-12);
        let mean: f64 = f.per_class.iter().sum::<f64>() / 8.0;
        assert!((f.macro_f1 - mean).abs() < 1e-12);
        assert!(f.per_class.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn gradients_match_finite_differences_through_salient_channel() {
        let doc = tiny_doc();
        let model = DiscourseModel::new(
            DiscourseConfig { word_hidden: 6, sent_hidden: 6, attn_dim: 4, ff_hidden: 8, embed_dim: 6, ..Default::default() },
            DiscourseModel::build_vocab(std::slice::from_ref(&doc)),
        );
        let flags = vec![true, false, true];
        let labels = vec![DiscourseLabel::M1, DiscourseLabel::D1, DiscourseLabel::C1];
        let mut params = model.params.clone();
        let mut rng = SeededRng::new(29);
        let report = grad_check(&mut params, GRAD_CHECK_EPS, Some(4), &mut rng, |tape, ps| {
            model.doc_loss_with(tape, ps, &doc, &flags, &labels).unwrap()
        })
        .unwrap();
        assert!(report.max_rel_err < GRAD_CHECK_TOL, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn overfits_synthetic_labels() {
        let corpus = generate_synthetic(&SyntheticConfig {
            num_docs: 20,
            backbone_min: 3,
            backbone_max: 5,
            distractor_rate: 0.3,
            event_vocab_size: 12,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let flags = gold_flags(&corpus).unwrap();
        let config = DiscourseConfig {
            epochs: 500,
            early_stop_accuracy: Some(1.0),
            ..DiscourseConfig::default()
        };
        let (_, history) = train_discourse(&corpus, &flags, config).unwrap();
        let last = history.last().unwrap();
        assert!(
            (last.f1.micro_f1 - 1.0).abs() < 1e-12,
            "training accuracy {} after {} epochs",
            last.f1.micro_f1,
            history.len()
        );
    }

    #[test]
    fn zero_epochs_is_identity() {
        let corpus = generate_synthetic(&SyntheticConfig {
            num_docs: 3,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let flags = gold_flags(&corpus).unwrap();
        let config = DiscourseConfig { epochs: 0, ..DiscourseConfig::default() };
        let (trained, history) = train_discourse(&corpus, &flags, config.clone()).unwrap();
        assert!(history.is_empty());
        let fresh = DiscourseModel::new(config, DiscourseModel::build_vocab(&corpus));
        for (a, b) in trained.params.iter().zip(fresh.params.iter()) {
            assert_eq!(a.value.data, b.value.data, "{}", a.name);
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_outputs() {
        let corpus = generate_synthetic(&SyntheticConfig {
            num_docs: 4,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let flags = gold_flags(&corpus).unwrap();
        let config = DiscourseConfig { epochs: 2, ..DiscourseConfig::default() };
        let (model, _) = train_discourse(&corpus, &flags, config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("discourse.json");
        model.save(&path).unwrap();
        let loaded = DiscourseModel::load(&path).unwrap();
        for (di, doc) in corpus.iter().enumerate() {
            let a = model.classify_document(doc, &flags[di]).unwrap();
            let b = loaded.classify_document(doc, &flags[di]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn missing_gold_labels_are_reported() {
        let mut doc = tiny_doc();
        doc.gold = None;
        let flags = vec![vec![false; 3]];
        let err = train_discourse(&[doc], &flags, DiscourseConfig::default());
        assert!(matches!(err, Err(Error::MissingArtifact { .. })));
    }
}
