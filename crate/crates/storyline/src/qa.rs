//! Temporal-ordering question answering over event chains: joined
//! question/content inputs, a per-token answer head, set-overlap metrics,
//! and question-prefix categorization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::set_f1;
use crate::nn::{
    checkpoint, Adam, AdamConfig, BiLstm, Init, ParamId, ParamSet, Tape, Var, INIT_SCALE,
};
use crate::rng::SeededRng;
use crate::vocab::Vocab;

pub const SEP: &str = "<sep>";

const UNK_ID: usize = 0;

const INIT_SALT: u64 = 0x51_41_01;
const TRAIN_SALT: u64 = 0x51_41_02;

/// Question families recognized by prefix matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionCategory {
    Before,
    After,
    #[serde(rename = "Co-occurring")]
    CoOccurring,
    Other,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 4] = [
        QuestionCategory::Before,
        QuestionCategory::After,
        QuestionCategory::CoOccurring,
        QuestionCategory::Other,
    ];
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            QuestionCategory::Before => "Before",
            QuestionCategory::After => "After",
            QuestionCategory::CoOccurring => "Co-occurring",
            QuestionCategory::Other => "Other",
        };
        f.write_str(name)
    }
}

/// A question over a chain's events, with its gold answer as a set of
/// content positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemporalQuestion {
    pub tokens: Vec<String>,
    pub gold: BTreeSet<usize>,
    pub category: QuestionCategory,
}

impl TemporalQuestion {
    /// Surface form used for prefix categorization.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// One training or evaluation instance: a question about a content
/// sequence of event lemmas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaExample {
    pub question: TemporalQuestion,
    pub content: Vec<String>,
}

/// Ordered (prefix, category) entries; the longest matching prefix wins and
/// unmatched questions fall through to Other.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixTable {
    entries: Vec<(String, QuestionCategory)>,
}

impl PrefixTable {
    pub fn new(entries: Vec<(String, QuestionCategory)>) -> Result<Self> {
        if entries.iter().any(|(p, _)| p.is_empty()) {
            return Err(Error::InvalidConfig("prefix table entries cannot be empty".into()));
        }
        Ok(PrefixTable { entries })
    }

    pub fn entries(&self) -> &[(String, QuestionCategory)] {
        &self.entries
    }

    /// Longest matching prefix's category; Other when nothing matches.
    /// Equal-length matches resolve to the earliest table entry.
    pub fn categorize(&self, text: &str) -> QuestionCategory {
        let mut best: Option<(usize, QuestionCategory)> = None;
        for (prefix, category) in &self.entries {
            if text.starts_with(prefix.as_str())
                && best.is_none_or(|(len, _)| prefix.len() > len)
            {
                best = Some((prefix.len(), *category));
            }
        }
        best.map_or(QuestionCategory::Other, |(_, c)| c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table: PrefixTable = crate::ioutil::read_json(path)?;
        PrefixTable::new(table.entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::ioutil::write_json(path, self)
    }
}

impl Default for PrefixTable {
    fn default() -> Self {
        let entry = |p: &str, c| (p.to_string(), c);
        PrefixTable {
            entries: vec![
                entry("What happened before", QuestionCategory::Before),
                entry("What event happened before", QuestionCategory::Before),
                entry("What events happened before", QuestionCategory::Before),
                entry("What happened after", QuestionCategory::After),
                entry("What event happened after", QuestionCategory::After),
                entry("What will happen after", QuestionCategory::After),
                entry("What happened while", QuestionCategory::CoOccurring),
                entry("What happened during", QuestionCategory::CoOccurring),
            ],
        }
    }
}

/// Assign a question's category from its joined token text.
pub fn categorize(question: &TemporalQuestion, table: &PrefixTable) -> QuestionCategory {
    table.categorize(&question.text())
}

/// A question/content pair joined into one token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinedInput {
    pub tokens: Vec<String>,
    pub sep_index: usize,
}

impl JoinedInput {
    /// Positions of the content tokens within the joined sequence.
    pub fn content_positions(&self) -> std::ops::Range<usize> {
        self.sep_index + 1..self.tokens.len()
    }
}

/// `[question..., SEP, content...]`; both sides must be non-empty.
pub fn build_input(question: &[String], content: &[String]) -> Result<JoinedInput> {
    if question.is_empty() {
        return Err(Error::EmptyInput("question tokens".into()));
    }
    if content.is_empty() {
        return Err(Error::EmptyInput("content tokens".into()));
    }
    let mut tokens = Vec::with_capacity(question.len() + 1 + content.len());
    tokens.extend_from_slice(question);
    tokens.push(SEP.to_string());
    tokens.extend_from_slice(content);
    Ok(JoinedInput { tokens, sep_index: question.len() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaConfig {
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            seed: 43,
            embed_dim: 16,
            hidden_dim: 16,
            epochs: 25,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct QaMeta {
    config: QaConfig,
    vocab: Vocab,
}

/// Token-tagging answer model: shared embedding over question and content
/// tokens, a bidirectional encoder over the joined sequence, and a sigmoid
/// head per content token.
#[derive(Debug, Clone)]
pub struct QaModel {
    config: QaConfig,
    vocab: Vocab,
    params: ParamSet,
    emb: ParamId,
    encoder: BiLstm,
    head_w: ParamId,
    head_b: ParamId,
}

impl QaModel {
    pub fn new(config: QaConfig, vocab: Vocab) -> Self {
        let mut rng = SeededRng::derive(config.seed, INIT_SALT);
        let mut params = ParamSet::new();
        let emb = params.register(
            "qa.emb",
            vocab.len(),
            config.embed_dim,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let encoder =
            BiLstm::new("qa.enc", config.embed_dim, config.hidden_dim, &mut params, &mut rng, INIT_SCALE);
        let head_w = params.register(
            "qa.head_w",
            encoder.output_dim(),
            1,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let head_b = params.register("qa.head_b", 1, 1, Init::Zeros, &mut rng);
        QaModel { config, vocab, params, emb, encoder, head_w, head_b }
    }

    /// Question and content tokens in example order, with the unknown token
    /// and separator sentinel first.
    pub fn build_vocab(examples: &[QaExample]) -> Vocab {
        let mut vocab = Vocab::with_specials(&["<unk>", SEP]);
        for ex in examples {
            for t in ex.question.tokens.iter().chain(&ex.content) {
                vocab.intern(t);
            }
        }
        vocab
    }

    pub fn config(&self) -> &QaConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Per-content-token answer probabilities on the given tape.
    pub fn content_probs_with(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        question: &[String],
        content: &[String],
    ) -> Result<Vec<Var>> {
        let joined = build_input(question, content)?;
        let emb = tape.param(params, self.emb);
        let xs: Vec<Var> = joined
            .tokens
            .iter()
            .map(|t| tape.row(emb, self.vocab.get_or(t, UNK_ID), self.config.embed_dim))
            .collect();
        let states = self.encoder.encode(tape, params, &xs);
        let w = tape.param(params, self.head_w);
        let b = tape.param(params, self.head_b);
        Ok(joined
            .content_positions()
            .map(|pos| {
                let z = tape.dot(w, states[pos]);
                let zb = tape.add(z, b);
                tape.sigmoid(zb)
            })
            .collect())
    }

    /// Mean BCE over content tokens; question tokens carry no loss.
    pub fn doc_loss_with(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        example: &QaExample,
    ) -> Result<Var> {
        if let Some(bad) = example.question.gold.iter().find(|i| **i >= example.content.len()) {
            return Err(Error::PositionOutOfRange {
                position: *bad,
                len: example.content.len(),
            });
        }
        let probs =
            self.content_probs_with(tape, params, &example.question.tokens, &example.content)?;
        let losses: Vec<Var> = probs
            .iter()
            .enumerate()
            .map(|(i, p)| tape.bce(*p, f64::from(example.question.gold.contains(&i))))
            .collect();
        let total = tape.add_many(&losses);
        Ok(tape.scale(total, 1.0 / losses.len() as f64))
    }

    /// Content positions whose probability is strictly above 0.5; always a
    /// subset of the content indices.
    pub fn answer(&self, question: &[String], content: &[String]) -> Result<BTreeSet<usize>> {
        let mut tape = Tape::new();
        let probs = self.content_probs_with(&mut tape, &self.params, question, content)?;
        Ok(probs
            .iter()
            .enumerate()
            .filter(|(_, p)| tape.scalar(**p) > 0.5)
            .map(|(i, _)| i)
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = QaMeta { config: self.config.clone(), vocab: self.vocab.clone() };
        checkpoint::save(path, &meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, tensors) = checkpoint::load::<QaMeta>(path)?;
        let mut model = QaModel::new(meta.config, meta.vocab);
        checkpoint::restore(&mut model.params, &tensors)?;
        Ok(model)
    }
}

/// Train the answer head with per-example optimizer steps and seeded epoch
/// shuffles; deterministic per seed.
pub fn train_qa(examples: &[QaExample], config: QaConfig) -> Result<QaModel> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("QA training examples".into()));
    }
    let vocab = QaModel::build_vocab(examples);
    let mut model = QaModel::new(config, vocab);
    let mut adam = Adam::new(model.config.adam, &model.params);
    let mut rng = SeededRng::derive(model.config.seed, TRAIN_SALT);
    for _epoch in 0..model.config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        rng.shuffle(&mut order);
        for ei in order {
            let mut tape = Tape::new();
            let loss = model.doc_loss_with(&mut tape, &model.params, &examples[ei])?;
            if !tape.scalar(loss).is_finite() {
                return Err(Error::NonFiniteLoss("QA training".into()));
            }
            tape.backward(loss);
            tape.apply_grads(&mut model.params);
            adam.step(&mut model.params)?;
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub count: usize,
    pub f1: f64,
}

/// Aggregate answer quality: mean per-question F1, exact-match rate, and
/// the same F1 mean broken down by question category. Every category key is
/// always present; empty categories report count 0 and F1 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaMetrics {
    pub macro_f1: f64,
    pub exact_match: f64,
    pub per_category: BTreeMap<QuestionCategory, CategoryMetrics>,
}

/// Per-question set F1 against gold; two empty sets agree perfectly.
pub fn question_f1(prediction: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> f64 {
    set_f1(prediction, gold).2
}

/// One prediction set per question, in question order.
pub fn metrics(
    predictions: &[BTreeSet<usize>],
    questions: &[TemporalQuestion],
) -> Result<QaMetrics> {
    if predictions.len() != questions.len() {
        return Err(Error::DimensionMismatch {
            context: "QA predictions vs questions".into(),
            expected: questions.len(),
            got: predictions.len(),
        });
    }
    if questions.is_empty() {
        return Err(Error::EmptyInput("QA evaluation questions".into()));
    }
    let mut f1_sum = 0.0;
    let mut exact = 0usize;
    let mut sums: BTreeMap<QuestionCategory, (usize, f64)> =
        QuestionCategory::ALL.iter().map(|c| (*c, (0, 0.0))).collect();
    for (pred, q) in predictions.iter().zip(questions) {
        let f1 = question_f1(pred, &q.gold);
        f1_sum += f1;
        exact += usize::from(pred == &q.gold);
        let entry = sums.get_mut(&q.category).expect("all categories preseeded");
        entry.0 += 1;
        entry.1 += f1;
    }
    let per_category = sums
        .into_iter()
        .map(|(c, (count, sum))| {
            let f1 = if count == 0 { 0.0 } else { sum / count as f64 };
            (c, CategoryMetrics { count, f1 })
        })
        .collect();
    Ok(QaMetrics {
        macro_f1: f1_sum / questions.len() as f64,
        exact_match: exact as f64 / questions.len() as f64,
        per_category,
    })
}
