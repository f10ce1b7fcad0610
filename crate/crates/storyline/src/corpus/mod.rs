//! Document model, JSONL ingestion, lemmatization, and the synthetic
//! corpus generator.

pub mod lemma;
pub mod synth;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ioutil;

pub use lemma::lemmatize;
pub use synth::{generate_cloze_stories, generate_synthetic, SyntheticConfig, SyntheticWorld};

/// Event or entity mention anchored at a head token, with a contiguous span
/// inside one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub sent: usize,
    pub tok: usize,
    pub span_start: usize,
    pub span_end: usize,
}

impl Mention {
    pub fn single(sent: usize, tok: usize) -> Self {
        Mention { sent, tok, span_start: tok, span_end: tok }
    }
}

/// Sentence-level discourse role. M/C labels mark content sentences
/// (main events, consequences, current-context cause/effect); D labels mark
/// commentary and background the downstream filter drops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiscourseLabel {
    M1,
    M2,
    C1,
    C2,
    D1,
    D2,
    D3,
    D4,
}

impl DiscourseLabel {
    pub const ALL: [DiscourseLabel; 8] = [
        DiscourseLabel::M1,
        DiscourseLabel::M2,
        DiscourseLabel::C1,
        DiscourseLabel::C2,
        DiscourseLabel::D1,
        DiscourseLabel::D2,
        DiscourseLabel::D3,
        DiscourseLabel::D4,
    ];

    /// Labels whose sentences are retained when filtering by discourse role.
    pub fn is_kept(self) -> bool {
        matches!(
            self,
            DiscourseLabel::M1 | DiscourseLabel::M2 | DiscourseLabel::C1 | DiscourseLabel::C2
        )
    }

    pub fn index(self) -> usize {
        DiscourseLabel::ALL.iter().position(|l| *l == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        DiscourseLabel::ALL.get(i).copied()
    }
}

impl fmt::Display for DiscourseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl FromStr for DiscourseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DiscourseLabel::ALL
            .iter()
            .find(|l| format!("{l:?}") == s)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// One temporal-ordering question over a document's events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub question: Vec<String>,
    pub answer_event_indices: Vec<usize>,
}

/// Ground-truth annotations carried by a document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Gold {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salience: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discourse: Option<Vec<DiscourseLabel>>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "abstract")]
    pub abstract_tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa: Option<Vec<QaItem>>,
}

impl Gold {
    pub fn is_empty(&self) -> bool {
        self.relations.is_none()
            && self.salience.is_none()
            && self.discourse.is_none()
            && self.abstract_tokens.is_none()
            && self.qa.is_none()
    }
}

/// Tokenized document with event and entity mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Vec<String>>,
    pub events: Vec<Mention>,
    pub entities: Vec<Mention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Gold>,
}

impl Document {
    pub fn token(&self, sent: usize, tok: usize) -> &str {
        &self.sentences[sent][tok]
    }

    pub fn mention_surface(&self, m: &Mention) -> &str {
        self.token(m.sent, m.tok)
    }

    pub fn mention_lemma(&self, m: &Mention) -> String {
        lemmatize(self.mention_surface(m))
    }

    pub fn event_lemma(&self, event_index: usize) -> String {
        self.mention_lemma(&self.events[event_index])
    }

    /// Indices of events whose head lies in the given sentence.
    pub fn events_in_sentence(&self, sent: usize) -> Vec<usize> {
        (0..self.events.len()).filter(|i| self.events[*i].sent == sent).collect()
    }

    pub fn gold(&self) -> Option<&Gold> {
        self.gold.as_ref()
    }

    fn invalid(&self, message: impl Into<String>) -> Error {
        Error::InvalidDocument { doc_id: self.doc_id.clone(), message: message.into() }
    }

    fn check_mention(&self, kind: &str, i: usize, m: &Mention) -> Result<()> {
        let fail = |msg: String| Err(self.invalid(format!("{kind} {i}: {msg}")));
        if m.sent >= self.sentences.len() {
            return fail(format!("sentence index {} out of bounds", m.sent));
        }
        let len = self.sentences[m.sent].len();
        if m.tok >= len {
            return fail(format!("token index {} exceeds sentence length {len}", m.tok));
        }
        if m.span_start > m.tok || m.tok > m.span_end {
            return fail(format!("head {} outside span {}..{}", m.tok, m.span_start, m.span_end));
        }
        if m.span_end >= len {
            return fail(format!("span end {} exceeds sentence length {len}", m.span_end));
        }
        Ok(())
    }

    /// Enforce the structural invariants; run on every load and before save.
    pub fn validate(&self) -> Result<()> {
        if self.sentences.is_empty() {
            return Err(self.invalid("document has no sentences"));
        }
        for (si, sent) in self.sentences.iter().enumerate() {
            if sent.is_empty() {
                return Err(self.invalid(format!("sentence {si} is empty")));
            }
            if sent.iter().any(|t| t.is_empty()) {
                return Err(self.invalid(format!("sentence {si} contains an empty token")));
            }
        }
        let mut heads = BTreeSet::new();
        for (i, m) in self.events.iter().enumerate() {
            self.check_mention("event", i, m)?;
            if !heads.insert((m.sent, m.tok)) {
                return Err(self.invalid(format!(
                    "event {i} shares head token ({}, {}) with an earlier event",
                    m.sent, m.tok
                )));
            }
        }
        for (i, m) in self.entities.iter().enumerate() {
            self.check_mention("entity", i, m)?;
        }
        if let Some(gold) = &self.gold {
            if let Some(rel) = &gold.relations {
                for (src, dst) in rel {
                    if *src >= self.events.len() || *dst >= self.events.len() {
                        return Err(
                            self.invalid(format!("relation ({src}, {dst}) out of event range"))
                        );
                    }
                    if src == dst {
                        return Err(self.invalid(format!("relation ({src}, {dst}) is a self-loop")));
                    }
                }
            }
            if let Some(sal) = &gold.salience {
                if sal.len() != self.events.len() {
                    return Err(self.invalid(format!(
                        "salience length {} does not match {} events",
                        sal.len(),
                        self.events.len()
                    )));
                }
                if sal.iter().any(|v| *v > 1) {
                    return Err(self.invalid("salience flags must be 0 or 1"));
                }
            }
            if let Some(disc) = &gold.discourse {
                if disc.len() != self.sentences.len() {
                    return Err(self.invalid(format!(
                        "discourse length {} does not match {} sentences",
                        disc.len(),
                        self.sentences.len()
                    )));
                }
            }
            if let Some(qa) = &gold.qa {
                for (qi, item) in qa.iter().enumerate() {
                    if item.question.is_empty() {
                        return Err(self.invalid(format!("qa item {qi} has an empty question")));
                    }
                    if let Some(bad) =
                        item.answer_event_indices.iter().find(|i| **i >= self.events.len())
                    {
                        return Err(self.invalid(format!(
                            "qa item {qi} references event {bad} out of range"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Load a JSONL document file, validating every record.
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let text = ioutil::read_file(path)?;
    let mut docs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        doc.validate().map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Serialize documents to JSONL, one record per line, atomically.
pub fn save_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        doc.validate()?;
        out.push_str(&serde_json::to_string(doc)?);
        out.push('\n');
    }
    ioutil::write_atomic(path, out.as_bytes())
}

/// An event is salient iff its lemma appears in the abstract lemma set.
pub fn derive_salience_labels(doc: &Document, abstract_lemmas: &BTreeSet<String>) -> Vec<bool> {
    doc.events.iter().map(|m| abstract_lemmas.contains(&doc.mention_lemma(m))).collect()
}

/// Lemma set of a document's gold abstract, if present.
pub fn abstract_lemma_set(doc: &Document) -> Option<BTreeSet<String>> {
    let tokens = doc.gold.as_ref()?.abstract_tokens.as_ref()?;
    Some(tokens.iter().map(|t| lemmatize(t)).collect())
}
