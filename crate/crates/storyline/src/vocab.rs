//! Insertion-ordered string interner shared by the trainable models.
//!
//! Ids are assigned in first-seen order, so building a vocabulary from the
//! same corpus in the same order always yields the same ids; that keeps
//! checkpoints and training runs reproducible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    items: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Vocab::default()
    }

    /// Vocabulary seeded with special tokens occupying the first ids.
    pub fn with_specials(specials: &[&str]) -> Self {
        let mut v = Vocab::new();
        for s in specials {
            v.intern(s);
        }
        v
    }

    /// Id of `s`, interning it if new.
    pub fn intern(&mut self, s: &str) -> usize {
        if let Some(id) = self.index.get(s) {
            return *id;
        }
        let id = self.items.len();
        self.items.push(s.to_string());
        self.index.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Id of `s`, or `fallback` (an unknown-token id) when absent.
    pub fn get_or(&self, s: &str, fallback: usize) -> usize {
        self.get(s).unwrap_or(fallback)
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

/// Surface-token vocabulary over a corpus in document order, with the
/// unknown token at id 0.
pub fn token_vocab(docs: &[crate::corpus::Document]) -> Vocab {
    let mut vocab = Vocab::with_specials(&["<unk>"]);
    for doc in docs {
        for sent in &doc.sentences {
            for tok in sent {
                vocab.intern(tok);
            }
        }
    }
    vocab
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Vec<String> {
        v.items
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(items: Vec<String>) -> Result<Self> {
        let mut v = Vocab::new();
        for s in &items {
            v.intern(s);
        }
        if v.len() != items.len() {
            return Err(Error::Checkpoint("vocabulary contains duplicates".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_insertion_ordered_and_idempotent() {
        let mut v = Vocab::with_specials(&["<unk>"]);
        assert_eq!(v.intern("run"), 1);
        assert_eq!(v.intern("jump"), 2);
        assert_eq!(v.intern("run"), 1);
        assert_eq!(v.len(), 3);
        assert_eq!(v.get_or("missing", 0), 0);
        assert_eq!(v.item(2), "jump");
    }

    #[test]
    fn serde_round_trip_preserves_ids() {
        let mut v = Vocab::new();
        v.intern("b");
        v.intern("a");
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["b","a"]"#);
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.get("b"), Some(0));

        let dup: std::result::Result<Vocab, _> = serde_json::from_str(r#"["x","x"]"#);
        assert!(dup.is_err());
    }
}
