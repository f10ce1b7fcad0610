//! Salient event chain extraction with discourse-aware filtering.
//!
//! The crate turns documents annotated with event and entity mentions into
//! temporal event graphs, distills those graphs into linear event chains,
//! filters the chains through salience and discourse models, and consumes
//! the result with masked event language models and extractive temporal
//! question answering. A synthetic corpus generator provides labeled data
//! for end-to-end experiments, and `pipeline` wires the stages together
//! behind a single deterministic entry point.

pub mod chains;
pub mod corpus;
pub mod discourse;
pub mod error;
pub mod event_lm;
pub mod extract;
pub mod formats;
pub mod ioutil;
pub mod nn;
pub mod pipeline;
pub mod qa;
pub mod rng;
pub mod salience;
pub mod vocab;

pub use error::{Error, Result};
