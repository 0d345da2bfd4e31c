//! Rule-based conversational passage search.
//!
//! A follow-up question is completed from its session (pronouns resolved
//! against the first turn, then fused with the first and previous turns into
//! a weighted query), classified by expected answer type, scored against an
//! inverted index with Dirichlet-smoothed query likelihood, and reranked by
//! answer-type cues found in the passage text. [`evalkit`] scores the
//! resulting TREC runs with Recall@k and NDCG@k.

pub mod classify;
pub mod error;
pub mod evalkit;
pub mod index;
pub mod rerank;
pub mod retrieval;
pub mod rewrite;
pub mod service;
pub mod synthetic;
pub mod textproc;

pub use error::{Error, Result};
