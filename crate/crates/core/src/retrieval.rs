//! Dirichlet-smoothed query likelihood and BM25 over an [`InvertedIndex`].
//!
//! Query likelihood for document `d`:
//!
//! ```text
//! score(d) = Σ_t w(t) · ln( (tf(t,d) + μ·p(t|C)) / (|d| + μ) )
//! p(t|C)   = cf(t) / |C|
//! ```
//!
//! Terms with `cf(t) = 0` are skipped. Only documents containing at least one
//! query term are scored; ties are broken by ascending external doc id.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{InvertedIndex, Posting};
use crate::textproc::TermList;

/// Merged bag of weighted terms, sorted by term.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightedQuery {
    terms: Vec<(String, f64)>,
}

impl WeightedQuery {
    /// Merges duplicate terms by summing weights. Non-positive or non-finite
    /// weights are rejected.
    pub fn new<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut merged: BTreeMap<String, f64> = BTreeMap::new();
        for (term, weight) in terms {
            let term = term.into();
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::InvalidParam(format!("weight for {term:?} must be positive, got {weight}")));
            }
            if term.is_empty() || term.chars().any(char::is_whitespace) {
                return Err(Error::InvalidParam(format!("invalid query term {term:?}")));
            }
            *merged.entry(term).or_default() += weight;
        }
        Ok(Self { terms: merged.into_iter().collect() })
    }

    /// Every term of `list` with weight 1 per occurrence.
    pub fn from_terms(list: &TermList) -> Self {
        Self::new(list.iter().map(|t| (t, 1.0))).expect("term lists hold valid terms")
    }

    pub fn terms(&self) -> &[(String, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn weight(&self, term: &str) -> Option<f64> {
        self.terms.iter().find(|(t, _)| t == term).map(|(_, w)| *w)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.terms.iter().map(|(t, w)| (t.clone(), w * factor)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scorer {
    Ql,
    Bm25,
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ql" => Ok(Scorer::Ql),
            "bm25" => Ok(Scorer::Bm25),
            other => Err(Error::InvalidParam(format!("unknown scorer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub mu: f64,
    pub k: usize,
    pub scorer: Scorer,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self { mu: 2500.0, k: 1000, scorer: Scorer::Ql, bm25_k1: 0.9, bm25_b: 0.4 }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParam(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.k == 0 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        if !(self.bm25_k1.is_finite() && self.bm25_k1 >= 0.0) {
            return Err(Error::InvalidParam(format!("bm25 k1 must be >= 0, got {}", self.bm25_k1)));
        }
        if !(0.0..=1.0).contains(&self.bm25_b) {
            return Err(Error::InvalidParam(format!("bm25 b must be in [0, 1], got {}", self.bm25_b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

fn tf_in(postings: &[Posting], ordinal: u32) -> u32 {
    postings
        .binary_search_by_key(&ordinal, |p| p.doc)
        .map_or(0, |i| postings[i].tf)
}

/// Query likelihood of a single document.
pub fn ql_score(index: &InvertedIndex, query: &WeightedQuery, ordinal: u32, mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParam(format!("mu must be > 0, got {mu}")));
    }
    let collection = index.collection_length() as f64;
    let denom = (f64::from(index.doc_length(ordinal)) + mu).ln();
    let mut score = 0.0;
    for (term, weight) in query.terms() {
        let cf = index.collection_tf(term);
        if cf == 0 {
            continue;
        }
        let p = cf as f64 / collection;
        let tf = f64::from(tf_in(index.postings(term), ordinal));
        score += weight * ((tf + mu * p).ln() - denom);
    }
    Ok(score)
}

/// Robertson BM25 with `idf = ln((N − df + 0.5)/(df + 0.5) + 1)`, each term
/// scaled by its query weight.
pub fn bm25_score(index: &InvertedIndex, query: &WeightedQuery, ordinal: u32, k1: f64, b: f64) -> f64 {
    let n = index.doc_count() as f64;
    let avgdl = index.avg_doc_length();
    let len_norm = 1.0 - b + b * f64::from(index.doc_length(ordinal)) / avgdl;
    query
        .terms()
        .iter()
        .map(|(term, weight)| {
            let postings = index.postings(term);
            let tf = f64::from(tf_in(postings, ordinal));
            if tf == 0.0 {
                return 0.0;
            }
            let df = postings.len() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            weight * idf * tf * (k1 + 1.0) / (tf + k1 * len_norm)
        })
        .sum()
}

/// Descending score, then ascending doc id.
pub(crate) fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Top-k documents for `query`, scored document-at-a-time over the union of
/// the query terms' posting lists.
pub fn search(index: &InvertedIndex, query: &WeightedQuery, params: &RetrievalParams) -> Result<Vec<ScoredDoc>> {
    params.validate()?;
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let collection = index.collection_length() as f64;
    let avgdl = index.avg_doc_length();
    let n = index.doc_count() as f64;

    struct Cursor<'a> {
        postings: &'a [Posting],
        pos: usize,
        weight: f64,
        // QL: μ·p(t|C). BM25: idf.
        term_const: f64,
    }
    let mut cursors: Vec<Cursor<'_>> = query
        .terms()
        .iter()
        .filter_map(|(term, weight)| {
            let postings = index.postings(term);
            if postings.is_empty() {
                return None;
            }
            let term_const = match params.scorer {
                Scorer::Ql => params.mu * (index.collection_tf(term) as f64 / collection),
                Scorer::Bm25 => {
                    let df = postings.len() as f64;
                    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
                }
            };
            Some(Cursor { postings, pos: 0, weight: *weight, term_const })
        })
        .collect();

    let mut hits: Vec<(u32, f64)> = Vec::new();
    while let Some(doc) = cursors.iter().filter_map(|c| c.postings.get(c.pos).map(|p| p.doc)).min() {
        let len = f64::from(index.doc_length(doc));
        let mut score = 0.0;
        match params.scorer {
            Scorer::Ql => {
                let denom = (len + params.mu).ln();
                for c in &mut cursors {
                    let tf = match c.postings.get(c.pos) {
                        Some(p) if p.doc == doc => {
                            c.pos += 1;
                            f64::from(p.tf)
                        }
                        _ => 0.0,
                    };
                    score += c.weight * ((tf + c.term_const).ln() - denom);
                }
            }
            Scorer::Bm25 => {
                let len_norm = 1.0 - params.bm25_b + params.bm25_b * len / avgdl;
                for c in &mut cursors {
                    if let Some(p) = c.postings.get(c.pos).filter(|p| p.doc == doc) {
                        c.pos += 1;
                        let tf = f64::from(p.tf);
                        score += c.weight * c.term_const * tf * (params.bm25_k1 + 1.0)
                            / (tf + params.bm25_k1 * len_norm);
                    }
                }
            }
        }
        hits.push((doc, score));
    }

    let cmp = |a: &(u32, f64), b: &(u32, f64)| rank_order((index.doc_id(a.0), a.1), (index.doc_id(b.0), b.1));
    if hits.len() > params.k {
        hits.select_nth_unstable_by(params.k - 1, cmp);
        hits.truncate(params.k);
    }
    hits.sort_unstable_by(cmp);
    Ok(hits
        .into_iter()
        .enumerate()
        .map(|(i, (doc, score))| ScoredDoc { doc_id: index.doc_id(doc).to_string(), score, rank: i + 1 })
        .collect())
}
