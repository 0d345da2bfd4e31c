//! Immutable in-memory inverted index with the collection statistics used by
//! query-likelihood and BM25 scoring.

mod corpus;
mod persist;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::textproc::{content_hash, ContentHash, TextConfig};

pub use corpus::{read_corpus, read_corpus_file, CorpusFormat};
pub use persist::{FORMAT_VERSION, MAGIC};

/// One retrieval unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { doc_id: doc_id.into(), text: text.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Return an empty index instead of [`Error::EmptyCorpus`].
    pub allow_empty: bool,
    /// Drop documents whose normalized text was already seen. Only unit
    /// fixtures turn this off.
    pub dedup: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { allow_empty: false, dedup: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    config: TextConfig,
    dictionary: HashMap<String, Vec<Posting>>,
    collection_tf: HashMap<String, u64>,
    doc_lengths: Vec<u32>,
    doc_ids: Vec<String>,
    doc_texts: Vec<String>,
    collection_length: u64,
    id_lookup: HashMap<String, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexStats {
    pub docs: usize,
    pub terms: usize,
    pub collection_length: u64,
    pub mean_doc_length: f64,
}

impl InvertedIndex {
    /// Builds an index from a document stream. Records are tokenized in
    /// parallel but ordinals follow input order, so the result does not depend
    /// on thread scheduling.
    pub fn build<I>(docs: I, config: TextConfig, options: BuildOptions) -> Result<Self>
    where
        I: IntoIterator<Item = Result<Document>>,
    {
        let docs: Vec<Document> = docs.into_iter().collect::<Result<_>>()?;
        let processed: Vec<(ContentHash, Vec<String>)> = docs
            .par_iter()
            .map(|d| (content_hash(&d.text), config.process(&d.text).terms))
            .collect();

        let mut seen_ids: HashMap<&str, ContentHash> = HashMap::new();
        let mut seen_content: HashMap<ContentHash, ()> = HashMap::new();
        let mut index = InvertedIndex {
            config,
            dictionary: HashMap::new(),
            collection_tf: HashMap::new(),
            doc_lengths: Vec::new(),
            doc_ids: Vec::new(),
            doc_texts: Vec::new(),
            collection_length: 0,
            id_lookup: HashMap::new(),
        };
        for (doc, (hash, terms)) in docs.iter().zip(processed) {
            if let Some(prev) = seen_ids.get(doc.doc_id.as_str()) {
                if *prev != hash {
                    return Err(Error::DuplicateDocId(doc.doc_id.clone()));
                }
                continue;
            }
            seen_ids.insert(&doc.doc_id, hash);
            if options.dedup && seen_content.insert(hash, ()).is_some() {
                log::debug!("dropping duplicate document {}", doc.doc_id);
                continue;
            }
            if terms.is_empty() {
                log::debug!("dropping empty document {}", doc.doc_id);
                continue;
            }
            index.push_document(doc, terms);
        }
        if index.collection_length == 0 && !options.allow_empty {
            return Err(Error::EmptyCorpus);
        }
        Ok(index)
    }

    fn push_document(&mut self, doc: &Document, terms: Vec<String>) {
        let ordinal = u32::try_from(self.doc_ids.len()).expect("more than u32::MAX documents");
        let length = terms.len();
        let mut counts: HashMap<String, u32> = HashMap::new();
        for term in terms {
            *counts.entry(term).or_default() += 1;
        }
        for (term, tf) in counts {
            *self.collection_tf.entry(term.clone()).or_default() += u64::from(tf);
            self.dictionary.entry(term).or_default().push(Posting { doc: ordinal, tf });
        }
        self.doc_lengths.push(length as u32);
        self.id_lookup.insert(doc.doc_id.clone(), ordinal);
        self.doc_ids.push(doc.doc_id.clone());
        self.doc_texts.push(doc.text.clone());
        self.collection_length += length as u64;
    }

    pub fn config(&self) -> &TextConfig {
        &self.config
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn term_count(&self) -> usize {
        self.dictionary.len()
    }

    pub fn collection_length(&self) -> u64 {
        self.collection_length
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.dictionary.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn collection_tf(&self, term: &str) -> u64 {
        self.collection_tf.get(term).copied().unwrap_or(0)
    }

    /// Terms in lexicographic order.
    pub fn terms(&self) -> Vec<&str> {
        let mut terms: Vec<&str> = self.dictionary.keys().map(String::as_str).collect();
        terms.sort_unstable();
        terms
    }

    pub fn doc_length(&self, ordinal: u32) -> u32 {
        self.doc_lengths[ordinal as usize]
    }

    pub fn doc_id(&self, ordinal: u32) -> &str {
        &self.doc_ids[ordinal as usize]
    }

    pub fn doc_text(&self, ordinal: u32) -> &str {
        &self.doc_texts[ordinal as usize]
    }

    pub fn avg_doc_length(&self) -> f64 {
        if self.doc_ids.is_empty() {
            0.0
        } else {
            self.collection_length as f64 / self.doc_ids.len() as f64
        }
    }

    pub fn ordinal_of(&self, doc_id: &str) -> Option<u32> {
        self.id_lookup.get(doc_id).copied()
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            docs: self.doc_count(),
            terms: self.term_count(),
            collection_length: self.collection_length,
            mean_doc_length: self.avg_doc_length(),
        }
    }

    /// Rebuilds derived statistics from postings and checks every structural
    /// invariant. Used when loading untrusted files.
    fn from_parts(
        config: TextConfig,
        doc_ids: Vec<String>,
        doc_texts: Vec<String>,
        doc_lengths: Vec<u32>,
        dictionary: HashMap<String, Vec<Posting>>,
    ) -> Result<Self> {
        let n = doc_ids.len();
        if doc_texts.len() != n || doc_lengths.len() != n {
            return Err(Error::Format("document section lengths disagree".into()));
        }
        let mut collection_tf = HashMap::with_capacity(dictionary.len());
        let mut per_doc = vec![0u64; n];
        for (term, postings) in &dictionary {
            if term.is_empty() || term.chars().any(char::is_whitespace) {
                return Err(Error::Format(format!("invalid term {term:?}")));
            }
            if postings.is_empty() {
                return Err(Error::Format(format!("term {term:?} has no postings")));
            }
            let mut total = 0u64;
            let mut last: Option<u32> = None;
            for p in postings {
                if p.tf == 0 || p.doc as usize >= n || last.is_some_and(|l| l >= p.doc) {
                    return Err(Error::Format(format!("bad posting list for {term:?}")));
                }
                last = Some(p.doc);
                total += u64::from(p.tf);
                per_doc[p.doc as usize] += u64::from(p.tf);
            }
            collection_tf.insert(term.clone(), total);
        }
        if per_doc.iter().zip(&doc_lengths).any(|(&sum, &len)| sum != u64::from(len)) {
            return Err(Error::Format("postings disagree with document lengths".into()));
        }
        let mut id_lookup = HashMap::with_capacity(n);
        for (ordinal, id) in doc_ids.iter().enumerate() {
            if id_lookup.insert(id.clone(), ordinal as u32).is_some() {
                return Err(Error::Format("duplicate document id".into()));
            }
        }
        let collection_length = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        Ok(Self {
            config,
            dictionary,
            collection_tf,
            doc_lengths,
            doc_ids,
            doc_texts,
            collection_length,
            id_lookup,
        })
    }
}

/// Builds with default options.
pub fn build_index<I>(docs: I, config: TextConfig) -> Result<InvertedIndex>
where
    I: IntoIterator<Item = Result<Document>>,
{
    InvertedIndex::build(docs, config, BuildOptions::default())
}
