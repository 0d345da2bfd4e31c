//! Text normalization shared by documents and queries.
//!
//! The same [`TextConfig`] must be used to build an index and to process the
//! queries run against it; [`TextConfig::fingerprint`] identifies a config so
//! mismatches can be rejected.

mod porter;

use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hasher;
use std::io::BufRead;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use porter::stem;

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const DEFAULT_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.tsv");

/// Ordered, stemmed, stopword-free terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermList {
    pub terms: Vec<String>,
}

impl TermList {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }
}

/// 64-bit FNV-1a digest of normalized text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(pub u64);

/// FNV-1a 64 over raw bytes. Used for content dedup, config fingerprints and
/// the index file checksum.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Lowercases, replaces punctuation with spaces (keeping apostrophes and
/// hyphens that sit between two alphanumerics), and collapses whitespace.
pub fn normalize(raw: &str) -> String {
    let lowered: Vec<char> = raw
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c == '\u{2019}' { '\'' } else { c })
        .collect();
    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for (i, &c) in lowered.iter().enumerate() {
        let keep = if c.is_alphanumeric() {
            true
        } else if c == '\'' || c == '-' {
            let before = i > 0 && lowered[i - 1].is_alphanumeric();
            let after = lowered.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            before && after
        } else {
            false
        };
        if keep {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Stable digest of `normalize(raw)`.
pub fn content_hash(raw: &str) -> ContentHash {
    ContentHash(fnv1a(normalize(raw).as_bytes()))
}

fn strip_possessive(token: &str) -> &str {
    token.strip_suffix("'s").filter(|s| !s.is_empty()).unwrap_or(token)
}

/// Splits normalized text into terms, dropping stopwords and optionally
/// applying the Porter stemmer. A token is dropped if it is a stopword either
/// before or after stemming.
pub fn tokenize(normalized: &str, stopwords: &BTreeSet<String>, stem: bool) -> TermList {
    let terms = normalized
        .split_whitespace()
        .map(strip_possessive)
        .filter(|t| !stopwords.contains(*t))
        .map(|t| if stem { porter::stem(t) } else { t.to_string() })
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .collect();
    TermList { terms }
}

/// Case-insensitive abbreviation expansions, matched on whole alphanumeric
/// tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AbbreviationTable {
    entries: BTreeMap<String, String>,
}

impl AbbreviationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, abbreviation: &str, expansion: &str) -> Result<()> {
        let key = abbreviation.trim().to_lowercase();
        let expansion = expansion.trim();
        if key.is_empty() || !key.chars().all(char::is_alphanumeric) {
            return Err(Error::Validation(format!(
                "abbreviation {abbreviation:?} must be a single alphanumeric token"
            )));
        }
        if expansion.is_empty() {
            return Err(Error::Validation(format!("empty expansion for {abbreviation:?}")));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::Validation(format!("duplicate abbreviation {abbreviation:?}")));
        }
        self.entries.insert(key, expansion.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Parses `abbrev<TAB>expansion` lines. Blank lines and `#` comments are
    /// skipped.
    pub fn parse<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut table = Self::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            let body = line.trim_end_matches('\r');
            if body.trim().is_empty() || body.trim_start().starts_with('#') {
                continue;
            }
            let (abbrev, expansion) = body
                .split_once('\t')
                .ok_or_else(|| Error::parse(source, n + 1, "expected abbrev<TAB>expansion"))?;
            table
                .insert(abbrev, expansion)
                .map_err(|e| Error::parse(source, n + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
        Self::parse(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_ABBREVIATIONS.as_bytes(), "<builtin abbreviations>")
            .expect("bundled abbreviation table is valid")
    }
}

/// Replaces every abbreviation token with its expansion in one left-to-right
/// pass; expansions are not rescanned.
pub fn expand_abbreviations(text: &str, table: &AbbreviationTable) -> String {
    if table.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find(char::is_alphanumeric) {
        out.push_str(&rest[..start]);
        let word_rest = &rest[start..];
        let end = word_rest.find(|c: char| !c.is_alphanumeric()).unwrap_or(word_rest.len());
        let word = &word_rest[..end];
        match table.entries.get(&word.to_lowercase()) {
            Some(expansion) => out.push_str(expansion),
            None => out.push_str(word),
        }
        rest = &word_rest[end..];
    }
    out.push_str(rest);
    out
}

/// Parses a stopword file: one term per line, `#` starts a comment.
pub fn parse_stopwords<R: BufRead>(reader: R, source: &str) -> Result<BTreeSet<String>> {
    let mut set = BTreeSet::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if !body.is_empty() {
            set.insert(normalize(body));
        }
    }
    Ok(set)
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
    parse_stopwords(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn builtin_stopwords() -> BTreeSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS.as_bytes(), "<builtin stopwords>")
        .expect("bundled stopword list is valid")
}

/// Everything that determines how raw text becomes terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextConfig {
    pub stopwords: BTreeSet<String>,
    pub stem: bool,
    pub abbreviations: AbbreviationTable,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            stopwords: builtin_stopwords(),
            stem: true,
            abbreviations: AbbreviationTable::builtin(),
        }
    }
}

impl TextConfig {
    /// No stopwords, no stemming, no abbreviations.
    pub fn raw() -> Self {
        Self {
            stopwords: BTreeSet::new(),
            stem: false,
            abbreviations: AbbreviationTable::new(),
        }
    }

    /// Abbreviation expansion, normalization and tokenization in that order.
    pub fn process(&self, raw: &str) -> TermList {
        let expanded = expand_abbreviations(raw, &self.abbreviations);
        tokenize(&normalize(&expanded), &self.stopwords, self.stem)
    }

    pub fn fingerprint(&self) -> u64 {
        let mut canonical = String::new();
        canonical.push_str(if self.stem { "stem:porter\n" } else { "stem:none\n" });
        for word in &self.stopwords {
            canonical.push_str("stop:");
            canonical.push_str(word);
            canonical.push('\n');
        }
        for (k, v) in self.abbreviations.iter() {
            canonical.push_str("abbr:");
            canonical.push_str(k);
            canonical.push('\t');
            canonical.push_str(v);
            canonical.push('\n');
        }
        fnv1a(canonical.as_bytes())
    }
}
