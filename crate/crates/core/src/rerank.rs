//! Answer-type reranking.
//!
//! Each category has a set of surface-cue matchers run over the stored raw
//! passage text. A passage with `c` cue hits gets `λ · ln(1 + c)` added to its
//! retrieval score; the list is then re-sorted. `Other` questions use the
//! `Describe` matchers.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::QuestionCategory;
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::retrieval::{rank_order, ScoredDoc};
use crate::textproc::fnv1a;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CueMatcher {
    /// Whole-word matches, case-insensitive. Entries that are not
    /// alphanumeric (such as `%`) are counted as substrings.
    Words(Vec<String>),
    /// Whole-word sequences, case-insensitive.
    Phrases(Vec<Vec<String>>),
    /// Four-digit numbers from 1000 to 2099.
    Year,
    /// Any all-digit token.
    Digits,
    /// Occurrences of any of the symbols.
    Currency(Vec<char>),
    /// Capitalized words. With no triggers: pairs of adjacent capitalized
    /// words where the first does not begin a sentence. With triggers: a
    /// trigger word followed by a capitalized word.
    CapSeq(Vec<String>),
}

struct Token<'a> {
    text: &'a str,
    lower: String,
    sentence_start: bool,
}

fn tokens<'a>(text: &'a str) -> Vec<Token<'a>> {
    let mut out = Vec::new();
    let mut sentence_start = true;
    let mut start: Option<usize> = None;
    let flush = |s: usize, e: usize, sentence_start: &mut bool, out: &mut Vec<Token<'a>>| {
        let word = &text[s..e];
        out.push(Token { text: word, lower: word.to_lowercase(), sentence_start: *sentence_start });
        *sentence_start = false;
    };
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
            continue;
        }
        if let Some(s) = start.take() {
            flush(s, i, &mut sentence_start, &mut out);
        }
        if matches!(c, '.' | '!' | '?') {
            sentence_start = true;
        }
    }
    if let Some(s) = start {
        flush(s, text.len(), &mut sentence_start, &mut out);
    }
    out
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

impl CueMatcher {
    fn count(&self, text: &str, toks: &[Token<'_>]) -> usize {
        match self {
            CueMatcher::Words(words) => words
                .iter()
                .map(|w| {
                    if w.chars().all(char::is_alphanumeric) {
                        toks.iter().filter(|t| t.lower == *w).count()
                    } else {
                        text.matches(w.as_str()).count()
                    }
                })
                .sum(),
            CueMatcher::Phrases(phrases) => phrases
                .iter()
                .map(|p| {
                    toks.windows(p.len())
                        .filter(|win| win.iter().zip(p).all(|(t, w)| t.lower == *w))
                        .count()
                })
                .sum(),
            CueMatcher::Year => toks
                .iter()
                .filter(|t| {
                    t.text.len() == 4
                        && t.text.bytes().all(|b| b.is_ascii_digit())
                        && (1000..=2099).contains(&t.text.parse::<u32>().unwrap_or(0))
                })
                .count(),
            CueMatcher::Digits => toks.iter().filter(|t| t.text.bytes().all(|b| b.is_ascii_digit())).count(),
            CueMatcher::Currency(symbols) => text.chars().filter(|c| symbols.contains(c)).count(),
            CueMatcher::CapSeq(triggers) if triggers.is_empty() => toks
                .windows(2)
                .filter(|w| !w[0].sentence_start && is_capitalized(w[0].text) && is_capitalized(w[1].text))
                .count(),
            CueMatcher::CapSeq(triggers) => toks
                .windows(2)
                .filter(|w| triggers.contains(&w[0].lower) && is_capitalized(w[1].text))
                .count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CueLexicon {
    matchers: BTreeMap<QuestionCategory, Vec<CueMatcher>>,
    source_hash: u64,
}

fn split_list(pattern: &str) -> Vec<String> {
    pattern.split(',').map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()).collect()
}

impl CueLexicon {
    /// Parses `<Category>|<kind>|<pattern>` lines, where kind is one of
    /// `words`, `phrase`, `year`, `digits`, `currency`, `capseq`. List
    /// patterns are comma-separated.
    pub fn parse<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut matchers: BTreeMap<QuestionCategory, Vec<CueMatcher>> = BTreeMap::new();
        let mut text = String::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            text.push_str(&line);
            text.push('\n');
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse(source, n + 1, m);
            let mut fields = body.splitn(3, '|');
            let (Some(category), Some(kind), Some(pattern)) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected Category|kind|pattern".into()));
            };
            let category: QuestionCategory = category.parse().map_err(|e: Error| err(e.to_string()))?;
            if category == QuestionCategory::Other {
                return Err(err("Other always uses the Describe matchers".into()));
            }
            let list = split_list(pattern);
            let matcher = match kind.trim() {
                "words" if !list.is_empty() => CueMatcher::Words(list),
                "phrase" if !list.is_empty() => CueMatcher::Phrases(
                    list.iter()
                        .map(|p| p.split_whitespace().map(String::from).collect())
                        .collect(),
                ),
                "year" => CueMatcher::Year,
                "digits" => CueMatcher::Digits,
                "currency" if !list.is_empty() => {
                    let symbols: Vec<char> = list.iter().flat_map(|s| s.chars()).collect();
                    CueMatcher::Currency(symbols)
                }
                "capseq" => CueMatcher::CapSeq(list.into_iter().filter(|w| w != "*").collect()),
                "words" | "phrase" | "currency" => return Err(err(format!("empty {} pattern", kind.trim()))),
                other => return Err(err(format!("unknown matcher kind {other:?}"))),
            };
            matchers.entry(category).or_default().push(matcher);
        }
        let lexicon = Self { matchers, source_hash: fnv1a(text.as_bytes()) };
        if let Some(missing) = QuestionCategory::ALL
            .into_iter()
            .filter(|c| *c != QuestionCategory::Other)
            .find(|c| !lexicon.matchers.contains_key(c))
        {
            return Err(Error::Validation(format!("{source}: no cue matchers for category {missing}")));
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
        Self::parse(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON.as_bytes(), "<builtin lexicon>").expect("bundled lexicon is valid")
    }

    /// FNV-1a 64 of the lexicon file contents, for run provenance.
    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    pub fn matchers(&self, category: QuestionCategory) -> &[CueMatcher] {
        let category = if category == QuestionCategory::Other { QuestionCategory::Describe } else { category };
        self.matchers.get(&category).map_or(&[], Vec::as_slice)
    }

    /// Total matcher hits for `category` in `passage`.
    pub fn cue_count(&self, category: QuestionCategory, passage: &str) -> usize {
        let toks = tokens(passage);
        self.matchers(category).iter().map(|m| m.count(passage, &toks)).sum()
    }
}

impl Default for CueLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

pub fn cue_count(category: QuestionCategory, passage: &str, lexicon: &CueLexicon) -> usize {
    lexicon.cue_count(category, passage)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankParams {
    /// Bonus scale; 0 disables reranking.
    pub lambda: f64,
    /// How many of the top documents receive a bonus. `None` means all.
    pub depth: Option<usize>,
}

impl Default for RerankParams {
    fn default() -> Self {
        Self { lambda: 0.5, depth: None }
    }
}

impl RerankParams {
    pub fn disabled() -> Self {
        Self { lambda: 0.0, depth: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParam(format!("rerank lambda must be >= 0, got {}", self.lambda)));
        }
        if self.depth == Some(0) {
            return Err(Error::InvalidParam("rerank depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adds the cue bonus using passage texts supplied by `text_of` and re-sorts
/// by descending score, then ascending doc id.
pub fn rerank_with<'t, F>(
    ranked: Vec<ScoredDoc>,
    category: QuestionCategory,
    lexicon: &CueLexicon,
    params: &RerankParams,
    text_of: F,
) -> Result<Vec<ScoredDoc>>
where
    F: Fn(&str) -> Option<&'t str>,
{
    params.validate()?;
    if params.lambda == 0.0 {
        return Ok(ranked);
    }
    let depth = params.depth.unwrap_or(usize::MAX);
    let mut out: Vec<ScoredDoc> = ranked
        .into_iter()
        .enumerate()
        .map(|(i, mut d)| {
            if i < depth {
                let count = text_of(&d.doc_id).map_or(0, |t| lexicon.cue_count(category, t));
                d.score += params.lambda * (count as f64).ln_1p();
            }
            d
        })
        .collect();
    out.sort_by(|a, b| rank_order((&a.doc_id, a.score), (&b.doc_id, b.score)));
    for (i, d) in out.iter_mut().enumerate() {
        d.rank = i + 1;
    }
    Ok(out)
}

/// [`rerank_with`] reading passage texts from the index.
pub fn rerank(
    index: &InvertedIndex,
    ranked: Vec<ScoredDoc>,
    category: QuestionCategory,
    lexicon: &CueLexicon,
    params: &RerankParams,
) -> Result<Vec<ScoredDoc>> {
    rerank_with(ranked, category, lexicon, params, |id| index.ordinal_of(id).map(|o| index.doc_text(o)))
}
