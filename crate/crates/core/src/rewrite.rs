//! Conversational question completion.
//!
//! Pronouns in a follow-up are replaced with the topic phrase taken from the
//! first turn, then the current, first and previous turns are fused into one
//! [`WeightedQuery`]. At turn 2 the previous turn *is* the first turn and is
//! counted once, at the first-turn weight.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::retrieval::WeightedQuery;
use crate::textproc::TextConfig;

/// Leading scaffolding removed from the first turn to get the topic phrase.
pub const DEFAULT_SCAFFOLDING: &[&str] = &[
    "what is a",
    "what is an",
    "what is the",
    "what is",
    "what's a",
    "what's an",
    "what's",
    "what are the",
    "what are",
    "tell me about",
    "how do i",
    "how do",
    "how does",
    "who is",
    "who was",
    "describe",
    "define",
    "explain",
];

const PRONOUNS: &[&str] = &[
    "it", "its", "they", "them", "their", "this", "that", "these", "those", "he", "she", "him", "her",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub topic_id: String,
    pub turn_number: u32,
    pub raw_utterance: String,
}

impl Turn {
    /// `topic_turn`, e.g. `31_1`.
    pub fn query_id(&self) -> String {
        format!("{}_{}", self.topic_id, self.turn_number)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub title: String,
    pub description: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub current: f64,
    pub first: f64,
    pub previous: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self { current: 5.0, first: 3.25, previous: 1.0 }
    }
}

impl FusionWeights {
    /// Current-question-only weighting.
    pub fn current_only() -> Self {
        Self { current: 1.0, first: 0.0, previous: 0.0 }
    }

    /// `current` must be positive; a zero context weight drops that source.
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !(self.current.is_finite() && self.current > 0.0) || !ok(self.first) || !ok(self.previous) {
            return Err(Error::InvalidParam(format!(
                "fusion weights must be finite with current > 0 and first, previous >= 0: {self}"
            )));
        }
        if !(self.current >= self.first && self.first >= self.previous) {
            log::warn!("fusion weights {self} break the current >= first >= previous ordering");
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { current: self.current * factor, first: self.first * factor, previous: self.previous * factor }
    }
}

impl std::fmt::Display for FusionWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.current, self.first, self.previous)
    }
}

impl FromStr for FusionWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParam(format!("weights {s:?}: {e}")))?;
        let [current, first, previous] = parts[..] else {
            return Err(Error::InvalidParam(format!("expected three comma-separated weights, got {s:?}")));
        };
        let weights = Self { current, first, previous };
        weights.validate()?;
        Ok(weights)
    }
}

fn trim_question(utterance: &str) -> String {
    utterance
        .trim()
        .trim_end_matches(|c: char| c == '?' || c == '.' || c == '!' || c.is_whitespace())
        .to_lowercase()
}

/// The first turn minus its leading interrogative scaffolding, lowercased and
/// without the trailing question mark.
pub fn extract_topic_phrase(first_turn: &str) -> String {
    extract_topic_phrase_with(first_turn, DEFAULT_SCAFFOLDING)
}

pub fn extract_topic_phrase_with(first_turn: &str, scaffolding: &[&str]) -> String {
    let text = trim_question(first_turn);
    let mut prefixes: Vec<&str> = scaffolding.to_vec();
    prefixes.sort_by_key(|p| std::cmp::Reverse(p.len()));
    for prefix in prefixes {
        if let Some(rest) = text.strip_prefix(prefix) {
            if rest.is_empty() || rest.starts_with(' ') {
                let rest = rest.trim();
                return if rest.is_empty() { text } else { rest.to_string() };
            }
        }
    }
    text
}

/// Byte spans of words: alphanumeric runs, joined across apostrophes that sit
/// between two alphanumerics.
fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i;
        while j + 1 < chars.len() {
            let next = chars[j + 1].1;
            if next.is_alphanumeric() {
                j += 1;
            } else if (next == '\'' || next == '\u{2019}') && chars.get(j + 2).is_some_and(|c| c.1.is_alphanumeric()) {
                j += 2;
            } else {
                break;
            }
        }
        let end = chars.get(j + 1).map_or(text.len(), |c| c.0);
        spans.push((start, end));
        i = j + 1;
    }
    spans
}

/// Replaces standalone pronouns with `topic_phrase`. `one` is only replaced
/// after `be`, `become` or `becoming`. With no history the utterance is
/// returned unchanged.
pub fn resolve_references(utterance: &str, history: &[Turn], topic_phrase: &str) -> String {
    if history.is_empty() || topic_phrase.is_empty() {
        return utterance.to_string();
    }
    let spans = word_spans(utterance);
    let mut out = String::with_capacity(utterance.len() + topic_phrase.len());
    let mut last = 0;
    for (i, &(start, end)) in spans.iter().enumerate() {
        let word = utterance[start..end].to_lowercase();
        let replace = if word == "one" {
            i > 0 && {
                let (ps, pe) = spans[i - 1];
                matches!(utterance[ps..pe].to_lowercase().as_str(), "be" | "become" | "becoming")
            }
        } else {
            PRONOUNS.contains(&word.as_str())
        };
        if replace {
            out.push_str(&utterance[last..start]);
            out.push_str(topic_phrase);
            last = end;
        }
    }
    out.push_str(&utterance[last..]);
    out
}

/// Fuses the current, first and previous turns. Each occurrence of a term
/// contributes its source's weight; zero-weight sources are skipped.
pub fn compose_weighted_query(
    current: &str,
    first: Option<&str>,
    previous: Option<&str>,
    weights: &FusionWeights,
    config: &TextConfig,
) -> Result<WeightedQuery> {
    weights.validate()?;
    let current_terms = config.process(current);
    if current_terms.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut contributions: Vec<(String, f64)> =
        current_terms.terms.into_iter().map(|t| (t, weights.current)).collect();
    for (text, weight) in [(first, weights.first), (previous, weights.previous)] {
        if let (Some(text), true) = (text, weight > 0.0) {
            contributions.extend(config.process(text).terms.into_iter().map(|t| (t, weight)));
        }
    }
    WeightedQuery::new(contributions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewriteOptions {
    pub weights: FusionWeights,
    /// Substitute pronouns with the topic phrase.
    pub resolve: bool,
    /// Also fold the topic title in at the previous-turn weight.
    pub use_title: bool,
}

impl Default for RewriteOptions {
    fn default() -> Self {
        Self { weights: FusionWeights::default(), resolve: true, use_title: false }
    }
}

impl RewriteOptions {
    /// Raw current question only.
    pub fn baseline() -> Self {
        Self { weights: FusionWeights::current_only(), resolve: false, use_title: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewrittenTurn {
    pub query_id: String,
    pub raw: String,
    pub resolved: String,
    pub query: Result<WeightedQuery, String>,
}

/// State carried across the turns of one conversation.
#[derive(Debug, Clone, Default)]
pub struct SessionContext {
    topic_phrase: Option<String>,
    first_resolved: Option<String>,
    previous_resolved: Option<String>,
    turns: Vec<Turn>,
}

impl SessionContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn topic_phrase(&self) -> Option<&str> {
        self.topic_phrase.as_deref()
    }

    pub fn turn_count(&self) -> usize {
        self.turns.len()
    }

    /// Resolves `utterance` against the history without recording it.
    pub fn resolve(&self, utterance: &str, options: &RewriteOptions) -> String {
        match (&self.topic_phrase, options.resolve) {
            (Some(phrase), true) => resolve_references(utterance, &self.turns, phrase),
            _ => utterance.to_string(),
        }
    }

    /// Weighted query for an already-resolved utterance at the next turn.
    pub fn compose(
        &self,
        resolved: &str,
        title: Option<&str>,
        options: &RewriteOptions,
        config: &TextConfig,
    ) -> Result<WeightedQuery> {
        // Turn 1: no context. Turn 2: previous == first, counted once.
        let (first, previous) = match self.turns.len() {
            0 => (None, None),
            1 => (self.first_resolved.as_deref(), None),
            _ => (self.first_resolved.as_deref(), self.previous_resolved.as_deref()),
        };
        let query = compose_weighted_query(resolved, first, previous, &options.weights, config)?;
        match title {
            Some(title) if options.use_title && options.weights.previous > 0.0 => {
                let extra = config.process(title).terms.into_iter().map(|t| (t, options.weights.previous));
                WeightedQuery::new(query.terms().iter().cloned().chain(extra))
            }
            _ => Ok(query),
        }
    }

    /// Appends a turn. The topic phrase is fixed by the first call.
    pub fn push(&mut self, turn: Turn, resolved: String) {
        if self.topic_phrase.is_none() {
            self.topic_phrase = Some(extract_topic_phrase(&turn.raw_utterance));
            self.first_resolved = Some(resolved.clone());
        }
        self.previous_resolved = Some(resolved);
        self.turns.push(turn);
    }
}

/// Rewrites every turn of a topic in order.
pub fn rewrite_topic(topic: &Topic, options: &RewriteOptions, config: &TextConfig) -> Vec<RewrittenTurn> {
    let mut context = SessionContext::new();
    let title = Some(topic.title.as_str()).filter(|t| !t.trim().is_empty());
    topic
        .turns
        .iter()
        .map(|turn| {
            let resolved = context.resolve(&turn.raw_utterance, options);
            let query = context.compose(&resolved, title, options, config).map_err(|e| e.to_string());
            context.push(turn.clone(), resolved.clone());
            RewrittenTurn { query_id: turn.query_id(), raw: turn.raw_utterance.clone(), resolved, query }
        })
        .collect()
}

#[derive(Deserialize)]
struct RawTurn {
    number: Value,
    raw_utterance: String,
}

#[derive(Deserialize)]
struct RawTopic {
    number: Value,
    #[serde(default)]
    title: String,
    #[serde(default)]
    description: String,
    turn: Vec<RawTurn>,
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parses a topics file: a JSON array of
/// `{"number", "title", "description", "turn": [{"number", "raw_utterance"}]}`.
pub fn parse_topics(json: &str) -> Result<Vec<Topic>> {
    let raw: Vec<RawTopic> = serde_json::from_str(json)?;
    let mut seen = HashSet::new();
    raw.into_iter()
        .map(|t| {
            let topic_id = id_string(&t.number).ok_or_else(|| Error::Validation("topic number must be a string or integer".into()))?;
            if !seen.insert(topic_id.clone()) {
                return Err(Error::Validation(format!("duplicate topic {topic_id}")));
            }
            let mut turns = t
                .turn
                .into_iter()
                .map(|rt| {
                    let turn_number = rt
                        .number
                        .as_u64()
                        .or_else(|| rt.number.as_str().and_then(|s| s.trim().parse().ok()))
                        .and_then(|n| u32::try_from(n).ok())
                        .ok_or_else(|| Error::Validation(format!("topic {topic_id}: bad turn number {}", rt.number)))?;
                    Ok(Turn { topic_id: topic_id.clone(), turn_number, raw_utterance: rt.raw_utterance })
                })
                .collect::<Result<Vec<_>>>()?;
            if turns.is_empty() {
                return Err(Error::Validation(format!("topic {topic_id} has no turns")));
            }
            turns.sort_by_key(|t| t.turn_number);
            if turns.iter().enumerate().any(|(i, t)| t.turn_number as usize != i + 1) {
                return Err(Error::Validation(format!("topic {topic_id}: turn numbers must run 1..n without gaps")));
            }
            Ok(Topic { topic_id, title: t.title, description: t.description, turns })
        })
        .collect()
}

pub fn load_topics(path: &Path) -> Result<Vec<Topic>> {
    let mut json = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut json))
        .map_err(|e| Error::io(path.display(), e))?;
    parse_topics(&json)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(n: u32, text: &str) -> Turn {
        Turn { topic_id: "31".into(), turn_number: n, raw_utterance: text.into() }
    }

    #[test]
    fn topic_phrase_examples() {
        assert_eq!(extract_topic_phrase("What is a physician's assistant?"), "physician's assistant");
        assert_eq!(extract_topic_phrase("Career choices?"), "career choices");
        assert_eq!(extract_topic_phrase("What is?"), "what is");
        assert_eq!(extract_topic_phrase("Tell me about the Roman Empire."), "the roman empire");
        // Prefix must end on a word boundary.
        assert_eq!(extract_topic_phrase("Whatever happened?"), "whatever happened");
    }

    #[test]
    fn resolution_examples() {
        let history = [turn(1, "What is a physician's assistant?")];
        let phrase = "physician's assistant";
        assert_eq!(
            resolve_references("What are the educational requirements required to become one?", &history, phrase),
            "What are the educational requirements required to become physician's assistant?"
        );
        assert_eq!(resolve_references("What does it cost?", &history, phrase), "What does physician's assistant cost?");
        assert_eq!(
            resolve_references("What is a physician's assistant?", &[], phrase),
            "What is a physician's assistant?"
        );
    }

    #[test]
    fn resolution_edge_cases() {
        let history = [turn(1, "x")];
        let p = "pa";
        assert_eq!(resolve_references("IT and It, it.", &history, p), "pa and pa, pa.");
        assert_eq!(resolve_references("one of them costs one dollar", &history, p), "one of pa costs one dollar");
        assert_eq!(resolve_references("Being one", &history, p), "Being one");
        assert_eq!(resolve_references("to be one", &history, p), "to be pa");
        // Substrings and contractions are not pronouns.
        assert_eq!(resolve_references("items bits it's", &history, p), "items bits it's");
    }

    #[test]
    fn turn_three_bag() {
        let config = TextConfig::default();
        let query = compose_weighted_query(
            "What does it cost?",
            Some("What is a physician's assistant?"),
            Some("educational requirements physician's assistant"),
            &FusionWeights::default(),
            &config,
        )
        .unwrap();
        let expected = [("assist", 4.25), ("cost", 5.0), ("educ", 1.0), ("physician", 4.25), ("requir", 1.0)];
        let got: Vec<(&str, f64)> = query.terms().iter().map(|(t, w)| (t.as_str(), *w)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn compose_single_source_and_symmetry() {
        let config = TextConfig::default();
        let q = compose_weighted_query("What is a physician's assistant?", None, None, &FusionWeights::default(), &config).unwrap();
        assert_eq!(q.terms(), &[("assist".to_string(), 5.0), ("physician".to_string(), 5.0)]);
        let ones = FusionWeights { current: 1.0, first: 1.0, previous: 1.0 };
        let q = compose_weighted_query("cat", Some("cat"), Some("cat"), &ones, &TextConfig::raw()).unwrap();
        assert_eq!(q.terms(), &[("cat".to_string(), 3.0)]);
    }

    #[test]
    fn compose_rejects_empty_current() {
        let err = compose_weighted_query("What is it?", Some("cat"), None, &FusionWeights::default(), &TextConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::EmptyQuery));
    }

    #[test]
    fn weights_parse_and_validate() {
        let w: FusionWeights = "5.0,3.25,1.0".parse().unwrap();
        assert_eq!(w, FusionWeights::default());
        assert_eq!(w.first / w.previous, 3.25);
        assert_eq!(w.to_string().parse::<FusionWeights>().unwrap(), w);
        assert!("1,2".parse::<FusionWeights>().is_err());
        assert!("0,1,1".parse::<FusionWeights>().is_err());
        assert!("1,-1,0".parse::<FusionWeights>().is_err());
        assert!("1,0,0".parse::<FusionWeights>().is_ok());
        // Out-of-order weights are allowed, only warned about.
        assert!("1,2,3".parse::<FusionWeights>().is_ok());
    }

    #[test]
    fn session_turn_two_counts_first_once() {
        let config = TextConfig::default();
        let options = RewriteOptions::default();
        let mut ctx = SessionContext::new();
        let t1 = "What is a physician's assistant?";
        ctx.push(turn(1, t1), t1.to_string());
        let resolved = ctx.resolve("What does it cost?", &options);
        assert_eq!(resolved, "What does physician's assistant cost?");
        let q = ctx.compose(&resolved, None, &options, &config).unwrap();
        assert_eq!(q.weight("physician"), Some(5.0 + 3.25));
        assert_eq!(q.weight("cost"), Some(5.0));
    }

    #[test]
    fn rewrite_topic_table_two() {
        let topic = Topic {
            topic_id: "31".into(),
            title: "career choice for Nursing and Physician's Assistant".into(),
            description: String::new(),
            turns: vec![
                turn(1, "What is a physician's assistant?"),
                turn(2, "What are the educational requirements required to become one?"),
                turn(3, "What does it cost?"),
            ],
        };
        let config = TextConfig::default();
        let out = rewrite_topic(&topic, &RewriteOptions::default(), &config);
        assert_eq!(out[2].query_id, "31_3");
        assert_eq!(out[2].resolved, "What does physician's assistant cost?");
        // Full turn-2 text: "required" adds a second "requir" and "become"
        // survives stopword removal.
        let q = out[2].query.as_ref().unwrap();
        let got: Vec<(&str, f64)> = q.terms().iter().map(|(t, w)| (t.as_str(), *w)).collect();
        assert_eq!(
            got,
            [("assist", 9.25), ("becom", 1.0), ("cost", 5.0), ("educ", 1.0), ("physician", 9.25), ("requir", 2.0)]
        );

        let with_title = RewriteOptions { use_title: true, ..Default::default() };
        let out = rewrite_topic(&topic, &with_title, &config);
        let q = out[0].query.as_ref().unwrap();
        assert_eq!(q.weight("nurs"), Some(1.0));
        assert_eq!(q.weight("physician"), Some(6.0));
    }

    #[test]
    fn topics_file() {
        let json = r#"[{"number": 31, "title": "t", "description": "d",
            "turn": [{"number": 2, "raw_utterance": "b"}, {"number": 1, "raw_utterance": "a"}]}]"#;
        let topics = parse_topics(json).unwrap();
        assert_eq!(topics[0].topic_id, "31");
        assert_eq!(topics[0].turns[0].raw_utterance, "a");
        assert_eq!(topics[0].turns[1].query_id(), "31_2");

        assert!(parse_topics(r#"[{"number": 1, "turn": []}]"#).is_err());
        assert!(parse_topics(r#"[{"number": 1, "turn": [{"number": 2, "raw_utterance": "x"}]}]"#).is_err());
        assert!(parse_topics(r#"[{"number": 1, "turn": [{"number": 1, "raw_utterance": "x"}]},
                                 {"number": "1", "turn": [{"number": 1, "raw_utterance": "y"}]}]"#).is_err());
        assert!(parse_topics("{").is_err());
    }
}
