//! Rule-based question classification by leading phrase and keywords.
//!
//! Rules are evaluated in file order and the first match wins, so
//! multi-word leads such as `how much` must precede `how`.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{fnv1a, normalize};

const DEFAULT_RULES: &str = include_str!("../data/rules.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionCategory {
    Who,
    Where,
    Class,
    HowMuch,
    When,
    Describe,
    How,
    Why,
    Other,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 9] = [
        QuestionCategory::Who,
        QuestionCategory::Where,
        QuestionCategory::Class,
        QuestionCategory::HowMuch,
        QuestionCategory::When,
        QuestionCategory::Describe,
        QuestionCategory::How,
        QuestionCategory::Why,
        QuestionCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionCategory::Who => "Who",
            QuestionCategory::Where => "Where",
            QuestionCategory::Class => "Class",
            QuestionCategory::HowMuch => "HowMuch",
            QuestionCategory::When => "When",
            QuestionCategory::Describe => "Describe",
            QuestionCategory::How => "How",
            QuestionCategory::Why => "Why",
            QuestionCategory::Other => "Other",
        }
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuestionCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Validation(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternKind {
    /// The question starts with the phrase.
    Leading,
    /// The phrase occurs anywhere as a whole-token sequence.
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub kind: PatternKind,
    /// Normalized tokens of the pattern.
    pub pattern: Vec<String>,
    pub category: QuestionCategory,
}

impl Rule {
    fn matches(&self, tokens: &[&str]) -> bool {
        let n = self.pattern.len();
        let eq = |window: &[&str]| window.iter().zip(&self.pattern).all(|(a, b)| *a == b);
        match self.kind {
            PatternKind::Leading => tokens.len() >= n && eq(&tokens[..n]),
            PatternKind::Keyword => tokens.windows(n).any(eq),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassifierRules {
    rules: Vec<Rule>,
    source_hash: u64,
}

impl ClassifierRules {
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Parses `lead|<phrase>|<Category>` and `kw|<word>|<Category>` lines.
    pub fn parse<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut rules = Vec::new();
        let mut text = String::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            text.push_str(&line);
            text.push('\n');
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = body.split('|').collect();
            let [kind, pattern, category] = fields[..] else {
                return Err(Error::parse(source, n + 1, "expected kind|pattern|Category"));
            };
            let kind = match kind.trim() {
                "lead" => PatternKind::Leading,
                "kw" => PatternKind::Keyword,
                other => return Err(Error::parse(source, n + 1, format!("unknown rule kind {other:?}"))),
            };
            let pattern: Vec<String> = normalize(pattern).split(' ').filter(|s| !s.is_empty()).map(String::from).collect();
            if pattern.is_empty() {
                return Err(Error::parse(source, n + 1, "empty pattern"));
            }
            let category = category.parse().map_err(|e: Error| Error::parse(source, n + 1, e.to_string()))?;
            rules.push(Rule { kind, pattern, category });
        }
        Ok(Self { rules, source_hash: fnv1a(text.as_bytes()) })
    }

    /// FNV-1a 64 of the rule file contents, for run provenance.
    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
        Self::parse(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_RULES.as_bytes(), "<builtin rules>").expect("bundled rule table is valid")
    }

    /// First matching rule's category, or [`QuestionCategory::Other`].
    pub fn classify(&self, utterance: &str) -> Result<QuestionCategory> {
        let normalized = normalize(utterance);
        if normalized.is_empty() {
            return Err(Error::Validation("cannot classify an empty question".into()));
        }
        let tokens: Vec<&str> = normalized.split(' ').collect();
        Ok(self
            .rules
            .iter()
            .find(|r| r.matches(&tokens))
            .map_or(QuestionCategory::Other, |r| r.category))
    }
}

pub fn default_rules() -> ClassifierRules {
    ClassifierRules::builtin()
}

pub fn load_rules(path: &Path) -> Result<ClassifierRules> {
    ClassifierRules::load(path)
}
