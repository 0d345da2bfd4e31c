//! End-to-end orchestration: rewrite, classify, retrieve, rerank.
//!
//! [`Engine`] bundles the index with the rule tables. [`run_pipeline`] drives
//! it over a topics file for batch evaluation; [`SessionStore`] drives it one
//! utterance at a time for interactive use.

mod session;
mod snippet;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierRules, QuestionCategory};
use crate::error::{Error, Result};
use crate::evalkit::RunList;
use crate::index::InvertedIndex;
use crate::rerank::{rerank, CueLexicon, RerankParams};
use crate::retrieval::{search, RetrievalParams, ScoredDoc, WeightedQuery};
use crate::rewrite::{FusionWeights, RewriteOptions, SessionContext, Topic, Turn};
use crate::textproc::TextConfig;

pub use session::{AskResponse, AskResult, SessionDefaults, SessionState, SessionStore, TurnRecord};
pub use snippet::{make_snippet, SNIPPET_CHARS};

/// Every knob of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub rewrite: RewriteOptions,
    pub retrieval: RetrievalParams,
    pub rerank: RerankParams,
    pub run_tag: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::method()
    }
}

impl PipelineConfig {
    /// Context fusion (5, 3.25, 1), pronoun resolution and cue reranking.
    pub fn method() -> Self {
        Self {
            rewrite: RewriteOptions::default(),
            retrieval: RetrievalParams::default(),
            rerank: RerankParams::default(),
            run_tag: "context_rerank".into(),
        }
    }

    /// Raw current question, query likelihood only.
    pub fn baseline() -> Self {
        Self {
            rewrite: RewriteOptions::baseline(),
            retrieval: RetrievalParams::default(),
            rerank: RerankParams::disabled(),
            run_tag: "ql_baseline".into(),
        }
    }

    pub fn with_weights(mut self, weights: FusionWeights) -> Self {
        self.rewrite.weights = weights;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.retrieval.k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.rewrite.weights.validate()?;
        self.retrieval.validate()?;
        self.rerank.validate()?;
        if self.run_tag.is_empty() || self.run_tag.chars().any(char::is_whitespace) {
            return Err(Error::InvalidParam(format!("run tag {:?} must be a single token", self.run_tag)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    index: InvertedIndex,
    rules: ClassifierRules,
    lexicon: CueLexicon,
}

/// What happened to one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    pub resolved: String,
    pub category: QuestionCategory,
    pub query: WeightedQuery,
    pub results: Vec<ScoredDoc>,
}

impl Engine {
    pub fn new(index: InvertedIndex, rules: ClassifierRules, lexicon: CueLexicon) -> Self {
        Self { index, rules, lexicon }
    }

    /// Refuses to pair an index with a text config it was not built with.
    pub fn with_text_config(index: InvertedIndex, config: &TextConfig, rules: ClassifierRules, lexicon: CueLexicon) -> Result<Self> {
        check_config(&index, config)?;
        Ok(Self::new(index, rules, lexicon))
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn rules(&self) -> &ClassifierRules {
        &self.rules
    }

    pub fn lexicon(&self) -> &CueLexicon {
        &self.lexicon
    }

    pub fn text_config(&self) -> &TextConfig {
        self.index.config()
    }

    /// Resolves, classifies, composes, retrieves and reranks one utterance
    /// given the session so far. The context is not modified.
    pub fn process_turn(
        &self,
        context: &SessionContext,
        utterance: &str,
        title: Option<&str>,
        config: &PipelineConfig,
    ) -> Result<TurnOutcome> {
        let resolved = context.resolve(utterance, &config.rewrite);
        let category = self.rules.classify(&resolved)?;
        let query = context.compose(&resolved, title, &config.rewrite, self.text_config())?;
        let ranked = search(&self.index, &query, &config.retrieval)?;
        let results = rerank(&self.index, ranked, category, &self.lexicon, &config.rerank)?;
        Ok(TurnOutcome { resolved, category, query, results })
    }
}

pub fn check_config(index: &InvertedIndex, config: &TextConfig) -> Result<()> {
    let (built, requested) = (index.config().fingerprint(), config.fingerprint());
    if built != requested {
        return Err(Error::ConfigMismatch { index: built, request: requested });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub run: RunList,
    /// Category of every turn, in topic order.
    pub categories: IndexMap<String, QuestionCategory>,
    /// Turns that had no terms left after processing; they get no ranking.
    pub empty_queries: Vec<String>,
}

impl PipelineOutput {
    /// `query_id<TAB>Category` lines.
    pub fn categories_tsv(&self) -> String {
        let mut out = String::new();
        for (q, c) in &self.categories {
            writeln!(out, "{q}\t{c}").unwrap();
        }
        out
    }
}

/// Runs every turn of every topic in order.
pub fn run_pipeline(engine: &Engine, topics: &[Topic], config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    if topics.is_empty() {
        return Err(Error::Validation("topics file contains no topics".into()));
    }
    let mut run = RunList::new(config.run_tag.clone());
    let mut categories = IndexMap::new();
    let mut empty_queries = Vec::new();
    for topic in topics {
        let title = Some(topic.title.as_str()).filter(|t| !t.trim().is_empty());
        let mut context = SessionContext::new();
        for turn in &topic.turns {
            let query_id = turn.query_id();
            match engine.process_turn(&context, &turn.raw_utterance, title, config) {
                Ok(outcome) => {
                    categories.insert(query_id.clone(), outcome.category);
                    run.insert(query_id, outcome.results)?;
                    context.push(turn.clone(), outcome.resolved);
                }
                Err(Error::EmptyQuery) | Err(Error::Validation(_)) => {
                    log::warn!("turn {query_id} has no query terms; no results emitted");
                    let resolved = context.resolve(&turn.raw_utterance, &config.rewrite);
                    let category = engine.rules.classify(&resolved).unwrap_or(QuestionCategory::Other);
                    categories.insert(query_id.clone(), category);
                    empty_queries.push(query_id);
                    context.push(turn.clone(), resolved);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(PipelineOutput { run, categories, empty_queries })
}

/// Reproduction record written next to every run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub run_tag: String,
    pub weights: FusionWeights,
    pub resolve_references: bool,
    pub use_title: bool,
    pub scorer: crate::retrieval::Scorer,
    pub mu: f64,
    pub k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub rerank_lambda: f64,
    pub rerank_depth: Option<usize>,
    pub text_config_fingerprint: String,
    pub rules_hash: String,
    pub lexicon_hash: String,
    pub index_docs: usize,
}

impl RunParams {
    pub fn new(engine: &Engine, config: &PipelineConfig) -> Self {
        Self {
            run_tag: config.run_tag.clone(),
            weights: config.rewrite.weights,
            resolve_references: config.rewrite.resolve,
            use_title: config.rewrite.use_title,
            scorer: config.retrieval.scorer,
            mu: config.retrieval.mu,
            k: config.retrieval.k,
            bm25_k1: config.retrieval.bm25_k1,
            bm25_b: config.retrieval.bm25_b,
            rerank_lambda: config.rerank.lambda,
            rerank_depth: config.rerank.depth,
            text_config_fingerprint: format!("{:016x}", engine.text_config().fingerprint()),
            rules_hash: format!("{:016x}", engine.rules.source_hash()),
            lexicon_hash: format!("{:016x}", engine.lexicon.source_hash()),
            index_docs: engine.index.doc_count(),
        }
    }
}

/// Sidecar paths for a run file: `<run>.categories.tsv` and `<run>.params.json`.
pub fn sidecar_paths(run_path: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut name = run_path.as_os_str().to_os_string();
        name.push(suffix);
        PathBuf::from(name)
    };
    (with(".categories.tsv"), with(".params.json"))
}

/// Writes the run file plus its category and parameter sidecars.
pub fn write_pipeline_outputs(output: &PipelineOutput, params: &RunParams, run_path: &Path) -> Result<()> {
    let (categories_path, params_path) = sidecar_paths(run_path);
    crate::evalkit::write_run(&output.run, run_path)?;
    std::fs::write(&categories_path, output.categories_tsv()).map_err(|e| Error::io(categories_path.display(), e))?;
    let json = serde_json::to_string_pretty(params)? + "\n";
    std::fs::write(&params_path, json).map_err(|e| Error::io(params_path.display(), e))
}

/// Turns for a single utterance-at-a-time conversation.
pub(crate) fn ad_hoc_turn(session_id: &str, number: usize, utterance: &str) -> Turn {
    Turn { topic_id: session_id.to_string(), turn_number: number as u32, raw_utterance: utterance.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, Document};

    fn engine() -> Engine {
        let docs = [
            ("p1", "A physician's assistant is a licensed medical professional."),
            ("p2", "Physician's assistant programs cost about $90,000 in tuition."),
            ("p3", "Tuition cost for law school is high, around $150,000."),
            ("p4", "Nurse practitioner training takes 6 years."),
        ]
        .map(|(i, t)| Ok(Document::new(i, t)));
        let index = build_index(docs, TextConfig::default()).unwrap();
        Engine::new(index, ClassifierRules::builtin(), CueLexicon::builtin())
    }

    fn topic() -> Topic {
        let turn = |n: u32, t: &str| Turn { topic_id: "31".into(), turn_number: n, raw_utterance: t.into() };
        Topic {
            topic_id: "31".into(),
            title: String::new(),
            description: String::new(),
            turns: vec![turn(1, "What is a physician's assistant?"), turn(2, "What does it cost?")],
        }
    }

    #[test]
    fn method_pipeline_uses_context() {
        let engine = engine();
        let out = run_pipeline(&engine, &[topic()], &PipelineConfig::method()).unwrap();
        assert_eq!(out.categories["31_1"], QuestionCategory::Describe);
        assert_eq!(out.categories["31_2"], QuestionCategory::HowMuch);
        assert_eq!(out.run.get("31_2").unwrap()[0].doc_id, "p2");
        assert_eq!(out.categories_tsv(), "31_1\tDescribe\n31_2\tHowMuch\n");
    }

    #[test]
    fn empty_topics_is_an_error() {
        assert!(run_pipeline(&engine(), &[], &PipelineConfig::method()).is_err());
    }

    #[test]
    fn unanswerable_turn_is_recorded_not_fatal() {
        let mut t = topic();
        t.turns[1].raw_utterance = "What is it?".into();
        let out = run_pipeline(&engine(), &[t], &PipelineConfig::baseline()).unwrap();
        assert_eq!(out.empty_queries, ["31_2"]);
        assert!(out.run.get("31_2").is_none());
    }

    #[test]
    fn config_mismatch_is_rejected() {
        let engine = engine();
        let err = Engine::with_text_config(engine.index().clone(), &TextConfig::raw(), ClassifierRules::builtin(), CueLexicon::builtin())
            .unwrap_err();
        assert!(matches!(err, Error::ConfigMismatch { .. }));
        assert!(Engine::with_text_config(engine.index().clone(), &TextConfig::default(), ClassifierRules::builtin(), CueLexicon::builtin()).is_ok());
    }

    #[test]
    fn sidecars() {
        let (c, p) = sidecar_paths(Path::new("/tmp/x/run.trec"));
        assert_eq!(c, Path::new("/tmp/x/run.trec.categories.tsv"));
        assert_eq!(p, Path::new("/tmp/x/run.trec.params.json"));
        let params = RunParams::new(&engine(), &PipelineConfig::method());
        assert_eq!(params.weights.first / params.weights.previous, 3.25);
        assert_eq!(params.mu, 2500.0);
        assert_eq!(params.k, 1000);
    }
}
