//! TREC qrels and run files.
//!
//! Qrels: `query_id 0 doc_id grade`, grade in {0, 1, 2}.
//! Run: `query_id Q0 doc_id rank score run_tag`, score with six decimals.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::retrieval::ScoredDoc;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Qrels {
    judgments: HashMap<String, HashMap<String, u8>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u8) -> Result<()> {
        if grade > 2 {
            return Err(Error::Validation(format!("grade {grade} outside 0..=2")));
        }
        self.judgments.entry(query_id.to_string()).or_default().insert(doc_id.to_string(), grade);
        Ok(())
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u8 {
        self.judgments.get(query_id).and_then(|q| q.get(doc_id)).copied().unwrap_or(0)
    }

    pub fn query(&self, query_id: &str) -> Option<&HashMap<String, u8>> {
        self.judgments.get(query_id)
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.judgments.contains_key(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

pub fn parse_qrels<R: BufRead>(reader: R, source: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: &str| Error::parse(source, n + 1, m);
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [query_id, _iteration, doc_id, grade] = fields[..] else {
            return Err(err("expected: query_id 0 doc_id grade"));
        };
        let grade: u8 = match grade.parse() {
            Ok(g @ 0..=2) => g,
            _ => return Err(err("grade must be 0, 1 or 2")),
        };
        if qrels.query(query_id).is_some_and(|q| q.contains_key(doc_id)) {
            return Err(err("duplicate judgment"));
        }
        qrels.insert(query_id, doc_id, grade)?;
    }
    Ok(qrels)
}

pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
    parse_qrels(std::io::BufReader::new(file), &path.display().to_string())
}

/// Ranked lists per query, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunList {
    pub run_tag: String,
    queries: IndexMap<String, Vec<ScoredDoc>>,
}

impl RunList {
    pub fn new(run_tag: impl Into<String>) -> Self {
        Self { run_tag: run_tag.into(), queries: IndexMap::new() }
    }

    /// Adds a ranked list, checking ranks run 1..n, scores never increase and
    /// doc ids are unique.
    pub fn insert(&mut self, query_id: impl Into<String>, ranking: Vec<ScoredDoc>) -> Result<()> {
        let query_id = query_id.into();
        validate_ranking(&ranking).map_err(|m| Error::Validation(format!("query {query_id}: {m}")))?;
        if self.queries.insert(query_id.clone(), ranking).is_some() {
            return Err(Error::Validation(format!("query {query_id} added twice")));
        }
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&[ScoredDoc]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.queries.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Renders the run in TREC format.
    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (query_id, ranking) in &self.queries {
            for d in ranking {
                writeln!(out, "{} Q0 {} {} {:.6} {}", query_id, d.doc_id, d.rank, d.score, self.run_tag).unwrap();
            }
        }
        out
    }
}

fn validate_ranking(ranking: &[ScoredDoc]) -> std::result::Result<(), String> {
    let mut seen = HashSet::new();
    for (i, d) in ranking.iter().enumerate() {
        if d.rank != i + 1 {
            return Err(format!("ranks must run 1..n without gaps; found rank {} at position {}", d.rank, i + 1));
        }
        if !d.score.is_finite() {
            return Err(format!("non-finite score for {}", d.doc_id));
        }
        if i > 0 && d.score > ranking[i - 1].score {
            return Err(format!("score increases at rank {}", d.rank));
        }
        if !seen.insert(d.doc_id.as_str()) {
            return Err(format!("document {} appears twice", d.doc_id));
        }
    }
    Ok(())
}

pub fn parse_run<R: BufRead>(reader: R, source: &str) -> Result<RunList> {
    let mut tag: Option<String> = None;
    // query -> (ranking, first line number)
    let mut queries: IndexMap<String, (Vec<ScoredDoc>, usize)> = IndexMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::parse(source, n + 1, m);
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [query_id, _q0, doc_id, rank, score, run_tag] = fields[..] else {
            return Err(err("expected: query_id Q0 doc_id rank score run_tag".into()));
        };
        let rank: usize = rank.parse().map_err(|_| err(format!("bad rank {rank:?}")))?;
        let score: f64 = score.parse().map_err(|_| err(format!("bad score {score:?}")))?;
        if !score.is_finite() {
            return Err(err("score must be finite".into()));
        }
        match &tag {
            None => tag = Some(run_tag.to_string()),
            Some(t) if t != run_tag => return Err(err(format!("run tag {run_tag:?} differs from {t:?}"))),
            _ => {}
        }
        let entry = queries.entry(query_id.to_string()).or_insert_with(|| (Vec::new(), n + 1));
        if entry.0.iter().any(|d| d.doc_id == doc_id) {
            return Err(err(format!("duplicate document {doc_id} for query {query_id}")));
        }
        entry.0.push(ScoredDoc { doc_id: doc_id.to_string(), score, rank });
    }
    let mut run = RunList::new(tag.unwrap_or_default());
    for (query_id, (mut ranking, line)) in queries {
        ranking.sort_by_key(|d| d.rank);
        validate_ranking(&ranking).map_err(|m| Error::parse(source, line, format!("query {query_id}: {m}")))?;
        run.queries.insert(query_id, ranking);
    }
    Ok(run)
}

pub fn load_run(path: &Path) -> Result<RunList> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
    parse_run(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn write_run(run: &RunList, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display(), e))?;
    file.write_all(run.to_trec().as_bytes()).map_err(|e| Error::io(path.display(), e))
}
