//! Run evaluation: TREC I/O, Recall@k / NDCG@k, and per-category reports.
//!
//! Queries without any relevant judgment get `None` for the affected metric
//! and are left out of every mean, as trec_eval does.

mod metrics;
mod trec;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use crate::classify::QuestionCategory;
use crate::error::{Error, Result};

pub use metrics::{ndcg_at_k, recall_at_k};
pub use trec::{load_qrels, load_run, parse_qrels, parse_run, write_run, Qrels, RunList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Recall,
    Ndcg,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Ndcg => "ndcg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    pub category: QuestionCategory,
    /// `(metric, k) -> value`, `None` when undefined for this query.
    pub values: BTreeMap<(Metric, usize), Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Means {
    /// `(metric, k) -> (mean, number of queries averaged)`.
    pub values: BTreeMap<(Metric, usize), (Option<f64>, usize)>,
}

impl Means {
    fn from_queries<'a>(queries: impl Iterator<Item = &'a QueryMetrics> + Clone, keys: &[(Metric, usize)]) -> Self {
        let values = keys
            .iter()
            .map(|key| {
                let defined: Vec<f64> = queries.clone().filter_map(|q| q.values[key]).collect();
                let mean = if defined.is_empty() { None } else { Some(defined.iter().sum::<f64>() / defined.len() as f64) };
                (*key, (mean, defined.len()))
            })
            .collect();
        Self { values }
    }

    pub fn get(&self, metric: Metric, k: usize) -> Option<f64> {
        self.values.get(&(metric, k)).and_then(|v| v.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub run_tag: String,
    pub ks: Vec<usize>,
    pub rel_threshold: u8,
    pub queries: Vec<QueryMetrics>,
    pub per_category: BTreeMap<QuestionCategory, Means>,
    pub overall: Means,
    pub warnings: Vec<String>,
}

impl MetricReport {
    /// Evaluated queries.
    pub fn n(&self) -> usize {
        self.queries.len()
    }

    fn keys(&self) -> Vec<(Metric, usize)> {
        metric_keys(&self.ks)
    }

    /// One row per query, category and the overall mean:
    /// `scope, metric, k, value, queries`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("scope\tmetric\tk\tvalue\tqueries\n");
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        for q in &self.queries {
            for (metric, k) in self.keys() {
                let v = q.values[&(metric, k)];
                writeln!(out, "{}\t{}\t{}\t{}\t{}", q.query_id, metric.as_str(), k, fmt(v), usize::from(v.is_some())).unwrap();
            }
        }
        let scopes = self
            .per_category
            .iter()
            .map(|(c, m)| (c.as_str().to_string(), m))
            .chain(std::iter::once(("all".to_string(), &self.overall)));
        for (scope, means) in scopes {
            for (metric, k) in self.keys() {
                let (v, n) = means.values[&(metric, k)];
                writeln!(out, "{scope}\t{}\t{k}\t{}\t{n}", metric.as_str(), fmt(v)).unwrap();
            }
        }
        out
    }

    /// Per-category means as an aligned table.
    pub fn to_table(&self) -> String {
        let keys = self.keys();
        let mut header = vec!["category".to_string(), "n".to_string()];
        header.extend(keys.iter().map(|(m, k)| format!("{}@{k}", m.as_str())));
        let mut rows = vec![header];
        let scopes = self
            .per_category
            .iter()
            .map(|(c, m)| (c.as_str(), m, self.queries.iter().filter(|q| q.category == *c).count()))
            .chain(std::iter::once(("all", &self.overall, self.n())));
        for (name, means, n) in scopes {
            let mut row = vec![name.to_string(), n.to_string()];
            row.extend(keys.iter().map(|&(m, k)| means.get(m, k).map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))));
            rows.push(row);
        }
        render_table(&rows)
    }
}

fn render_table(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
            out.push('\n');
        }
    }
    out
}

fn metric_keys(ks: &[usize]) -> Vec<(Metric, usize)> {
    [Metric::Recall, Metric::Ndcg]
        .into_iter()
        .flat_map(|m| ks.iter().map(move |&k| (m, k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub rel_threshold: u8,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { rel_threshold: 1 }
    }
}

/// Scores every run query that has judgments. Categories default to `Other`.
pub fn evaluate(
    run: &RunList,
    qrels: &Qrels,
    categories: &HashMap<String, QuestionCategory>,
    ks: &[usize],
    options: EvalOptions,
) -> Result<MetricReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidParam("k values must be non-empty and >= 1".into()));
    }
    if !(1..=2).contains(&options.rel_threshold) {
        return Err(Error::InvalidParam("relevance threshold must be 1 or 2".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let keys = metric_keys(&ks);
    let mut warnings = Vec::new();
    let mut queries = Vec::new();
    for (query_id, ranking) in run.iter() {
        let Some(judged) = qrels.query(query_id) else {
            let msg = format!("query {query_id} has no judgments; skipped");
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        };
        let ids: Vec<&str> = ranking.iter().map(|d| d.doc_id.as_str()).collect();
        let values = keys
            .iter()
            .map(|&(metric, k)| {
                let v = match metric {
                    Metric::Recall => recall_at_k(&ids, judged, k, options.rel_threshold),
                    Metric::Ndcg => ndcg_at_k(&ids, judged, k),
                };
                ((metric, k), v)
            })
            .collect();
        let category = categories.get(query_id).copied().unwrap_or(QuestionCategory::Other);
        queries.push(QueryMetrics { query_id: query_id.to_string(), category, values });
    }
    if queries.is_empty() {
        let msg = "run and qrels share no queries".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let mut per_category = BTreeMap::new();
    for category in QuestionCategory::ALL {
        let members = queries.iter().filter(|q| q.category == category);
        if members.clone().next().is_some() {
            per_category.insert(category, Means::from_queries(members, &keys));
        }
    }
    let overall = Means::from_queries(queries.iter(), &keys);
    Ok(MetricReport {
        run_tag: run.run_tag.clone(),
        ks,
        rel_threshold: options.rel_threshold,
        queries,
        per_category,
        overall,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    /// Category name or `all`.
    pub scope: String,
    pub metric: Metric,
    pub k: usize,
    pub run_a: Option<f64>,
    pub run_b: Option<f64>,
    /// `run_b - run_a`; `None` when either side is undefined.
    pub delta: Option<f64>,
}

/// Absolute per-category and overall differences `b - a`.
pub fn compare(a: &MetricReport, b: &MetricReport) -> Result<Vec<DeltaRow>> {
    if a.ks != b.ks {
        return Err(Error::InvalidParam(format!("reports use different k values: {:?} vs {:?}", a.ks, b.ks)));
    }
    if a.rel_threshold != b.rel_threshold {
        return Err(Error::InvalidParam("reports use different relevance thresholds".into()));
    }
    let keys = metric_keys(&a.ks);
    let mut rows = Vec::new();
    let mut push = |scope: &str, ma: Option<&Means>, mb: Option<&Means>| {
        for &(metric, k) in &keys {
            let run_a = ma.and_then(|m| m.get(metric, k));
            let run_b = mb.and_then(|m| m.get(metric, k));
            let delta = run_a.zip(run_b).map(|(x, y)| y - x);
            rows.push(DeltaRow { scope: scope.to_string(), metric, k, run_a, run_b, delta });
        }
    };
    for category in QuestionCategory::ALL {
        let (ma, mb) = (a.per_category.get(&category), b.per_category.get(&category));
        if ma.is_some() || mb.is_some() {
            push(category.as_str(), ma, mb);
        }
    }
    push("all", Some(&a.overall), Some(&b.overall));
    Ok(rows)
}

/// `category, metric, k, run_a, run_b, delta`.
pub fn deltas_to_tsv(rows: &[DeltaRow]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
    let mut out = String::from("category\tmetric\tk\trun_a\trun_b\tdelta\n");
    for r in rows {
        let delta = r.delta.map_or_else(|| "n/a".to_string(), |d| format!("{d:+.6}"));
        writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", r.scope, r.metric.as_str(), r.k, fmt(r.run_a), fmt(r.run_b), delta).unwrap();
    }
    out
}

/// Reads a `query_id<TAB>Category` sidecar.
pub fn parse_categories<R: BufRead>(reader: R, source: &str) -> Result<HashMap<String, QuestionCategory>> {
    let mut map = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (query_id, category) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source, n + 1, "expected query_id<TAB>Category"))?;
        let category = category.parse().map_err(|e: Error| Error::parse(source, n + 1, e.to_string()))?;
        map.insert(query_id.trim().to_string(), category);
    }
    Ok(map)
}

pub fn load_categories(path: &Path) -> Result<HashMap<String, QuestionCategory>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
    parse_categories(std::io::BufReader::new(file), &path.display().to_string())
}
