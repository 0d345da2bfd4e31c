//! Recall@k and NDCG@k with linear gain and a `log2(i + 1)` discount.

use std::collections::HashMap;

/// Fraction of relevant documents (grade >= `rel_threshold`) found in the top
/// `k`. `None` when the query has no relevant documents.
pub fn recall_at_k<S: AsRef<str>>(ranking: &[S], judged: &HashMap<String, u8>, k: usize, rel_threshold: u8) -> Option<f64> {
    let relevant = judged.values().filter(|&&g| g >= rel_threshold).count();
    if relevant == 0 {
        return None;
    }
    let found = ranking
        .iter()
        .take(k)
        .filter(|d| judged.get(d.as_ref()).is_some_and(|&g| g >= rel_threshold))
        .count();
    Some(found as f64 / relevant as f64)
}

fn dcg(grades: impl Iterator<Item = u8>) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| f64::from(g) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k. `None` when the query has no positively graded document.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judged: &HashMap<String, u8>, k: usize) -> Option<f64> {
    let mut ideal: Vec<u8> = judged.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter().take(k));
    let actual = dcg(ranking.iter().take(k).map(|d| judged.get(d.as_ref()).copied().unwrap_or(0)));
    Some(actual / idcg)
}
