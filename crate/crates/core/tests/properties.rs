use std::collections::{BTreeSet, HashMap};

use convsearch::classify::{default_rules, QuestionCategory};
use convsearch::evalkit::{ndcg_at_k, parse_run, RunList};
use convsearch::index::{BuildOptions, Document, InvertedIndex};
use convsearch::rerank::{rerank_with, CueLexicon, RerankParams};
use convsearch::retrieval::{search, RetrievalParams, ScoredDoc, Scorer, WeightedQuery};
use convsearch::rewrite::{resolve_references, Turn};
use convsearch::textproc::{builtin_stopwords, content_hash, normalize, tokenize, TextConfig};
use proptest::prelude::*;

const WORDS: &[&str] = &[
    "cat", "dog", "sat", "mat", "cost", "price", "because", "invented", "in", "1990", "the", "it", "and",
    "located", "city", "steps", "first", "$40", "percent", "who", "reason", "years", "founded", "river",
];

fn passage() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 1..25).prop_map(|w| w.join(" "))
}

fn corpus() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(passage(), 1..30)
}

fn raw_index(texts: &[String]) -> InvertedIndex {
    let docs = texts.iter().enumerate().map(|(i, t)| Ok(Document::new(format!("d{i:02}"), t.clone())));
    InvertedIndex::build(docs, TextConfig::raw(), BuildOptions { allow_empty: false, dedup: false }).unwrap()
}

fn query() -> impl Strategy<Value = WeightedQuery> {
    prop::collection::vec((prop::sample::select(WORDS), 0.1f64..6.0), 1..6)
        .prop_map(|terms| WeightedQuery::new(terms).unwrap())
}

fn judged() -> impl Strategy<Value = HashMap<String, u8>> {
    prop::collection::hash_map("[a-f]", 0u8..=3, 0..6)
}

fn ranking() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[a-h]", 0..10).prop_map(|mut v| {
        let mut seen = BTreeSet::new();
        v.retain(|d| seen.insert(d.clone()));
        v
    })
}

proptest! {
    #[test]
    fn normalize_is_idempotent(s in "\\PC{0,40}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once.clone());
        prop_assert_eq!(content_hash(&s), content_hash(&once));
    }

    #[test]
    fn tokenize_drops_stopwords_and_empties(s in "[a-zA-Z' .,-]{0,60}") {
        let stop = builtin_stopwords();
        for stem in [false, true] {
            let terms = tokenize(&normalize(&s), &stop, stem);
            for t in terms.iter() {
                prop_assert!(!t.is_empty());
                prop_assert!(!stop.contains(t), "stopword {t:?}");
            }
        }
    }

    #[test]
    fn index_statistics_are_consistent(texts in corpus()) {
        let index = raw_index(&texts);
        let mut len_from_postings = vec![0u32; index.doc_count()];
        let mut total = 0u64;
        for term in index.terms() {
            let postings = index.postings(term);
            prop_assert!(postings.windows(2).all(|w| w[0].doc < w[1].doc), "{term} postings unsorted");
            let cf: u64 = postings.iter().map(|p| u64::from(p.tf)).sum();
            prop_assert_eq!(cf, index.collection_tf(term));
            for p in postings {
                prop_assert!(p.tf > 0);
                len_from_postings[p.doc as usize] += p.tf;
            }
            total += cf;
        }
        for (ord, text) in texts.iter().enumerate() {
            prop_assert_eq!(len_from_postings[ord], index.doc_length(ord as u32));
            prop_assert_eq!(index.doc_length(ord as u32) as usize, text.split_whitespace().count());
        }
        prop_assert_eq!(total, index.collection_length());
    }

    #[test]
    fn index_persistence_round_trips(texts in corpus()) {
        let index = raw_index(&texts);
        let bytes = index.to_bytes();
        let loaded = InvertedIndex::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&loaded, &index);
        prop_assert_eq!(loaded.to_bytes(), bytes);
    }

    #[test]
    fn corrupted_index_bytes_are_rejected(texts in corpus(), pos in any::<prop::sample::Index>(), flip in 1u8..=255) {
        let mut bytes = raw_index(&texts).to_bytes();
        let i = pos.index(bytes.len());
        bytes[i] ^= flip;
        prop_assert!(InvertedIndex::from_bytes(&bytes).is_err());
    }

    #[test]
    fn scaling_weights_scales_scores(texts in corpus(), q in query(), exp in -3i32..=3, bm25 in any::<bool>()) {
        let index = raw_index(&texts);
        let factor = 2f64.powi(exp);
        let scorer = if bm25 { Scorer::Bm25 } else { Scorer::Ql };
        let params = RetrievalParams { k: 100, scorer, ..RetrievalParams::default() };
        let a = search(&index, &q, &params).unwrap();
        let b = search(&index, &q.scaled(factor).unwrap(), &params).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.doc_id, &y.doc_id);
            prop_assert_eq!(y.score, x.score * factor);
        }
    }

    #[test]
    fn extra_occurrence_never_lowers_ql(texts in corpus(), which in any::<prop::sample::Index>(), term in prop::sample::select(WORDS), mu in 1f64..3000.0) {
        prop_assume!(normalize(term) == term);
        let i = which.index(texts.len());
        let q = WeightedQuery::new([(term, 1.0)]).unwrap();
        let mut grown = texts.clone();
        grown[i] = format!("{} {term}", grown[i]);
        let params = RetrievalParams { mu, k: 100, ..RetrievalParams::default() };
        let score_of = |texts: &[String]| {
            search(&raw_index(texts), &q, &params).unwrap().into_iter().find(|d| d.doc_id == format!("d{i:02}")).map(|d| d.score)
        };
        let after = score_of(&grown).unwrap();
        if let Some(before) = score_of(&texts) {
            prop_assert!(after >= before - 1e-12, "{before} -> {after}");
        }
    }

    #[test]
    fn ndcg_is_bounded(run in ranking(), judged in judged(), k in 1usize..12) {
        if let Some(v) = ndcg_at_k(&run, &judged, k) {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v), "{v}");
        } else {
            prop_assert!(judged.values().all(|&g| g == 0));
        }
    }

    #[test]
    fn ideal_ordering_scores_one(judged in judged(), k in 1usize..12) {
        let mut ideal: Vec<(&String, &u8)> = judged.iter().collect();
        ideal.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        let ideal: Vec<&str> = ideal.into_iter().map(|(d, _)| d.as_str()).collect();
        if let Some(v) = ndcg_at_k(&ideal, &judged, k) {
            prop_assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn run_files_round_trip(queries in prop::collection::btree_map("[0-9]{1,2}_[1-9]", ranking(), 1..5)) {
        let mut run = RunList::new("tag");
        for (qid, docs) in &queries {
            let n = docs.len();
            let ranked = docs.iter().enumerate().map(|(i, d)| ScoredDoc { doc_id: d.clone(), score: (n - i) as f64 / 1000.0, rank: i + 1 }).collect();
            run.insert(qid.clone(), ranked).unwrap();
        }
        let text = run.to_trec();
        let parsed = parse_run(text.as_bytes(), "run").unwrap();
        prop_assert_eq!(parsed.to_trec(), text);
        for (qid, docs) in &queries {
            let ids: Vec<&str> = parsed.get(qid).unwrap_or(&[]).iter().map(|d| d.doc_id.as_str()).collect();
            prop_assert_eq!(ids, docs.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rerank_adds_nonnegative_bonus(texts in corpus(), lambda in 0f64..3.0, cat in 0usize..9) {
        let category = QuestionCategory::ALL[cat];
        let ranked: Vec<ScoredDoc> = texts.iter().enumerate()
            .map(|(i, _)| ScoredDoc { doc_id: format!("d{i:02}"), score: -(i as f64) * 0.25, rank: i + 1 })
            .collect();
        let lexicon = CueLexicon::builtin();
        let text_of = |id: &str| id[1..].parse::<usize>().ok().map(|i| texts[i].as_str());
        let out = rerank_with(ranked.clone(), category, &lexicon, &RerankParams { lambda, depth: None }, text_of).unwrap();
        let mut before: Vec<&str> = ranked.iter().map(|d| d.doc_id.as_str()).collect();
        let mut after: Vec<&str> = out.iter().map(|d| d.doc_id.as_str()).collect();
        if lambda == 0.0 {
            prop_assert_eq!(&after, &before);
        }
        prop_assert!(out.windows(2).all(|w| w[0].score >= w[1].score));
        prop_assert!(out.iter().enumerate().all(|(i, d)| d.rank == i + 1));
        let old: HashMap<&str, f64> = ranked.iter().map(|d| (d.doc_id.as_str(), d.score)).collect();
        for d in &out {
            prop_assert!(d.score >= old[d.doc_id.as_str()]);
        }
        before.sort_unstable();
        after.sort_unstable();
        prop_assert_eq!(after, before);
    }

    #[test]
    fn rerank_with_zero_lambda_is_identity(texts in corpus()) {
        let ranked: Vec<ScoredDoc> = (0..texts.len())
            .map(|i| ScoredDoc { doc_id: format!("d{i:02}"), score: -(i as f64), rank: i + 1 })
            .collect();
        let text_of = |id: &str| id[1..].parse::<usize>().ok().map(|i| texts[i].as_str());
        let out = rerank_with(ranked.clone(), QuestionCategory::Why, &CueLexicon::builtin(), &RerankParams { lambda: 0.0, depth: None }, text_of).unwrap();
        prop_assert_eq!(out, ranked);
    }

    #[test]
    fn how_much_prefix_wins(rest in "[a-z ]{0,40}") {
        let q = format!("how much {rest}");
        prop_assert_eq!(default_rules().classify(&q).unwrap(), QuestionCategory::HowMuch);
    }

    #[test]
    fn resolution_without_pronouns_is_identity(words in prop::collection::vec("(cost|price|solar|panel|tall|year|when|what|is|does)", 1..10)) {
        let utterance = words.join(" ");
        let history = [Turn { topic_id: "1".into(), turn_number: 1, raw_utterance: "What is a heat pump?".into() }];
        prop_assert_eq!(resolve_references(&utterance, &history, "heat pump"), utterance);
    }

    #[test]
    fn weighted_query_merges_by_summing(terms in prop::collection::vec((prop::sample::select(WORDS), 0.5f64..4.0), 1..12)) {
        let q = WeightedQuery::new(terms.clone()).unwrap();
        let keys: Vec<&str> = q.terms().iter().map(|(t, _)| t.as_str()).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        for (t, w) in q.terms() {
            let want: f64 = terms.iter().filter(|(u, _)| u == t).map(|(_, w)| w).sum();
            prop_assert!((w - want).abs() < 1e-12);
        }
    }
}
