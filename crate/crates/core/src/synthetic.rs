//! Seeded synthetic data: a small conversational benchmark and a large
//! passage corpus for latency measurement.
//!
//! The benchmark has ten topics of five turns. Turn 1 names the subject;
//! turns 2 to 5 ask about one aspect each through a pronoun ("How much does
//! it cost?"). Every topic has passages on every aspect, so a follow-up read
//! on its own matches all ten topics equally. Judged-relevant passages name
//! both the subject and the aspect and carry cues for the question's answer
//! type; grade 0 passages name both but give no answer.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::index::Document;
use crate::rewrite::{Topic, Turn};

pub const MINIBENCH_SEED: u64 = 20_190_731;

const SUBJECTS: [&str; 10] = [
    "solar panel",
    "honey bee",
    "electric guitar",
    "coral reef",
    "steam engine",
    "sourdough bread",
    "wind turbine",
    "bonsai tree",
    "telescope mirror",
    "mountain bike",
];

struct Aspect {
    question: &'static str,
    /// Mentions the aspect without answering it.
    vague: &'static [&'static str],
    /// Answers, with cue-bearing tokens in the right places.
    answers: &'static [&'static str],
}

// `{s}` is the subject, `{n}`, `{y}`, `{m}` a number, a year, a month,
// `{p}` a person, `{c}` a place.
const ASPECTS: [Aspect; 6] = [
    Aspect {
        question: "How much does it cost?",
        vague: &["people keep asking about the cost of a {s} and nobody agrees", "the cost of a {s} came up at the meeting again"],
        answers: &[
            "a typical {s} will cost about ${n} and the cost rises to {n} dollars for premium models",
            "the cost of a basic {s} is near ${n}, roughly {n} percent more than last year",
            "expect the {s} to cost {n} dollars, or ${n} with delivery and {n} hours of setup",
        ],
    },
    Aspect {
        question: "When was it invented?",
        vague: &["historians still argue over who invented the {s} first", "the invented story of the {s} is told in many ways"],
        answers: &[
            "the {s} was invented in {y}, and the first patent followed in {m} {y}",
            "records show the {s} was invented around {y} during a decade of rapid change",
            "the modern {s} was invented in {m} {y}, late in the century",
        ],
    },
    Aspect {
        question: "Why is it popular?",
        vague: &["the {s} is popular in some circles and not in others", "whether the {s} stays popular is anyone's guess"],
        answers: &[
            "the {s} is popular because it is reliable, and the reason buyers return is due to low upkeep",
            "the {s} became popular because of steady demand, as a result of lower prices",
            "much of why the {s} is popular is due to word of mouth, because owners recommend it",
        ],
    },
    Aspect {
        question: "Where is it made?",
        vague: &["the label on the {s} never says where it was made", "each {s} is made somewhere, though the maker stays quiet"],
        answers: &[
            "most of each {s} is made in {c}, a city in the north of the country",
            "the {s} is made at a plant near {c} and shipped east from the capital",
            "factories in {c} have made the {s} for years, located by the river in the south",
        ],
    },
    Aspect {
        question: "Who designed it?",
        vague: &["the {s} was designed by a team whose names are lost", "nobody credits whoever designed the {s}"],
        answers: &[
            "the first {s} was designed by {p} with help from Dr {p}",
            "engineer {p} designed the {s}, working alongside Prof {p}",
            "the {s} we know was designed by {p} and later refined by {p}",
        ],
    },
    Aspect {
        question: "How does it work?",
        vague: &["few owners know how a {s} does its work", "the work a {s} does goes unnoticed by most"],
        answers: &[
            "a {s} does its work in steps: first it gathers input, then it converts it, and finally it stores the result",
            "the work of a {s} follows a process: first set up, next adjust, then run through each step",
            "to see the {s} work, first prepare it, then follow the method step by step",
        ],
    },
];

const DEFINITIONS: [&str; 3] = [
    "a {s} is a device or thing that people describe in many ways, known as a staple of its field",
    "the term {s} refers to a familiar object; a {s} is an everyday sight",
    "a {s} is defined as a common object, and the name {s} means much the same everywhere",
];

const GENERAL: [&str; 4] = [
    "we saw a {s} at the county fair",
    "my neighbour keeps a {s} in the garden shed",
    "the {s} appeared in an old photograph from the library",
    "a friend wrote a short note about the {s} last week",
];

const NOISE_HEADS: [&str; 8] = [
    "the cost of groceries was discussed",
    "the museum invented a new tour",
    "the song was popular on the radio",
    "the scarf was made by hand",
    "the poster was designed for the festival",
    "the crew went to work early",
    "the parade route was announced",
    "the harbour was quiet that morning",
];

const FILLER: [&str; 48] = [
    "quiet", "river", "orange", "window", "ladder", "market", "garden", "silver", "pencil", "harbour", "meadow",
    "basket", "lantern", "velvet", "marble", "summer", "winter", "candle", "feather", "pebble", "village", "kettle",
    "blanket", "willow", "granite", "copper", "thunder", "violet", "compass", "anchor", "saddle", "tunnel", "orchard",
    "breeze", "cobble", "timber", "ribbon", "harvest", "puzzle", "curtain", "lemon", "button", "canvas", "walnut",
    "cedar", "parcel", "signal", "valley",
];

const PEOPLE: [&str; 12] = [
    "Ada Collins", "Rafael Ortiz", "Mei Tanaka", "Olu Adeyemi", "Greta Lind", "Henry Marsh", "Priya Nair",
    "Tomas Novak", "Lena Fischer", "Samuel Okafor", "Ines Duarte", "Karl Berg",
];

const PLACES: [&str; 10] = [
    "Ohio", "Bavaria", "Osaka", "Lyon", "Porto", "Gdansk", "Leeds", "Turin", "Busan", "Dayton",
];

const MONTHS: [&str; 6] = ["March", "April", "June", "August", "October", "December"];

/// A generated benchmark: passages, topics and graded judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBench {
    pub documents: Vec<Document>,
    pub topics: Vec<Topic>,
    /// `(query_id, doc_id, grade)`, sorted.
    pub qrels: Vec<(String, String, u8)>,
}

struct Builder {
    rng: ChaCha8Rng,
    docs: Vec<Document>,
    seen: HashSet<String>,
}

impl Builder {
    fn fill(&mut self, template: &str, subject: &str) -> String {
        let mut out = String::new();
        let mut rest = template;
        while let Some(i) = rest.find('{') {
            out.push_str(&rest[..i]);
            let key = &rest[i..i + 3];
            match key {
                "{s}" => out.push_str(subject),
                "{n}" => write!(out, "{}", self.rng.gen_range(20..2000)).unwrap(),
                "{y}" => write!(out, "{}", self.rng.gen_range(1700..2000)).unwrap(),
                "{m}" => out.push_str(MONTHS.choose(&mut self.rng).unwrap()),
                "{p}" => out.push_str(PEOPLE.choose(&mut self.rng).unwrap()),
                "{c}" => out.push_str(PLACES.choose(&mut self.rng).unwrap()),
                _ => unreachable!("bad template key {key}"),
            }
            rest = &rest[i + 3..];
        }
        out.push_str(rest);
        out
    }

    fn filler_sentence(&mut self) -> String {
        let n = self.rng.gen_range(5..10);
        let words: Vec<&str> = (0..n).map(|_| *FILLER.choose(&mut self.rng).unwrap()).collect();
        capitalize(&words.join(" "))
    }

    /// Adds a passage of `head` plus up to `max_filler` filler sentences in
    /// random positions and returns its id. Texts are unique.
    fn passage(&mut self, prefix: &str, head: &str, max_filler: usize) -> String {
        loop {
            let mut sentences = vec![capitalize(head)];
            for _ in 0..self.rng.gen_range(1..=max_filler) {
                let s = self.filler_sentence();
                let at = self.rng.gen_range(0..=sentences.len());
                sentences.insert(at, s);
            }
            let text = sentences.join(". ") + ".";
            if self.seen.insert(text.clone()) {
                let doc_id = format!("{prefix}_{:04}", self.docs.len());
                self.docs.push(Document::new(doc_id.clone(), text));
                return doc_id;
            }
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    chars.next().map_or_else(String::new, |c| c.to_uppercase().chain(chars).collect())
}

/// Builds the benchmark from `seed`. The same seed always gives the same
/// benchmark.
pub fn minibench(seed: u64) -> MiniBench {
    let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(seed), docs: Vec::new(), seen: HashSet::new() };
    let mut topics = Vec::new();
    let mut qrels = Vec::new();
    let mut aspect_order: Vec<usize> = (0..ASPECTS.len()).collect();

    for (t, subject) in SUBJECTS.iter().enumerate() {
        let topic_id = (t + 1).to_string();
        let prefix = format!("T{:02}", t + 1);
        aspect_order.shuffle(&mut b.rng);
        let asked = &aspect_order[..4];

        let mut utterances = vec![format!("What is a {subject}?")];
        utterances.extend(asked.iter().map(|&a| ASPECTS[a].question.to_string()));
        let query_id = |turn: usize| format!("{topic_id}_{turn}");

        for (i, def) in DEFINITIONS.iter().enumerate() {
            let head = b.fill(def, subject);
            let id = b.passage(&prefix, &head, 3);
            qrels.push((query_id(1), id, if i == 0 { 2 } else { 1 }));
        }
        // Every aspect gets passages, asked or not, so unasked aspects still
        // compete for the other topics' follow-ups.
        for (a, aspect) in ASPECTS.iter().enumerate() {
            let turn = asked.iter().position(|&x| x == a).map(|p| p + 2);
            for (i, template) in aspect.answers.iter().enumerate() {
                let head = b.fill(template, subject);
                let id = b.passage(&prefix, &head, 3);
                if let Some(turn) = turn {
                    qrels.push((query_id(turn), id, if i == 0 { 2 } else { 1 }));
                }
            }
            for template in aspect.vague {
                let head = b.fill(template, subject);
                let id = b.passage(&prefix, &head, 3);
                if let Some(turn) = turn {
                    qrels.push((query_id(turn), id, 0));
                }
            }
        }
        for _ in 0..60 {
            let template = *GENERAL.choose(&mut b.rng).unwrap();
            let head = b.fill(template, subject);
            b.passage(&prefix, &head, 4);
        }

        let turns = utterances
            .into_iter()
            .enumerate()
            .map(|(i, raw_utterance)| Turn { topic_id: topic_id.clone(), turn_number: i as u32 + 1, raw_utterance })
            .collect();
        topics.push(Topic { topic_id, title: String::new(), description: String::new(), turns });
    }
    while b.docs.len() < 2000 {
        let head = NOISE_HEADS.choose(&mut b.rng).unwrap().to_string();
        b.passage("N", &head, 4);
    }
    qrels.sort();
    MiniBench { documents: b.docs, topics, qrels }
}

impl MiniBench {
    pub fn corpus_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.documents {
            writeln!(out, "{}", json!({"id": d.doc_id, "text": d.text})).unwrap();
        }
        out
    }

    /// Topics in the format read by [`crate::rewrite::parse_topics`].
    pub fn topics_json(&self) -> String {
        let topics: Vec<_> = self
            .topics
            .iter()
            .map(|t| {
                let turns: Vec<_> =
                    t.turns.iter().map(|u| json!({"number": u.turn_number, "raw_utterance": u.raw_utterance})).collect();
                json!({"number": t.topic_id, "title": t.title, "description": t.description, "turn": turns})
            })
            .collect();
        serde_json::to_string_pretty(&topics).expect("topics serialize") + "\n"
    }

    pub fn qrels_text(&self) -> String {
        let mut out = String::new();
        for (q, d, g) in &self.qrels {
            writeln!(out, "{q} 0 {d} {g}").unwrap();
        }
        out
    }
}

/// `n` passages over a Zipf-distributed vocabulary for timing retrieval.
/// Words are `w<rank>`; common ranks appear in most passages.
pub fn latency_corpus(n: usize, seed: u64) -> Vec<Document> {
    const VOCAB: usize = 50_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cumulative: Vec<f64> = (1..=VOCAB)
        .scan(0.0, |acc, r| {
            *acc += 1.0 / r as f64;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    (0..n)
        .map(|i| {
            let len = rng.gen_range(30..90);
            let mut text = String::with_capacity(len * 7);
            for j in 0..len {
                let u = rng.gen::<f64>() * total;
                let rank = cumulative.partition_point(|&c| c < u) + 1;
                if j > 0 {
                    text.push(' ');
                }
                write!(text, "w{rank}").unwrap();
            }
            Document::new(format!("L{i:06}"), text)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        let bench = minibench(MINIBENCH_SEED);
        assert_eq!(bench.documents.len(), 2000);
        assert_eq!(bench.topics.len(), 10);
        assert!(bench.topics.iter().all(|t| t.turns.len() == 5));
        let ids: HashSet<_> = bench.documents.iter().map(|d| &d.doc_id).collect();
        assert_eq!(ids.len(), 2000);
        assert!(bench.qrels.iter().all(|(_, d, _)| ids.contains(d)));
        for t in &bench.topics {
            for turn in &t.turns {
                let q = turn.query_id();
                assert!(bench.qrels.iter().any(|(id, _, g)| *id == q && *g > 0), "{q} has no relevant passage");
            }
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(minibench(1), minibench(1));
        assert_ne!(minibench(1).documents, minibench(2).documents);
        assert_eq!(latency_corpus(50, 3), latency_corpus(50, 3));
    }
}
