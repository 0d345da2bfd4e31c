use crate::classify::QuestionCategory;
use crate::rerank::CueLexicon;

/// Maximum snippet length in characters.
pub const SNIPPET_CHARS: usize = 300;

/// The [`SNIPPET_CHARS`]-character window of `text` with the most cues for
/// `category`; the earliest such window on ties. Short texts come back whole.
///
/// Windows start at word boundaries, plus one flush with the end of the text.
pub fn make_snippet(text: &str, category: QuestionCategory, lexicon: &CueLexicon) -> String {
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    let chars = bounds.len() - 1;
    if chars <= SNIPPET_CHARS {
        return text.to_string();
    }
    let last = chars - SNIPPET_CHARS;
    let mut starts: Vec<usize> = (0..=last)
        .filter(|&c| {
            let b = bounds[c];
            c == 0 || (!is_space(text, b) && is_space(text, bounds[c - 1]))
        })
        .collect();
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    let window = |c: usize| &text[bounds[c]..bounds[c + SNIPPET_CHARS]];
    let mut best = (0, lexicon.cue_count(category, window(0)));
    for &c in &starts[1..] {
        let count = lexicon.cue_count(category, window(c));
        if count > best.1 {
            best = (c, count);
        }
    }
    window(best.0).to_string()
}

fn is_space(text: &str, byte: usize) -> bool {
    text[byte..].chars().next().is_some_and(char::is_whitespace)
}
