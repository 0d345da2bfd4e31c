use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use super::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One `{"id": ..., "text": ...}` object per line.
    JsonLines,
    /// `id<TAB>text` per line.
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "json" => Ok(CorpusFormat::JsonLines),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::InvalidParam(format!("unknown corpus format {other:?}"))),
        }
    }
}

fn parse_json_line(line: &str) -> std::result::Result<Document, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("expected a JSON object")?;
    let doc_id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err("missing string field \"id\"".into()),
    };
    let text = obj
        .get("text")
        .and_then(Value::as_str)
        .ok_or("missing string field \"text\"")?
        .to_string();
    Ok(Document { doc_id, text })
}

fn parse_tsv_line(line: &str) -> std::result::Result<Document, String> {
    let (id, text) = line.split_once('\t').ok_or("expected id<TAB>text")?;
    if id.trim().is_empty() {
        return Err("empty document id".into());
    }
    Ok(Document { doc_id: id.trim().to_string(), text: text.to_string() })
}

/// Lazily parses a corpus. Blank lines are skipped; every error carries the
/// 1-based line number.
pub fn read_corpus<'a, R: BufRead + 'a>(
    reader: R,
    format: CorpusFormat,
    source: &'a str,
) -> impl Iterator<Item = Result<Document>> + 'a {
    reader.lines().enumerate().filter_map(move |(n, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::parse(source, n + 1, e.to_string()))),
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            return None;
        }
        let parsed = match format {
            CorpusFormat::JsonLines => parse_json_line(line),
            CorpusFormat::Tsv => parse_tsv_line(line),
        };
        Some(parsed.map_err(|m| Error::parse(source, n + 1, m)))
    })
}

pub fn read_corpus_file(path: &Path, format: CorpusFormat) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
    let source = path.display().to_string();
    read_corpus(std::io::BufReader::new(file), format, &source).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_records() {
        let input = "{\"id\": \"d1\", \"text\": \"cat sat\"}\n\n{\"id\": 7, \"text\": \"dog\"}\n";
        let docs: Vec<_> = read_corpus(input.as_bytes(), CorpusFormat::JsonLines, "c")
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs, vec![Document::new("d1", "cat sat"), Document::new("7", "dog")]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let input = "{\"id\": \"d1\", \"text\": \"x\"}\n{\"id\": \"d2\"}\n";
        let err = read_corpus(input.as_bytes(), CorpusFormat::JsonLines, "c")
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = read_corpus("d1\tok\nno tab here\n".as_bytes(), CorpusFormat::Tsv, "c")
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn tsv_keeps_tabs_in_text() {
        let docs: Vec<_> = read_corpus("d1\ta\tb\r\n".as_bytes(), CorpusFormat::Tsv, "c")
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs, vec![Document::new("d1", "a\tb")]);
    }
}
