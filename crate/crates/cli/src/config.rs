//! TOML parameter file. Every field is optional; command-line flags win.
//!
//! ```toml
//! [text]
//! stem = true
//! stopwords = "stopwords.txt"
//! abbreviations = "abbrev.tsv"
//!
//! [retrieval]
//! scorer = "ql"
//! mu = 2500.0
//! k = 1000
//!
//! [rewrite]
//! weights = [5.0, 3.25, 1.0]
//! resolve = true
//!
//! [rerank]
//! lambda = 0.5
//!
//! [classify]
//! rules = "rules.txt"
//! lexicon = "lexicon.txt"
//!
//! [eval]
//! ks = [10, 1000]
//!
//! [serve]
//! port = 8080
//! index = "index.bin"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub text: TextSection,
    #[serde(default)]
    pub retrieval: RetrievalSection,
    #[serde(default)]
    pub rewrite: RewriteSection,
    #[serde(default)]
    pub rerank: RerankSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextSection {
    pub stem: Option<bool>,
    pub stopwords: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalSection {
    pub scorer: Option<String>,
    pub mu: Option<f64>,
    pub k: Option<usize>,
    pub bm25_k1: Option<f64>,
    pub bm25_b: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewriteSection {
    pub weights: Option<[f64; 3]>,
    pub resolve: Option<bool>,
    pub use_title: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankSection {
    pub lambda: Option<f64>,
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    pub rules: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub ks: Option<Vec<usize>>,
    pub rel_threshold: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub port: Option<u16>,
    pub host: Option<String>,
    pub index: Option<PathBuf>,
    pub session_log: Option<PathBuf>,
    pub k: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path`; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config = Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut().filter(|p| p.is_relative()) {
                *path = base.join(&*path);
            }
        };
        fix(&mut self.text.stopwords);
        fix(&mut self.text.abbreviations);
        fix(&mut self.classify.rules);
        fix(&mut self.classify.lexicon);
        fix(&mut self.serve.index);
        fix(&mut self.serve.session_log);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections() {
        let config = FileConfig::parse(
            "[rewrite]\nweights = [10.0, 6.5, 2.0]\n[rerank]\nlambda = 0.0\n[serve]\nport = 9000\nindex = \"i.bin\"\n",
        )
        .unwrap();
        assert_eq!(config.rewrite.weights, Some([10.0, 6.5, 2.0]));
        assert_eq!(config.rerank.lambda, Some(0.0));
        assert_eq!(config.serve.port, Some(9000));
        assert_eq!(config.retrieval, RetrievalSection::default());
    }

    #[test]
    fn typos_are_rejected() {
        assert!(FileConfig::parse("[rerank]\nlamda = 0.5\n").is_err());
        assert!(FileConfig::parse("[reranker]\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut config = FileConfig::parse("[serve]\nindex = \"i.bin\"\nsession_log = \"/abs/log\"\n").unwrap();
        config.rebase(Path::new("/etc/cs"));
        assert_eq!(config.serve.index.unwrap(), Path::new("/etc/cs/i.bin"));
        assert_eq!(config.serve.session_log.unwrap(), Path::new("/abs/log"));
    }
}
