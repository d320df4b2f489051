use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("keyword file {0} not found")]
    Missing(PathBuf),
    #[error("keyword file {0} has no terms")]
    Empty(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Lowercased keyword terms. A term may span several words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub terms: BTreeSet<String>,
}

impl Lexicon {
    pub fn from_terms<I: IntoIterator<Item = S>, S: AsRef<str>>(terms: I) -> Self {
        let terms = terms
            .into_iter()
            .map(|t| t.as_ref().split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        Lexicon { terms }
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                LexiconError::Missing(path.to_path_buf())
            } else {
                LexiconError::Io { path: path.to_path_buf(), source }
            }
        })?;
        let lex = parse_keyword_file(&text);
        if lex.terms.is_empty() {
            return Err(LexiconError::Empty(path.to_path_buf()));
        }
        Ok(lex)
    }
}

/// One term per line; blank lines and `#` comments are skipped.
pub fn parse_keyword_file(text: &str) -> Lexicon {
    Lexicon::from_terms(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
}
