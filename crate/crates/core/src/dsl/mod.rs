//! Script-definition language.
//!
//! A library holds top-level scripts (e.g. `Eating_Out`) and the sub-scripts
//! they use. Sub-scripts may take a single parameter (`MakeAPayment<T>`); the
//! argument is substituted into metadata predicates and keyword file paths
//! when the script is instantiated.
//!
//! ```text
//! library    := script* ;
//! script     := "script" NAME ("<" NAME ">")? "{" "goal:" STRING item* "}" ;
//! item       := prop | step | order | evidence | key | lift | "attach_discount" DECIMAL ;
//! prop       := "prop" NAME ":" DIMENSION ("(" ROLE ("," ROLE)* ")")? ;
//! step       := "action" NAME "{" prop* clue "}"
//!             | "use" NAME ("<" (NAME | STRING) ">")? "as" NAME ;
//! clue       := "metadata" FIELDPATH "=" (STRING | PARAM) "on" SOURCEKIND+
//!             | "keywords" STRING "in" (FIELD ":" WEIGHT)+ ;
//! order      := "order" NAME "<" NAME ("," NAME "<" NAME)* ;
//! evidence   := ("strong" | "weak" | "context") NAME ("base" DECIMAL)? ;
//! key        := "key" NAME ("required" | "optional") COMPARATOR ;
//! COMPARATOR := "exact_place" | "geo_radius(" M ")" | "time_window(" H ")" | "who_jaccard(" T ")" ;
//! lift       := "lift" NAME "." NAME "->" NAME ;
//! ```

mod ast;
mod lexicon;
mod parser;
mod plan;
mod printer;
mod validate;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ast::*;
pub use lexicon::{parse_keyword_file, Lexicon, LexiconError};
pub use parser::parse_library;
pub use plan::{PlanError, PlanLeaf, PlanStep, ScriptPlan};
pub use validate::{validate_library, ValidationError};

/// Positioned parse failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: duplicate name `{name}`")]
    DuplicateName { name: String, line: usize, col: usize },
    #[error("{line}:{col}: unresolved reference to `{name}`")]
    UnresolvedReference { name: String, line: usize, col: usize },
}

impl DslError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            DslError::Syntax { line, col, .. }
            | DslError::DuplicateName { line, col, .. }
            | DslError::UnresolvedReference { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} parse error(s)", .0.len())]
    Parse(Vec<DslError>),
    #[error("{} validation error(s)", .0.len())]
    Invalid(Vec<ValidationError>),
}

/// Read, parse and validate a script file. Keyword paths resolve relative to its directory.
pub fn load_library(path: &Path) -> Result<ScriptLibrary, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    let mut lib = parse_library(&text).map_err(LoadError::Parse)?;
    lib.base_dir = Some(path.parent().map(Path::to_path_buf).unwrap_or_default());
    let errs = validate_library(&lib);
    if !errs.is_empty() {
        return Err(LoadError::Invalid(errs));
    }
    Ok(lib)
}
