use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::model::{Role, SourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    Who,
    What,
    Where,
    When,
    Why,
    How,
}

impl Dimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Who => "who",
            Dimension::What => "what",
            Dimension::Where => "where",
            Dimension::When => "when",
            Dimension::Why => "why",
            Dimension::How => "how",
        }
    }
}

impl FromStr for Dimension {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "who" => Dimension::Who,
            "what" => Dimension::What,
            "where" => Dimension::Where,
            "when" => Dimension::When,
            "why" => Dimension::Why,
            "how" => Dimension::How,
            _ => return Err(()),
        })
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named W5H property. `roles` narrows a who-property to specific sub-roles.
#[derive(Debug, Clone, PartialEq)]
pub struct PropDecl {
    pub name: String,
    pub dimension: Dimension,
    pub roles: Vec<Role>,
}

/// Argument passed to a parametric sub-script.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Arg {
    Param(String),
    Literal(String),
}

/// Value side of a metadata predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueRef {
    Param(String),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetadataPredicate {
    pub field: String,
    pub value: ValueRef,
    pub sources: Vec<SourceKind>,
}

impl MetadataPredicate {
    /// Literal value; `None` while the predicate still refers to a parameter.
    pub fn literal(&self) -> Option<&str> {
        match &self.value {
            ValueRef::Literal(v) => Some(v),
            ValueRef::Param(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldWeight {
    pub field: String,
    pub weight: f64,
}

/// Keyword clue. `file` may contain `{PARAM}` placeholders until instantiated.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordClue {
    pub file: String,
    pub fields: Vec<FieldWeight>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClueDecl {
    Metadata(MetadataPredicate),
    Keywords(KeywordClue),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDef {
    pub name: String,
    pub props: Vec<PropDecl>,
    pub clue: ClueDecl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubScriptRef {
    pub script_name: String,
    pub argument: Option<Arg>,
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepDef {
    Action(ActionDef),
    Use(SubScriptRef),
}

impl StepDef {
    pub fn name(&self) -> &str {
        match self {
            StepDef::Action(a) => &a.name,
            StepDef::Use(u) => &u.alias,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Contextual,
    Weak,
    Strong,
}

impl Strength {
    pub fn default_base(self) -> f64 {
        match self {
            Strength::Strong => DEFAULT_STRONG_BASE,
            Strength::Weak => DEFAULT_WEAK_BASE,
            Strength::Contextual => DEFAULT_CONTEXTUAL_BASE,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Strength::Strong => "strong",
            Strength::Weak => "weak",
            Strength::Contextual => "context",
        }
    }

    pub fn seeds(self) -> bool {
        self != Strength::Contextual
    }
}

pub const DEFAULT_STRONG_BASE: f64 = 0.8;
pub const DEFAULT_WEAK_BASE: f64 = 0.3;
pub const DEFAULT_CONTEXTUAL_BASE: f64 = 0.5;
pub const DEFAULT_ATTACH_DISCOUNT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceDecl {
    pub step_name: String,
    pub strength: Strength,
    pub base_score: Option<f64>,
}

impl EvidenceDecl {
    pub fn base(&self) -> f64 {
        self.base_score.unwrap_or_else(|| self.strength.default_base())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparator {
    ExactPlace,
    GeoRadius(f64),
    TimeWindow(f64),
    WhoJaccard(f64),
}

impl Comparator {
    pub fn dimension(&self) -> Dimension {
        match self {
            Comparator::ExactPlace | Comparator::GeoRadius(_) => Dimension::Where,
            Comparator::TimeWindow(_) => Dimension::When,
            Comparator::WhoJaccard(_) => Dimension::Who,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Comparator::ExactPlace => f.write_str("exact_place"),
            Comparator::GeoRadius(m) => write!(f, "geo_radius({m})"),
            Comparator::TimeWindow(h) => write!(f, "time_window({h})"),
            Comparator::WhoJaccard(t) => write!(f, "who_jaccard({t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyDecl {
    pub prop_name: String,
    pub comparator: Comparator,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationRule {
    pub child_step: String,
    pub child_prop: String,
    pub parent_prop: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptDef {
    pub name: String,
    pub params: Vec<String>,
    pub goal: String,
    pub props: Vec<PropDecl>,
    pub body: Vec<StepDef>,
    pub ordering: Vec<(String, String)>,
    pub evidence: Vec<EvidenceDecl>,
    pub keys: Vec<KeyDecl>,
    pub propagation: Vec<PropagationRule>,
    pub attach_discount: Option<f64>,
}

impl ScriptDef {
    pub fn step(&self, name: &str) -> Option<&StepDef> {
        self.body.iter().find(|s| s.name() == name)
    }

    pub fn prop(&self, name: &str) -> Option<&PropDecl> {
        self.props.iter().find(|p| p.name == name)
    }

    pub fn evidence_for(&self, step: &str) -> Option<&EvidenceDecl> {
        self.evidence.iter().find(|e| e.step_name == step)
    }

    pub fn attach_discount(&self) -> f64 {
        self.attach_discount.unwrap_or(DEFAULT_ATTACH_DISCOUNT)
    }

    pub fn key_for(&self, dim: Dimension) -> Option<&KeyDecl> {
        self.keys.iter().find(|k| self.prop(&k.prop_name).map(|p| p.dimension) == Some(dim))
    }
}

/// Parameter bindings used during instantiation.
pub type Binding = BTreeMap<String, String>;

/// A parsed set of script definitions, in source order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptLibrary {
    pub scripts: Vec<ScriptDef>,
    /// Directory keyword file paths are resolved against.
    pub base_dir: Option<PathBuf>,
}

impl ScriptLibrary {
    pub fn get(&self, name: &str) -> Option<&ScriptDef> {
        self.scripts.iter().find(|s| s.name == name)
    }

    /// Scripts never referenced by a `use` step.
    pub fn top_level(&self) -> impl Iterator<Item = &ScriptDef> {
        self.scripts.iter().filter(move |s| {
            !self
                .scripts
                .iter()
                .any(|other| other.body.iter().any(|st| matches!(st, StepDef::Use(u) if u.script_name == s.name)))
        })
    }
}
