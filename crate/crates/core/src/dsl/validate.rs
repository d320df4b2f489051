use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::ast::*;
use super::lexicon::{Lexicon, LexiconError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("{script}: {what} = {value} is outside its allowed range")]
    ScoreOutOfRange { script: String, what: String, value: f64 },
    #[error("{script}: weight {value} for field `{field}` must be in (0,1]")]
    WeightOutOfRange { script: String, field: String, value: f64 },
    #[error("{script}: ordering contains a cycle through `{step}`")]
    CyclicOrdering { script: String, step: String },
    #[error("{script}: unknown step `{step}`")]
    UnknownStep { script: String, step: String },
    #[error("{script}: undeclared prop `{prop}`")]
    UndeclaredProp { script: String, prop: String },
    #[error("{script}: undeclared parameter `{param}`")]
    UndeclaredParameter { script: String, param: String },
    #[error("{script}: `{child}` and `{parent}` have different dimensions")]
    DimensionMismatch { script: String, child: String, parent: String },
    #[error("{script}: key on `{prop}` uses {comparator}, which does not fit its dimension or arguments")]
    KeyMismatch { script: String, prop: String, comparator: String },
    #[error("{script}: `{target}` takes {expected} argument(s)")]
    ArgumentMismatch { script: String, target: String, expected: usize },
    #[error("{script}: step `{step}` has more than one evidence declaration")]
    DuplicateEvidence { script: String, step: String },
    #[error("{script}: no strong evidence reaches any step")]
    MissingStrongEvidence { script: String },
    #[error("{script}: no required key")]
    MissingRequiredKey { script: String },
    #[error("{script}: sub-script nesting is recursive")]
    RecursiveScript { script: String },
    #[error("{script}: {message}")]
    KeywordFile { script: String, message: String },
    #[error("{script}: {message}")]
    Plan { script: String, message: String },
}

fn placeholders(path: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = path;
    while let Some(i) = rest.find('{') {
        let after = &rest[i + 1..];
        match after.find('}') {
            Some(j) => {
                out.push(after[..j].to_string());
                rest = &after[j + 1..];
            }
            None => break,
        }
    }
    out
}

/// Check every cross-reference, range and structural invariant. Never mutates.
pub fn validate_library(lib: &ScriptLibrary) -> Vec<ValidationError> {
    let mut errs = Vec::new();
    for s in &lib.scripts {
        check_script(lib, s, &mut errs);
    }
    let recursive = recursive_scripts(lib);
    for name in &recursive {
        errs.push(ValidationError::RecursiveScript { script: name.clone() });
    }
    for top in lib.top_level() {
        if recursive.contains(&top.name) {
            continue;
        }
        if !top.keys.iter().any(|k| k.required) {
            errs.push(ValidationError::MissingRequiredKey { script: top.name.clone() });
        }
        if !top.params.is_empty() {
            continue;
        }
        match lib.plan(&top.name) {
            Ok(plan) => {
                let leaves = plan.steps.iter().flat_map(|s| &s.leaves);
                if !leaves.clone().any(|l| l.strength == Strength::Strong) {
                    errs.push(ValidationError::MissingStrongEvidence { script: top.name.clone() });
                }
                if let Some(dir) = &lib.base_dir {
                    let mut seen = BTreeSet::new();
                    for leaf in leaves {
                        if let ClueDecl::Keywords(k) = &leaf.clue {
                            if seen.insert(k.file.clone()) {
                                if let Err(e) = Lexicon::load(&dir.join(&k.file)) {
                                    let message = match e {
                                        LexiconError::Missing(_) => format!("keyword file {} not found", k.file),
                                        LexiconError::Empty(_) => format!("keyword file {} is empty", k.file),
                                        other => other.to_string(),
                                    };
                                    errs.push(ValidationError::KeywordFile { script: top.name.clone(), message });
                                }
                            }
                        }
                    }
                }
            }
            Err(e) => errs.push(ValidationError::Plan { script: top.name.clone(), message: e.to_string() }),
        }
    }
    errs
}

fn check_script(lib: &ScriptLibrary, s: &ScriptDef, errs: &mut Vec<ValidationError>) {
    let script = || s.name.clone();
    let steps: BTreeSet<&str> = s.body.iter().map(StepDef::name).collect();
    let unknown_step = |step: &str, errs: &mut Vec<ValidationError>| {
        if !steps.contains(step) {
            errs.push(ValidationError::UnknownStep { script: script(), step: step.to_string() });
        }
    };

    for p in s.props.iter().chain(s.body.iter().flat_map(|st| match st {
        StepDef::Action(a) => a.props.iter(),
        StepDef::Use(_) => [].iter(),
    })) {
        if !p.roles.is_empty() && p.dimension != Dimension::Who {
            errs.push(ValidationError::DimensionMismatch {
                script: script(),
                child: p.name.clone(),
                parent: p.dimension.to_string(),
            });
        }
    }

    for st in &s.body {
        match st {
            StepDef::Action(a) => match &a.clue {
                ClueDecl::Metadata(m) => {
                    if let ValueRef::Param(p) = &m.value {
                        if !s.params.contains(p) {
                            errs.push(ValidationError::UndeclaredParameter { script: script(), param: p.clone() });
                        }
                    }
                }
                ClueDecl::Keywords(k) => {
                    for p in placeholders(&k.file) {
                        if !s.params.contains(&p) {
                            errs.push(ValidationError::UndeclaredParameter { script: script(), param: p });
                        }
                    }
                    for fw in &k.fields {
                        if !(fw.weight > 0.0 && fw.weight <= 1.0) {
                            errs.push(ValidationError::WeightOutOfRange {
                                script: script(),
                                field: fw.field.clone(),
                                value: fw.weight,
                            });
                        }
                    }
                }
            },
            StepDef::Use(u) => {
                if let Some(target) = lib.get(&u.script_name) {
                    let given = usize::from(u.argument.is_some());
                    if given != target.params.len() {
                        errs.push(ValidationError::ArgumentMismatch {
                            script: script(),
                            target: u.script_name.clone(),
                            expected: target.params.len(),
                        });
                    }
                }
                if let Some(Arg::Param(p)) = &u.argument {
                    if !s.params.contains(p) {
                        errs.push(ValidationError::UndeclaredParameter { script: script(), param: p.clone() });
                    }
                }
            }
        }
    }

    let mut seen = BTreeSet::new();
    for e in &s.evidence {
        unknown_step(&e.step_name, errs);
        if !seen.insert(e.step_name.as_str()) {
            errs.push(ValidationError::DuplicateEvidence { script: script(), step: e.step_name.clone() });
        }
        let b = e.base();
        if !(b > 0.0 && b < 1.0) {
            errs.push(ValidationError::ScoreOutOfRange {
                script: script(),
                what: format!("base of {}", e.step_name),
                value: b,
            });
        }
    }
    if let Some(d) = s.attach_discount {
        if !(d > 0.0 && d <= 1.0) {
            errs.push(ValidationError::ScoreOutOfRange { script: script(), what: "attach_discount".into(), value: d });
        }
    }

    for k in &s.keys {
        match s.prop(&k.prop_name) {
            None => errs.push(ValidationError::UndeclaredProp { script: script(), prop: k.prop_name.clone() }),
            Some(p) => {
                let arg_ok = match k.comparator {
                    Comparator::ExactPlace => true,
                    Comparator::GeoRadius(m) => m > 0.0,
                    Comparator::TimeWindow(h) => h >= 0.0,
                    Comparator::WhoJaccard(t) => (0.0..=1.0).contains(&t),
                };
                if p.dimension != k.comparator.dimension() || !arg_ok {
                    errs.push(ValidationError::KeyMismatch {
                        script: script(),
                        prop: k.prop_name.clone(),
                        comparator: k.comparator.to_string(),
                    });
                }
            }
        }
    }

    for l in &s.propagation {
        let parent = s.prop(&l.parent_prop);
        if parent.is_none() {
            errs.push(ValidationError::UndeclaredProp { script: script(), prop: l.parent_prop.clone() });
        }
        let child = match s.step(&l.child_step) {
            None => {
                unknown_step(&l.child_step, errs);
                continue;
            }
            Some(StepDef::Action(a)) => a.props.iter().find(|p| p.name == l.child_prop),
            Some(StepDef::Use(u)) => lib.get(&u.script_name).and_then(|t| t.prop(&l.child_prop)),
        };
        match (child, parent) {
            (None, _) => errs.push(ValidationError::UndeclaredProp {
                script: script(),
                prop: format!("{}.{}", l.child_step, l.child_prop),
            }),
            (Some(c), Some(p)) if c.dimension != p.dimension => errs.push(ValidationError::DimensionMismatch {
                script: script(),
                child: format!("{}.{}", l.child_step, l.child_prop),
                parent: l.parent_prop.clone(),
            }),
            _ => {}
        }
    }

    for (a, b) in &s.ordering {
        unknown_step(a, errs);
        unknown_step(b, errs);
    }
    if let Some(step) = ordering_cycle(&s.ordering) {
        errs.push(ValidationError::CyclicOrdering { script: script(), step });
    }
}

/// Kahn's algorithm; returns a step on a cycle, if any.
fn ordering_cycle(pairs: &[(String, String)]) -> Option<String> {
    let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in pairs {
        indeg.entry(a).or_default();
        *indeg.entry(b).or_default() += 1;
        out.entry(a).or_default().push(b);
    }
    let mut ready: Vec<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    while let Some(n) = ready.pop() {
        indeg.remove(n);
        for m in out.get(n).into_iter().flatten() {
            if let Some(d) = indeg.get_mut(m) {
                *d -= 1;
                if *d == 0 {
                    ready.push(m);
                }
            }
        }
    }
    indeg.keys().next().map(|s| s.to_string())
}

fn recursive_scripts(lib: &ScriptLibrary) -> BTreeSet<String> {
    let edges = |name: &str| -> Vec<String> {
        lib.get(name)
            .map(|s| {
                s.body
                    .iter()
                    .filter_map(|st| match st {
                        StepDef::Use(u) => Some(u.script_name.clone()),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    };
    let mut out = BTreeSet::new();
    for s in &lib.scripts {
        let mut stack = edges(&s.name);
        let mut visited = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == s.name {
                out.insert(s.name.clone());
                break;
            }
            if visited.insert(n.clone()) {
                stack.extend(edges(&n));
            }
        }
    }
    out
}
