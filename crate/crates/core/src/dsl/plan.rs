//! Instantiation and flattening of a top-level script into matchable leaves.

use thiserror::Error;

use super::ast::*;

const MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("parameter `{param}` of `{script}` is not bound")]
    UnboundParameter { script: String, param: String },
    #[error("unknown script `{0}`")]
    UnknownScript(String),
    #[error("`{script}` takes {expected} argument(s)")]
    ArgumentMismatch { script: String, expected: usize },
    #[error("script nesting through `{0}` is recursive")]
    Recursive(String),
}

fn title_case(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn substitute_path(path: &str, binding: &Binding) -> String {
    binding.iter().fold(path.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
}

impl ScriptDef {
    /// Substitute every formal parameter. The result has no parameters left.
    pub fn bind(&self, binding: &Binding) -> Result<ScriptDef, PlanError> {
        let mut values = Binding::new();
        for p in &self.params {
            let v = binding
                .get(p)
                .ok_or_else(|| PlanError::UnboundParameter { script: self.name.clone(), param: p.clone() })?;
            values.insert(p.clone(), v.clone());
        }
        if values.is_empty() {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        out.name = format!("{}<{}>", self.name, values.values().cloned().collect::<Vec<_>>().join(","));
        out.params.clear();
        for step in &mut out.body {
            match step {
                StepDef::Action(a) => match &mut a.clue {
                    ClueDecl::Metadata(m) => {
                        if let ValueRef::Param(p) = &m.value {
                            if let Some(v) = values.get(p) {
                                m.value = ValueRef::Literal(title_case(v));
                            }
                        }
                    }
                    ClueDecl::Keywords(k) => k.file = substitute_path(&k.file, &values),
                },
                StepDef::Use(u) => {
                    if let Some(Arg::Param(p)) = &u.argument {
                        if let Some(v) = values.get(p) {
                            u.argument = Some(Arg::Literal(v.clone()));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

impl ScriptLibrary {
    /// Resolve a sub-script reference against `outer` bindings and instantiate it.
    pub fn instantiate(&self, r: &SubScriptRef, outer: &Binding) -> Result<ScriptDef, PlanError> {
        let script = self.get(&r.script_name).ok_or_else(|| PlanError::UnknownScript(r.script_name.clone()))?;
        let arg = match &r.argument {
            None => None,
            Some(Arg::Literal(v)) => Some(v.clone()),
            Some(Arg::Param(p)) => Some(
                outer
                    .get(p)
                    .cloned()
                    .ok_or_else(|| PlanError::UnboundParameter { script: r.script_name.clone(), param: p.clone() })?,
            ),
        };
        let mut binding = Binding::new();
        match (script.params.first(), arg) {
            (Some(p), Some(v)) => {
                binding.insert(p.clone(), v);
            }
            (None, None) => {}
            (Some(p), None) => {
                return Err(PlanError::UnboundParameter { script: script.name.clone(), param: p.clone() });
            }
            (None, Some(_)) => {
                return Err(PlanError::ArgumentMismatch { script: script.name.clone(), expected: 0 });
            }
        }
        script.bind(&binding)
    }

    /// Flatten a top-level script into its matchable atomic actions.
    pub fn plan(&self, name: &str) -> Result<ScriptPlan, PlanError> {
        let script = self.get(name).ok_or_else(|| PlanError::UnknownScript(name.to_string()))?;
        let script = script.bind(&Binding::new())?;
        let mut steps = Vec::new();
        for step in &script.body {
            let mut leaves = Vec::new();
            let decl = script.evidence_for(step.name());
            let lifts = vec![lifts_for(&script, step.name())];
            self.collect(step, vec![step.name().to_string()], decl, lifts, 0, &mut leaves)?;
            steps.push(PlanStep { name: step.name().to_string(), leaves });
        }
        Ok(ScriptPlan { script, steps })
    }

    fn collect(
        &self,
        step: &StepDef,
        path: Vec<String>,
        decl: Option<&EvidenceDecl>,
        lifts: Vec<Vec<PropagationRule>>,
        depth: usize,
        out: &mut Vec<PlanLeaf>,
    ) -> Result<(), PlanError> {
        match step {
            StepDef::Action(a) => {
                let (strength, base) = match decl {
                    Some(d) => (d.strength, d.base()),
                    None => (Strength::Contextual, DEFAULT_CONTEXTUAL_BASE),
                };
                let mut lifts = lifts;
                lifts.reverse();
                out.push(PlanLeaf { path, clue: a.clue.clone(), strength, base, props: a.props.clone(), lifts });
                Ok(())
            }
            StepDef::Use(u) => {
                if depth >= MAX_DEPTH {
                    return Err(PlanError::Recursive(u.script_name.clone()));
                }
                let sub = self.instantiate(u, &Binding::new())?;
                for inner in &sub.body {
                    let inner_decl = sub.evidence_for(inner.name()).or(decl);
                    let mut p = path.clone();
                    p.push(inner.name().to_string());
                    let mut l = lifts.clone();
                    l.push(lifts_for(&sub, inner.name()));
                    self.collect(inner, p, inner_decl, l, depth + 1, out)?;
                }
                Ok(())
            }
        }
    }
}

fn lifts_for(script: &ScriptDef, step: &str) -> Vec<PropagationRule> {
    script.propagation.iter().filter(|r| r.child_step == step).cloned().collect()
}

/// A top-level script with every sub-script expanded down to atomic actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptPlan {
    pub script: ScriptDef,
    pub steps: Vec<PlanStep>,
}

impl ScriptPlan {
    pub fn step(&self, name: &str) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub name: String,
    pub leaves: Vec<PlanLeaf>,
}

impl PlanStep {
    /// A step seeds candidates when any of its leaves carries strong or weak evidence.
    pub fn seeds(&self) -> bool {
        self.leaves.iter().any(|l| l.strength.seeds())
    }
}

/// One atomic action reachable from a top-level step.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanLeaf {
    /// Step names from the top-level step down to the action.
    pub path: Vec<String>,
    pub clue: ClueDecl,
    /// Strength of the innermost evidence declaration on the path.
    pub strength: Strength,
    pub base: f64,
    pub props: Vec<PropDecl>,
    /// Propagation rules per level, innermost first; the last level targets top-level props.
    pub lifts: Vec<Vec<PropagationRule>>,
}
