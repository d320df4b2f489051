use std::fmt::{self, Write};

use super::ast::*;

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn write_prop(f: &mut impl Write, indent: &str, p: &PropDecl) -> fmt::Result {
    write!(f, "{indent}prop {}: {}", p.name, p.dimension)?;
    if !p.roles.is_empty() {
        let roles: Vec<_> = p.roles.iter().map(|r| r.as_str()).collect();
        write!(f, "({})", roles.join(", "))?;
    }
    writeln!(f)
}

fn write_script(f: &mut impl Write, s: &ScriptDef) -> fmt::Result {
    write!(f, "script {}", s.name)?;
    if let Some(p) = s.params.first() {
        write!(f, "<{p}>")?;
    }
    writeln!(f, " {{")?;
    writeln!(f, "  goal: {}", quote(&s.goal))?;
    for p in &s.props {
        write_prop(f, "  ", p)?;
    }
    for step in &s.body {
        match step {
            StepDef::Action(a) => {
                writeln!(f, "  action {} {{", a.name)?;
                for p in &a.props {
                    write_prop(f, "    ", p)?;
                }
                match &a.clue {
                    ClueDecl::Metadata(m) => {
                        let value = match &m.value {
                            ValueRef::Param(p) => p.clone(),
                            ValueRef::Literal(v) => quote(v),
                        };
                        let sources: Vec<_> = m.sources.iter().map(|k| k.as_str()).collect();
                        writeln!(f, "    metadata {} = {} on {}", m.field, value, sources.join(" "))?;
                    }
                    ClueDecl::Keywords(k) => {
                        let fields: Vec<_> = k.fields.iter().map(|fw| format!("{}:{}", fw.field, fw.weight)).collect();
                        writeln!(f, "    keywords {} in {}", quote(&k.file), fields.join(" "))?;
                    }
                }
                writeln!(f, "  }}")?;
            }
            StepDef::Use(u) => {
                write!(f, "  use {}", u.script_name)?;
                match &u.argument {
                    Some(Arg::Param(p)) => write!(f, "<{p}>")?,
                    Some(Arg::Literal(v)) if is_ident(v) && !s.params.contains(v) => write!(f, "<{v}>")?,
                    Some(Arg::Literal(v)) => write!(f, "<{}>", quote(v))?,
                    None => {}
                }
                writeln!(f, " as {}", u.alias)?;
            }
        }
    }
    if !s.ordering.is_empty() {
        let pairs: Vec<_> = s.ordering.iter().map(|(a, b)| format!("{a} < {b}")).collect();
        writeln!(f, "  order {}", pairs.join(", "))?;
    }
    for e in &s.evidence {
        write!(f, "  {} {}", e.strength.keyword(), e.step_name)?;
        if let Some(b) = e.base_score {
            write!(f, " base {b}")?;
        }
        writeln!(f)?;
    }
    if let Some(d) = s.attach_discount {
        writeln!(f, "  attach_discount {d}")?;
    }
    for k in &s.keys {
        let req = if k.required { "required" } else { "optional" };
        writeln!(f, "  key {} {} {}", k.prop_name, req, k.comparator)?;
    }
    for l in &s.propagation {
        writeln!(f, "  lift {}.{} -> {}", l.child_step, l.child_prop, l.parent_prop)?;
    }
    writeln!(f, "}}")
}

impl fmt::Display for ScriptDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_script(f, self)
    }
}

/// Canonical source text; parsing it yields a structurally equal library.
impl fmt::Display for ScriptLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.scripts.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write_script(f, s)?;
        }
        Ok(())
    }
}
