//! Recursive-descent parser for script definitions.
//!
//! The parser never panics: every problem is reported as a positioned
//! [`DslError`], and after a syntax error it resynchronizes at the next
//! `script` keyword so later definitions are still checked.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::DslError;
use crate::model::{Role, SourceKind};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LBrace,
    RBrace,
    Lt,
    Gt,
    LParen,
    RParen,
    Colon,
    Comma,
    Dot,
    Arrow,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Num(n) => format!("number {n}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    pos: Pos,
}

fn lex(text: &str, errors: &mut Vec<DslError>) -> Vec<Spanned> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                bump!();
            }
            let raw: String = chars[start..i].iter().collect();
            match raw.parse::<f64>() {
                Ok(n) => out.push(Spanned { tok: Tok::Num(n), pos }),
                Err(_) => errors.push(DslError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    message: format!("malformed number `{raw}`"),
                }),
            }
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            let mut closed = false;
            while i < chars.len() {
                match chars[i] {
                    '"' => {
                        bump!();
                        closed = true;
                        break;
                    }
                    '\n' => break,
                    '\\' if i + 1 < chars.len() => {
                        bump!();
                        s.push(chars[i]);
                        bump!();
                    }
                    ch => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            if !closed {
                errors.push(DslError::Syntax { line: pos.line, col: pos.col, message: "unterminated string".into() });
            }
            out.push(Spanned { tok: Tok::Str(s), pos });
            continue;
        }
        let tok = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            '=' => Some(Tok::Eq),
            '-' if chars.get(i + 1) == Some(&'>') => {
                bump!();
                Some(Tok::Arrow)
            }
            _ => None,
        };
        bump!();
        match tok {
            Some(tok) => out.push(Spanned { tok, pos }),
            None => errors.push(DslError::Syntax {
                line: pos.line,
                col: pos.col,
                message: format!("unexpected character `{c}`"),
            }),
        }
    }
    out.push(Spanned { tok: Tok::Eof, pos: Pos { line, col } });
    out
}

type PResult<T> = Result<T, DslError>;

struct Parser {
    toks: Vec<Spanned>,
    i: usize,
    /// `use` targets with their positions, checked once every script is known.
    uses: Vec<(String, Pos)>,
    script_names: Vec<(String, Pos)>,
    errors: Vec<DslError>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.i + n).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn advance(&mut self) -> Spanned {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let Pos { line, col } = self.pos();
        Err(DslError::Syntax { line, col, message: format!("expected {expected}, found {}", self.peek().describe()) })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.error(what)
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let p = self.pos();
                self.advance();
                Ok((s, p))
            }
            _ => self.error(what),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.advance();
                Ok(())
            }
            _ => self.error(&format!("`{kw}`")),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.error(what),
        }
    }

    fn number(&mut self, what: &str) -> PResult<f64> {
        match *self.peek() {
            Tok::Num(n) => {
                self.advance();
                Ok(n)
            }
            _ => self.error(what),
        }
    }

    fn recover(&mut self) {
        self.advance();
        while *self.peek() != Tok::Eof && !self.at_keyword("script") {
            self.advance();
        }
    }

    fn library(&mut self) -> Vec<ScriptDef> {
        let mut scripts = Vec::new();
        while *self.peek() != Tok::Eof {
            match self.script() {
                Ok(s) => scripts.push(s),
                Err(e) => {
                    self.errors.push(e);
                    self.recover();
                }
            }
        }
        scripts
    }

    fn script(&mut self) -> PResult<ScriptDef> {
        self.keyword("script")?;
        let (name, name_pos) = self.ident("script name")?;
        let mut params = Vec::new();
        if *self.peek() == Tok::Lt {
            self.advance();
            params.push(self.ident("parameter name")?.0);
            self.expect(Tok::Gt, "`>`")?;
        }
        self.expect(Tok::LBrace, "`{`")?;
        self.keyword("goal")?;
        self.expect(Tok::Colon, "`:`")?;
        let goal = self.string("goal string")?;

        let mut script = ScriptDef {
            name: name.clone(),
            params,
            goal,
            props: Vec::new(),
            body: Vec::new(),
            ordering: Vec::new(),
            evidence: Vec::new(),
            keys: Vec::new(),
            propagation: Vec::new(),
            attach_discount: None,
        };
        let mut seen_steps: BTreeSet<String> = BTreeSet::new();
        let mut seen_props: BTreeSet<String> = BTreeSet::new();

        loop {
            let pos = self.pos();
            let kw = match self.peek().clone() {
                Tok::RBrace => {
                    self.advance();
                    break;
                }
                Tok::Ident(kw) => kw,
                _ => return self.error("script item or `}`"),
            };
            match kw.as_str() {
                "prop" => {
                    let p = self.prop_decl()?;
                    if !seen_props.insert(p.name.clone()) {
                        self.errors.push(DslError::DuplicateName {
                            name: p.name.clone(),
                            line: pos.line,
                            col: pos.col,
                        });
                    }
                    script.props.push(p);
                }
                "action" => {
                    let a = self.action()?;
                    if !seen_steps.insert(a.name.clone()) {
                        self.errors.push(DslError::DuplicateName {
                            name: a.name.clone(),
                            line: pos.line,
                            col: pos.col,
                        });
                    }
                    script.body.push(StepDef::Action(a));
                }
                "use" => {
                    let u = self.use_step(&script.params)?;
                    if !seen_steps.insert(u.alias.clone()) {
                        self.errors.push(DslError::DuplicateName {
                            name: u.alias.clone(),
                            line: pos.line,
                            col: pos.col,
                        });
                    }
                    script.body.push(StepDef::Use(u));
                }
                "order" => {
                    self.advance();
                    loop {
                        let (a, _) = self.ident("step name")?;
                        self.expect(Tok::Lt, "`<`")?;
                        let (b, _) = self.ident("step name")?;
                        script.ordering.push((a, b));
                        if *self.peek() == Tok::Comma {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                }
                "strong" | "weak" | "context" => {
                    self.advance();
                    let strength = match kw.as_str() {
                        "strong" => Strength::Strong,
                        "weak" => Strength::Weak,
                        _ => Strength::Contextual,
                    };
                    let (step_name, _) = self.ident("step name")?;
                    let base_score = if self.at_keyword("base") {
                        self.advance();
                        Some(self.number("base score")?)
                    } else {
                        None
                    };
                    script.evidence.push(EvidenceDecl { step_name, strength, base_score });
                }
                "attach_discount" => {
                    self.advance();
                    script.attach_discount = Some(self.number("discount")?);
                }
                "key" => {
                    self.advance();
                    let (prop_name, _) = self.ident("property name")?;
                    let required = match self.ident("`required` or `optional`")?.0.as_str() {
                        "required" => true,
                        "optional" => false,
                        _ => {
                            self.i -= 1;
                            return self.error("`required` or `optional`");
                        }
                    };
                    let comparator = self.comparator()?;
                    script.keys.push(KeyDecl { prop_name, comparator, required });
                }
                "lift" => {
                    self.advance();
                    let (child_step, _) = self.ident("step name")?;
                    self.expect(Tok::Dot, "`.`")?;
                    let (child_prop, _) = self.ident("property name")?;
                    self.expect(Tok::Arrow, "`->`")?;
                    let (parent_prop, _) = self.ident("property name")?;
                    script.propagation.push(PropagationRule { child_step, child_prop, parent_prop });
                }
                _ => return self.error("script item or `}`"),
            }
        }
        self.script_names.push((name, name_pos));
        Ok(script)
    }

    fn prop_decl(&mut self) -> PResult<PropDecl> {
        self.keyword("prop")?;
        let (name, _) = self.ident("property name")?;
        self.expect(Tok::Colon, "`:`")?;
        let dim_pos = self.pos();
        let (dim, _) = self.ident("dimension")?;
        let dimension = dim.parse::<Dimension>().map_err(|_| DslError::Syntax {
            line: dim_pos.line,
            col: dim_pos.col,
            message: format!("unknown dimension `{dim}`"),
        })?;
        let mut roles = Vec::new();
        if *self.peek() == Tok::LParen {
            self.advance();
            loop {
                let p = self.pos();
                let (r, _) = self.ident("role")?;
                let role = r.parse::<Role>().map_err(|_| DslError::Syntax {
                    line: p.line,
                    col: p.col,
                    message: format!("unknown role `{r}`"),
                })?;
                roles.push(role);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(PropDecl { name, dimension, roles })
    }

    fn action(&mut self) -> PResult<ActionDef> {
        self.keyword("action")?;
        let (name, _) = self.ident("action name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut props = Vec::new();
        while self.at_keyword("prop") {
            props.push(self.prop_decl()?);
        }
        let clue = self.clue()?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(ActionDef { name, props, clue })
    }

    fn clue(&mut self) -> PResult<ClueDecl> {
        if self.at_keyword("metadata") {
            self.advance();
            let (mut field, _) = self.ident("field path")?;
            while *self.peek() == Tok::Dot {
                self.advance();
                field.push('.');
                field.push_str(&self.ident("field name")?.0);
            }
            self.expect(Tok::Eq, "`=`")?;
            let value = match self.peek().clone() {
                Tok::Str(s) => {
                    self.advance();
                    ValueRef::Literal(s)
                }
                Tok::Ident(s) => {
                    self.advance();
                    ValueRef::Param(s)
                }
                _ => return self.error("string or parameter name"),
            };
            self.keyword("on")?;
            let mut sources = Vec::new();
            while let Tok::Ident(s) = self.peek() {
                match s.parse::<SourceKind>() {
                    Ok(k) => {
                        sources.push(k);
                        self.advance();
                    }
                    Err(_) if sources.is_empty() => return self.error("source kind"),
                    Err(_) => break,
                }
            }
            if sources.is_empty() {
                return self.error("source kind");
            }
            Ok(ClueDecl::Metadata(MetadataPredicate { field, value, sources }))
        } else if self.at_keyword("keywords") {
            self.advance();
            let file = self.string("keyword file path")?;
            self.keyword("in")?;
            let mut fields = Vec::new();
            while matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Colon {
                let (field, _) = self.ident("field")?;
                self.advance();
                let weight = self.number("field weight")?;
                fields.push(FieldWeight { field, weight });
            }
            if fields.is_empty() {
                return self.error("`field:weight`");
            }
            Ok(ClueDecl::Keywords(KeywordClue { file, fields }))
        } else {
            self.error("`metadata` or `keywords` clue")
        }
    }

    fn use_step(&mut self, params: &[String]) -> PResult<SubScriptRef> {
        self.keyword("use")?;
        let (script_name, pos) = self.ident("sub-script name")?;
        self.uses.push((script_name.clone(), pos));
        let argument = if *self.peek() == Tok::Lt {
            self.advance();
            let arg = match self.peek().clone() {
                Tok::Ident(s) if params.contains(&s) => Arg::Param(s),
                Tok::Ident(s) | Tok::Str(s) => Arg::Literal(s),
                _ => return self.error("argument"),
            };
            self.advance();
            self.expect(Tok::Gt, "`>`")?;
            Some(arg)
        } else {
            None
        };
        self.keyword("as")?;
        let (alias, _) = self.ident("step alias")?;
        Ok(SubScriptRef { script_name, argument, alias })
    }

    fn comparator(&mut self) -> PResult<Comparator> {
        let (name, _) = self.ident("comparator")?;
        let arg = |p: &mut Self| -> PResult<f64> {
            p.expect(Tok::LParen, "`(`")?;
            let n = p.number("number")?;
            p.expect(Tok::RParen, "`)`")?;
            Ok(n)
        };
        Ok(match name.as_str() {
            "exact_place" => Comparator::ExactPlace,
            "geo_radius" => Comparator::GeoRadius(arg(self)?),
            "time_window" => Comparator::TimeWindow(arg(self)?),
            "who_jaccard" => Comparator::WhoJaccard(arg(self)?),
            _ => {
                self.i -= 1;
                return self.error("comparator (exact_place, geo_radius, time_window, who_jaccard)");
            }
        })
    }
}

/// Parse script source into a library. Errors carry line and column.
pub fn parse_library(text: &str) -> Result<ScriptLibrary, Vec<DslError>> {
    let mut errors = Vec::new();
    let toks = lex(text, &mut errors);
    let mut p = Parser { toks, i: 0, uses: Vec::new(), script_names: Vec::new(), errors };
    let scripts = p.library();

    let mut first_seen: BTreeMap<&str, Pos> = BTreeMap::new();
    for (name, pos) in &p.script_names {
        if first_seen.insert(name.as_str(), *pos).is_some() {
            p.errors.push(DslError::DuplicateName { name: name.clone(), line: pos.line, col: pos.col });
        }
    }
    for (name, pos) in &p.uses {
        if !first_seen.contains_key(name.as_str()) {
            p.errors.push(DslError::UnresolvedReference { name: name.clone(), line: pos.line, col: pos.col });
        }
    }

    if p.errors.is_empty() {
        Ok(ScriptLibrary { scripts, base_dir: None })
    } else {
        p.errors.sort_by_key(|e| e.position());
        Err(p.errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        let lib = parse_library("").unwrap();
        assert!(lib.scripts.is_empty());
        let lib = parse_library("  # only a comment\n").unwrap();
        assert!(lib.scripts.is_empty());
    }

    #[test]
    fn minimal_script() {
        let src = r#"
script Demo {
  goal: "demo"
  prop whenIt: when
  action ping { prop t: when metadata what.category = "X" on Email }
  strong ping
  key whenIt required time_window(2)
}"#;
        let lib = parse_library(src).unwrap();
        let s = lib.get("Demo").unwrap();
        assert_eq!(s.body.len(), 1);
        assert_eq!(s.evidence[0].base(), 0.8);
        assert_eq!(s.keys[0].comparator, Comparator::TimeWindow(2.0));
    }

    #[test]
    fn unresolved_sub_script_reports_line() {
        let src = "script A {\n  goal: \"a\"\n  use Foo as foo\n}\n";
        let errs = parse_library(src).unwrap_err();
        assert_eq!(errs, vec![DslError::UnresolvedReference { name: "Foo".into(), line: 3, col: 7 }]);
    }

    #[test]
    fn duplicate_script_name() {
        let src = "script A { goal: \"a\" }\nscript A { goal: \"b\" }";
        let errs = parse_library(src).unwrap_err();
        assert!(matches!(&errs[0], DslError::DuplicateName { name, line: 2, .. } if name == "A"));
    }

    #[test]
    fn syntax_error_is_positioned_and_parsing_continues() {
        let src = "script A { goal: \"a\" bogus }\nscript B { goal: 3 }\nscript C { goal: \"c\" }";
        let errs = parse_library(src).unwrap_err();
        assert_eq!(errs.len(), 2, "{errs:?}");
        assert_eq!(errs[0].position(), (1, 22));
        assert_eq!(errs[1].position(), (2, 18));
    }

    #[test]
    fn garbage_never_panics() {
        for src in [
            "script",
            "script A <",
            "script A { goal: \"x",
            "}}}}",
            "script A { goal: \"x\" key k required time_window( }",
            "@@@",
        ] {
            assert!(parse_library(src).is_err(), "{src}");
        }
    }

    #[test]
    fn param_argument_detection() {
        let src = r#"
script Pay<T> { goal: "pay" action card { metadata what.category = T on BankTransaction } }
script Outer<T> { goal: "o" use Pay<T> as p }
script Top { goal: "t" use Outer<restaurant> as o use Pay<"Fast Food"> as q }
"#;
        let lib = parse_library(src).unwrap();
        let outer = lib.get("Outer").unwrap();
        assert!(matches!(&outer.body[0], StepDef::Use(u) if u.argument == Some(Arg::Param("T".into()))));
        let top = lib.get("Top").unwrap();
        assert!(matches!(&top.body[0], StepDef::Use(u) if u.argument == Some(Arg::Literal("restaurant".into()))));
        assert!(matches!(&top.body[1], StepDef::Use(u) if u.argument == Some(Arg::Literal("Fast Food".into()))));
    }
}
