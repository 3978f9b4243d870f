//! Relational features as Horn clauses, and their Prolog-like text format.
//!
//! ```text
//! Interacts(D0,D1) :- TargetInhib(D0,V0), _TargetInhib(V0,D1). % rw
//! ```
//!
//! Terms starting with an uppercase letter are variables. Constants are
//! written bare when they start lowercase, otherwise single-quoted.
//! A leading underscore on a predicate marks the inverse literal, which
//! matches the underlying fact with its arguments reversed.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{types_compatible, KnowledgeBase, UNTYPED};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u32),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub predicate: String,
    pub inverse: bool,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self { predicate: predicate.into(), inverse: false, args }
    }

    pub fn inverse(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self { predicate: predicate.into(), inverse: true, args }
    }

    /// Arguments in the order of the underlying fact.
    pub fn fact_order_args(&self) -> Vec<&Term> {
        if self.inverse {
            self.args.iter().rev().collect()
        } else {
            self.args.iter().collect()
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClauseSource {
    Rw,
    Ilp,
    Relocc,
}

impl fmt::Display for ClauseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClauseSource::Rw => "rw",
            ClauseSource::Ilp => "ilp",
            ClauseSource::Relocc => "relocc",
        })
    }
}

impl FromStr for ClauseSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rw" => Ok(ClauseSource::Rw),
            "ilp" => Ok(ClauseSource::Ilp),
            "relocc" => Ok(ClauseSource::Relocc),
            other => Err(Error::InvalidArgument(format!("unknown rule method `{other}`"))),
        }
    }
}

/// A relational feature `head :- body`. Variables `0..head arity` are the
/// query variables; the rest are free body variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Literal,
    pub body: Vec<Literal>,
    pub source: ClauseSource,
}

impl Clause {
    /// A clause with an empty body whose head is `target(D0, .., Dn-1)`.
    pub fn empty(target: &str, arity: usize, source: ClauseSource) -> Self {
        Self { head: Literal::new(target, (0..arity as u32).map(Term::Var).collect()), body: Vec::new(), source }
    }

    pub fn head_arity(&self) -> usize {
        self.head.args.len()
    }

    pub fn num_vars(&self) -> usize {
        self.body.iter().flat_map(Literal::vars).chain(self.head.vars()).map(|v| v as usize + 1).max().unwrap_or(0)
    }

    pub fn with_literal(&self, lit: Literal) -> Self {
        let mut c = self.clone();
        c.body.push(lit);
        c
    }

    /// Renumbers free variables by order of first appearance in the body.
    pub fn canonicalize(&mut self) {
        let head = self.head_arity() as u32;
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut next = head;
        for lit in &mut self.body {
            for t in &mut lit.args {
                if let Term::Var(v) = t {
                    if *v >= head {
                        let id = *map.entry(*v).or_insert_with(|| {
                            next += 1;
                            next - 1
                        });
                        *v = id;
                    }
                }
            }
        }
    }

    /// Type of every variable, or `None` when two uses disagree.
    pub fn variable_types(&self, kb: &KnowledgeBase) -> Option<Vec<String>> {
        let mut types = vec![UNTYPED.to_string(); self.num_vars()];
        let assign = |v: u32, ty: &str, types: &mut Vec<String>| -> bool {
            let slot = &mut types[v as usize];
            if !types_compatible(slot, ty) {
                return false;
            }
            if slot == UNTYPED {
                *slot = ty.to_string();
            }
            true
        };
        let lits = std::iter::once(&self.head).chain(&self.body);
        for lit in lits {
            let Some(pid) = kb.predicate(&lit.predicate) else {
                continue;
            };
            let schema = kb.schema(pid);
            if schema.arity() != lit.args.len() {
                return None;
            }
            for (term, ty) in lit.fact_order_args().into_iter().zip(&schema.arg_types) {
                if let Term::Var(v) = term {
                    if !assign(*v, ty, &mut types) {
                        return None;
                    }
                }
            }
        }
        Some(types)
    }

    /// Every head variable occurs somewhere in the body.
    pub fn head_vars_covered(&self) -> bool {
        self.head.vars().all(|h| self.body.iter().any(|l| l.vars().any(|v| v == h)))
    }

    /// One literal rendered with this clause's variable names.
    pub fn literal_text(&self, l: &Literal) -> String {
        let head_arity = self.head_arity() as u32;
        let args: Vec<String> = l.args.iter().map(|t| term_text(t, head_arity)).collect();
        format!("{}{}({})", if l.inverse { "_" } else { "" }, l.predicate, args.join(","))
    }

    pub fn to_text(&self) -> String {
        let head = self.literal_text(&self.head);
        if self.body.is_empty() {
            format!("{head}.")
        } else {
            let body: Vec<String> = self.body.iter().map(|l| self.literal_text(l)).collect();
            format!("{head} :- {}.", body.join(", "))
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn term_text(t: &Term, head_arity: u32) -> String {
    match t {
        Term::Var(v) if *v < head_arity => format!("D{v}"),
        Term::Var(v) => format!("V{}", v - head_arity),
        Term::Const(c) => {
            let bare = c.chars().next().is_some_and(|ch| ch.is_lowercase())
                && c.chars().all(|ch| ch.is_alphanumeric() || ch == '_');
            if bare {
                c.clone()
            } else {
                format!("'{}'", c.replace('\'', "''"))
            }
        }
    }
}

/// Splits on commas that are outside parentheses and quotes.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut quoted = false;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '\'' => quoted = !quoted,
            '(' if !quoted => depth += 1,
            ')' if !quoted => depth -= 1,
            ',' if !quoted && depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

struct VarScope {
    names: HashMap<String, u32>,
    next: u32,
}

fn parse_term(tok: &str, scope: &mut VarScope, line: usize) -> Result<Term> {
    let tok = tok.trim();
    if let Some(inner) = tok.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')) {
        if inner.is_empty() {
            return Err(Error::parse(line, "empty quoted constant"));
        }
        return Ok(Term::Const(inner.replace("''", "'")));
    }
    let first = tok.chars().next().ok_or_else(|| Error::parse(line, "empty term"))?;
    if !tok.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(Error::parse(line, format!("invalid term `{tok}`")));
    }
    if first.is_uppercase() {
        let id = *scope.names.entry(tok.to_string()).or_insert_with(|| {
            scope.next += 1;
            scope.next - 1
        });
        Ok(Term::Var(id))
    } else {
        Ok(Term::Const(tok.to_string()))
    }
}

fn parse_literal(text: &str, scope: &mut VarScope, line: usize) -> Result<Literal> {
    let text = text.trim();
    let open = text.find('(').ok_or_else(|| Error::parse(line, format!("malformed literal `{text}`")))?;
    let inner =
        text[open + 1..].strip_suffix(')').ok_or_else(|| Error::parse(line, format!("malformed literal `{text}`")))?;
    let name = text[..open].trim();
    let (inverse, predicate) = match name.strip_prefix('_') {
        Some(rest) => (true, rest),
        None => (false, name),
    };
    if predicate.is_empty() || !predicate.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(Error::parse(line, format!("invalid predicate `{name}`")));
    }
    let args = split_top_level(inner).into_iter().map(|t| parse_term(t, scope, line)).collect::<Result<Vec<_>>>()?;
    Ok(Literal { predicate: predicate.to_string(), inverse, args })
}

fn parse_clause_line(line_text: &str, line: usize) -> Result<Clause> {
    let (code, comment) = match line_text.find('%') {
        Some(i) if !line_text[..i].chars().filter(|&c| c == '\'').count().is_multiple_of(2) => (line_text, None),
        Some(i) => (&line_text[..i], Some(line_text[i + 1..].trim())),
        None => (line_text, None),
    };
    let code = code.trim();
    let code = code.strip_suffix('.').ok_or_else(|| Error::parse(line, "clause must end with `.`"))?;
    let (head_text, body_text) = match code.split_once(":-") {
        Some((h, b)) => (h, Some(b)),
        None => (code, None),
    };

    let mut scope = VarScope { names: HashMap::new(), next: 0 };
    let head = parse_literal(head_text, &mut scope, line)?;
    if head.inverse {
        return Err(Error::parse(line, "clause head cannot be an inverse literal"));
    }
    for (i, t) in head.args.iter().enumerate() {
        if *t != Term::Var(i as u32) {
            return Err(Error::parse(line, "head arguments must be distinct variables"));
        }
    }
    let mut body = Vec::new();
    if let Some(b) = body_text {
        let b = b.trim();
        if b != "true" {
            for lit in split_top_level(b) {
                body.push(parse_literal(lit, &mut scope, line)?);
            }
        }
    }
    let source = match comment {
        Some(c) if !c.is_empty() => c.parse().unwrap_or(ClauseSource::Ilp),
        _ => ClauseSource::Ilp,
    };
    Ok(Clause { head, body, source })
}

/// Parses a clause file: one clause per line, `%` comments.
pub fn parse_clauses(text: &str) -> Result<Vec<Clause>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('%')
        })
        .map(|(i, l)| parse_clause_line(l, i + 1))
        .collect()
}

/// Clause file text, one clause per line with its source as a comment.
pub fn clauses_to_text(clauses: &[Clause]) -> String {
    let mut out = String::new();
    for c in clauses {
        out.push_str(&c.to_text());
        out.push_str(" % ");
        out.push_str(&c.source.to_string());
        out.push('\n');
    }
    out
}
