//! Surface syntax: Prolog-style clauses with `p::` probability labels,
//! `query(Atom).` declarations, `:- visible(name/arity).` and
//! `:- unsafe(name/arity).` directives, `%` line comments and `/* */` block
//! comments.
//!
//! A clause `query(A) :- Body.` (or `query(A) :- true.`) defines the query
//! clause of an explanation; a bare `query(A).` declares a query.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::program::{LoadError, Program};
use crate::term::{Atom, BodyAtom, Clause, Origin, PredKey, Prob, Term, Var};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at line {line}, column {col}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Load(#[from] LoadError),
}

impl SourceError {
    /// Short error class used in diagnostics.
    pub fn class(&self) -> &'static str {
        match self {
            SourceError::Parse(_) => "parse",
            SourceError::Load(_) => "load",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Neck,
    Label,
    Slash,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Var(s) | Tok::Number(s) => write!(f, "`{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Neck => f.write_str("`:-`"),
            Tok::Label => f.write_str("`::`"),
            Tok::Slash => f.write_str("`/`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let err = |line, col, message: String| ParseError { line, col, message };

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(2, &mut i);
            loop {
                if i >= chars.len() {
                    return Err(err(start_line, start_col, "unterminated block comment".into()));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance(2, &mut i);
                    break;
                }
                advance(1, &mut i);
            }
            continue;
        }
        let tok = match c {
            '(' => Some((Tok::LParen, 1)),
            ')' => Some((Tok::RParen, 1)),
            ',' => Some((Tok::Comma, 1)),
            '.' => Some((Tok::Dot, 1)),
            '/' => Some((Tok::Slash, 1)),
            ':' if chars.get(i + 1) == Some(&'-') => Some((Tok::Neck, 2)),
            ':' if chars.get(i + 1) == Some(&':') => Some((Tok::Label, 2)),
            _ => None,
        };
        if let Some((tok, n)) = tok {
            advance(n, &mut i);
            out.push(Spanned { tok, line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            let tok = if c.is_ascii_uppercase() || c == '_' { Tok::Var(word) } else { Tok::Ident(word) };
            advance(j - i, &mut i);
            out.push(Spanned { tok, line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if chars.get(j) == Some(&'.') && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if matches!(chars.get(j), Some('e' | 'E')) {
                let mut k = j + 1;
                if matches!(chars.get(k), Some('+' | '-')) {
                    k += 1;
                }
                if chars.get(k).is_some_and(|d| d.is_ascii_digit()) {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let word: String = chars[i..j].iter().collect();
            advance(j - i, &mut i);
            out.push(Spanned { tok: Tok::Number(word), line: start_line, col: start_col });
            continue;
        }
        return Err(err(start_line, start_col, format!("unexpected character {c:?}")));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (u32, u32),
    /// Anonymous-variable counter, reset per clause.
    anon: usize,
}

enum Item {
    Clause(Clause),
    Query(Atom),
    Visible(PredKey),
    Unsafe(PredKey),
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        let toks = lex(text)?;
        let lines = text.split('\n').count() as u32;
        let last_col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
        Ok(Parser { toks, pos: 0, eof: (lines, last_col), anon: 0 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (u32, u32) {
        self.toks.get(self.pos).map_or(self.eof, |s| (s.line, s.col))
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError { line, col, message: message.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        match self.peek() {
            Some(t) => self.error(format!("expected {wanted}, found {t}")),
            None => self.error(format!("expected {wanted}, found end of input")),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.unexpected(&tok.to_string())
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.unexpected("a predicate name"),
        }
    }

    fn item(&mut self, index: usize) -> Result<Item, SourceError> {
        self.anon = 0;
        let (line, _) = self.here();
        if self.eat(&Tok::Neck) {
            return Ok(self.directive()?);
        }
        let mut prob = None;
        if let Some(Tok::Number(n)) = self.peek() {
            let n = n.clone();
            self.pos += 1;
            self.expect(Tok::Label)?;
            let Ok(value) = n.parse::<f64>() else {
                return Err(self.error::<()>(format!("bad probability literal `{n}`")).unwrap_err().into());
            };
            prob = Some(Prob::new(value).ok_or(LoadError::ProbabilityOutOfRange { value: n, line })?);
        }
        let head = self.atom()?;
        let has_neck = self.eat(&Tok::Neck);
        let mut body = Vec::new();
        if has_neck {
            loop {
                let a = self.atom()?;
                if !(&*a.pred == "true" && a.args.is_empty() && !a.query) {
                    body.push(BodyAtom::plain(a));
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::Dot)?;
        if head.query && !has_neck && prob.is_none() {
            return Ok(Item::Query(head.unwrapped()));
        }
        let origin = Origin::source(index, line);
        Ok(Item::Clause(Clause { prob, head, body, origin }))
    }

    fn directive(&mut self) -> Result<Item, ParseError> {
        let (line, col) = self.here();
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let pred = self.ident()?;
        self.expect(Tok::Slash)?;
        let arity = match self.next() {
            Some(Tok::Number(n)) => match n.parse::<usize>() {
                Ok(a) => a,
                Err(_) => {
                    self.pos -= 1;
                    return self.error(format!("bad arity `{n}`"));
                }
            },
            _ => {
                self.pos -= 1;
                return self.unexpected("an arity");
            }
        };
        self.expect(Tok::RParen)?;
        self.expect(Tok::Dot)?;
        let key = PredKey::new(&pred, arity);
        match name.as_str() {
            "visible" => Ok(Item::Visible(key)),
            "unsafe" => Ok(Item::Unsafe(key)),
            other => Err(ParseError { line, col, message: format!("unknown directive `{other}`") }),
        }
    }

    /// An atom; `query(f(...))` with a single atom argument becomes a wrapped atom.
    fn atom(&mut self) -> Result<Atom, ParseError> {
        let name = self.ident()?;
        if name == "query" && self.peek() == Some(&Tok::LParen) {
            let save = self.pos;
            self.pos += 1;
            if let Some(Tok::Ident(_)) = self.peek() {
                let inner = self.atom()?;
                if self.eat(&Tok::RParen) {
                    return Ok(inner.wrapped());
                }
            } else if let Some(Tok::Var(_)) = self.peek() {
                return self.error("query/1 needs an atom argument");
            }
            self.pos = save;
        }
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.term()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(Atom::new(&name, args))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.next() {
            Some(Tok::Var(v)) if v == "_" => {
                self.anon += 1;
                Ok(Term::Var(Var::new(format!("_{}", self.anon), 0)))
            }
            Some(Tok::Var(v)) => Ok(Term::var(&v)),
            Some(Tok::Ident(c)) => {
                if self.peek() == Some(&Tok::LParen) {
                    return self.error("compound terms are not supported");
                }
                Ok(Term::constant(&c))
            }
            Some(Tok::Number(n)) if n.bytes().all(|b| b.is_ascii_digit()) => Ok(Term::constant(&n)),
            _ => {
                self.pos -= 1;
                self.unexpected("a constant or variable")
            }
        }
    }
}

/// Parses and loads a program. Clause order follows the text.
pub fn parse_program(text: &str) -> Result<Program, SourceError> {
    let mut p = Parser::new(text)?;
    let mut clauses = Vec::new();
    let mut visible = BTreeSet::new();
    let mut unsafe_preds = BTreeSet::new();
    let mut queries = Vec::new();
    while p.peek().is_some() {
        match p.item(clauses.len())? {
            Item::Clause(c) => clauses.push(c),
            Item::Query(q) => queries.push(q),
            Item::Visible(k) => {
                visible.insert(k);
            }
            Item::Unsafe(k) => {
                unsafe_preds.insert(k);
            }
        }
    }
    Ok(Program::new(clauses, visible, unsafe_preds, queries)?)
}

/// Parses a single atom such as `smokes(carl)` or `query(p(a))`.
pub fn parse_atom(text: &str) -> Result<Atom, ParseError> {
    let mut p = Parser::new(text)?;
    let a = p.atom()?;
    if p.peek().is_some() {
        return p.unexpected("end of input");
    }
    Ok(a)
}

/// Rendering options for [`format_clauses`].
#[derive(Clone, Copy, Debug, Default)]
pub struct FormatOptions {
    /// Prefix marked body atoms with `/*#*/`. Off for explanation files.
    pub marks: bool,
}

/// Picks printable variable names for one clause: source names where they are
/// unambiguous, `Name_k` suffixes where two distinct variables share a name.
fn variable_names(c: &Clause) -> HashMap<Var, String> {
    let vars = c.vars();
    let mut count: HashMap<&str, usize> = HashMap::new();
    for v in &vars {
        *count.entry(&v.name).or_default() += 1;
    }
    let mut taken: BTreeSet<String> = vars.iter().map(|v| v.name.to_string()).collect();
    let mut names = HashMap::new();
    let mut first_seen: BTreeSet<&str> = BTreeSet::new();
    for v in &vars {
        let name = if count[&*v.name] == 1 || first_seen.insert(&v.name) {
            v.name.to_string()
        } else {
            let mut k = 1;
            loop {
                let candidate = format!("{}_{k}", v.name);
                if !taken.contains(&candidate) {
                    break candidate;
                }
                k += 1;
            }
        };
        taken.insert(name.clone());
        names.insert(v.clone(), name);
    }
    names
}

/// One clause as a line of source text (without trailing newline).
pub fn format_clause(c: &Clause, opts: FormatOptions) -> String {
    let names = variable_names(c);
    let mut name = |v: &Var| names[v].clone();
    let mut out = String::new();
    if let Some(p) = c.prob {
        write!(out, "{p}::").unwrap();
    }
    c.head.fmt_with(&mut out, &mut name).unwrap();
    if c.body.is_empty() && c.head.query {
        out.push_str(" :- true");
    }
    for (i, b) in c.body.iter().enumerate() {
        out.push_str(if i == 0 { " :- " } else { ", " });
        if opts.marks && b.marked {
            out.push_str("/*#*/");
        }
        b.atom.fmt_with(&mut out, &mut name).unwrap();
    }
    out.push('.');
    out
}

fn clause_group(c: &Clause) -> u8 {
    if c.is_probabilistic() {
        0
    } else if c.head.query {
        2
    } else {
        1
    }
}

/// Deterministic listing of a clause set: probabilistic clauses first (sorted
/// by text), then derived clauses (by head predicate, then text), then
/// `query(...)` clauses.
pub fn format_clauses(clauses: &[Clause], opts: FormatOptions) -> String {
    let mut lines: Vec<_> = clauses
        .iter()
        .map(|c| {
            let text = format_clause(c, opts);
            let pred = if c.is_probabilistic() { None } else { Some((c.head.pred.clone(), c.head.arity())) };
            ((clause_group(c), pred, text.clone()), text)
        })
        .collect();
    lines.sort();
    let mut out = String::new();
    for (_, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// The whole program in normal form: directives, clauses as in
/// [`format_clauses`], then query declarations in their original order.
pub fn format_program(p: &Program) -> String {
    let mut out = String::new();
    for k in p.visible() {
        writeln!(out, ":- visible({}/{}).", k.name, k.arity).unwrap();
    }
    for k in p.unsafe_predicates() {
        writeln!(out, ":- unsafe({}/{}).", k.name, k.arity).unwrap();
    }
    out.push_str(&format_clauses(p.clauses(), FormatOptions::default()));
    for q in p.queries() {
        let mut line = String::new();
        q.wrapped().fmt_with(&mut line, &mut |v| v.name.to_string()).unwrap();
        writeln!(out, "{line}.").unwrap();
    }
    out
}
