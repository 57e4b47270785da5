//! First-order syntax without function symbols: terms, atoms, clauses.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Interned-ish identifier. Cheap to clone and `Send + Sync`.
pub type Sym = Arc<str>;

/// A logic variable. Parsing assigns index 0; renaming apart hands out fresh indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: Sym,
    pub index: u32,
}

impl Var {
    pub fn new(name: impl Into<Sym>, index: u32) -> Self {
        Var { name: name.into(), index }
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}#{}", self.name, self.index)
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const(Sym),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Var::new(name, 0))
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(name.into())
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Const(_))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v:?}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Predicate identity: name, arity, and whether it is the reserved
/// `query(...)` wrapper used as the head of an explanation's query clause.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredKey {
    pub name: Sym,
    pub arity: usize,
    pub query: bool,
}

impl PredKey {
    pub fn new(name: &str, arity: usize) -> Self {
        PredKey { name: name.into(), arity, query: false }
    }
}

impl fmt::Debug for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.query {
            write!(f, "query({}/{})", self.name, self.arity)
        } else {
            write!(f, "{}/{}", self.name, self.arity)
        }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// `f(t1, ..., tn)`. When `query` is set the atom stands for `query(f(t1, ..., tn))`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: Sym,
    pub args: Vec<Term>,
    pub query: bool,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args, query: false }
    }

    /// Builds an atom from a compact textual form such as `p(a,X)`; panics on bad input.
    /// Meant for tests and examples; real programs go through the parser.
    pub fn parse(text: &str) -> Self {
        crate::parser::parse_atom(text).unwrap_or_else(|e| panic!("bad atom {text:?}: {e}"))
    }

    /// The `query(self)` wrapper atom.
    pub fn wrapped(&self) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.clone(), query: true }
    }

    /// The atom inside a `query(...)` wrapper.
    pub fn unwrapped(&self) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.clone(), query: false }
    }

    pub fn key(&self) -> PredKey {
        PredKey { name: self.pred.clone(), arity: self.args.len(), query: self.query }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.args.iter().filter_map(Term::as_var)
    }

    pub fn constants(&self) -> impl Iterator<Item = &Sym> {
        self.args.iter().filter_map(|t| match t {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        })
    }

    pub(crate) fn fmt_with(
        &self,
        f: &mut impl fmt::Write,
        var_name: &mut dyn FnMut(&Var) -> String,
    ) -> fmt::Result {
        if self.query {
            f.write_str("query(")?;
        }
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_char('(')?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                match t {
                    Term::Var(v) => f.write_str(&var_name(v))?,
                    Term::Const(c) => f.write_str(c)?,
                }
            }
            f.write_char(')')?;
        }
        if self.query {
            f.write_char(')')?;
        }
        Ok(())
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, &mut |v| format!("{v:?}"))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A body atom; marked atoms are frozen and never selected for unfolding.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BodyAtom {
    pub atom: Atom,
    pub marked: bool,
}

impl BodyAtom {
    pub fn plain(atom: Atom) -> Self {
        BodyAtom { atom, marked: false }
    }

    pub fn marked(atom: Atom) -> Self {
        BodyAtom { atom, marked: true }
    }
}

impl fmt::Debug for BodyAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.marked {
            write!(f, "/*#*/{:?}", self.atom)
        } else {
            write!(f, "{:?}", self.atom)
        }
    }
}

/// A probability label in `[0, 1]`, totally ordered so clauses can live in sets.
#[derive(Clone, Copy)]
pub struct Prob(f64);

impl Prob {
    pub fn new(p: f64) -> Option<Prob> {
        (0.0..=1.0).contains(&p).then_some(Prob(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl PartialEq for Prob {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}

impl Eq for Prob {}

impl PartialOrd for Prob {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Prob {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl std::hash::Hash for Prob {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

impl fmt::Debug for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `{}` on f64 is the shortest representation that round-trips.
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Where a clause came from: its position in the source program and the line it started on.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Origin {
    Source { index: u32, line: u32 },
    /// The generated `query(q) :- q` clause of an explanation.
    Query,
}

impl Origin {
    pub fn source(index: usize, line: u32) -> Self {
        Origin::Source { index: index as u32, line }
    }

    pub fn line(self) -> Option<u32> {
        match self {
            Origin::Source { line, .. } => Some(line),
            Origin::Query => None,
        }
    }
}

/// `[p::] head :- body.` Derived clauses have no probability; probabilistic facts
/// and intensional probabilistic rules carry one.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    pub prob: Option<Prob>,
    pub head: Atom,
    pub body: Vec<BodyAtom>,
    pub origin: Origin,
}

impl Clause {
    pub fn derived(head: Atom, body: Vec<Atom>, origin: Origin) -> Self {
        Clause { prob: None, head, body: body.into_iter().map(BodyAtom::plain).collect(), origin }
    }

    pub fn probabilistic(p: Prob, head: Atom, body: Vec<Atom>, origin: Origin) -> Self {
        Clause { prob: Some(p), ..Clause::derived(head, body, origin) }
    }

    pub fn is_probabilistic(&self) -> bool {
        self.prob.is_some()
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.head.is_ground() && self.body.iter().all(|b| b.atom.is_ground())
    }

    /// Variables in first-occurrence order (head, then body left to right).
    pub fn vars(&self) -> Vec<Var> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let atoms = std::iter::once(&self.head).chain(self.body.iter().map(|b| &b.atom));
        for v in atoms.flat_map(Atom::vars) {
            if seen.insert(v.clone()) {
                out.push(v.clone());
            }
        }
        out
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        std::iter::once(&self.head).chain(self.body.iter().map(|b| &b.atom))
    }

    pub fn without_marks(&self) -> Clause {
        let body = self.body.iter().map(|b| BodyAtom::plain(b.atom.clone())).collect();
        Clause { body, ..self.clone() }
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.prob {
            write!(f, "{p}::")?;
        }
        write!(f, "{:?}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{b:?}")?;
        }
        f.write_str(".")
    }
}
