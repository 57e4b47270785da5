//! Substitutions, unification, renaming apart and variant checks.
//!
//! The term language has constants and variables only, so unification never
//! needs an occurs check: a variable can only be bound to a constant or to
//! another variable.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::term::{Atom, BodyAtom, Clause, Term, Var};

/// A finite map from variables to terms, kept idempotent: no variable in the
/// range is also in the domain, and no variable is bound to itself.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a substitution by binding the pairs left to right.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Term)>) -> Self {
        let mut s = Substitution::new();
        for (v, t) in pairs {
            let t = s.resolve(&t);
            match s.map.get(&v).cloned() {
                None => s.bind(v, t),
                Some(existing) => {
                    // Binding an already-bound variable: unify the two images.
                    if existing != t {
                        if let Term::Var(w) = &t {
                            s.bind(w.clone(), existing);
                        } else if let Term::Var(w) = &existing {
                            s.bind(w.clone(), t);
                        }
                    }
                }
            }
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.map.keys()
    }

    fn resolve(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        }
    }

    /// Adds `v ↦ t` for an unbound `v`, keeping the map idempotent.
    fn bind(&mut self, v: Var, t: Term) {
        debug_assert!(!self.map.contains_key(&v));
        let t = self.resolve(&t);
        if t == Term::Var(v.clone()) {
            return;
        }
        for image in self.map.values_mut() {
            if image.as_var() == Some(&v) {
                *image = t.clone();
            }
        }
        self.map.insert(v, t);
    }

    pub fn apply<T: Substitutable>(&self, x: &T) -> T {
        x.substitute(self)
    }

    /// `self` followed by `other`: `compose(s1, s2).apply(x) == s2.apply(&s1.apply(x))`.
    ///
    /// The result is idempotent whenever `other` does not bind variables into
    /// the domain of `self`, which always holds for the composition of mgus
    /// along a derivation (each mgu is computed on already instantiated atoms).
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut map = BTreeMap::new();
        for (v, t) in &self.map {
            let t = other.resolve(t);
            if t != Term::Var(v.clone()) {
                map.insert(v.clone(), t);
            }
        }
        for (v, t) in &other.map {
            if !self.map.contains_key(v) {
                map.insert(v.clone(), t.clone());
            }
        }
        Substitution { map }
    }

    /// Keeps only the bindings of the given variables.
    pub fn restrict<'a>(&self, vars: impl IntoIterator<Item = &'a Var>) -> Substitution {
        let mut map = BTreeMap::new();
        for v in vars {
            if let Some(t) = self.map.get(v) {
                map.insert(v.clone(), t.clone());
            }
        }
        Substitution { map }
    }

    pub fn is_idempotent(&self) -> bool {
        self.map.values().all(|t| match t {
            Term::Var(v) => !self.map.contains_key(v),
            Term::Const(_) => true,
        }) && self.map.iter().all(|(v, t)| t.as_var() != Some(v))
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v:?}/{t:?}")?;
        }
        f.write_str("}")
    }
}

/// Anything a substitution can be applied to.
pub trait Substitutable: Sized {
    fn substitute(&self, s: &Substitution) -> Self;
}

impl Substitutable for Term {
    fn substitute(&self, s: &Substitution) -> Self {
        s.resolve(self)
    }
}

impl Substitutable for Atom {
    fn substitute(&self, s: &Substitution) -> Self {
        if s.is_empty() {
            return self.clone();
        }
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|t| s.resolve(t)).collect(),
            query: self.query,
        }
    }
}

impl Substitutable for BodyAtom {
    fn substitute(&self, s: &Substitution) -> Self {
        BodyAtom { atom: self.atom.substitute(s), marked: self.marked }
    }
}

impl Substitutable for Clause {
    fn substitute(&self, s: &Substitution) -> Self {
        Clause {
            prob: self.prob,
            head: self.head.substitute(s),
            body: self.body.iter().map(|b| b.substitute(s)).collect(),
            origin: self.origin,
        }
    }
}

impl<T: Substitutable> Substitutable for Vec<T> {
    fn substitute(&self, s: &Substitution) -> Self {
        self.iter().map(|x| x.substitute(s)).collect()
    }
}

/// Most general unifier of two atoms, or `None` when they do not unify.
///
/// When both sides of a pair are variables the variable of `a2` is bound to
/// the one of `a1`, so goal variables survive resolution against renamed
/// clause heads passed as `a2`.
pub fn mgu(a1: &Atom, a2: &Atom) -> Option<Substitution> {
    if a1.pred != a2.pred || a1.query != a2.query || a1.args.len() != a2.args.len() {
        return None;
    }
    let mut s = Substitution::new();
    for (t1, t2) in a1.args.iter().zip(&a2.args) {
        let t1 = s.resolve(t1);
        let t2 = s.resolve(t2);
        if t1 == t2 {
            continue;
        }
        match (t1, t2) {
            (t, Term::Var(v)) => s.bind(v, t),
            (Term::Var(v), t) => s.bind(v, t),
            (Term::Const(_), Term::Const(_)) => return None,
        }
    }
    Some(s)
}

/// Source of fresh variable indices.
///
/// Every search branch owns its supply (cloned from its parent), so index
/// allocation is deterministic per branch and sibling branches never share
/// variables with each other's later steps.
#[derive(Clone, Debug)]
pub struct VarSupply {
    next: u32,
}

impl VarSupply {
    /// A supply whose indices are all larger than any index already in use in `atoms`.
    pub fn above<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Self {
        let max = atoms.into_iter().flat_map(Atom::vars).map(|v| v.index).max().unwrap_or(0);
        VarSupply { next: max + 1 }
    }

    pub fn starting_at(next: u32) -> Self {
        VarSupply { next: next.max(1) }
    }

    pub fn fresh(&mut self) -> u32 {
        let i = self.next;
        self.next += 1;
        i
    }
}

impl Default for VarSupply {
    fn default() -> Self {
        VarSupply::starting_at(1)
    }
}

/// A variant of `c` whose variables all carry fresh indices. Source names are kept.
pub fn rename_apart(c: &Clause, supply: &mut VarSupply) -> Clause {
    let vars = c.vars();
    if vars.is_empty() {
        return c.clone();
    }
    let renaming = Substitution {
        map: vars
            .into_iter()
            .map(|v| {
                let fresh = Var { name: v.name.clone(), index: supply.fresh() };
                (v, Term::Var(fresh))
            })
            .collect(),
    };
    c.substitute(&renaming)
}

/// True iff some bijective variable renaming maps `a1` onto `a2`.
pub fn is_variant(a1: &Atom, a2: &Atom) -> bool {
    if a1.key() != a2.key() {
        return false;
    }
    let mut fwd: HashMap<&Var, &Var> = HashMap::new();
    let mut bwd: HashMap<&Var, &Var> = HashMap::new();
    for (t1, t2) in a1.args.iter().zip(&a2.args) {
        match (t1, t2) {
            (Term::Const(c1), Term::Const(c2)) if c1 == c2 => {}
            (Term::Var(v1), Term::Var(v2)) => {
                if *fwd.entry(v1).or_insert(v2) != v2 || *bwd.entry(v2).or_insert(v1) != v1 {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// The atom with its variables renamed to `_0, _1, ...` in first-occurrence order.
/// Two atoms are variants iff their canonical forms are equal.
pub fn canonical_atom(a: &Atom) -> Atom {
    let mut names: HashMap<Var, Term> = HashMap::new();
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => {
                let n = names.len();
                names.entry(v.clone()).or_insert_with(|| Term::Var(Var::new(format!("_{n}"), 0))).clone()
            }
            Term::Const(_) => t.clone(),
        })
        .collect();
    Atom { pred: a.pred.clone(), args, query: a.query }
}
