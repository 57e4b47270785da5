//! Herbrand universe and the table of ground probabilistic facts.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::program::Program;
use crate::sld::{solve_goal, Limits, SolveOptions};
use crate::subst::Substitution;
use crate::term::{Atom, Clause, Origin, PredKey, Prob, Sym, Term, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundError {
    #[error("empty Herbrand universe: cannot ground {clause}")]
    EmptyUniverse { clause: String },
    #[error("probabilistic rule at line {line} depends on probabilistic predicate {pred}")]
    StochasticGrounding { pred: PredKey, line: u32 },
    #[error("duplicate probabilistic fact {atom} (lines {first} and {second})")]
    DuplicateFact { atom: Atom, first: u32, second: u32 },
    #[error("probabilistic clause at line {line} has non-ground instance {atom}")]
    NonGroundAfterGrounding { atom: Atom, line: u32 },
    #[error("grounding limit exceeded")]
    LimitExceeded,
}

/// Key of a ground fact. `tag` is set only for unsafe predicates, whose
/// occurrences from distinct source clauses are kept apart.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactKey {
    pub atom: Atom,
    pub tag: Option<Origin>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactEntry {
    pub probability: Prob,
    pub origin: Origin,
}

/// G(P): every ground probabilistic fact with its probability, ordered by atom.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundFactTable {
    entries: BTreeMap<FactKey, FactEntry>,
}

impl GroundFactTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FactKey, &FactEntry)> {
        self.entries.iter()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.entries.keys().map(|k| &k.atom)
    }

    /// Probability of an untagged ground fact.
    pub fn probability(&self, atom: &Atom) -> Option<f64> {
        let key = FactKey { atom: atom.clone(), tag: None };
        self.entries.get(&key).map(|e| e.probability.value())
    }

    /// True when some entry belongs to an unsafe predicate.
    pub fn has_tagged(&self) -> bool {
        self.entries.keys().any(|k| k.tag.is_some())
    }

    /// Keeps only the facts whose predicate is in `preds`.
    pub fn restricted_to(&self, preds: &BTreeSet<PredKey>) -> GroundFactTable {
        let entries = self
            .entries
            .iter()
            .filter(|(k, _)| preds.contains(&k.atom.key()))
            .map(|(k, e)| (k.clone(), *e))
            .collect();
        GroundFactTable { entries }
    }

    fn insert(&mut self, key: FactKey, entry: FactEntry) -> Result<(), GroundError> {
        match self.entries.get(&key) {
            None => {
                self.entries.insert(key, entry);
                Ok(())
            }
            Some(prev) if prev.origin == entry.origin => Ok(()),
            Some(prev) => Err(GroundError::DuplicateFact {
                atom: key.atom,
                first: prev.origin.line().unwrap_or(0),
                second: entry.origin.line().unwrap_or(0),
            }),
        }
    }
}

impl FromIterator<(Atom, Prob, Origin)> for GroundFactTable {
    /// Builds a table directly; later duplicates overwrite earlier ones.
    fn from_iter<I: IntoIterator<Item = (Atom, Prob, Origin)>>(iter: I) -> Self {
        let entries = iter
            .into_iter()
            .map(|(atom, probability, origin)| (FactKey { atom, tag: None }, FactEntry { probability, origin }))
            .collect();
        GroundFactTable { entries }
    }
}

/// All constants of the program's clauses and declared queries.
pub fn herbrand_constants(p: &Program) -> Result<BTreeSet<Sym>, GroundError> {
    let constants: BTreeSet<Sym> = p
        .clauses()
        .iter()
        .flat_map(Clause::atoms)
        .chain(p.queries())
        .flat_map(|a| a.constants().cloned())
        .collect();
    if constants.is_empty() {
        if let Some(c) = p.clauses().iter().find(|c| c.is_probabilistic() && !c.is_ground()) {
            return Err(GroundError::EmptyUniverse { clause: format!("{c:?}") });
        }
    }
    Ok(constants)
}

/// Bound on the number of groundings a single non-ground fact may produce.
const MAX_GROUNDINGS: usize = 1 << 20;

/// Expands every probabilistic clause into ground facts.
pub fn ground_probabilistic_facts(p: &Program, limits: Limits) -> Result<GroundFactTable, GroundError> {
    let mut table = GroundFactTable::default();
    let mut universe = None;
    for c in p.clauses().iter().filter(|c| c.is_probabilistic()) {
        let line = c.origin.line().unwrap_or(0);
        let heads = if c.is_fact() {
            if c.is_ground() {
                vec![c.head.clone()]
            } else {
                if universe.is_none() {
                    universe = Some(herbrand_constants(p)?);
                }
                groundings(&c.head, universe.as_ref().unwrap())?
            }
        } else {
            check_deterministic_body(p, c)?;
            intensional_heads(p, c, limits)?
        };
        let tag = p.is_unsafe(&c.head.key()).then_some(c.origin);
        for atom in heads {
            if !atom.is_ground() {
                return Err(GroundError::NonGroundAfterGrounding { atom, line });
            }
            let entry = FactEntry { probability: c.prob.unwrap(), origin: c.origin };
            table.insert(FactKey { atom, tag }, entry)?;
        }
    }
    Ok(table)
}

fn groundings(head: &Atom, universe: &BTreeSet<Sym>) -> Result<Vec<Atom>, GroundError> {
    let vars: Vec<Var> = head.vars().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let count = universe.len().checked_pow(vars.len() as u32).unwrap_or(usize::MAX);
    if count > MAX_GROUNDINGS {
        return Err(GroundError::LimitExceeded);
    }
    let consts: Vec<&Sym> = universe.iter().collect();
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; vars.len()];
    for _ in 0..count {
        let s = Substitution::from_pairs(
            vars.iter().zip(&digits).map(|(v, &d)| (v.clone(), Term::Const(consts[d].clone()))),
        );
        out.push(s.apply(head));
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < consts.len() {
                break;
            }
            *d = 0;
        }
    }
    Ok(out)
}

fn check_deterministic_body(p: &Program, c: &Clause) -> Result<(), GroundError> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<PredKey> = c.body.iter().map(|b| b.atom.key()).collect();
    while let Some(pred) = stack.pop() {
        if !seen.insert(pred.clone()) {
            continue;
        }
        if p.is_probabilistic(&pred) {
            return Err(GroundError::StochasticGrounding { pred, line: c.origin.line().unwrap_or(0) });
        }
        for d in p.clauses_for(&pred) {
            stack.extend(d.body.iter().map(|b| b.atom.key()));
        }
    }
    Ok(())
}

fn intensional_heads(p: &Program, c: &Clause, limits: Limits) -> Result<Vec<Atom>, GroundError> {
    let body: Vec<Atom> = c.body.iter().map(|b| b.atom.clone()).collect();
    let outcome = solve_goal(&body, p, &SolveOptions::with_limits(limits)).map_err(|_| GroundError::LimitExceeded)?;
    if outcome.truncated {
        return Err(GroundError::LimitExceeded);
    }
    let heads: BTreeSet<Atom> = outcome.derivations.iter().map(|d| d.answer.apply(&c.head)).collect();
    Ok(heads.into_iter().collect())
}
