//! A loaded program: clauses, the probabilistic/derived predicate partition,
//! visibility and `unsafe` annotations, and declared queries.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::term::{Atom, Clause, PredKey, Sym};

/// Violations of the program invariants, detected after parsing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("probability out of range ({value} at line {line})")]
    ProbabilityOutOfRange { value: String, line: u32 },
    #[error("predicate {pred} is both probabilistic and derived")]
    MixedPredicate { pred: PredKey },
    #[error("arity clash for {name}: used with arity {first} and {second}")]
    ArityClash { name: Sym, first: usize, second: usize },
    #[error("probabilistic rule at line {line} calls probabilistic predicate {pred}")]
    ProbabilisticBody { pred: PredKey, line: u32 },
    #[error("{directive} directive names unknown predicate {pred}")]
    UnknownPredicate { directive: &'static str, pred: PredKey },
    #[error("visible predicate {pred} is not a derived predicate")]
    VisibleNotDerived { pred: PredKey },
    #[error("reserved predicate {what}")]
    Reserved { what: String },
}

#[derive(Clone, Debug)]
pub struct Program {
    clauses: Vec<Clause>,
    prob_predicates: BTreeSet<PredKey>,
    derived_predicates: BTreeSet<PredKey>,
    visible: BTreeSet<PredKey>,
    unsafe_preds: BTreeSet<PredKey>,
    queries: Vec<Atom>,
    by_pred: HashMap<PredKey, Vec<usize>>,
}

impl Program {
    /// Validates the parts and builds the predicate tables. Clause order is kept.
    pub fn new(
        clauses: Vec<Clause>,
        visible: BTreeSet<PredKey>,
        unsafe_preds: BTreeSet<PredKey>,
        queries: Vec<Atom>,
    ) -> Result<Program, LoadError> {
        let mut prob_predicates = BTreeSet::new();
        let mut derived_predicates = BTreeSet::new();
        let mut by_pred: HashMap<PredKey, Vec<usize>> = HashMap::new();
        let mut arities: BTreeMap<Sym, usize> = BTreeMap::new();

        let mut check_arity = |a: &Atom| -> Result<(), LoadError> {
            let first = *arities.entry(a.pred.clone()).or_insert(a.arity());
            if first != a.arity() {
                return Err(LoadError::ArityClash { name: a.pred.clone(), first, second: a.arity() });
            }
            Ok(())
        };

        for (i, c) in clauses.iter().enumerate() {
            if let Some(p) = c.prob {
                if !(0.0..=1.0).contains(&p.value()) {
                    return Err(LoadError::ProbabilityOutOfRange {
                        value: p.to_string(),
                        line: c.origin.line().unwrap_or(0),
                    });
                }
                if c.head.query {
                    return Err(LoadError::Reserved { what: "query/1 cannot be probabilistic".into() });
                }
            }
            for a in c.atoms() {
                check_reserved(a)?;
                check_arity(a)?;
            }
            if c.body.iter().any(|b| b.atom.query) {
                return Err(LoadError::Reserved { what: "query/1 cannot be called in a clause body".into() });
            }
            let key = c.head.key();
            if c.is_probabilistic() {
                prob_predicates.insert(key.clone());
            } else {
                derived_predicates.insert(key.clone());
            }
            by_pred.entry(key).or_default().push(i);
        }
        for q in &queries {
            check_reserved(q)?;
            check_arity(q)?;
        }

        if let Some(pred) = prob_predicates.intersection(&derived_predicates).next() {
            return Err(LoadError::MixedPredicate { pred: pred.clone() });
        }
        for c in clauses.iter().filter(|c| c.is_probabilistic()) {
            if let Some(b) = c.body.iter().find(|b| prob_predicates.contains(&b.atom.key())) {
                return Err(LoadError::ProbabilisticBody {
                    pred: b.atom.key(),
                    line: c.origin.line().unwrap_or(0),
                });
            }
        }
        for pred in &visible {
            if prob_predicates.contains(pred) {
                return Err(LoadError::VisibleNotDerived { pred: pred.clone() });
            }
            if !derived_predicates.contains(pred) {
                return Err(LoadError::UnknownPredicate { directive: "visible", pred: pred.clone() });
            }
        }
        for pred in &unsafe_preds {
            if !prob_predicates.contains(pred) && !derived_predicates.contains(pred) {
                return Err(LoadError::UnknownPredicate { directive: "unsafe", pred: pred.clone() });
            }
        }

        Ok(Program {
            clauses,
            prob_predicates,
            derived_predicates,
            visible,
            unsafe_preds,
            queries,
            by_pred,
        })
    }

    /// A program with no annotations and no declared queries.
    pub fn from_clauses(clauses: Vec<Clause>) -> Result<Program, LoadError> {
        Program::new(clauses, BTreeSet::new(), BTreeSet::new(), Vec::new())
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn prob_predicates(&self) -> &BTreeSet<PredKey> {
        &self.prob_predicates
    }

    pub fn derived_predicates(&self) -> &BTreeSet<PredKey> {
        &self.derived_predicates
    }

    pub fn visible(&self) -> &BTreeSet<PredKey> {
        &self.visible
    }

    pub fn unsafe_predicates(&self) -> &BTreeSet<PredKey> {
        &self.unsafe_preds
    }

    pub fn queries(&self) -> &[Atom] {
        &self.queries
    }

    pub fn is_probabilistic(&self, pred: &PredKey) -> bool {
        self.prob_predicates.contains(pred)
    }

    pub fn is_defined(&self, pred: &PredKey) -> bool {
        self.by_pred.contains_key(pred)
    }

    pub fn is_visible(&self, pred: &PredKey) -> bool {
        self.visible.contains(pred)
    }

    pub fn is_unsafe(&self, pred: &PredKey) -> bool {
        self.unsafe_preds.contains(pred)
    }

    /// Clauses whose head has the given predicate, in program order.
    pub fn clauses_for(&self, pred: &PredKey) -> impl Iterator<Item = &Clause> {
        self.by_pred.get(pred).into_iter().flatten().map(move |&i| &self.clauses[i])
    }

    /// Every predicate name occurring anywhere in the program or its queries.
    pub fn predicate_names(&self) -> BTreeSet<Sym> {
        self.clauses
            .iter()
            .flat_map(Clause::atoms)
            .chain(&self.queries)
            .map(|a| a.pred.clone())
            .collect()
    }

    /// Declared queries, or for a program without declarations (such as an
    /// explanation file) the distinct `query(...)` clause heads as wrapped atoms.
    pub fn implied_queries(&self) -> Vec<Atom> {
        if !self.queries.is_empty() {
            return self.queries.clone();
        }
        let mut seen = BTreeSet::new();
        self.clauses
            .iter()
            .filter(|c| c.head.query)
            .map(|c| c.head.clone())
            .filter(|h| seen.insert(crate::subst::canonical_atom(h)))
            .collect()
    }

    /// Replaces the visibility annotation. Fails like loading would.
    pub fn with_visible(&self, visible: BTreeSet<PredKey>) -> Result<Program, LoadError> {
        Program::new(self.clauses.clone(), visible, self.unsafe_preds.clone(), self.queries.clone())
    }
}

fn check_reserved(a: &Atom) -> Result<(), LoadError> {
    if &*a.pred == "true" && a.args.is_empty() && !a.query {
        return Err(LoadError::Reserved { what: "true/0 cannot be defined".into() });
    }
    if &*a.pred == "query" && !a.query {
        return Err(LoadError::Reserved { what: format!("query/{}", a.arity()) });
    }
    Ok(())
}
