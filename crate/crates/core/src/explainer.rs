//! Explanations as programs, generated by unfolding the query clause.
//!
//! An explanation keeps the SLD goal it is still proving (the agenda) next to
//! its clauses. Every open body atom of a clause is a slot that points into the
//! agenda, so selecting and unfolding an atom is exactly one resolution step on
//! the agenda. The search tree is therefore the one `sld::solve` explores, and
//! each successful explanation corresponds to exactly one derivation.
//!
//! What happens to the clauses depends on the selected atom:
//! * probabilistic atom: the instantiated probabilistic clause is added and the
//!   call is marked, keeping its name;
//! * derived atom that is visible (or unsafe inside a probabilistic clause): a
//!   clause `a_k(..) :- body` is added and the call is replaced by a marked
//!   `a_k(..)`;
//! * any other derived atom: replaced in place by the clause body.
//!
//! The mgu of each step is applied to every clause.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::parser::{format_clauses, FormatOptions};
use crate::program::{LoadError, Program};
use crate::sld::{resolvents, select_atom, Goal, Limits, ProbVar};
use crate::subst::{canonical_atom, Substitutable, Substitution, VarSupply};
use crate::term::{Atom, BodyAtom, Clause, Origin, PredKey, Prob, Sym, Term, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error("unknown predicate {pred}")]
    UnknownPredicate { pred: PredKey },
    #[error("explanation is not successful")]
    NotSuccessful,
    #[error("non-ground probabilistic clause {clause}")]
    NonGroundProbClause { clause: String },
    #[error("probabilistic fact {atom} appears with probabilities {first} and {second}")]
    ProbabilityMismatch { atom: Atom, first: Prob, second: Prob },
    #[error(transparent)]
    Load(#[from] LoadError),
}

/// How a selected atom was unfolded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnfoldRule {
    /// Replaced by the body of the resolving clause.
    Inline,
    /// Kept as a marked call to a fresh predicate defined by the resolving clause.
    Rename,
    /// Kept as a marked call; the probabilistic clause is added.
    AddProbabilistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Partial,
    Successful,
    /// Some selectable atom matches no clause head.
    Failing,
    /// Atoms remain but all are blocked by the variant-ancestor check.
    Blocked,
}

/// Fresh predicate names `name_k`, counted per explanation.
#[derive(Clone, Debug, Default)]
pub struct RenamingState {
    counters: BTreeMap<Sym, u32>,
}

impl RenamingState {
    /// `a` with its predicate renamed to the next `name_k` not in `taken`.
    pub fn rho(&mut self, a: &Atom, taken: &BTreeSet<Sym>) -> Atom {
        let k = self.counters.entry(a.pred.clone()).or_insert(0);
        let name = loop {
            *k += 1;
            let candidate: Sym = format!("{}_{}", a.pred, k).into();
            if !taken.contains(&candidate) {
                break candidate;
            }
        };
        Atom { pred: name, args: a.args.clone(), query: false }
    }
}

#[derive(Clone, Debug)]
enum Item {
    Marked(Atom),
    /// An atom still to be proved; the slot id locates it in the agenda.
    Open(u32),
}

#[derive(Clone, Debug)]
struct EClause {
    prob: Option<Prob>,
    head: Atom,
    body: Vec<Item>,
    origin: Origin,
}

impl EClause {
    fn substitute(&mut self, s: &Substitution) {
        self.head = s.apply(&self.head);
        for item in &mut self.body {
            if let Item::Marked(a) = item {
                *a = s.apply(a);
            }
        }
    }
}

const ROOT: u32 = 0;

#[derive(Clone, Debug)]
pub struct Explanation {
    clauses: Vec<EClause>,
    agenda: Goal,
    /// Slot id of each agenda atom.
    slots: Vec<u32>,
    /// Clause holding each open slot.
    hosts: HashMap<u32, usize>,
    next_slot: u32,
    bindings: Substitution,
    renaming: RenamingState,
    supply: VarSupply,
    history: Vec<UnfoldRule>,
    /// Renamed-apart probabilistic clauses used so far, before the bindings.
    used: Vec<Clause>,
    unsafe_preds: Arc<BTreeSet<PredKey>>,
}

impl Explanation {
    /// The clauses, marks included. Atoms still open are shown unmarked.
    pub fn clauses(&self) -> Vec<Clause> {
        self.clauses
            .iter()
            .map(|c| Clause {
                prob: c.prob,
                head: c.head.clone(),
                body: c
                    .body
                    .iter()
                    .map(|item| match item {
                        Item::Marked(a) => BodyAtom::marked(a.clone()),
                        Item::Open(s) => BodyAtom::plain(self.open_atom(*s).clone()),
                    })
                    .collect(),
                origin: c.origin,
            })
            .collect()
    }

    fn open_atom(&self, slot: u32) -> &Atom {
        let i = self.slots.iter().position(|&s| s == slot).expect("open slot is on the agenda");
        &self.agenda.atoms[i].atom
    }

    /// The query atom as instantiated so far.
    pub fn query(&self) -> Atom {
        self.clauses[0].head.unwrapped()
    }

    pub fn bindings(&self) -> &Substitution {
        &self.bindings
    }

    pub fn history(&self) -> &[UnfoldRule] {
        &self.history
    }

    /// The atoms still to be proved, in selection order.
    pub fn agenda(&self) -> &Goal {
        &self.agenda
    }

    /// Distinct probabilistic facts of the explanation, identified by source
    /// clause and ground head, in sorted order.
    pub fn prob_facts(&self) -> Vec<(ProbVar, Prob)> {
        let facts: BTreeMap<ProbVar, Prob> = self
            .clauses
            .iter()
            .filter_map(|c| c.prob.map(|p| ((c.origin, c.head.clone()), p)))
            .collect();
        facts.into_iter().collect()
    }

    /// Instances of the probabilistic source clauses used, as resolution used them.
    pub fn used_prob_clauses(&self) -> BTreeSet<Clause> {
        self.used.iter().map(|c| self.bindings.apply(c)).collect()
    }

    /// The explanation as a standalone program: marks stripped, each
    /// probabilistic fact once.
    pub fn to_program(&self) -> Result<Program, ExplainError> {
        build_program(std::iter::once(self))
    }

    /// Program text of the explanation, one clause per line.
    pub fn render(&self, marks: bool) -> String {
        format_clauses(&self.clauses(), FormatOptions { marks })
    }
}

/// Unfolding against one program with a fixed visibility.
pub struct Explainer<'p> {
    program: &'p Program,
    visible: BTreeSet<PredKey>,
    names: BTreeSet<Sym>,
    unsafe_preds: Arc<BTreeSet<PredKey>>,
}

impl<'p> Explainer<'p> {
    /// `visible` overrides the program's own visibility annotation.
    pub fn new(program: &'p Program, visible: Option<BTreeSet<PredKey>>) -> Self {
        Explainer {
            program,
            visible: visible.unwrap_or_else(|| program.visible().clone()),
            names: program.predicate_names(),
            unsafe_preds: Arc::new(program.unsafe_predicates().clone()),
        }
    }

    /// `{query(q) :- q}`.
    pub fn initial_explanation(&self, q: &Atom) -> Result<Explanation, ExplainError> {
        let q = q.unwrapped();
        if !self.program.is_defined(&q.key()) {
            return Err(ExplainError::UnknownPredicate { pred: q.key() });
        }
        let query_clause = EClause { prob: None, head: q.wrapped(), body: vec![Item::Open(ROOT)], origin: Origin::Query };
        Ok(Explanation {
            clauses: vec![query_clause],
            agenda: Goal::new([q.clone()]),
            slots: vec![ROOT],
            hosts: HashMap::from([(ROOT, 0)]),
            next_slot: ROOT + 1,
            bindings: Substitution::new(),
            renaming: RenamingState::default(),
            supply: VarSupply::above([&q]),
            history: Vec::new(),
            used: Vec::new(),
            unsafe_preds: self.unsafe_preds.clone(),
        })
    }

    fn rule_for(&self, slot: u32, host: &EClause, atom: &Atom) -> UnfoldRule {
        let key = atom.key();
        if self.program.is_probabilistic(&key) {
            UnfoldRule::AddProbabilistic
        } else if slot == ROOT {
            UnfoldRule::Inline
        } else if self.visible.contains(&key) || (host.prob.is_some() && self.program.is_unsafe(&key)) {
            UnfoldRule::Rename
        } else {
            UnfoldRule::Inline
        }
    }

    /// One successor per clause resolving with the selected atom, in clause order.
    /// Empty when the selected atom matches nothing or nothing is selectable.
    pub fn unfold_step(&self, e: &Explanation) -> Vec<Explanation> {
        let Some(idx) = select_atom(&e.agenda) else {
            return Vec::new();
        };
        let slot = e.slots[idx];
        let host = e.hosts[&slot];
        let atom = e.agenda.atoms[idx].atom.clone();
        let rule = self.rule_for(slot, &e.clauses[host], &atom);
        let mut supply = e.supply.clone();
        let candidates = resolvents(&atom, self.program, &mut supply);

        candidates
            .into_iter()
            .map(|(clause, theta)| {
                let mut next = e.clone();
                next.supply = supply.clone();
                next.hosts.remove(&slot);
                let new_slots: Vec<u32> = (0..clause.body.len() as u32).map(|i| next.next_slot + i).collect();
                next.next_slot += clause.body.len() as u32;
                let open: Vec<Item> = new_slots.iter().map(|&s| Item::Open(s)).collect();

                let target = match rule {
                    UnfoldRule::Inline => {
                        let body = &mut next.clauses[host].body;
                        let pos = body.iter().position(|it| matches!(it, Item::Open(s) if *s == slot)).unwrap();
                        body.splice(pos..=pos, open);
                        host
                    }
                    UnfoldRule::Rename | UnfoldRule::AddProbabilistic => {
                        let (call, added) = if rule == UnfoldRule::Rename {
                            let renamed = next.renaming.rho(&atom, &self.names);
                            let added = EClause { prob: None, head: renamed.clone(), body: open, origin: clause.origin };
                            (renamed, added)
                        } else {
                            next.used.push(clause.clone());
                            let added =
                                EClause { prob: clause.prob, head: clause.head.clone(), body: open, origin: clause.origin };
                            (atom.clone(), added)
                        };
                        let body = &mut next.clauses[host].body;
                        let pos = body.iter().position(|it| matches!(it, Item::Open(s) if *s == slot)).unwrap();
                        body[pos] = Item::Marked(call);
                        next.clauses.push(added);
                        next.clauses.len() - 1
                    }
                };
                for &s in &new_slots {
                    next.hosts.insert(s, target);
                }
                next.agenda.replace(idx, clause.body.iter().map(|b| b.atom.clone()));
                next.slots.splice(idx..=idx, new_slots);
                next.agenda.apply(&theta);
                for c in &mut next.clauses {
                    c.substitute(&theta);
                }
                next.bindings = next.bindings.compose(&theta);
                next.history.push(rule);
                next
            })
            .collect()
    }

    pub fn classify(&self, e: &Explanation) -> Status {
        if e.agenda.is_empty() {
            return Status::Successful;
        }
        if select_atom(&e.agenda).is_none() {
            return Status::Blocked;
        }
        let mut supply = e.supply.clone();
        let stuck = e
            .agenda
            .atoms
            .iter()
            .filter(|g| !g.is_blocked())
            .any(|g| resolvents(&g.atom, self.program, &mut supply).is_empty());
        if stuck {
            Status::Failing
        } else {
            Status::Partial
        }
    }

    /// Depth-first generation of every successful explanation, in discovery order.
    pub fn generate(&self, q: &Atom, limits: Limits) -> Result<ExplainOutcome, ExplainError> {
        let mut out = ExplainOutcome::default();
        let mut stack = vec![self.initial_explanation(q)?];
        while let Some(e) = stack.pop() {
            if e.agenda.is_empty() {
                let probability = explanation_probability(&e)?;
                out.explanations.push(Generated { explanation: e, probability });
                continue;
            }
            if select_atom(&e.agenda).is_none() {
                out.pruned += 1;
                continue;
            }
            if e.history.len() >= limits.max_steps {
                out.truncated = true;
                continue;
            }
            let successors = self.unfold_step(&e);
            out.total_steps += successors.len();
            if out.total_steps > limits.max_total_steps {
                out.truncated = true;
                break;
            }
            if successors.is_empty() {
                out.failed += 1;
            }
            stack.extend(successors.into_iter().rev());
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub explanation: Explanation,
    pub probability: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExplainOutcome {
    pub explanations: Vec<Generated>,
    pub truncated: bool,
    pub pruned: usize,
    pub failed: usize,
    pub total_steps: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ExplainOptions {
    /// Replaces the program's visibility annotation when set.
    pub visible: Option<BTreeSet<PredKey>>,
    pub limits: Limits,
}

pub fn initial_explanation(q: &Atom, p: &Program) -> Result<Explanation, ExplainError> {
    Explainer::new(p, None).initial_explanation(q)
}

pub fn generate_explanations(q: &Atom, p: &Program, opts: &ExplainOptions) -> Result<ExplainOutcome, ExplainError> {
    Explainer::new(p, opts.visible.clone()).generate(q, opts.limits)
}

/// Product of the probabilities of the distinct probabilistic facts of a
/// successful explanation.
pub fn explanation_probability(e: &Explanation) -> Result<f64, ExplainError> {
    if !e.agenda.is_empty() {
        return Err(ExplainError::NotSuccessful);
    }
    for c in e.used_prob_clauses() {
        if !c.is_ground() {
            return Err(ExplainError::NonGroundProbClause { clause: format!("{c:?}") });
        }
    }
    if let Some(c) = e.clauses.iter().find(|c| c.prob.is_some() && !c.head.is_ground()) {
        return Err(ExplainError::NonGroundProbClause { clause: format!("{:?}", c.head) });
    }
    Ok(e.prob_facts().iter().map(|(_, p)| p.value()).product())
}

/// The union of explanations as one program. Probabilistic facts shared by
/// several explanations denote one random variable and appear once.
pub fn union_program(es: &[Explanation]) -> Result<Program, ExplainError> {
    build_program(es.iter())
}

fn build_program<'a>(es: impl Iterator<Item = &'a Explanation>) -> Result<Program, ExplainError> {
    let mut prob: BTreeMap<ProbVar, Clause> = BTreeMap::new();
    let mut derived: Vec<Clause> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut unsafe_preds = BTreeSet::new();
    for e in es {
        if !e.agenda.is_empty() {
            return Err(ExplainError::NotSuccessful);
        }
        unsafe_preds.extend(e.unsafe_preds.iter().cloned());
        for c in e.clauses() {
            let c = c.without_marks();
            match c.prob {
                Some(p) => {
                    let key = (c.origin, c.head.clone());
                    if let Some(prev) = prob.get(&key) {
                        let first = prev.prob.unwrap();
                        if first != p {
                            return Err(ExplainError::ProbabilityMismatch { atom: c.head, first, second: p });
                        }
                    } else {
                        prob.insert(key, c);
                    }
                }
                None => {
                    if seen.insert(canonical_clause(&c)) {
                        derived.push(c);
                    }
                }
            }
        }
    }
    let clauses: Vec<Clause> = prob.into_values().chain(derived).collect();
    let defined: BTreeSet<PredKey> = clauses.iter().flat_map(Clause::atoms).map(Atom::key).collect();
    unsafe_preds.retain(|p| defined.contains(p));
    Ok(Program::new(clauses, BTreeSet::new(), unsafe_preds, Vec::new())?)
}

/// A clause with variables renamed `_0, _1, ...` in first-occurrence order and
/// the origin erased, so that equal clause texts compare equal.
fn canonical_clause(c: &Clause) -> Clause {
    let pairs = c.vars().into_iter().enumerate().map(|(i, v)| (v, Term::Var(Var::new(format!("_{i}"), 0))));
    let renamed = c.substitute(&Substitution::from_pairs(pairs));
    debug_assert_eq!(canonical_atom(&renamed.head), renamed.head.clone());
    Clause { origin: Origin::Query, ..renamed }
}
