//! SLD resolution with the variant-ancestor selection rule.
//!
//! The selected atom is the leftmost unmarked goal atom that is not a variant
//! of any of its (instantiated) ancestors. When every atom is blocked the
//! branch is pruned. On programs with finitely many constants this keeps the
//! search finite for the usual left-recursive definitions, and it is complete
//! for restricted programs (one recursive call per body). It is not complete
//! in general.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::program::Program;
use crate::subst::{is_variant, mgu, rename_apart, Substitution, VarSupply};
use crate::term::{Atom, Clause, Origin, Prob};

/// Bounds on the search. Exceeding either truncates the result and sets
/// [`SolveOutcome::truncated`]; it never fails silently.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Resolution steps allowed in one derivation.
    pub max_steps: usize,
    /// Resolution steps allowed in one whole search.
    pub max_total_steps: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 10_000, max_total_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("non-ground probabilistic clause {clause}")]
    NonGroundProbClause { clause: String },
}

/// Where resolution finds the clauses for a selected atom.
pub trait ClauseSource {
    /// Clauses whose head predicate matches `atom`, in program order.
    fn candidates<'a>(&'a self, atom: &Atom) -> Vec<&'a Clause>;
}

impl ClauseSource for Program {
    fn candidates<'a>(&'a self, atom: &Atom) -> Vec<&'a Clause> {
        self.clauses_for(&atom.key()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoalAtom {
    pub atom: Atom,
    pub marked: bool,
    /// Atoms this one descends from, nearest first, kept instantiated.
    pub ancestors: Vec<Atom>,
}

impl GoalAtom {
    pub fn new(atom: Atom) -> Self {
        GoalAtom { atom, marked: false, ancestors: Vec::new() }
    }

    pub fn is_blocked(&self) -> bool {
        self.marked || self.ancestors.iter().any(|a| is_variant(&self.atom, a))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Goal {
    pub atoms: Vec<GoalAtom>,
}

impl Goal {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        Goal { atoms: atoms.into_iter().map(GoalAtom::new).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn apply(&mut self, s: &Substitution) {
        if s.is_empty() {
            return;
        }
        for g in &mut self.atoms {
            g.atom = s.apply(&g.atom);
            for a in &mut g.ancestors {
                *a = s.apply(a);
            }
        }
    }

    /// Replaces the atom at `idx` by `body`, whose atoms descend from it.
    pub fn replace(&mut self, idx: usize, body: impl IntoIterator<Item = Atom>) {
        let parent = self.atoms[idx].clone();
        let mut ancestors = Vec::with_capacity(parent.ancestors.len() + 1);
        ancestors.push(parent.atom);
        ancestors.extend(parent.ancestors);
        let children: Vec<_> = body
            .into_iter()
            .map(|atom| GoalAtom { atom, marked: false, ancestors: ancestors.clone() })
            .collect();
        self.atoms.splice(idx..=idx, children);
    }
}

/// Leftmost atom that is neither marked nor a variant of one of its ancestors.
pub fn select_atom(goal: &Goal) -> Option<usize> {
    goal.atoms.iter().position(|g| !g.is_blocked())
}

/// Renamed-apart candidate clauses whose head unifies with `atom`, with the mgu.
pub fn resolvents(atom: &Atom, source: &impl ClauseSource, supply: &mut VarSupply) -> Vec<(Clause, Substitution)> {
    source
        .candidates(atom)
        .into_iter()
        .filter_map(|c| {
            // Cheap pre-check on constants before paying for the renaming.
            let clash = atom.args.iter().zip(&c.head.args).any(|(a, b)| a.is_ground() && b.is_ground() && a != b);
            if clash {
                return None;
            }
            let renamed = rename_apart(c, supply);
            mgu(atom, &renamed.head).map(|theta| (renamed, theta))
        })
        .collect()
}

/// One resolution step out of a goal.
#[derive(Clone, Debug)]
pub struct Resolvent {
    pub goal: Goal,
    pub mgu: Substitution,
    /// The renamed-apart clause used.
    pub clause: Clause,
    /// The selected atom as it was before the step.
    pub selected: Atom,
}

/// All one-step successors of `goal`, in clause order. Empty when the selected
/// atom matches no clause or when no atom is selectable.
pub fn sld_step(goal: &Goal, source: &impl ClauseSource, supply: &mut VarSupply) -> Vec<Resolvent> {
    let Some(idx) = select_atom(goal) else {
        return Vec::new();
    };
    let selected = goal.atoms[idx].atom.clone();
    resolvents(&selected, source, supply)
        .into_iter()
        .map(|(clause, theta)| {
            let mut next = goal.clone();
            next.replace(idx, clause.body.iter().map(|b| b.atom.clone()));
            next.apply(&theta);
            Resolvent { goal: next, mgu: theta, clause, selected: selected.clone() }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub selected: Atom,
    pub clause: Clause,
    pub mgu: Substitution,
}

/// A successful derivation.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    /// Recorded only when [`SolveOptions::record_steps`] is set.
    pub steps: Vec<Step>,
    /// Computed answer restricted to the variables of the initial goal.
    pub answer: Substitution,
    /// Ground instances of the probabilistic clauses used.
    pub used_prob_clauses: BTreeSet<Clause>,
}

/// Identity of the random variable behind a used probabilistic clause: its
/// source clause and ground head. Two instances of one intensional rule with
/// the same head but different bodies are the same fact.
pub type ProbVar = (Origin, Atom);

impl Derivation {
    /// The distinct probabilistic facts used, with their probabilities, sorted.
    pub fn prob_facts(&self) -> Vec<(ProbVar, Prob)> {
        let facts: std::collections::BTreeMap<ProbVar, Prob> = self
            .used_prob_clauses
            .iter()
            .map(|c| ((c.origin, c.head.clone()), c.prob.expect("probabilistic clause")))
            .collect();
        facts.into_iter().collect()
    }
}

/// Product of the probabilities of the distinct probabilistic facts a derivation used.
pub fn proof_probability(d: &Derivation) -> f64 {
    d.prob_facts().iter().map(|(_, p)| p.value()).product()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    pub limits: Limits,
    /// Stop at the first successful derivation.
    pub first_only: bool,
    pub record_steps: bool,
}

impl SolveOptions {
    pub fn with_limits(limits: Limits) -> Self {
        SolveOptions { limits, ..Default::default() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveOutcome {
    pub derivations: Vec<Derivation>,
    /// Some branch hit a step bound.
    pub truncated: bool,
    /// Branches abandoned because every goal atom was blocked.
    pub pruned: usize,
    pub total_steps: usize,
}

struct Node {
    goal: Goal,
    subst: Substitution,
    used: Vec<Clause>,
    steps: Vec<Step>,
    depth: usize,
    supply: VarSupply,
}

/// Depth-first, clause-order enumeration of the successful derivations of a query.
pub fn solve(q: &Atom, source: &impl ClauseSource, opts: &SolveOptions) -> Result<SolveOutcome, SolveError> {
    solve_goal(std::slice::from_ref(q), source, opts)
}

/// Like [`solve`] for a conjunction of atoms.
pub fn solve_goal(atoms: &[Atom], source: &impl ClauseSource, opts: &SolveOptions) -> Result<SolveOutcome, SolveError> {
    let query_vars: BTreeSet<_> = atoms.iter().flat_map(Atom::vars).cloned().collect();
    let mut out = SolveOutcome::default();
    let mut stack = vec![Node {
        goal: Goal::new(atoms.iter().cloned()),
        subst: Substitution::new(),
        used: Vec::new(),
        steps: Vec::new(),
        depth: 0,
        supply: VarSupply::above(atoms),
    }];

    while let Some(mut node) = stack.pop() {
        if node.goal.is_empty() {
            let mut used = BTreeSet::new();
            for c in &node.used {
                let c = node.subst.apply(c);
                if !c.is_ground() {
                    return Err(SolveError::NonGroundProbClause { clause: format!("{c:?}") });
                }
                used.insert(c);
            }
            out.derivations.push(Derivation {
                steps: node.steps,
                answer: node.subst.restrict(&query_vars),
                used_prob_clauses: used,
            });
            if opts.first_only {
                break;
            }
            continue;
        }
        if select_atom(&node.goal).is_none() {
            out.pruned += 1;
            continue;
        }
        if node.depth >= opts.limits.max_steps {
            out.truncated = true;
            continue;
        }
        let successors = sld_step(&node.goal, source, &mut node.supply);
        out.total_steps += successors.len();
        if out.total_steps > opts.limits.max_total_steps {
            out.truncated = true;
            break;
        }
        for r in successors.into_iter().rev() {
            let mut used = node.used.clone();
            if r.clause.is_probabilistic() {
                used.push(r.clause.clone());
            }
            let mut steps = Vec::new();
            if opts.record_steps {
                steps = node.steps.clone();
                steps.push(Step { selected: r.selected, clause: r.clause, mgu: r.mgu.clone() });
            }
            stack.push(Node {
                goal: r.goal,
                subst: node.subst.compose(&r.mgu),
                used,
                steps,
                depth: node.depth + 1,
                supply: node.supply.clone(),
            });
        }
    }
    Ok(out)
}

/// The successful derivation of highest probability (first found on ties).
pub fn most_likely_proof(q: &Atom, program: &Program, opts: &SolveOptions) -> Result<Option<Derivation>, SolveError> {
    let outcome = solve(q, program, opts)?;
    let mut best: Option<(f64, Derivation)> = None;
    for d in outcome.derivations {
        let p = proof_probability(&d);
        if best.as_ref().map_or(true, |(bp, _)| p > *bp) {
            best = Some((p, d));
        }
    }
    Ok(best.map(|(_, d)| d))
}
