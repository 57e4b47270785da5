//! Exact inference by enumerating total choices.
//!
//! World `k` chooses fact `j` (in table order) when bit `j` of `k` is set.
//! Sums are taken over fixed-size chunks of consecutive worlds and the chunk
//! sums are combined by a pairwise tree, so the result does not depend on
//! whether chunks ran sequentially or on the rayon pool.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::grounder::{ground_probabilistic_facts, GroundError, GroundFactTable};
use crate::program::Program;
use crate::sld::{solve, ClauseSource, Limits, SolveError, SolveOptions};
use crate::term::{Atom, Clause, Origin, PredKey};

pub const DEFAULT_WORLD_CAP: usize = 24;
const CHUNK: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("too many ground probabilistic facts ({count}, cap {cap})")]
    TooManyFacts { count: usize, cap: usize },
    #[error("programs with unsafe predicates are not supported by world enumeration")]
    UnsafeUnsupported,
    #[error("search limit exceeded while deciding a world")]
    LimitExceeded,
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Uses rayon when the `parallel` feature is on, sequential otherwise.
    #[default]
    Parallel,
}

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub cap: usize,
    pub limits: Limits,
    pub parallelism: Parallelism,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { cap: DEFAULT_WORLD_CAP, limits: Limits::default(), parallelism: Parallelism::default() }
    }
}

/// The set of probabilistic facts chosen to be true.
pub type TotalChoice = BTreeSet<Atom>;

/// P(L): chosen facts contribute p, the others 1 - p.
pub fn world_probability(chosen: &TotalChoice, table: &GroundFactTable) -> f64 {
    table
        .iter()
        .map(|(k, e)| {
            let p = e.probability.value();
            if chosen.contains(&k.atom) {
                p
            } else {
                1.0 - p
            }
        })
        .product()
}

fn mask_probability(mask: u64, probs: &[f64]) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(j, &p)| if mask >> j & 1 == 1 { p } else { 1.0 - p })
        .product()
}

fn check_cap(table: &GroundFactTable, cap: usize) -> Result<(), WorldError> {
    if table.len() > cap || table.len() >= 64 {
        return Err(WorldError::TooManyFacts { count: table.len(), cap });
    }
    Ok(())
}

/// All 2^n total choices with their probabilities, by binary counting.
pub fn enumerate_worlds(
    table: &GroundFactTable,
    cap: usize,
) -> Result<impl Iterator<Item = (TotalChoice, f64)> + '_, WorldError> {
    check_cap(table, cap)?;
    let atoms: Vec<&Atom> = table.atoms().collect();
    let probs: Vec<f64> = table.iter().map(|(_, e)| e.probability.value()).collect();
    Ok((0..1u64 << atoms.len()).map(move |mask| {
        let chosen = atoms.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, a)| (*a).clone()).collect();
        (chosen, mask_probability(mask, &probs))
    }))
}

/// The derived clauses of a program plus one fact per chosen probabilistic atom.
struct WorldView<'a> {
    program: &'a Program,
    facts: &'a Facts,
    mask: u64,
}

struct Facts {
    clauses: Vec<Clause>,
    by_pred: HashMap<PredKey, Vec<usize>>,
}

impl Facts {
    fn new(atoms: impl IntoIterator<Item = Atom>) -> Facts {
        let clauses: Vec<Clause> = atoms.into_iter().map(|a| Clause::derived(a, vec![], Origin::Query)).collect();
        let mut by_pred: HashMap<PredKey, Vec<usize>> = HashMap::new();
        for (j, c) in clauses.iter().enumerate() {
            by_pred.entry(c.head.key()).or_default().push(j);
        }
        Facts { clauses, by_pred }
    }
}

impl ClauseSource for WorldView<'_> {
    fn candidates<'a>(&'a self, atom: &Atom) -> Vec<&'a Clause> {
        let key = atom.key();
        if self.program.is_probabilistic(&key) {
            let Some(ids) = self.facts.by_pred.get(&key) else {
                return Vec::new();
            };
            ids.iter().filter(|&&j| self.mask >> j & 1 == 1).map(|&j| &self.facts.clauses[j]).collect()
        } else {
            self.program.clauses_for(&key).collect()
        }
    }
}

fn provable(q: &Atom, view: &WorldView<'_>, limits: Limits) -> Result<bool, WorldError> {
    let opts = SolveOptions { limits, first_only: true, record_steps: false };
    let out = solve(q, view, &opts)?;
    if out.derivations.is_empty() && out.truncated {
        return Err(WorldError::LimitExceeded);
    }
    Ok(!out.derivations.is_empty())
}

/// Whether `q` has a successful derivation from the chosen facts and the derived clauses.
pub fn query_true_in_world(q: &Atom, chosen: &TotalChoice, p: &Program, limits: Limits) -> Result<bool, WorldError> {
    let facts = Facts::new(chosen.iter().cloned());
    let view = WorldView { program: p, facts: &facts, mask: u64::MAX };
    provable(q, &view, limits)
}

/// Predicates reachable from `pred` through clause bodies, `pred` included.
pub fn dependencies(p: &Program, pred: &PredKey) -> BTreeSet<PredKey> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![pred.clone()];
    while let Some(k) = stack.pop() {
        if seen.insert(k.clone()) {
            for c in p.clauses_for(&k) {
                stack.extend(c.body.iter().map(|b| b.atom.key()));
            }
        }
    }
    seen
}

/// P(q): the total probability of the worlds in which `q` is provable.
///
/// Only facts whose predicate `q` depends on are enumerated; the others sum
/// out to one. The cap applies to the facts that remain.
pub fn success_probability(q: &Atom, p: &Program, opts: &OracleOptions) -> Result<f64, WorldError> {
    if !p.unsafe_predicates().is_empty() {
        return Err(WorldError::UnsafeUnsupported);
    }
    let table = ground_probabilistic_facts(p, opts.limits)?;
    let table = table.restricted_to(&dependencies(p, &q.key()));
    check_cap(&table, opts.cap)?;
    let facts = Facts::new(table.atoms().cloned());
    let probs: Vec<f64> = table.iter().map(|(_, e)| e.probability.value()).collect();
    let worlds = 1u64 << probs.len();
    let chunks = worlds.div_ceil(CHUNK);

    let chunk_sum = |c: u64| -> Result<f64, WorldError> {
        let mut sum = 0.0;
        for mask in c * CHUNK..((c + 1) * CHUNK).min(worlds) {
            let view = WorldView { program: p, facts: &facts, mask };
            if provable(q, &view, opts.limits)? {
                sum += mask_probability(mask, &probs);
            }
        }
        Ok(sum)
    };
    let sums = map_chunks(chunks, opts.parallelism, chunk_sum)?;
    Ok(pairwise_sum(&sums))
}

#[cfg(feature = "parallel")]
fn map_chunks<F>(chunks: u64, par: Parallelism, f: F) -> Result<Vec<f64>, WorldError>
where
    F: Fn(u64) -> Result<f64, WorldError> + Sync + Send,
{
    use rayon::prelude::*;
    match par {
        Parallelism::Parallel => (0..chunks).into_par_iter().map(f).collect(),
        Parallelism::Sequential => (0..chunks).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<F>(chunks: u64, _par: Parallelism, f: F) -> Result<Vec<f64>, WorldError>
where
    F: Fn(u64) -> Result<f64, WorldError>,
{
    (0..chunks).map(f).collect()
}

/// Sum in a fixed balanced-tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Convenience for the common case: ground, then sum.
pub fn success_probability_default(q: &Atom, p: &Program) -> Result<f64, WorldError> {
    success_probability(q, p, &OracleOptions::default())
}
