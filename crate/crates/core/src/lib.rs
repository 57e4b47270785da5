//! Probabilistic logic programs under the distribution semantics: parsing,
//! grounding, SLD resolution, possible-world inference, and generation of
//! explanations by unfolding.

pub mod explainer;
pub mod grounder;
pub mod parser;
pub mod program;
pub mod sld;
pub mod subst;
pub mod term;
pub mod worlds;

pub use parser::{format_clause, format_clauses, format_program, parse_atom, parse_program, FormatOptions, ParseError, SourceError};
pub use program::{LoadError, Program};
pub use subst::{canonical_atom, is_variant, mgu, rename_apart, Substitution, VarSupply};
pub use term::{Atom, BodyAtom, Clause, Origin, PredKey, Prob, Sym, Term, Var};
pub use explainer::{
    explanation_probability, generate_explanations, initial_explanation, union_program, ExplainError, ExplainOptions,
    ExplainOutcome, Explainer, Explanation, Generated, RenamingState, Status, UnfoldRule,
};
pub use grounder::{ground_probabilistic_facts, herbrand_constants, GroundError, GroundFactTable};
pub use sld::{most_likely_proof, proof_probability, solve, Derivation, Limits, SolveError, SolveOptions, SolveOutcome};
pub use worlds::{enumerate_worlds, success_probability, world_probability, OracleOptions, Parallelism, TotalChoice, WorldError};
