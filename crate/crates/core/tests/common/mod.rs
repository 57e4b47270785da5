//! Helpers shared by the integration suites: corpus loading, a seeded random
//! program generator, a bottom-up least-model oracle, and the cross checks
//! between derivations, explanations and world enumeration.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use explog::grounder::ground_probabilistic_facts;
use explog::sld::{solve, Limits, SolveOptions};
use explog::subst::mgu;
use explog::worlds::{dependencies, success_probability, OracleOptions};
use explog::{generate_explanations, parse_program, union_program, Atom, ExplainOptions, PredKey, Program, Substitution, Term};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;

pub fn corpus_dir() -> PathBuf {
    // Resolves from this crate and from crates that include this module.
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/corpus")).to_path_buf()
}

/// Every well-formed corpus program with its file stem, sorted by name.
pub fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "pl"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let text = std::fs::read_to_string(&f).unwrap();
            let name = f.file_stem().unwrap().to_string_lossy().into_owned();
            let p = parse_program(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, p)
        })
        .collect()
}

pub fn load(name: &str) -> Program {
    let text = std::fs::read_to_string(corpus_dir().join(format!("{name}.pl"))).unwrap();
    parse_program(&text).unwrap()
}

/// A small range-restricted program: at most six predicates, ten clauses and
/// eight ground probabilistic facts. Derived predicates only call earlier ones,
/// except for at most one direct recursive call per body.
pub fn random_program(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let consts = &["a", "b", "c"][..rng.gen_range(2..=3)];
    let vars = ["X", "Y", "Z"];
    let mut out = String::new();
    let mut clauses = 0;
    let mut ground_facts = 0;
    // (name, arity, probabilistic)
    let mut preds: Vec<(String, usize, bool)> = Vec::new();

    let intensional = rng.gen_bool(0.3);
    let n_prob = if intensional { 1 } else { rng.gen_range(1..=2) };
    let ground_atom = |rng: &mut ChaCha8Rng, name: &str, arity: usize| {
        let args: Vec<&str> = (0..arity).map(|_| *consts.choose(rng).unwrap()).collect();
        fmt_atom(name, &args)
    };
    for i in 0..n_prob {
        let name = format!("f{i}");
        let arity = rng.gen_range(0..=2);
        let mut seen = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=3) {
            let atom = ground_atom(&mut rng, &name, arity);
            if seen.insert(atom.clone()) {
                out += &format!("{}::{atom}.\n", prob(&mut rng));
                clauses += 1;
                ground_facts += 1;
            }
        }
        preds.push((name, arity, true));
    }
    if intensional {
        let mut seen = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=2) {
            let atom = ground_atom(&mut rng, "dom", 1);
            if seen.insert(atom.clone()) {
                out += &format!("{atom}.\n");
                clauses += 1;
                ground_facts += 1;
            }
        }
        out += &format!("{}::g(X) :- dom(X).\n", prob(&mut rng));
        clauses += 1;
        preds.push(("dom".into(), 1, false));
        preds.push(("g".into(), 1, true));
    }
    assert!(ground_facts <= 8);

    let n_derived = rng.gen_range(1..=(6 - preds.len()).min(3));
    for i in 0..n_derived {
        let name = format!("d{i}");
        let arity = rng.gen_range(0..=2);
        let callable = preds.clone();
        preds.push((name.clone(), arity, false));
        let remaining = 10usize.saturating_sub(clauses);
        let reserve = n_derived - i - 1;
        let n_clauses = rng.gen_range(1..=2).min(remaining.saturating_sub(reserve).max(1));
        for k in 0..n_clauses {
            let mut body: Vec<String> = Vec::new();
            let mut body_vars: Vec<&str> = Vec::new();
            let call = |rng: &mut ChaCha8Rng, name: &str, arity: usize, body_vars: &mut Vec<&'static str>| {
                let args: Vec<&str> = (0..arity)
                    .map(|_| {
                        if rng.gen_bool(0.7) {
                            let v = *vars.choose(rng).unwrap();
                            body_vars.push(v);
                            v
                        } else {
                            *consts.choose(rng).unwrap()
                        }
                    })
                    .collect();
                fmt_atom(name, &args)
            };
            for _ in 0..rng.gen_range(1..=2) {
                let (n, a, _) = callable.choose(&mut rng).unwrap();
                body.push(call(&mut rng, n, *a, &mut body_vars));
            }
            if k > 0 && rng.gen_bool(0.4) {
                let pos = rng.gen_range(0..=body.len());
                let atom = call(&mut rng, &name, arity, &mut body_vars);
                body.insert(pos, atom);
            }
            let head_args: Vec<&str> = (0..arity)
                .map(|_| {
                    if !body_vars.is_empty() && rng.gen_bool(0.8) {
                        *body_vars.choose(&mut rng).unwrap()
                    } else {
                        *consts.choose(&mut rng).unwrap()
                    }
                })
                .collect();
            out += &format!("{} :- {}.\n", fmt_atom(&name, &head_args), body.join(", "));
            clauses += 1;
        }
    }

    let (qname, qarity, _) = preds.last().unwrap().clone();
    let args: Vec<&str> = (0..qarity)
        .map(|j| if j == 0 && rng.gen_bool(0.3) { "Q" } else { *consts.choose(&mut rng).unwrap() })
        .collect();
    out += &format!("query({}).\n", fmt_atom(&qname, &args));
    out
}

fn prob(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(1..=9) as f64 / 10.0
}

fn fmt_atom(name: &str, args: &[&str]) -> String {
    if args.is_empty() {
        name.to_string()
    } else {
        format!("{name}({})", args.join(","))
    }
}

/// P(q) by enumerating worlds and building each least model bottom-up,
/// without any resolution.
pub fn least_model_probability(q: &Atom, p: &Program) -> f64 {
    let table = ground_probabilistic_facts(p, Limits::default()).unwrap();
    let table = table.restricted_to(&dependencies(p, &q.key()));
    let facts: Vec<(Atom, f64)> = table.iter().map(|(k, e)| (k.atom.clone(), e.probability.value())).collect();
    assert!(facts.len() <= 20);
    let constants: Vec<Term> = explog::herbrand_constants(p)
        .unwrap_or_default()
        .into_iter()
        .map(|c| Term::Const(c))
        .collect();
    let rules: Vec<_> = p.clauses().iter().filter(|c| !c.is_probabilistic()).collect();
    let mut total = 0.0;
    for mask in 0u64..1 << facts.len() {
        let mut weight = 1.0;
        let mut model: HashSet<Atom> = HashSet::new();
        for (j, (a, pr)) in facts.iter().enumerate() {
            if mask >> j & 1 == 1 {
                weight *= pr;
                model.insert(a.clone());
            } else {
                weight *= 1.0 - pr;
            }
        }
        loop {
            let mut added = Vec::new();
            for r in &rules {
                let body: Vec<Atom> = r.body.iter().map(|b| b.atom.clone()).collect();
                for s in matches(&body, &model, Substitution::new()) {
                    for head in ground_over(&s.apply(&r.head), &constants) {
                        if !model.contains(&head) {
                            added.push(head);
                        }
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            model.extend(added);
        }
        if model.iter().any(|a| mgu(q, a).is_some()) {
            total += weight;
        }
    }
    total
}

fn matches(body: &[Atom], model: &HashSet<Atom>, s: Substitution) -> Vec<Substitution> {
    let Some((first, rest)) = body.split_first() else {
        return vec![s];
    };
    let goal = s.apply(first);
    let mut out = Vec::new();
    for fact in model {
        if let Some(theta) = mgu(&goal, fact) {
            out.extend(matches(rest, model, s.compose(&theta)));
        }
    }
    out
}

fn ground_over(a: &Atom, constants: &[Term]) -> Vec<Atom> {
    let Some(pos) = a.args.iter().position(|t| !t.is_ground()) else {
        return vec![a.clone()];
    };
    let v = a.args[pos].as_var().unwrap().clone();
    constants
        .iter()
        .flat_map(|c| ground_over(&Substitution::from_pairs([(v.clone(), c.clone())]).apply(a), constants))
        .collect()
}

/// Search bounds under which a generated program must terminate to be kept.
pub const SCREEN: Limits = Limits { max_steps: 64, max_total_steps: 20_000 };

/// The first `n` generated programs whose full search for every query
/// finishes within [`SCREEN`], with the number of seeds skipped.
pub fn random_corpus(n: usize) -> (Vec<(u64, String, Program)>, usize) {
    let mut kept = Vec::new();
    let mut skipped = 0;
    for seed in 0.. {
        if kept.len() == n {
            break;
        }
        let text = random_program(seed);
        let p = parse_program(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"));
        let finite = queries(&p).iter().all(|q| {
            solve(q, &p, &SolveOptions::with_limits(SCREEN)).map_or(true, |out| !out.truncated)
        });
        if finite {
            kept.push((seed, text, p));
        } else {
            skipped += 1;
        }
    }
    (kept, skipped)
}

pub fn oracle(q: &Atom, p: &Program) -> f64 {
    success_probability(q, p, &OracleOptions::default()).unwrap()
}

fn opts(visible: Option<BTreeSet<PredKey>>) -> ExplainOptions {
    ExplainOptions { visible, limits: Limits::default() }
}

/// Derivations and explanations match one to one, in order, with equal
/// answers, probabilistic facts and probabilities; each explanation proves its
/// query exactly once and its own probability equals P(E).
pub fn check_bijection(q: &Atom, p: &Program, visible: Option<BTreeSet<PredKey>>) -> Result<usize, String> {
    let sld = solve(q, p, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let expl = generate_explanations(q, p, &opts(visible)).map_err(|e| e.to_string())?;
    if sld.truncated || expl.truncated {
        return Err("search truncated".into());
    }
    if sld.derivations.len() != expl.explanations.len() {
        return Err(format!("{} derivations but {} explanations", sld.derivations.len(), expl.explanations.len()));
    }
    let qvars: Vec<_> = q.vars().cloned().collect();
    for (i, (d, g)) in sld.derivations.iter().zip(&expl.explanations).enumerate() {
        let e = &g.explanation;
        if d.answer != e.bindings().restrict(&qvars) {
            return Err(format!("#{i}: answers {:?} vs {:?}", d.answer, e.bindings().restrict(&qvars)));
        }
        if d.used_prob_clauses != e.used_prob_clauses() {
            return Err(format!("#{i}: used clauses differ"));
        }
        if d.prob_facts() != e.prob_facts() {
            return Err(format!("#{i}: probabilistic facts differ"));
        }
        let pd = explog::proof_probability(d);
        if (pd - g.probability).abs() > TOL {
            return Err(format!("#{i}: P(D) = {pd}, P(E) = {}", g.probability));
        }
        let standalone = e.to_program().map_err(|err| format!("#{i}: {err}"))?;
        let wrapped = e.query().wrapped();
        let inner = solve(&wrapped, &standalone, &SolveOptions::default()).map_err(|err| err.to_string())?;
        if inner.derivations.len() != 1 {
            return Err(format!("#{i}: {} internal proofs\n{}", inner.derivations.len(), e.render(false)));
        }
        if p.unsafe_predicates().is_empty() {
            let pe = oracle(&wrapped, &standalone);
            if (pe - g.probability).abs() > TOL {
                return Err(format!("#{i}: P(query) in E = {pe}, P(E) = {}", g.probability));
            }
        }
    }
    Ok(expl.explanations.len())
}

/// P(q) in the program equals P(query(q)) in the union of its explanations.
pub fn check_union(q: &Atom, p: &Program) -> Result<(f64, f64), String> {
    let expl = generate_explanations(q, p, &ExplainOptions::default()).map_err(|e| e.to_string())?;
    let es: Vec<_> = expl.explanations.into_iter().map(|g| g.explanation).collect();
    let union = union_program(&es).map_err(|e| e.to_string())?;
    let original = oracle(q, p);
    let unioned = if union.clauses().is_empty() { 0.0 } else { oracle(&q.wrapped(), &union) };
    if (original - unioned).abs() > TOL {
        return Err(format!("P(q) = {original}, union gives {unioned}"));
    }
    Ok((original, unioned))
}

pub fn sorted_probabilities(q: &Atom, p: &Program, visible: Option<BTreeSet<PredKey>>) -> Result<Vec<f64>, String> {
    let out = generate_explanations(q, p, &opts(visible)).map_err(|e| e.to_string())?;
    let mut probs: Vec<f64> = out.explanations.iter().map(|g| g.probability).collect();
    probs.sort_by(f64::total_cmp);
    Ok(probs)
}

/// Explanation probabilities do not depend on which predicates are visible.
pub fn check_visibility(q: &Atom, p: &Program) -> Result<(), String> {
    let derived: Vec<PredKey> = p.derived_predicates().iter().filter(|k| !k.query).cloned().collect();
    let mut choices = vec![BTreeSet::new(), derived.iter().cloned().collect()];
    choices.extend(derived.iter().map(|k| BTreeSet::from([k.clone()])));
    let base = sorted_probabilities(q, p, Some(BTreeSet::new()))?;
    for vis in choices {
        let probs = sorted_probabilities(q, p, Some(vis.clone()))?;
        let same = probs.len() == base.len() && probs.iter().zip(&base).all(|(a, b)| (a - b).abs() <= TOL);
        if !same {
            return Err(format!("visible {vis:?}: {probs:?} vs {base:?}"));
        }
    }
    Ok(())
}

pub fn queries(p: &Program) -> Vec<Atom> {
    p.implied_queries()
}
