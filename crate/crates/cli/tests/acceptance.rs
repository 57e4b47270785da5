//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

use common::*;
use explog::grounder::{ground_probabilistic_facts, GroundError};
use explog::sld::{solve, SolveOptions};
use explog::worlds::enumerate_worlds;
use explog::{
    format_program, generate_explanations, most_likely_proof, parse_program, proof_probability, union_program,
    world_probability, Atom, ExplainOptions, Limits, PredKey, Program,
};
use explog_cli::{format_probability as fp, run, RunConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn atoms(list: &[&str]) -> BTreeSet<Atom> {
    list.iter().map(|a| Atom::parse(a)).collect()
}

fn worlds_table() -> Outcome {
    let p = load("smokes");
    let table = ground_probabilistic_facts(&p, Limits::default()).map_err(|e| e.to_string())?;
    ensure(table.len() == 3, format!("{} ground facts", table.len()))?;
    let rows: [(&[&str], f64); 8] = [
        (&["stress(ann)", "stress(bob)", "influences(bob,carl)"], 0.192),
        (&["stress(ann)", "stress(bob)"], 0.448),
        (&["stress(ann)", "influences(bob,carl)"], 0.048),
        (&["stress(ann)"], 0.112),
        (&["stress(bob)", "influences(bob,carl)"], 0.048),
        (&["stress(bob)"], 0.112),
        (&["influences(bob,carl)"], 0.012),
        (&[], 0.028),
    ];
    let worlds: Vec<_> = enumerate_worlds(&table, 24).map_err(|e| e.to_string())?.collect();
    ensure(worlds.len() == 8, format!("{} worlds", worlds.len()))?;
    for (set, expected) in rows {
        let set = atoms(set);
        let found = worlds.iter().find(|(w, _)| *w == set).ok_or(format!("missing world {set:?}"))?;
        ensure(close(found.1, expected), format!("{set:?}: {} != {expected}", found.1))?;
        ensure(close(world_probability(&set, &table), expected), "world_probability disagrees")?;
    }
    let total: f64 = worlds.iter().map(|w| w.1).sum();
    ensure(close(total, 1.0), format!("sum {total}"))?;
    Ok("3 facts, 8 worlds match row for row, sum 1".into())
}

fn success_probability_ex() -> Outcome {
    let p = oracle(&Atom::parse("smokes(carl)"), &load("smokes"));
    ensure(close(p, 0.24), format!("P = {p}"))?;
    Ok(format!("P(smokes(carl)) = {}", fp(p)))
}

fn proof_probability_ex() -> Outcome {
    let out = solve(&Atom::parse("smokes(carl)"), &load("smokes"), &SolveOptions::default()).map_err(|e| e.to_string())?;
    ensure(out.derivations.len() == 1, format!("{} derivations", out.derivations.len()))?;
    let d = &out.derivations[0];
    let used: BTreeSet<String> = d.used_prob_clauses.iter().map(|c| format!("{c:?}")).collect();
    let expected: BTreeSet<String> =
        ["0.3::influences(bob,carl).", "0.8::stress(bob) :- person(bob)."].map(String::from).into();
    ensure(used == expected, format!("prob_facts {used:?}"))?;
    let pd = proof_probability(d);
    ensure(close(pd, 0.24), format!("P(D) = {pd}"))?;
    Ok(format!("one derivation, P(D) = {}", fp(pd)))
}

fn duplicate_in_proof() -> Outcome {
    let opts = SolveOptions { record_steps: true, ..Default::default() };
    let out = solve(&Atom::parse("both"), &load("person_twice"), &opts).map_err(|e| e.to_string())?;
    let d = out.derivations.first().ok_or("no derivation")?;
    let uses = d.steps.iter().filter(|s| s.selected == Atom::parse("person(ann)")).count();
    ensure(uses == 2, format!("person(ann) used {uses} times"))?;
    let pd = proof_probability(d);
    ensure(close(pd, 0.4), format!("P(D) = {pd}"))?;
    Ok(format!("fact used twice, P(D) = {}", fp(pd)))
}

fn viterbi_vs_mpe() -> Outcome {
    let p = load("win");
    let win = Atom::parse("win");
    let best = most_likely_proof(&win, &p, &SolveOptions::default()).map_err(|e| e.to_string())?.ok_or("no proof")?;
    let vp = proof_probability(&best);
    ensure(close(vp, 0.36), format!("Viterbi {vp}"))?;
    let table = ground_probabilistic_facts(&p, Limits::default()).map_err(|e| e.to_string())?;
    let mpe = world_probability(&atoms(&["green", "blue", "yellow"]), &table);
    ensure(close(mpe, 0.162), format!("world {mpe}"))?;
    let pw = oracle(&win, &p);
    ensure(close(pw, 0.552) && close(pw, 0.36 + 0.30 - 0.108), format!("P(win) = {pw}"))?;
    Ok(format!("Viterbi {}, world {}, P(win) = {}", fp(vp), fp(mpe), fp(pw)))
}

fn explanation_texts(p: &Program, q: &str, visible: Option<BTreeSet<PredKey>>) -> Result<Vec<String>, String> {
    let opts = ExplainOptions { visible, limits: Limits::default() };
    let out = generate_explanations(&Atom::parse(q), p, &opts).map_err(|e| e.to_string())?;
    out.explanations
        .iter()
        .map(|g| g.explanation.to_program().map(|prog| format_program(&prog)).map_err(|e| e.to_string()))
        .collect()
}

fn visible_unfolding() -> Outcome {
    let p = load("visible_unf");
    let shown = explanation_texts(&p, "p(a)", None)?;
    ensure(shown == ["r_1(a,b).\nquery(p(a)) :- r_1(a,b).\n"], format!("visible: {shown:?}"))?;
    let hidden = explanation_texts(&p, "p(a)", Some(BTreeSet::new()))?;
    ensure(hidden == ["query(p(a)) :- true.\n"], format!("hidden: {hidden:?}"))?;
    Ok("{r_1(a,b), query(p(a)) :- r_1(a,b)} and {query(p(a))}".into())
}

fn duplicate_guard() -> Outcome {
    let dup = load("defects/duplicate");
    match ground_probabilistic_facts(&dup, Limits::default()) {
        Err(GroundError::DuplicateFact { .. }) => {}
        other => return Err(format!("textual duplicate gave {other:?}")),
    }
    let p = load("dup_intensional");
    let table = ground_probabilistic_facts(&p, Limits::default()).map_err(|e| e.to_string())?;
    let entries: Vec<(Atom, f64)> = table.iter().map(|(k, e)| (k.atom.clone(), e.probability.value())).collect();
    ensure(entries == [(Atom::parse("p(a)"), 0.8)], format!("table {entries:?}"))?;
    let pa = oracle(&Atom::parse("p(a)"), &p);
    ensure(close(pa, 0.8), format!("P(p(a)) = {pa}"))?;
    Ok(format!("DuplicateFact raised; intensional table {{p(a)=0.8}}, P = {}", fp(pa)))
}

fn shared_fact_regression() -> Outcome {
    let p = load("abc");
    let q = Atom::parse("p");
    let orig = oracle(&q, &p);
    ensure(close(orig, 0.644), format!("P(p) = {orig}"))?;
    let out = generate_explanations(&q, &p, &ExplainOptions::default()).map_err(|e| e.to_string())?;
    let got: Vec<(BTreeSet<Atom>, f64)> = out
        .explanations
        .iter()
        .map(|g| (g.explanation.prob_facts().into_iter().map(|((_, a), _)| a).collect(), g.probability))
        .collect();
    ensure(got.len() == 2, format!("{} explanations", got.len()))?;
    ensure(got[0].0 == atoms(&["a", "b"]) && close(got[0].1, 0.6 * 0.7), format!("first {:?}", got[0]))?;
    ensure(got[1].0 == atoms(&["b", "c"]) && close(got[1].1, 0.7 * 0.8), format!("second {:?}", got[1]))?;
    let es: Vec<_> = out.explanations.into_iter().map(|g| g.explanation).collect();
    let union = union_program(&es).map_err(|e| e.to_string())?;
    let pu = oracle(&q.wrapped(), &union);
    ensure(close(pu, 0.644), format!("union {pu}"))?;
    // Unfolding b into the first rule as an independent choice changes the meaning.
    let naive = parse_program("0.6::a. 0.7::b. 0.8::c. 0.7::pp. p :- a, pp. p :- b, c.").unwrap();
    let pn = oracle(&q, &naive);
    ensure(close(pn, 0.7448), format!("naive unfolding {pn}"))?;
    Ok(format!("explanations 0.42 and 0.56, union {}, naive unfolding would give {}", fp(pu), fp(pn)))
}

fn full_pipeline() -> Outcome {
    let p = load("smokes_paper");
    let q = Atom::parse("smokes(carl)");
    let out = generate_explanations(&q, &p, &ExplainOptions::default()).map_err(|e| e.to_string())?;
    let probs: Vec<f64> = out.explanations.iter().map(|g| g.probability).collect();
    ensure(probs.len() == 2 && close(probs[0], 0.24) && close(probs[1], 0.024), format!("{probs:?}"))?;
    let (orig, union) = check_union(&q, &p)?;
    ensure(close(union, 0.2448), format!("union {union}"))?;
    Ok(format!("P(E) = {probs:?}, union {} = original {}", fp(union), fp(orig)))
}

fn all_programs() -> Vec<(String, Program)> {
    let mut all = corpus();
    all.extend(common::random_corpus(250).0.into_iter().map(|(seed, _, p)| (format!("seed {seed}"), p)));
    all
}

fn bijection(all: &[(String, Program)]) -> Outcome {
    let mut pairs = 0;
    for (name, p) in all {
        for q in queries(p) {
            pairs += check_bijection(&q, p, None).map_err(|e| format!("{name} {q}: {e}"))?;
            let every = Some(p.derived_predicates().clone());
            check_bijection(&q, p, every).map_err(|e| format!("{name} {q} (all visible): {e}"))?;
        }
    }
    Ok(format!("{} programs, {pairs} derivation/explanation pairs", all.len()))
}

fn union_theorem(all: &[(String, Program)]) -> Outcome {
    let mut checked = 0;
    for (name, p) in all {
        for q in queries(p) {
            check_union(&q, p).map_err(|e| format!("{name} {q}: {e}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} queries"))
}

fn visibility(all: &[(String, Program)]) -> Outcome {
    for (name, p) in all {
        for q in queries(p) {
            check_visibility(&q, p).map_err(|e| format!("{name} {q}: {e}"))?;
        }
    }
    Ok(format!("{} programs", all.len()))
}

fn termination() -> Outcome {
    let p = load("path");
    let q = Atom::parse("path(a,d)");
    let sld = solve(&q, &p, &SolveOptions::default()).map_err(|e| e.to_string())?;
    ensure(!sld.truncated, "solve truncated")?;
    let out = generate_explanations(&q, &p, &ExplainOptions::default()).map_err(|e| e.to_string())?;
    ensure(!out.truncated, "explanation search truncated")?;
    let (orig, union) = check_union(&q, &p)?;
    let bottom_up = least_model_probability(&q, &p);
    ensure(close(orig, bottom_up), format!("oracles {orig} vs {bottom_up}"))?;
    Ok(format!("{} explanations, {} pruned branches, union {} = {}", out.explanations.len(), out.pruned, fp(union), fp(orig)))
}

fn round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (name, _) in corpus() {
        let mut cfg = RunConfig::new(corpus_dir().join(format!("{name}.pl")));
        cfg.out_dir = dir.path().join(&name);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(&cfg, &mut out, &mut err);
        ensure(code == 0, format!("{name}: exit {code}: {}", String::from_utf8_lossy(&err)))?;
        for entry in std::fs::read_dir(&cfg.out_dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            let fname = path.file_name().unwrap().to_string_lossy().into_owned();
            if !fname.starts_with("expl_") {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
            let printed: f64 = text
                .lines()
                .find_map(|l| l.strip_prefix("% P(E) = "))
                .ok_or(format!("{fname}: no probability comment"))?
                .parse()
                .map_err(|e| format!("{fname}: {e}"))?;
            let prog = parse_program(&text).map_err(|e| format!("{name}/{fname}: {e}"))?;
            let qs = prog.implied_queries();
            ensure(qs.len() == 1, format!("{name}/{fname}: {} queries", qs.len()))?;
            let pe = oracle(&qs[0], &prog);
            ensure((pe - printed).abs() <= 1e-9, format!("{name}/{fname}: {pe} vs printed {printed}"))?;
            files += 1;
        }
    }
    ensure(files > 0, "no explanation files")?;
    Ok(format!("{files} files re-parsed and evaluated"))
}

fn main() {
    let all = all_programs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("worlds table", Box::new(worlds_table)),
        ("success probability", Box::new(success_probability_ex)),
        ("proof probability", Box::new(proof_probability_ex)),
        ("repeated fact in a proof", Box::new(duplicate_in_proof)),
        ("Viterbi proof vs most likely world", Box::new(viterbi_vs_mpe)),
        ("visible unfolding", Box::new(visible_unfolding)),
        ("duplicate-fact guard", Box::new(duplicate_guard)),
        ("shared-fact unfolding", Box::new(shared_fact_regression)),
        ("full pipeline", Box::new(full_pipeline)),
        ("derivation/explanation bijection", Box::new(|| bijection(&all))),
        ("union preserves query probability", Box::new(|| union_theorem(&all))),
        ("visibility invariance", Box::new(|| visibility(&all))),
        ("termination on cyclic path", Box::new(termination)),
        ("explanation file round trip", Box::new(round_trip)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
