//! The `explog` command: explanations for every query of a program file.

use std::fmt::Display;
use std::io::{self, Write};
use std::path::PathBuf;

use explog::grounder::{ground_probabilistic_facts, GroundError};
use explog::worlds::{success_probability, OracleOptions, Parallelism, WorldError};
use explog::{
    format_program, generate_explanations, parse_program, union_program, Atom, ExplainError, ExplainOptions, Limits,
    Program,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum SortOrder {
    #[default]
    Discovery,
    #[value(name = "prob")]
    Probability,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub out_dir: PathBuf,
    pub max_steps: usize,
    pub max_total_steps: usize,
    pub world_cap: usize,
    pub verify: bool,
    pub oracle_only: bool,
    pub sort: SortOrder,
}

impl RunConfig {
    pub fn new(input_path: impl Into<PathBuf>) -> Self {
        let limits = Limits::default();
        RunConfig {
            input_path: input_path.into(),
            out_dir: "explanations".into(),
            max_steps: limits.max_steps,
            max_total_steps: limits.max_total_steps,
            world_cap: explog::worlds::DEFAULT_WORLD_CAP,
            verify: false,
            oracle_only: false,
            sort: SortOrder::Discovery,
        }
    }

    fn limits(&self) -> Limits {
        Limits { max_steps: self.max_steps, max_total_steps: self.max_total_steps }
    }

    fn oracle(&self) -> OracleOptions {
        OracleOptions { cap: self.world_cap, limits: self.limits(), parallelism: Parallelism::Parallel }
    }
}

/// A failure that ends the run, with its diagnostic class and exit code.
#[derive(Debug)]
struct Failure {
    class: &'static str,
    detail: String,
    code: i32,
}

impl Failure {
    fn new(class: &'static str, detail: impl Display, code: i32) -> Self {
        Failure { class, detail: detail.to_string(), code }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new("io", e, EXIT_INPUT)
    }
}

impl From<GroundError> for Failure {
    fn from(e: GroundError) -> Self {
        let code = if e == GroundError::LimitExceeded { EXIT_RESOURCE } else { EXIT_INPUT };
        Failure::new("ground", e, code)
    }
}

impl From<WorldError> for Failure {
    fn from(e: WorldError) -> Self {
        match e {
            WorldError::Ground(g) => g.into(),
            WorldError::Solve(s) => Failure::new("ground", s, EXIT_INPUT),
            WorldError::UnsafeUnsupported => Failure::new("unsupported", e, EXIT_RESOURCE),
            WorldError::TooManyFacts { .. } | WorldError::LimitExceeded => Failure::new("resource", e, EXIT_RESOURCE),
        }
    }
}

impl From<ExplainError> for Failure {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::UnknownPredicate { .. } | ExplainError::Load(_) => Failure::new("load", e, EXIT_INPUT),
            ExplainError::NonGroundProbClause { .. } => Failure::new("ground", e, EXIT_INPUT),
            ExplainError::NotSuccessful | ExplainError::ProbabilityMismatch { .. } => {
                Failure::new("internal", e, EXIT_INPUT)
            }
        }
    }
}

/// Probabilities as printed: rounded to 12 decimals, shortest form.
pub fn format_probability(p: f64) -> String {
    let r = (p * 1e12).round() / 1e12;
    format!("{}", r + 0.0)
}

/// Runs the tool. Program output goes to `out`, diagnostics to `err`.
pub fn run(cfg: &RunConfig, out: &mut impl Write, err: &mut impl Write) -> i32 {
    match run_inner(cfg, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}: {}", f.class, f.detail);
            f.code
        }
    }
}

fn run_inner(cfg: &RunConfig, out: &mut impl Write, err: &mut impl Write) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(&cfg.input_path)
        .map_err(|e| Failure::new("io", format!("{}: {e}", cfg.input_path.display()), EXIT_INPUT))?;
    let program = parse_program(&text).map_err(|e| Failure::new(e.class(), e, EXIT_INPUT))?;
    ground_probabilistic_facts(&program, cfg.limits())?;
    if program.queries().is_empty() {
        writeln!(err, "warning: no queries in {}", cfg.input_path.display())?;
    }

    if cfg.oracle_only {
        for q in program.queries() {
            let p = success_probability(q, &program, &cfg.oracle())?;
            writeln!(out, "P({q}) = {}", format_probability(p))?;
        }
        return Ok(EXIT_OK);
    }

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut code = EXIT_OK;
    for (i, q) in program.queries().iter().enumerate() {
        if !explain_query(cfg, &program, q, i + 1, out, err)? {
            code = EXIT_VERIFY;
        }
    }
    writeln!(out, "Output files can be found in folder \"{}\".", cfg.out_dir.display())?;
    Ok(code)
}

/// Prints and writes the explanations of one query. False when verification failed.
fn explain_query(
    cfg: &RunConfig,
    program: &Program,
    q: &Atom,
    index: usize,
    out: &mut impl Write,
    err: &mut impl Write,
) -> Result<bool, Failure> {
    let opts = ExplainOptions { visible: None, limits: cfg.limits() };
    let outcome = generate_explanations(q, program, &opts)?;
    if outcome.truncated {
        let msg = format!("search for {q} truncated by step limits; explanations may be missing");
        if cfg.verify {
            return Err(Failure::new("resource", msg, EXIT_RESOURCE));
        }
        writeln!(err, "warning: {msg}")?;
    }
    let mut generated = outcome.explanations;
    if cfg.sort == SortOrder::Probability {
        generated.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    }

    for (k, g) in generated.iter().enumerate() {
        let block = format_program(&g.explanation.to_program()?);
        let comment = format!("% P(E) = {}", format_probability(g.probability));
        write!(out, "{block}\n{comment}\n\n")?;
        let path = cfg.out_dir.join(format!("expl_{index}_{}.pl", k + 1));
        std::fs::write(path, format!("{block}{comment}\n"))?;
    }

    let explanations: Vec<_> = generated.into_iter().map(|g| g.explanation).collect();
    let union = union_program(&explanations)?;
    std::fs::write(cfg.out_dir.join(format!("union_{index}.pl")), format_program(&union))?;

    if !cfg.verify {
        return Ok(true);
    }
    let original = success_probability(q, program, &cfg.oracle())?;
    let unioned = if union.clauses().is_empty() { 0.0 } else { success_probability(&q.wrapped(), &union, &cfg.oracle())? };
    let pass = (original - unioned).abs() <= 1e-9;
    writeln!(
        out,
        "% verify {q}: {} {} {} {}",
        format_probability(original),
        if pass { "=" } else { "!=" },
        format_probability(unioned),
        if pass { "PASS" } else { "FAIL" }
    )?;
    Ok(pass)
}
