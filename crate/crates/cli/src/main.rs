use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use explog_cli::{run, RunConfig, SortOrder};

/// Generate explanations, with their probabilities, for the queries of a
/// probabilistic logic program.
#[derive(Parser, Debug)]
#[command(name = "explog", version)]
struct Args {
    /// Program file.
    file: PathBuf,
    /// Directory for the explanation files.
    #[arg(long, default_value = "explanations")]
    out_dir: PathBuf,
    /// Resolution steps allowed in one derivation.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_steps: u64,
    /// Resolution steps allowed per query.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_total_steps: u64,
    /// Largest number of probabilistic facts to enumerate worlds over.
    #[arg(long, default_value_t = 24, value_parser = clap::value_parser!(u64).range(1..=63))]
    world_cap: u64,
    /// Check each query's probability against its union of explanations.
    #[arg(long)]
    verify: bool,
    /// Only print query probabilities computed by world enumeration.
    #[arg(long)]
    oracle_only: bool,
    /// Order of the printed explanations.
    #[arg(long, value_enum, default_value_t = SortOrder::Discovery)]
    sort: SortOrder,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = RunConfig {
        input_path: args.file,
        out_dir: args.out_dir,
        max_steps: args.max_steps as usize,
        max_total_steps: args.max_total_steps as usize,
        world_cap: args.world_cap as usize,
        verify: args.verify,
        oracle_only: args.oracle_only,
        sort: args.sort,
    };
    let code = run(&cfg, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    ExitCode::from(code as u8)
}
