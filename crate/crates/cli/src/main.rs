//! `failprove`: prove that a query to a definite program fails by finding a
//! pre-interpretation under which it has no answer.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failprove::corpus::{self, CORPUS};
use failprove::eval::{evaluate_with_tables, format_tables, Policy};
use failprove::oracle::{exhaustive_verdict, DEFAULT_CAP};
use failprove::parser::parse_program;
use failprove::preinterp::CellSpace;
use failprove::report::{
    aggregate, format_aggregates, model_lines, problem_facts, run_bench, RunRecord,
};
use failprove::search::{prove, Outcome, SearchConfig, Strategy, DEFAULT_BUDGET};
use failprove::syntax::Program;
use failprove::transform::{compile, instrument, FaMode};

const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "failprove",
    version,
    about = "Prove failure of logic program queries with abstract domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a pre-interpretation that makes the query fail.
    Prove(ProveArgs),
    /// Evaluate the query under every pre-interpretation of one size.
    Oracle(OracleArgs),
    /// Run corpus problems over several seeds and summarize backtracks.
    Bench(BenchArgs),
    /// Print the structural facts of every corpus problem.
    Facts,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct ProveArgs {
    /// Corpus problem name or path to a program file.
    problem: String,
    #[arg(long)]
    domain_size: usize,
    /// Try larger domains up to this size when a size is exhausted.
    #[arg(long)]
    max_domain_size: Option<usize>,
    #[arg(long, default_value = "best-cs")]
    strategy: Strategy,
    /// Overrides the strategy's failure analysis.
    #[arg(long)]
    fa: Option<FaMode>,
    /// Overrides the strategy's answer policy.
    #[arg(long)]
    policy: Option<Policy>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Print the compiled and instrumented program before searching.
    #[arg(long)]
    dump_flat: bool,
    /// Print the final answer tables of the last evaluation.
    #[arg(long)]
    trace_tables: bool,
}

#[derive(Args)]
struct OracleArgs {
    problem: String,
    #[arg(long)]
    domain_size: usize,
    /// Refuse to enumerate more pre-interpretations than this.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Run every corpus problem.
    #[arg(long, conflicts_with = "problem")]
    all: bool,
    #[arg(long, required_unless_present = "all")]
    problem: Vec<String>,
    /// Number of seeds, `0..K`.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_values = ["single-cs", "best-cs"])]
    strategy: Vec<Strategy>,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Prove(args) => run_prove(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Bench(args) => run_bench_cmd(args),
        Command::Facts => run_facts(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Resolves a corpus name or a file path to a program and a label.
fn load_problem(arg: &str) -> Result<(String, Program), String> {
    if let Ok(e) = corpus::entry(arg) {
        return e
            .program()
            .map(|p| (e.name.to_string(), p))
            .map_err(|e| e.to_string());
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(format!(
            "`{arg}` is neither a corpus problem nor a file (problems: {})",
            corpus::names().collect::<Vec<_>>().join(", ")
        ));
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{arg}: {e}"))?;
    let program = parse_program(&text).map_err(|e| format!("{arg}: {e}"))?;
    let label = path
        .file_stem()
        .map_or(arg.into(), |s| s.to_string_lossy().into_owned());
    Ok((label, program))
}

fn run_prove(args: ProveArgs) -> Result<u8, String> {
    let (label, program) = load_problem(&args.problem)?;
    let max_m = args.max_domain_size.unwrap_or(args.domain_size);
    if args.domain_size == 0 || max_m < args.domain_size {
        return Err("domain sizes must satisfy 1 <= --domain-size <= --max-domain-size".into());
    }
    if max_m > 64 {
        return Err("domain sizes above 64 are not supported".into());
    }
    let preset = SearchConfig::preset(args.strategy);
    let config = SearchConfig {
        fa: args.fa.unwrap_or(preset.fa),
        policy: args.policy.unwrap_or(preset.policy),
        seed: args.seed,
        budget: args.budget,
        ..preset
    };
    let flat = compile(&program).map_err(|e| e.to_string())?;
    if args.dump_flat {
        println!("% compiled\n{flat}");
        println!(
            "% instrumented ({})\n{}",
            config.fa,
            instrument(flat.clone(), config.fa)
        );
    }
    let start = Instant::now();
    let report = prove(&flat, args.domain_size, max_m, &config);
    let elapsed = start.elapsed();
    let record = RunRecord::new(&label, &config, &report);
    match args.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&record).expect("record serializes")
        ),
        Format::Text => {
            println!("problem: {label}");
            println!(
                "strategy: {} (fa {}, policy {}, seed {})",
                config.strategy, config.fa, config.policy, config.seed
            );
            for s in &report.sizes {
                println!(
                    "m = {}: {} cells, {} backtracks, {} secondary conflicts, {:?}",
                    s.m, s.cells, s.backtracks, s.secondary_conflicts, s.result
                );
            }
            println!("verdict: {}", record.verdict);
            println!(
                "backtracks: {}, query answers: {}, evaluations: {}",
                report.backtracks, report.answers_total, report.evaluations
            );
            println!("time: {:.3}s", elapsed.as_secs_f64());
            if let Outcome::FailureProven { model } = &report.outcome {
                println!("model:");
                for line in model_lines(model) {
                    println!("  {line}");
                }
            }
        }
    }
    if args.trace_tables {
        if let Outcome::FailureProven { model } = &report.outcome {
            let ip = instrument(flat.clone(), config.fa);
            let (_, _, tables) = evaluate_with_tables(&ip, model, config.eval_options());
            println!("% tables\n{}", format_tables(&ip, model, &tables));
        } else {
            eprintln!("note: tables are only traced for a found model");
        }
    }
    Ok(match report.outcome {
        Outcome::FailureProven { .. } => 0,
        Outcome::Exhausted { .. } => 1,
        Outcome::BudgetExceeded { .. } => 2,
    })
}

fn run_oracle(args: OracleArgs) -> Result<u8, String> {
    let (label, program) = load_problem(&args.problem)?;
    if args.domain_size == 0 {
        return Err("--domain-size must be at least 1".into());
    }
    let r = exhaustive_verdict(&program, args.domain_size, args.cap).map_err(|e| e.to_string())?;
    let json = serde_json::json!({
        "problem": label,
        "m": r.m,
        "cells": r.cells,
        "total": r.total,
        "failing": r.failing,
        "example": r.example.as_ref().map(model_lines),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&json).expect("json serializes")
    );
    Ok(if r.failing > 0 { 0 } else { 1 })
}

fn run_bench_cmd(args: BenchArgs) -> Result<u8, String> {
    let problems: Vec<&str> = if args.all {
        corpus::names().collect()
    } else {
        args.problem.iter().map(String::as_str).collect()
    };
    let start = Instant::now();
    let records =
        run_bench(&problems, &args.strategy, args.seeds, args.budget).map_err(|e| e.to_string())?;
    let aggs = aggregate(&records);
    match args.format {
        Format::Json => {
            let json = serde_json::json!({ "records": records, "aggregates": aggs });
            println!(
                "{}",
                serde_json::to_string_pretty(&json).expect("json serializes")
            );
        }
        Format::Text => {
            print!("{}", format_aggregates(&aggs));
            println!("time: {:.3}s", start.elapsed().as_secs_f64());
        }
    }
    Ok(0)
}

fn run_facts() -> Result<u8, String> {
    println!(
        "{:<14} {:>6} {:>4} {:>6} {:>8}",
        "problem", "#pred", "m", "cells", "#pre"
    );
    for e in CORPUS {
        let f = problem_facts(e).map_err(|e| e.to_string())?;
        let p = e.program().map_err(|e| e.to_string())?;
        let count = CellSpace::new(&p.signature(), f.m).assignment_count();
        let pre = if count.bits() <= 24 {
            count.to_string()
        } else {
            f.pre.clone()
        };
        println!(
            "{:<14} {:>6} {:>4} {:>6} {:>8}",
            f.problem, f.predicates, f.m, f.cells, pre
        );
    }
    Ok(0)
}
