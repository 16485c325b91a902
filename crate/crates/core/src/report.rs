//! Run records, benchmark runs and summary tables.
//!
//! Records contain no timings, so the JSON for a fixed seed is reproducible
//! byte for byte.

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{self, program_predicates, CorpusEntry, CorpusError};
use crate::eval::Policy;
use crate::preinterp::{CellSpace, PreInterpretation};
use crate::search::{prove, Outcome, SearchConfig, SearchReport, Strategy};
use crate::transform::{compile, FaMode};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub problem: String,
    pub strategy: Strategy,
    pub fa: FaMode,
    pub policy: Policy,
    pub seed: u64,
    /// Domain size of the last size searched.
    pub m: usize,
    pub verdict: &'static str,
    pub backtracks: u64,
    pub secondary_conflicts: u64,
    pub answers_total: u64,
    pub cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Vec<String>>,
}

pub fn verdict_name(outcome: &Outcome) -> &'static str {
    match outcome {
        Outcome::FailureProven { .. } => "failure-proven",
        Outcome::Exhausted { .. } => "exhausted",
        Outcome::BudgetExceeded { .. } => "budget-exceeded",
    }
}

pub fn model_lines(model: &PreInterpretation) -> Vec<String> {
    model.to_string().lines().map(str::to_string).collect()
}

impl RunRecord {
    pub fn new(problem: &str, config: &SearchConfig, report: &SearchReport) -> Self {
        let model = match &report.outcome {
            Outcome::FailureProven { model } => Some(model_lines(model)),
            _ => None,
        };
        RunRecord {
            problem: problem.to_string(),
            strategy: config.strategy,
            fa: config.fa,
            policy: config.policy,
            seed: config.seed,
            m: report.final_m(),
            verdict: verdict_name(&report.outcome),
            backtracks: report.backtracks,
            secondary_conflicts: report.secondary_conflicts,
            answers_total: report.answers_total,
            cells: report.final_cells(),
            model,
        }
    }
}

/// Runs one corpus problem at its usual domain size.
pub fn run_corpus(
    entry: &CorpusEntry,
    config: &SearchConfig,
) -> Result<(RunRecord, SearchReport), CorpusError> {
    let program = entry.program()?;
    let flat = compile(&program).expect("corpus problems are well formed");
    let report = prove(&flat, entry.domain_size, entry.domain_size, config);
    Ok((RunRecord::new(entry.name, config, &report), report))
}

/// Runs every combination of problem, strategy and seed `0..seeds`, in
/// parallel. Records come back sorted by problem, strategy and seed.
pub fn run_bench(
    problems: &[&str],
    strategies: &[Strategy],
    seeds: u64,
    budget: u64,
) -> Result<Vec<RunRecord>, CorpusError> {
    let entries = problems
        .iter()
        .map(|p| corpus::entry(p))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(&CorpusEntry, Strategy, u64)> = entries
        .iter()
        .flat_map(|&e| {
            strategies
                .iter()
                .flat_map(move |&s| (0..seeds).map(move |seed| (e, s, seed)))
        })
        .collect();
    let mut records = jobs
        .into_par_iter()
        .map(|(e, s, seed)| {
            let config = SearchConfig {
                budget,
                ..SearchConfig::preset(s).with_seed(seed)
            };
            run_corpus(e, &config).map(|(r, _)| r)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rank = |name: &str| problems.iter().position(|p| *p == name);
    records.sort_by(|a, b| {
        (rank(&a.problem), a.strategy.to_string(), a.seed).cmp(&(
            rank(&b.problem),
            b.strategy.to_string(),
            b.seed,
        ))
    });
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub problem: String,
    pub strategy: Strategy,
    pub runs: usize,
    pub proven: usize,
    pub backtracks_min: u64,
    pub backtracks_max: u64,
    pub backtracks_mean: f64,
    pub backtracks_median: f64,
    pub answers_mean: f64,
}

pub fn median(values: &[u64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2] as f64,
        n => (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0,
    }
}

/// Groups records by problem and strategy, in first-appearance order.
pub fn aggregate(records: &[RunRecord]) -> Vec<Aggregate> {
    let mut groups: Vec<((String, Strategy), Vec<&RunRecord>)> = Vec::new();
    for r in records {
        match groups
            .iter_mut()
            .find(|((p, s), _)| *p == r.problem && *s == r.strategy)
        {
            Some((_, rs)) => rs.push(r),
            None => groups.push(((r.problem.clone(), r.strategy), vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((problem, strategy), rs)| {
            let bt: Vec<u64> = rs.iter().map(|r| r.backtracks).collect();
            let n = rs.len() as f64;
            Aggregate {
                problem,
                strategy,
                runs: rs.len(),
                proven: rs.iter().filter(|r| r.verdict == "failure-proven").count(),
                backtracks_min: *bt.iter().min().expect("non-empty group"),
                backtracks_max: *bt.iter().max().expect("non-empty group"),
                backtracks_mean: bt.iter().sum::<u64>() as f64 / n,
                backtracks_median: median(&bt),
                answers_mean: rs.iter().map(|r| r.answers_total).sum::<u64>() as f64 / n,
            }
        })
        .collect()
}

pub fn format_aggregates(aggs: &[Aggregate]) -> String {
    let mut out = format!(
        "{:<14} {:<10} {:>5} {:>7} {:>9} {:>9} {:>11} {:>11} {:>10}\n",
        "problem",
        "strategy",
        "runs",
        "proven",
        "bt-min",
        "bt-max",
        "bt-mean",
        "bt-median",
        "answers"
    );
    for a in aggs {
        out.push_str(&format!(
            "{:<14} {:<10} {:>5} {:>7} {:>9} {:>9} {:>11.1} {:>11.1} {:>10.1}\n",
            a.problem,
            a.strategy.to_string(),
            a.runs,
            a.proven,
            a.backtracks_min,
            a.backtracks_max,
            a.backtracks_mean,
            a.backtracks_median,
            a.answers_mean
        ));
    }
    out
}

/// Structural facts of a corpus problem at its usual domain size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProblemFacts {
    pub problem: String,
    pub predicates: usize,
    pub m: usize,
    pub cells: usize,
    /// Number of pre-interpretations, written `m^cells`.
    pub pre: String,
}

pub fn problem_facts(entry: &CorpusEntry) -> Result<ProblemFacts, CorpusError> {
    let p = entry.program()?;
    let cells = CellSpace::new(&p.signature(), entry.domain_size).len();
    Ok(ProblemFacts {
        problem: entry.name.to_string(),
        predicates: program_predicates(&p),
        m: entry.domain_size,
        cells,
        pre: format!("{}^{}", entry.domain_size, cells),
    })
}
