//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! with status 1 if any check fails.
//!
//! Seeds are `0..10` throughout; backtrack bounds are medians over them.

use std::collections::{BTreeSet, HashMap};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use failprove::conflict::ConflictSet;
use failprove::corpus;
use failprove::eval::{evaluate, evaluate_with_tables, AnswerMode, EvalOptions, Policy, Verdict};
use failprove::oracle::{
    equality_theory, exhaustive_verdict, least_model, nth_interpretation, query_holds, DEFAULT_CAP,
};
use failprove::preinterp::{CellSpace, PreInterpretation, Value};
use failprove::report::{median, run_corpus};
use failprove::search::{prove, Outcome, SearchConfig, Strategy, DEFAULT_BUDGET};
use failprove::syntax::Program;
use failprove::transform::{compile, instrument, FaMode, FlatProgram, InstrumentedProgram};

const SEEDS: u64 = 10;
const DYNAMIC: [Strategy; 2] = [Strategy::SingleCs, Strategy::BestCs];

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn load(name: &str) -> (Program, FlatProgram) {
    let p = corpus::load(name).expect("corpus problem");
    let flat = compile(&p).expect("corpus problem compiles");
    (p, flat)
}

fn space(p: &Program, m: usize) -> Arc<CellSpace> {
    Arc::new(CellSpace::new(&p.signature(), m))
}

fn random_interpretation(sp: &Arc<CellSpace>, rng: &mut ChaCha8Rng) -> PreInterpretation {
    let m = sp.domain_size() as Value;
    let values = (0..sp.len()).map(|_| rng.gen_range(0..m)).collect();
    PreInterpretation::new(sp.clone(), values).expect("values in range")
}

fn random_completion(
    sp: &Arc<CellSpace>,
    cs: &ConflictSet,
    rng: &mut ChaCha8Rng,
) -> PreInterpretation {
    let mut j = random_interpretation(sp, rng);
    for id in cs.iter() {
        let c = sp.component(id);
        j.set(c.cell, c.value);
    }
    j
}

fn all_interpretations(sp: &Arc<CellSpace>) -> impl Iterator<Item = PreInterpretation> + '_ {
    let total = u64::try_from(sp.assignment_count()).expect("small space");
    (0..total).map(|i| nth_interpretation(sp, i))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn structural_counts() -> Check {
    let start = Instant::now();
    let expected = [
        ("appendlast", 3, 12),
        ("nreverselast", 5, 28),
        ("multiset1o", 2, 7),
        ("multiset2o", 2, 7),
        ("multiset3o", 2, 7),
        ("blockpair2o", 2, 19),
        ("blockpair3o", 2, 36),
        ("blockzero3o", 2, 35),
        ("tba", 3, 32),
        ("grp", 2, 17),
        ("cl3", 3, 12),
    ];
    for (name, m, cells) in expected {
        let (p, _) = load(name);
        let sp = space(&p, m);
        ensure(sp.len() == cells, || {
            format!("{name}: {} cells, expected {cells}", sp.len())
        })?;
        let pre = BigUint::from(m).pow(cells as u32);
        ensure(sp.assignment_count() == pre, || {
            format!("{name}: #pre {}", sp.assignment_count())
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{} problems match, {elapsed:.2?}", expected.len()))
}

fn even_odd_ground_truth() -> Check {
    let start = Instant::now();
    let (p, flat) = load("evenodd");
    let sp = space(&p, 2);
    let j = PreInterpretation::new(sp.clone(), vec![1, 0, 0]).map_err(|e| e.to_string())?;
    let labels: Vec<String> = j
        .components()
        .map(|c| sp.format_component(sp.component_id(c.cell, c.value)))
        .collect();
    ensure(labels == ["s(0)=1", "s(1)=0", "zero=0"], || {
        format!("unexpected cells {labels:?}")
    })?;
    let model = least_model(&p, &j);
    let atoms: BTreeSet<(String, Vec<Value>)> = model
        .signature
        .predicates
        .iter()
        .zip(&model.relations)
        .flat_map(|((name, _), rel)| rel.iter().map(move |t| (name.clone(), t.clone())))
        .collect();
    let want: BTreeSet<(String, Vec<Value>)> =
        [("even".to_string(), vec![0]), ("odd".to_string(), vec![1])].into();
    ensure(atoms == want, || format!("least model {atoms:?}"))?;
    for fa in [FaMode::Elementary, FaMode::Advanced] {
        let ip = instrument(flat.clone(), fa);
        let opts = EvalOptions {
            policy: Policy::First,
            answers: AnswerMode::AllAnswers,
        };
        ensure(evaluate(&ip, &j, opts).0.is_fail(), || {
            format!("{fa} engine succeeds")
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "least model {{even(0), odd(1)}}, engine fails, {elapsed:.2?}"
    ))
}

struct Run {
    problem: &'static str,
    strategy: Strategy,
    seed: u64,
    outcome: Outcome,
    backtracks: u64,
    time: Duration,
}

fn runs(problems: &[&'static str], strategies: &[Strategy], budget: u64) -> Vec<Run> {
    let jobs: Vec<(&'static str, Strategy, u64)> = problems
        .iter()
        .flat_map(|&p| {
            strategies
                .iter()
                .flat_map(move |&s| (0..SEEDS).map(move |seed| (p, s, seed)))
        })
        .collect();
    jobs.into_par_iter()
        .map(|(problem, strategy, seed)| {
            let entry = corpus::entry(problem).expect("corpus problem");
            let config = SearchConfig {
                budget,
                ..SearchConfig::preset(strategy).with_seed(seed)
            };
            let start = Instant::now();
            let (_, report) = run_corpus(entry, &config).expect("corpus problem");
            Run {
                problem,
                strategy,
                seed,
                outcome: report.outcome,
                backtracks: report.backtracks,
                time: start.elapsed(),
            }
        })
        .collect()
}

fn minimal_domains() -> Check {
    let problems = [
        "appendlast",
        "reverselast",
        "multiset1o",
        "multiset2o",
        "blockpair2o",
        "blockpair3o",
        "blockpair2l",
        "blockpair3l",
        "blockzero2o",
        "blockzero3o",
        "blockzero2l",
        "blockzero3l",
        "grp",
    ];
    let all = runs(&problems, &DYNAMIC, DEFAULT_BUDGET);
    let mut slowest = Duration::ZERO;
    for r in &all {
        let Outcome::FailureProven { model } = &r.outcome else {
            return Err(format!(
                "{} {} seed {}: {:?}",
                r.problem, r.strategy, r.seed, r.outcome
            ));
        };
        let (p, _) = load(r.problem);
        ensure(!query_holds(&p, model), || {
            format!("{}: model rejected by the oracle", r.problem)
        })?;
        ensure(r.time <= Duration::from_secs(60), || {
            format!("{} {} seed {}: {:?}", r.problem, r.strategy, r.seed, r.time)
        })?;
        slowest = slowest.max(r.time);
    }
    for name in ["appendlast", "reverselast"] {
        let (p, flat) = load(name);
        for strategy in DYNAMIC {
            let report = prove(&flat, 2, 2, &SearchConfig::preset(strategy));
            ensure(report.outcome == Outcome::Exhausted { max_m: 2 }, || {
                format!("{name} {strategy} at m=2: {:?}", report.outcome)
            })?;
        }
        let oracle = exhaustive_verdict(&p, 2, DEFAULT_CAP).map_err(|e| e.to_string())?;
        ensure(oracle.failing == 0, || {
            format!("{name}: oracle finds {} failing", oracle.failing)
        })?;
    }
    Ok(format!(
        "{} runs proven at the listed sizes (slowest {slowest:.2?}); appendlast and reverselast exhaust m=2, \
         oracle 0 failing of 128 each (7 cells at m=2)",
        all.len()
    ))
}

fn no_solution_problems() -> Check {
    let (p, _) = load("multiset3o");
    let oracle = exhaustive_verdict(&p, 2, DEFAULT_CAP).map_err(|e| e.to_string())?;
    ensure(oracle.total == 128 && oracle.failing == 0, || {
        format!("multiset3o oracle {} of {}", oracle.failing, oracle.total)
    })?;
    let all = runs(&["multiset3o", "blockzero2ls"], &DYNAMIC, DEFAULT_BUDGET);
    let mut exhausted = 0;
    for r in &all {
        match (&r.outcome, r.problem) {
            (Outcome::Exhausted { .. }, _) => exhausted += 1,
            (Outcome::BudgetExceeded { .. }, "blockzero2ls") => {}
            (o, name) => return Err(format!("{name} {} seed {}: {o:?}", r.strategy, r.seed)),
        }
    }
    Ok(format!(
        "multiset3o exhausts m=2 (oracle 0 of 128); blockzero2ls never proven; {exhausted}/{} runs exhausted",
        all.len()
    ))
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut total = 0;
    for name in [
        "evenodd",
        "multiset1o",
        "multiset2o",
        "multiset3o",
        "appendlast",
    ] {
        let (p, flat) = load(name);
        let sp = space(&p, 2);
        let ips = [
            instrument(flat.clone(), FaMode::Elementary),
            instrument(flat, FaMode::Advanced),
        ];
        let mut count = 0;
        for j in all_interpretations(&sp) {
            let expected = !query_holds(&p, &j);
            for ip in &ips {
                for policy in [Policy::First, Policy::Better] {
                    for answers in [AnswerMode::FirstAnswer, AnswerMode::AllAnswers] {
                        let got = evaluate(ip, &j, EvalOptions { policy, answers })
                            .0
                            .is_fail();
                        ensure(got == expected, || {
                            format!("{name}: {} {policy} disagrees at {j}", ip.fa)
                        })?;
                    }
                }
            }
            count += 1;
        }
        total += count;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{total} pre-interpretations agree (evenodd 8, multiset 3x128, appendlast 128), {elapsed:.2?}"
    ))
}

fn conflict_set_soundness() -> Check {
    let problems = [
        "evenodd",
        "appendlast",
        "reverselast",
        "multiset1o",
        "multiset3o",
        "blockpair2o",
        "blockpair3o",
        "blockzero2o",
        "blockzero3o",
        "grp",
        "tba",
        "cl3",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut verdicts = 0;
    let mut sets = 0;
    let mut completions = 0;
    let mut i = 0;
    while verdicts < 100 {
        let name = problems[i % problems.len()];
        let fa = if (i / problems.len()).is_multiple_of(2) {
            FaMode::Advanced
        } else {
            FaMode::Elementary
        };
        i += 1;
        let entry = corpus::entry(name).map_err(|e| e.to_string())?;
        let (p, flat) = load(name);
        let sp = space(&p, entry.domain_size);
        let ip = instrument(flat, fa);
        let j = random_interpretation(&sp, &mut rng);
        let opts = EvalOptions {
            policy: Policy::Better,
            answers: AnswerMode::AllAnswers,
        };
        let Verdict::Succeeds { answers } = evaluate(&ip, &j, opts).0 else {
            continue;
        };
        verdicts += 1;
        for cs in &answers {
            ensure(j.contains(cs), || {
                format!("{name}: conflict set not part of J")
            })?;
            for _ in 0..20 {
                let completion = random_completion(&sp, cs, &mut rng);
                ensure(query_holds(&p, &completion), || {
                    format!("{name} {fa}: {} is not a conflict set", sp.format_set(cs))
                })?;
                completions += 1;
            }
            sets += 1;
        }
    }
    Ok(format!(
        "{verdicts} verdicts, {sets} conflict sets, {completions} completions, 0 violations"
    ))
}

fn footprints(
    ip: &InstrumentedProgram,
    j: &PreInterpretation,
) -> Vec<HashMap<Vec<Value>, ConflictSet>> {
    let opts = EvalOptions {
        policy: Policy::First,
        answers: AnswerMode::AllAnswers,
    };
    let (_, _, tables) = evaluate_with_tables(ip, j, opts);
    (0..tables.answers.len())
        .map(|pred| {
            tables
                .live(pred)
                .map(|a| (a.values.clone(), a.footprint.clone()))
                .collect()
        })
        .collect()
}

fn advanced_vs_elementary() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0;
    for name in ["blockpair3o", "blockzero3o"] {
        let (p, flat) = load(name);
        let sp = space(&p, 2);
        let elementary = instrument(flat.clone(), FaMode::Elementary);
        let advanced = instrument(flat, FaMode::Advanced);
        for _ in 0..20 {
            let j = random_interpretation(&sp, &mut rng);
            let el = footprints(&elementary, &j);
            for (pred, table) in footprints(&advanced, &j).iter().enumerate() {
                for (tuple, cs) in table {
                    let other = el[pred].get(tuple).ok_or_else(|| {
                        format!("{name}: tuple {tuple:?} missing under elementary")
                    })?;
                    ensure(cs.is_subset(other), || {
                        format!("{name}: advanced set not contained at {tuple:?}")
                    })?;
                    compared += 1;
                }
            }
        }
    }
    let mut parts = Vec::new();
    let mut ok = true;
    for strategy in DYNAMIC {
        let pairs: Vec<(u64, u64)> = (0..SEEDS)
            .into_par_iter()
            .map(|seed| {
                let config = SearchConfig::preset(strategy).with_seed(seed);
                let bt = |name| {
                    run_corpus(corpus::entry(name).expect("corpus"), &config)
                        .expect("corpus")
                        .1
                        .backtracks
                };
                (bt("blockpair2o"), bt("blockpair3o"))
            })
            .collect();
        let equal = pairs.iter().filter(|(a, b)| a == b).count();
        ok &= equal >= 8;
        parts.push(format!("{strategy} {equal}/10 equal"));
    }
    let summary = format!(
        "{compared} answers: advanced within elementary; blockpair3o vs 2o backtracks: {}",
        parts.join(", ")
    );
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn equality_identity() -> Check {
    let p = equality_theory(&[("f", 1), ("c", 0)]);
    let check = |j: &PreInterpretation| {
        let m = j.domain_size() as Value;
        let identity: BTreeSet<Vec<Value>> = (0..m).map(|v| vec![v, v]).collect();
        least_model(&p, j).relation("eq", 2) == Some(&identity)
    };
    let sp = space(&p, 2);
    let small: Vec<PreInterpretation> = all_interpretations(&sp).collect();
    ensure(small.len() == 8, || {
        format!("{} pre-interpretations at m=2", small.len())
    })?;
    ensure(small.iter().all(check), || "m=2: not the identity".into())?;
    let sp = space(&p, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let j = random_interpretation(&sp, &mut rng);
        ensure(check(&j), || format!("m=3: not the identity under {j}"))?;
    }
    Ok("identity for all 8 at m=2 and 50 random at m=3".into())
}

fn backtrack_sanity() -> Check {
    let bounds = [
        ("appendlast", 560.0),
        ("blockpair2o", 340.0),
        ("grp", 710.0),
    ];
    let names: Vec<&'static str> = bounds.iter().map(|b| b.0).collect();
    let all = runs(
        &names,
        &[Strategy::Naive, Strategy::SingleCs, Strategy::BestCs],
        DEFAULT_BUDGET,
    );
    let med = |problem: &str, strategy: Strategy| {
        let bt: Vec<u64> = all
            .iter()
            .filter(|r| r.problem == problem && r.strategy == strategy)
            .map(|r| r.backtracks)
            .collect();
        median(&bt)
    };
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, bound) in bounds {
        let m = med(name, Strategy::SingleCs);
        ok &= m <= bound;
        parts.push(format!("{name} {m} <= {bound}"));
    }
    let naive = med("appendlast", Strategy::Naive);
    let single = med("appendlast", Strategy::SingleCs);
    let best = med("appendlast", Strategy::BestCs);
    ok &= single < naive && best < naive;
    parts.push(format!(
        "appendlast naive {naive} vs single-cs {single}, best-cs {best}"
    ));
    let summary = format!("single-cs medians: {}", parts.join("; "));
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn determinism() -> Check {
    let cases = [
        ("appendlast", Strategy::SingleCs, 1),
        ("blockpair2o", Strategy::BestCs, 3),
        ("grp", Strategy::Naive, 0),
        ("multiset3o", Strategy::BestCs, 5),
    ];
    for (name, strategy, seed) in cases {
        let entry = corpus::entry(name).map_err(|e| e.to_string())?;
        let config = SearchConfig::preset(strategy).with_seed(seed);
        let outputs: Vec<String> = (0..3)
            .map(|_| {
                let (record, _) = run_corpus(entry, &config).expect("corpus problem");
                serde_json::to_string(&record).expect("record serializes")
            })
            .collect();
        ensure(outputs.iter().all(|o| *o == outputs[0]), || {
            format!("{name} {strategy} seed {seed} differs")
        })?;
    }
    Ok(format!(
        "{} configurations, 3 runs each, identical JSON",
        cases.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("structural cell and #pre counts", structural_counts),
        ("even/odd ground truth", even_odd_ground_truth),
        (
            "failure proven at the minimal domain sizes",
            minimal_domains,
        ),
        (
            "problems with solutions are never proven",
            no_solution_problems,
        ),
        ("engine agrees with the oracle", oracle_equivalence),
        ("conflict sets are sound", conflict_set_soundness),
        (
            "advanced analysis refines elementary",
            advanced_vs_elementary,
        ),
        ("equality axioms give the identity", equality_identity),
        ("backtrack medians", backtrack_sanity),
        ("determinism of run records", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
