//! Tabled evaluation of instrumented programs under a fixed pre-interpretation.
//!
//! Every predicate has one table, filled by its most general call (the
//! compiled clauses only ever call predicates with distinct free variables).
//! A clause that reaches a call registers a suspended continuation, a
//! *consumer*, on the callee's table; consumers are resumed from a FIFO queue
//! whenever the table grows. Evaluation ends when the queue is empty or, in
//! first-answer mode, as soon as the query table accepts an answer.
//!
//! An answer carries the conflict set of its derivation and, under advanced
//! failure analysis, one provenance per argument. Its *footprint* is the union
//! of both; the answer policies compare footprints.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::conflict::{monitored_disunify, monitored_unify, AnnotatedValue, ConflictSet, Slot};
use crate::preinterp::{PreInterpretation, Value};
use crate::transform::{FaMode, FlatLiteral, InstrumentedProgram, VarId};

/// Which answers a table keeps when a new one arrives for a tuple it already holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Keep only the first answer per tuple.
    First,
    /// Replace the stored answer when the new footprint is strictly smaller.
    Better,
    /// Keep a set of answers whose footprints are pairwise incomparable.
    Subsume,
}

/// Whether evaluation stops at the first query answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerMode {
    FirstAnswer,
    AllAnswers,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{given}` (expected one of: {expected})")]
pub struct UnknownOption {
    pub kind: &'static str,
    pub given: String,
    pub expected: &'static str,
}

impl FromStr for Policy {
    type Err = UnknownOption;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(Policy::First),
            "better" => Ok(Policy::Better),
            "subsume" => Ok(Policy::Subsume),
            _ => Err(UnknownOption {
                kind: "policy",
                given: s.into(),
                expected: "first, better, subsume",
            }),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::First => "first",
            Policy::Better => "better",
            Policy::Subsume => "subsume",
        })
    }
}

impl FromStr for FaMode {
    type Err = UnknownOption;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "elementary" => Ok(FaMode::Elementary),
            "advanced" => Ok(FaMode::Advanced),
            _ => Err(UnknownOption {
                kind: "failure analysis",
                given: s.into(),
                expected: "elementary, advanced",
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    pub policy: Policy,
    pub answers: AnswerMode,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EvalStats {
    /// Answers accepted into any table, including ones later replaced.
    pub answers_accepted: usize,
    pub answers_rejected: usize,
    pub resumptions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// The query has no answer: the pre-interpretation is a model of the failure.
    Fails,
    /// Conflict sets of the query answers, in the order they were accepted.
    Succeeds { answers: Vec<ConflictSet> },
}

impl Verdict {
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fails)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub values: Vec<Value>,
    /// Per-argument provenance; empty sets under elementary analysis.
    pub provenance: Vec<ConflictSet>,
    pub cs: ConflictSet,
    pub footprint: ConflictSet,
    pub alive: bool,
}

#[derive(Clone, Debug, Default)]
struct Consumer {
    clause: usize,
    pos: usize,
    env: Vec<Slot>,
    cs: ConflictSet,
    cursor: usize,
    scheduled: bool,
}

#[derive(Clone, Debug, Default)]
struct Table {
    started: bool,
    answers: Vec<Answer>,
    by_values: HashMap<Vec<Value>, Vec<usize>>,
    consumers: Vec<Consumer>,
}

enum Task {
    Start(usize),
    Resume(usize, usize),
}

/// Final state of every table.
#[derive(Clone, Debug)]
pub struct Tables {
    /// Indexed by predicate; replaced answers are kept with `alive == false`.
    pub answers: Vec<Vec<Answer>>,
}

impl Tables {
    /// Live answers of `pred`.
    pub fn live(&self, pred: usize) -> impl Iterator<Item = &Answer> {
        self.answers[pred].iter().filter(|a| a.alive)
    }
}

struct Engine<'a> {
    ip: &'a InstrumentedProgram,
    j: &'a PreInterpretation,
    opts: EvalOptions,
    m: Value,
    tables: Vec<Table>,
    queue: VecDeque<Task>,
    query_answers: Vec<ConflictSet>,
    stop: bool,
    stats: EvalStats,
}

impl<'a> Engine<'a> {
    fn new(ip: &'a InstrumentedProgram, j: &'a PreInterpretation, opts: EvalOptions) -> Self {
        Engine {
            ip,
            j,
            opts,
            m: j.domain_size() as Value,
            tables: vec![Table::default(); ip.flat.signature.predicates.len()],
            queue: VecDeque::new(),
            query_answers: Vec::new(),
            stop: false,
            stats: EvalStats::default(),
        }
    }

    fn run(&mut self) {
        let query = self.ip.flat.query;
        self.ensure_started(query);
        while let Some(task) = self.queue.pop_front() {
            if self.stop {
                break;
            }
            match task {
                Task::Start(pred) => {
                    for &ci in self.ip.flat.clauses_of(pred) {
                        let mut env = vec![None; self.ip.flat.clauses[ci].num_vars()];
                        self.run_clause(ci, 0, &mut env, ConflictSet::new());
                    }
                }
                Task::Resume(pred, cid) => self.resume(pred, cid),
            }
        }
    }

    fn ensure_started(&mut self, pred: usize) {
        if !self.tables[pred].started {
            self.tables[pred].started = true;
            self.queue.push_back(Task::Start(pred));
        }
    }

    fn resume(&mut self, pred: usize, cid: usize) {
        self.tables[pred].consumers[cid].scheduled = false;
        loop {
            if self.stop {
                return;
            }
            let table = &mut self.tables[pred];
            let consumer = &mut table.consumers[cid];
            let Some(answer) = table.answers.get(consumer.cursor) else {
                return;
            };
            consumer.cursor += 1;
            if !answer.alive {
                continue;
            }
            self.stats.resumptions += 1;
            let (clause, pos) = (consumer.clause, consumer.pos);
            let mut env = consumer.env.clone();
            let cs = consumer.cs.merge(&answer.cs);
            let FlatLiteral::Call { args, .. } = &self.ip.flat.clauses[clause].body[pos] else {
                unreachable!("consumer suspended on a non-call literal")
            };
            for (i, &a) in args.iter().enumerate() {
                env[a as usize] = Some(AnnotatedValue::new(
                    answer.values[i],
                    answer.provenance[i].clone(),
                ));
            }
            self.run_clause(clause, pos + 1, &mut env, cs);
        }
    }

    fn run_clause(&mut self, ci: usize, pos: usize, env: &mut Vec<Slot>, cs: ConflictSet) {
        if self.stop {
            return;
        }
        let ip = self.ip;
        let clause = &ip.flat.clauses[ci];
        let Some(lit) = clause.body.get(pos) else {
            self.check_return(ci, env, cs);
            return;
        };
        match lit {
            FlatLiteral::Call { pred, .. } => {
                self.ensure_started(*pred);
                let table = &mut self.tables[*pred];
                let cid = table.consumers.len();
                table.consumers.push(Consumer {
                    clause: ci,
                    pos,
                    env: env.clone(),
                    cs,
                    cursor: 0,
                    scheduled: true,
                });
                self.queue.push_back(Task::Resume(*pred, cid));
            }
            FlatLiteral::Cell {
                functor,
                args,
                result,
            } => {
                if let Some(&free) = args.iter().find(|&&a| env[a as usize].is_none()) {
                    self.enumerate(free, ci, pos, env, &cs);
                    return;
                }
                let values: Vec<Value> = args.iter().map(|&a| slot(env, a).value).collect();
                let cell = self.j.space().cell_id(*functor, &values);
                let value = self.j.value(cell);
                let component = self.j.component_id(cell);
                let provenance = match ip.fa {
                    FaMode::Elementary => ConflictSet::new(),
                    FaMode::Advanced => {
                        let mut p = ConflictSet::singleton(component);
                        for &a in args {
                            p.merge_in(&slot(env, a).provenance);
                        }
                        p
                    }
                };
                let cs = match ip.fa {
                    FaMode::Elementary => {
                        let mut cs = cs;
                        cs.insert(component);
                        cs
                    }
                    FaMode::Advanced => cs,
                };
                let r = *result as usize;
                match &env[r] {
                    None => {
                        env[r] = Some(AnnotatedValue::new(value, provenance));
                        self.run_clause(ci, pos + 1, env, cs);
                        env[r] = None;
                    }
                    Some(bound) if bound.value == value => {
                        let mut cs = cs.merge(&provenance);
                        cs.merge_in(&bound.provenance);
                        self.run_clause(ci, pos + 1, env, cs);
                    }
                    Some(_) => {}
                }
            }
            FlatLiteral::Eq(a, b) => {
                let (a, b) = (*a as usize, *b as usize);
                if a == b {
                    let cs = cs.merge(&slot(env, a as VarId).provenance);
                    self.run_clause(ci, pos + 1, env, cs);
                    return;
                }
                let (mut x, mut y) = (env[a].clone(), env[b].clone());
                let (free_a, free_b) = (x.is_none(), y.is_none());
                if let Some(cs) = monitored_unify(&mut x, &mut y, &cs) {
                    env[a] = x;
                    env[b] = y;
                    self.run_clause(ci, pos + 1, env, cs);
                    if free_a {
                        env[a] = None;
                    }
                    if free_b {
                        env[b] = None;
                    }
                }
            }
            FlatLiteral::Diseq(a, b) => {
                if let Some(cs) = monitored_disunify(slot(env, *a), slot(env, *b), &cs) {
                    self.run_clause(ci, pos + 1, env, cs);
                }
            }
            FlatLiteral::Ground(x) => self.enumerate(*x, ci, pos, env, &cs),
        }
    }

    /// Binds `var` to each domain element in turn and re-runs literal `pos`.
    fn enumerate(
        &mut self,
        var: VarId,
        ci: usize,
        pos: usize,
        env: &mut Vec<Slot>,
        cs: &ConflictSet,
    ) {
        let next = match self.ip.flat.clauses[ci].body[pos] {
            FlatLiteral::Ground(_) => pos + 1,
            _ => pos,
        };
        for v in 0..self.m {
            env[var as usize] = Some(AnnotatedValue::bare(v));
            self.run_clause(ci, next, env, cs.clone());
            if self.stop {
                break;
            }
        }
        env[var as usize] = None;
    }

    fn check_return(&mut self, ci: usize, env: &[Slot], cs: ConflictSet) {
        let clause = &self.ip.flat.clauses[ci];
        let pred = clause.pred;
        let mut values = Vec::with_capacity(clause.head.len());
        let mut provenance = Vec::with_capacity(clause.head.len());
        let mut footprint = cs.clone();
        for &h in &clause.head {
            let v = slot(env, h);
            values.push(v.value);
            footprint.merge_in(&v.provenance);
            provenance.push(v.provenance.clone());
        }
        let candidate = Answer {
            values,
            provenance,
            cs,
            footprint,
            alive: true,
        };
        if !self.admit(pred, candidate) {
            self.stats.answers_rejected += 1;
            return;
        }
        self.stats.answers_accepted += 1;
        if pred == self.ip.flat.query {
            let answer = self.tables[pred].answers.last().expect("answer just added");
            self.query_answers.push(answer.footprint.clone());
            if self.opts.answers == AnswerMode::FirstAnswer {
                self.stop = true;
                return;
            }
        }
        let table = &mut self.tables[pred];
        for (cid, c) in table.consumers.iter_mut().enumerate() {
            if !c.scheduled {
                c.scheduled = true;
                self.queue.push_back(Task::Resume(pred, cid));
            }
        }
    }

    /// Applies the answer policy; on acceptance the candidate is appended.
    fn admit(&mut self, pred: usize, candidate: Answer) -> bool {
        let table = &mut self.tables[pred];
        let same: Vec<usize> = table
            .by_values
            .get(&candidate.values)
            .map(|ids| {
                ids.iter()
                    .copied()
                    .filter(|&i| table.answers[i].alive)
                    .collect()
            })
            .unwrap_or_default();
        match self.opts.policy {
            Policy::First => {
                if !same.is_empty() {
                    return false;
                }
            }
            Policy::Better => {
                if let Some(&old) = same.first() {
                    if candidate.footprint.len() >= table.answers[old].footprint.len() {
                        return false;
                    }
                    table.answers[old].alive = false;
                }
            }
            Policy::Subsume => {
                if same
                    .iter()
                    .any(|&i| table.answers[i].footprint.is_subset(&candidate.footprint))
                {
                    return false;
                }
                for &i in &same {
                    if candidate.footprint.is_subset(&table.answers[i].footprint) {
                        table.answers[i].alive = false;
                    }
                }
            }
        }
        let id = table.answers.len();
        table
            .by_values
            .entry(candidate.values.clone())
            .or_default()
            .push(id);
        table.answers.push(candidate);
        true
    }
}

fn slot(env: &[Slot], v: VarId) -> &AnnotatedValue {
    env[v as usize]
        .as_ref()
        .expect("compiled clause reads an unbound variable")
}

/// Runs the query of `ip` under `j`.
pub fn evaluate(
    ip: &InstrumentedProgram,
    j: &PreInterpretation,
    opts: EvalOptions,
) -> (Verdict, EvalStats) {
    let (verdict, stats, _) = evaluate_with_tables(ip, j, opts);
    (verdict, stats)
}

/// Like [`evaluate`], also returning the final tables.
pub fn evaluate_with_tables(
    ip: &InstrumentedProgram,
    j: &PreInterpretation,
    opts: EvalOptions,
) -> (Verdict, EvalStats, Tables) {
    assert_eq!(
        j.space().functors(),
        &ip.flat.signature.functions[..],
        "pre-interpretation built for a different signature"
    );
    let mut engine = Engine::new(ip, j, opts);
    engine.run();
    let verdict = if engine.query_answers.is_empty() {
        Verdict::Fails
    } else {
        Verdict::Succeeds {
            answers: engine.query_answers,
        }
    };
    let tables = Tables {
        answers: engine.tables.into_iter().map(|t| t.answers).collect(),
    };
    (verdict, engine.stats, tables)
}

/// Live answers as `pred(v1, ..., vn) :: {component, ...}` lines, with the
/// footprint as the set. Predicates in signature order.
pub fn format_tables(ip: &InstrumentedProgram, j: &PreInterpretation, tables: &Tables) -> String {
    let mut out = String::new();
    for (pred, (name, _)) in ip.flat.signature.predicates.iter().enumerate() {
        for a in tables.live(pred) {
            out.push_str(name);
            if !a.values.is_empty() {
                let vs: Vec<String> = a.values.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!("({})", vs.join(", ")));
            }
            out.push_str(" :: ");
            out.push_str(&j.space().format_set(&a.footprint));
            out.push('\n');
        }
    }
    out
}
