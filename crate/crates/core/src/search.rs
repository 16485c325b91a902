//! Search for a pre-interpretation under which the query fails.
//!
//! The search keeps one candidate pre-interpretation and repairs it with
//! conflict sets returned by the evaluator. Cells are placed in an order as
//! they show up in conflicts; a conflict blames its last cell in that order,
//! which then moves to its next untried value. When a cell runs out of values
//! the conflicts it collected, minus the cell itself, form a secondary
//! conflict that is handled the same way. An empty conflict proves that no
//! pre-interpretation of the current size exists.
//!
//! Each cell draws its values from a seeded stream, so runs are reproducible.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conflict::ConflictSet;
use crate::eval::{evaluate, AnswerMode, EvalOptions, Policy, UnknownOption, Verdict};
use crate::preinterp::{seeded_draw, CellId, CellSpace, PreInterpretation, Value};
use crate::transform::{instrument, FaMode, FlatProgram, InstrumentedProgram};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Fixed random cell order, elementary analysis, first answer only.
    Naive,
    /// Dynamic order, advanced analysis, first query answer.
    SingleCs,
    /// Dynamic order, advanced analysis, best of all query answers.
    BestCs,
}

impl FromStr for Strategy {
    type Err = UnknownOption;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "single-cs" => Ok(Strategy::SingleCs),
            "best-cs" => Ok(Strategy::BestCs),
            _ => Err(UnknownOption {
                kind: "strategy",
                given: s.into(),
                expected: "naive, single-cs, best-cs",
            }),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Naive => "naive",
            Strategy::SingleCs => "single-cs",
            Strategy::BestCs => "best-cs",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ordering {
    /// All cells ordered up front by a seeded permutation.
    Fixed,
    /// Cells ordered as they appear in conflicts.
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConflictChoice {
    /// The first query answer.
    Single,
    /// Fewest unordered cells, then smallest set, then canonical order.
    Best,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub ordering: Ordering,
    pub fa: FaMode,
    pub policy: Policy,
    pub answers: AnswerMode,
    pub choice: ConflictChoice,
    pub seed: u64,
    /// Maximum number of backtracks over the whole run.
    pub budget: u64,
    pub record_secondary: bool,
}

impl SearchConfig {
    pub fn preset(strategy: Strategy) -> Self {
        let base = SearchConfig {
            strategy,
            ordering: Ordering::Dynamic,
            fa: FaMode::Advanced,
            policy: Policy::Better,
            answers: AnswerMode::FirstAnswer,
            choice: ConflictChoice::Single,
            seed: 0,
            budget: DEFAULT_BUDGET,
            record_secondary: false,
        };
        match strategy {
            Strategy::Naive => SearchConfig {
                ordering: Ordering::Fixed,
                fa: FaMode::Elementary,
                policy: Policy::First,
                ..base
            },
            Strategy::SingleCs => base,
            Strategy::BestCs => SearchConfig {
                answers: AnswerMode::AllAnswers,
                choice: ConflictChoice::Best,
                ..base
            },
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SearchConfig { seed, ..self }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            policy: self.policy,
            answers: self.answers,
        }
    }
}

/// Result of handling one conflict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// Some cell took a new value; evaluate again.
    Continue,
    /// Every pre-interpretation of this size makes the query succeed.
    Unsat,
}

/// The candidate pre-interpretation and the bookkeeping used to repair it.
#[derive(Clone, Debug)]
pub struct SearchState {
    j: PreInterpretation,
    ordering: Ordering,
    seed: u64,
    order: Vec<CellId>,
    position: Vec<Option<usize>>,
    /// Bitmask of values already refuted, per cell.
    tried: Vec<u64>,
    /// Components that, with the cell's tried values, caused conflicts.
    acc: Vec<ConflictSet>,
    draws: Vec<u64>,
    initial: Vec<Value>,
    secondary: Vec<ConflictSet>,
}

impl SearchState {
    pub fn new(space: Arc<CellSpace>, ordering: Ordering, seed: u64) -> Self {
        assert!(
            space.domain_size() <= 64,
            "domain sizes above 64 are not supported"
        );
        let n = space.len();
        let j = PreInterpretation::seeded(space, seed);
        let mut state = SearchState {
            initial: j.values().to_vec(),
            j,
            ordering,
            seed,
            order: Vec::new(),
            position: vec![None; n],
            tried: vec![0; n],
            acc: vec![ConflictSet::new(); n],
            draws: vec![0; n],
            secondary: Vec::new(),
        };
        if ordering == Ordering::Fixed {
            let mut perm: Vec<CellId> = (0..n as CellId).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            for c in perm {
                state.place(c);
            }
        }
        state
    }

    pub fn interpretation(&self) -> &PreInterpretation {
        &self.j
    }

    pub fn space(&self) -> &Arc<CellSpace> {
        self.j.space()
    }

    /// Ordered cells, earliest first.
    pub fn order(&self) -> &[CellId] {
        &self.order
    }

    pub fn is_ordered(&self, cell: CellId) -> bool {
        self.position[cell as usize].is_some()
    }

    /// Values of `cell` already refuted under the current values of earlier cells.
    pub fn tried(&self, cell: CellId) -> u64 {
        self.tried[cell as usize]
    }

    /// Secondary conflicts derived so far.
    pub fn secondary_conflicts(&self) -> &[ConflictSet] {
        &self.secondary
    }

    fn place(&mut self, cell: CellId) {
        self.position[cell as usize] = Some(self.order.len());
        self.order.push(cell);
    }

    fn cells_of(&self, cs: &ConflictSet) -> Vec<CellId> {
        let m = self.j.domain_size() as u32;
        let mut cells: Vec<CellId> = cs.iter().map(|c| c / m).collect();
        cells.dedup();
        cells
    }

    /// Number of cells of `cs` not yet in the order.
    pub fn unordered_count(&self, cs: &ConflictSet) -> usize {
        self.cells_of(cs)
            .into_iter()
            .filter(|&c| !self.is_ordered(c))
            .count()
    }

    fn forget(&mut self, cell: CellId) {
        let c = cell as usize;
        self.tried[c] = 0;
        self.acc[c] = ConflictSet::new();
        match self.ordering {
            Ordering::Dynamic => {
                self.position[c] = None;
                self.draws[c] += 1;
                let v = seeded_draw(self.j.space(), self.seed, cell, self.draws[c]);
                self.j.set(cell, v);
            }
            Ordering::Fixed => self.j.set(cell, self.initial[c]),
        }
    }

    /// Repairs the candidate so that it no longer contains `cs`, which must be
    /// a conflict set of the current candidate.
    pub fn register_conflict(&mut self, cs: &ConflictSet) -> Step {
        debug_assert!(self.j.contains(cs), "conflict does not match the candidate");
        let mut cs = cs.clone();
        loop {
            if cs.is_empty() {
                return Step::Unsat;
            }
            let cells = self.cells_of(&cs);
            for &c in &cells {
                if !self.is_ordered(c) {
                    self.place(c);
                }
            }
            let target = *cells
                .iter()
                .max_by_key(|&&c| self.position[c as usize])
                .expect("non-empty conflict");
            let t = target as usize;
            let pos = self.position[t].expect("target is ordered");
            let mut rest = cs.clone();
            rest.remove(self.j.component_id(target));
            self.acc[t].merge_in(&rest);

            let later: Vec<CellId> = self.order.drain(pos + 1..).collect();
            if self.ordering == Ordering::Fixed {
                self.order.extend_from_slice(&later);
            }
            for c in later {
                self.forget(c);
            }

            self.tried[t] |= 1u64 << self.j.value(target);
            let m = self.j.domain_size() as u32;
            if let Some(v) = (0..m).find(|v| self.tried[t] & (1u64 << v) == 0) {
                self.j.set(target, v);
                return Step::Continue;
            }
            let secondary = std::mem::take(&mut self.acc[t]);
            self.tried[t] = 0;
            self.secondary.push(secondary.clone());
            cs = secondary;
        }
    }

    /// Picks the conflict to register among the query answers.
    pub fn choose_conflict<'a>(
        &self,
        answers: &'a [ConflictSet],
        choice: ConflictChoice,
    ) -> &'a ConflictSet {
        match choice {
            ConflictChoice::Single => &answers[0],
            ConflictChoice::Best => answers
                .iter()
                .min_by(|a, b| {
                    (self.unordered_count(a), a.len(), a).cmp(&(
                        self.unordered_count(b),
                        b.len(),
                        b,
                    ))
                })
                .expect("at least one answer"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "result")]
pub enum SizeResult {
    FailureProven,
    Exhausted,
    BudgetExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SizeStats {
    pub m: usize,
    pub cells: usize,
    pub backtracks: u64,
    pub secondary_conflicts: u64,
    #[serde(flatten)]
    pub result: SizeResult,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// The query fails under `model`, so it fails for the original program.
    FailureProven {
        model: PreInterpretation,
    },
    /// No pre-interpretation up to the largest size tried makes the query fail.
    Exhausted {
        max_m: usize,
    },
    BudgetExceeded {
        m: usize,
    },
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub outcome: Outcome,
    /// Backtracks over all sizes.
    pub backtracks: u64,
    pub secondary_conflicts: u64,
    /// Query answers returned over all evaluations.
    pub answers_total: u64,
    pub evaluations: u64,
    pub sizes: Vec<SizeStats>,
    /// Secondary conflicts with their domain size, when recording was requested.
    pub secondary: Vec<(usize, ConflictSet)>,
}

impl SearchReport {
    pub fn final_m(&self) -> usize {
        self.sizes.last().map_or(0, |s| s.m)
    }

    pub fn final_cells(&self) -> usize {
        self.sizes.last().map_or(0, |s| s.cells)
    }
}

/// Searches domain sizes `min_m..=max_m` in turn.
pub fn prove(
    flat: &FlatProgram,
    min_m: usize,
    max_m: usize,
    config: &SearchConfig,
) -> SearchReport {
    assert!(min_m >= 1 && min_m <= max_m, "invalid domain size range");
    let ip = instrument(flat.clone(), config.fa);
    let mut report = SearchReport {
        outcome: Outcome::Exhausted { max_m },
        backtracks: 0,
        secondary_conflicts: 0,
        answers_total: 0,
        evaluations: 0,
        sizes: Vec::new(),
        secondary: Vec::new(),
    };
    for m in min_m..=max_m {
        let space = Arc::new(CellSpace::new(&flat.signature, m));
        let before = report.backtracks;
        let (result, state) = search_size(&ip, space.clone(), config, &mut report);
        let secondary = state.secondary_conflicts();
        report.secondary_conflicts += secondary.len() as u64;
        if config.record_secondary {
            report
                .secondary
                .extend(secondary.iter().map(|cs| (m, cs.clone())));
        }
        report.sizes.push(SizeStats {
            m,
            cells: space.len(),
            backtracks: report.backtracks - before,
            secondary_conflicts: secondary.len() as u64,
            result: result.clone(),
        });
        match result {
            SizeResult::FailureProven => {
                report.outcome = Outcome::FailureProven {
                    model: state.interpretation().clone(),
                };
                return report;
            }
            SizeResult::BudgetExceeded => {
                report.outcome = Outcome::BudgetExceeded { m };
                return report;
            }
            SizeResult::Exhausted => {}
        }
    }
    report
}

fn search_size(
    ip: &InstrumentedProgram,
    space: Arc<CellSpace>,
    config: &SearchConfig,
    report: &mut SearchReport,
) -> (SizeResult, SearchState) {
    let mut state = SearchState::new(space, config.ordering, config.seed);
    let opts = config.eval_options();
    loop {
        report.evaluations += 1;
        let (verdict, _) = evaluate(ip, state.interpretation(), opts);
        match verdict {
            Verdict::Fails => {
                assert!(
                    confirm_failure(ip, state.interpretation()),
                    "failure not confirmed by an exhaustive evaluation"
                );
                return (SizeResult::FailureProven, state);
            }
            Verdict::Succeeds { answers } => {
                report.answers_total += answers.len() as u64;
                report.backtracks += 1;
                if report.backtracks > config.budget {
                    return (SizeResult::BudgetExceeded, state);
                }
                let cs = state.choose_conflict(&answers, config.choice).clone();
                if state.register_conflict(&cs) == Step::Unsat {
                    return (SizeResult::Exhausted, state);
                }
            }
        }
    }
}

/// Re-evaluates with elementary analysis, keeping every answer tuple, and
/// reports whether the query still fails.
pub fn confirm_failure(ip: &InstrumentedProgram, j: &PreInterpretation) -> bool {
    let check = instrument(ip.flat.clone(), FaMode::Elementary);
    let opts = EvalOptions {
        policy: Policy::First,
        answers: AnswerMode::AllAnswers,
    };
    evaluate(&check, j, opts).0.is_fail()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::transform::compile;

    const EVEN_ODD: &str = "even(zero). even(s(X)) :- odd(X). odd(s(X)) :- even(X). \
                            even_odd :- even(X), odd(X). ?- even_odd.";

    fn flat(src: &str) -> FlatProgram {
        compile(&parse_program(src).unwrap()).unwrap()
    }

    #[test]
    fn even_odd_needs_two_elements() {
        for strategy in [Strategy::Naive, Strategy::SingleCs, Strategy::BestCs] {
            for seed in 0..5 {
                let config = SearchConfig::preset(strategy).with_seed(seed);
                let report = prove(&flat(EVEN_ODD), 1, 3, &config);
                let Outcome::FailureProven { model } = &report.outcome else {
                    panic!("{strategy} seed {seed}: {:?}", report.outcome)
                };
                assert_eq!(model.domain_size(), 2);
                assert_eq!(report.sizes[0].result, SizeResult::Exhausted);
                // s must swap parity: s(0) != s(1) and zero differs from s(zero).
                let v = model.values();
                assert_ne!(v[0], v[1]);
            }
        }
    }

    #[test]
    fn provable_query_exhausts() {
        let report = prove(
            &flat("p(a). q :- p(X). ?- q."),
            1,
            3,
            &SearchConfig::preset(Strategy::BestCs),
        );
        assert_eq!(report.outcome, Outcome::Exhausted { max_m: 3 });
        assert_eq!(report.backtracks, 3);
    }

    #[test]
    fn budget_is_enforced() {
        let config = SearchConfig {
            budget: 0,
            ..SearchConfig::preset(Strategy::SingleCs)
        };
        let report = prove(&flat(EVEN_ODD), 1, 3, &config);
        assert_eq!(report.outcome, Outcome::BudgetExceeded { m: 1 });
    }

    #[test]
    fn conflict_blames_last_cell_and_unorders_later_cells() {
        let fp = flat(EVEN_ODD);
        let space = Arc::new(CellSpace::new(&fp.signature, 3));
        let mut st = SearchState::new(space.clone(), Ordering::Dynamic, 7);
        let comp = |st: &SearchState, c: CellId| st.interpretation().component_id(c);
        // order: s(0), s(1); s(1) is blamed.
        let cs: ConflictSet = [comp(&st, 0), comp(&st, 1)].into_iter().collect();
        let before = st.interpretation().value(1);
        assert_eq!(st.register_conflict(&cs), Step::Continue);
        assert_eq!(st.order(), &[0, 1]);
        assert_eq!(st.tried(1), 1 << before);
        assert_ne!(st.interpretation().value(1), before);
        // A conflict on s(0) alone unorders s(1).
        let cs = ConflictSet::singleton(comp(&st, 0));
        assert_eq!(st.register_conflict(&cs), Step::Continue);
        assert_eq!(st.order(), &[0]);
        assert_eq!(st.tried(1), 0);
    }

    #[test]
    fn exhausted_cell_yields_secondary_conflict() {
        let fp = flat(EVEN_ODD);
        let space = Arc::new(CellSpace::new(&fp.signature, 2));
        let mut st = SearchState::new(space, Ordering::Dynamic, 1);
        let zero = 2;
        let zc = st.interpretation().component_id(zero);
        let s0 = st.interpretation().component_id(0);
        st.register_conflict(&[s0, zc].into_iter().collect());
        // zero is last; refute its other value too.
        let zc = st.interpretation().component_id(zero);
        let s0 = st.interpretation().component_id(0);
        let step = st.register_conflict(&[s0, zc].into_iter().collect());
        assert_eq!(st.secondary_conflicts(), &[ConflictSet::singleton(s0)]);
        assert_eq!(step, Step::Continue);
        assert_ne!(st.interpretation().component_id(0), s0);
    }

    #[test]
    fn empty_conflict_is_unsat() {
        let fp = flat(EVEN_ODD);
        let space = Arc::new(CellSpace::new(&fp.signature, 2));
        let mut st = SearchState::new(space, Ordering::Dynamic, 1);
        assert_eq!(st.register_conflict(&ConflictSet::new()), Step::Unsat);
    }

    #[test]
    fn best_choice_prefers_ordered_cells_then_size() {
        let fp = flat(EVEN_ODD);
        let space = Arc::new(CellSpace::new(&fp.signature, 2));
        let mut st = SearchState::new(space, Ordering::Dynamic, 3);
        let c = |st: &SearchState, cell: CellId| st.interpretation().component_id(cell);
        st.register_conflict(&ConflictSet::singleton(c(&st, 0)));
        let a: ConflictSet = [c(&st, 0), c(&st, 1)].into_iter().collect();
        let b: ConflictSet = [c(&st, 1), c(&st, 2)].into_iter().collect();
        let answers = vec![a.clone(), b];
        assert_eq!(st.choose_conflict(&answers, ConflictChoice::Best), &a);
        assert_eq!(st.choose_conflict(&answers, ConflictChoice::Single), &a);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::Naive, Strategy::SingleCs, Strategy::BestCs] {
            assert_eq!(s.to_string().parse::<Strategy>(), Ok(s));
        }
        assert!("fast".parse::<Strategy>().is_err());
    }
}
