//! Brute-force reference semantics, independent of the compiler and the tabled
//! engine.
//!
//! [`least_model`] iterates the immediate-consequence operator of the original
//! program over the domain, trying every assignment of clause variables.
//! [`exhaustive_verdict`] runs it for every pre-interpretation of a size.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

use crate::parser::parse_program;
use crate::preinterp::{CellSpace, PreInterpretation, Value};
use crate::syntax::{Atom, EquationKind, Mode, Program, Signature, Term};

pub const DEFAULT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{count} pre-interpretations exceed the cap of {cap}")]
    TooMany { count: BigUint, cap: u64 },
}

/// Ground atoms over the domain, one relation per predicate of the signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    pub signature: Signature,
    pub relations: Vec<BTreeSet<Vec<Value>>>,
}

impl Model {
    pub fn contains(&self, pred: &str, tuple: &[Value]) -> bool {
        self.signature
            .predicate_index(pred, tuple.len())
            .is_some_and(|i| self.relations[i].contains(tuple))
    }

    pub fn relation(&self, pred: &str, arity: usize) -> Option<&BTreeSet<Vec<Value>>> {
        self.signature
            .predicate_index(pred, arity)
            .map(|i| &self.relations[i])
    }

    pub fn len(&self) -> usize {
        self.relations.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Evaluator<'a> {
    sig: Signature,
    j: &'a PreInterpretation,
}

impl Evaluator<'_> {
    fn term(&self, t: &Term, vars: &[&str], env: &[Value]) -> Value {
        match t {
            Term::Var(x) => env[vars.iter().position(|v| v == x).expect("bound variable")],
            Term::App(f, args) => {
                let values: Vec<Value> = args.iter().map(|a| self.term(a, vars, env)).collect();
                let functor = self
                    .sig
                    .function_index(f, args.len())
                    .expect("functor in signature");
                self.j.value(self.j.space().cell_id(functor, &values))
            }
        }
    }

    fn atom(&self, a: &Atom, vars: &[&str], env: &[Value]) -> (usize, Vec<Value>) {
        let pred = self
            .sig
            .predicate_index(&a.pred, a.arity())
            .expect("predicate in signature");
        (
            pred,
            a.args.iter().map(|t| self.term(t, vars, env)).collect(),
        )
    }
}

/// Calls `f` with every assignment of `n` variables over `0..m`.
fn for_each_assignment(n: usize, m: Value, mut f: impl FnMut(&[Value])) {
    let mut env = vec![0; n];
    loop {
        f(&env);
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            env[i] += 1;
            if env[i] < m {
                break;
            }
            env[i] = 0;
            i += 1;
        }
    }
}

fn check_signature(p: &Program, j: &PreInterpretation) -> Signature {
    let sig = p.signature();
    assert_eq!(
        j.space().functors(),
        &sig.functions[..],
        "pre-interpretation built for a different signature"
    );
    sig
}

/// Least model of a standard program over the domain of `j`, by naive
/// iteration to a fixpoint.
///
/// For an equational problem the model holds the query atom exactly when some
/// fact is violated or some denied equation holds.
pub fn least_model(p: &Program, j: &PreInterpretation) -> Model {
    fixpoint(p, j, false)
}

/// Same model, computed semi-naively: after the first round only clause
/// instances with a body atom derived in the previous round are considered.
pub fn least_model_semi_naive(p: &Program, j: &PreInterpretation) -> Model {
    fixpoint(p, j, true)
}

fn fixpoint(p: &Program, j: &PreInterpretation, semi_naive: bool) -> Model {
    let sig = check_signature(p, j);
    let mut relations = vec![BTreeSet::new(); sig.predicates.len()];
    if p.mode == Mode::Equational {
        if equational_query_holds(p, j) {
            relations[sig.predicate_index(&p.query.pred, 0).expect("query")].insert(Vec::new());
        }
        return Model {
            signature: sig,
            relations,
        };
    }
    let ev = Evaluator { sig, j };
    let m = j.domain_size() as Value;
    let mut delta: Vec<BTreeSet<Vec<Value>>> = vec![BTreeSet::new(); relations.len()];
    let mut first = true;
    loop {
        let mut new: Vec<BTreeSet<Vec<Value>>> = vec![BTreeSet::new(); relations.len()];
        for c in &p.clauses {
            if semi_naive && !first && c.body.is_empty() {
                continue;
            }
            let vars = c.variables();
            for_each_assignment(vars.len(), m, |env| {
                let mut uses_delta = false;
                for b in &c.body {
                    let (pred, tuple) = ev.atom(b, &vars, env);
                    if !relations[pred].contains(&tuple) {
                        return;
                    }
                    uses_delta |= delta[pred].contains(&tuple);
                }
                if semi_naive && !first && !uses_delta {
                    return;
                }
                let (pred, tuple) = ev.atom(&c.head, &vars, env);
                if !relations[pred].contains(&tuple) {
                    new[pred].insert(tuple);
                }
            });
        }
        if new.iter().all(BTreeSet::is_empty) {
            break;
        }
        for (r, n) in relations.iter_mut().zip(&new) {
            r.extend(n.iter().cloned());
        }
        delta = new;
        first = false;
    }
    Model {
        signature: ev.sig,
        relations,
    }
}

fn equational_query_holds(p: &Program, j: &PreInterpretation) -> bool {
    let ev = Evaluator {
        sig: p.signature(),
        j,
    };
    let m = j.domain_size() as Value;
    p.equations.iter().any(|e| {
        let vars = e.variables();
        let mut hit = false;
        for_each_assignment(vars.len(), m, |env| {
            if !hit {
                let equal = ev.term(&e.lhs, &vars, env) == ev.term(&e.rhs, &vars, env);
                hit = match e.kind {
                    EquationKind::Fact => !equal,
                    EquationKind::Denial => equal,
                };
            }
        });
        hit
    })
}

/// Whether the query succeeds under `j`.
pub fn query_holds(p: &Program, j: &PreInterpretation) -> bool {
    if p.mode == Mode::Equational {
        check_signature(p, j);
        return equational_query_holds(p, j);
    }
    least_model(p, j).contains(&p.query.pred, &[])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    pub m: usize,
    pub cells: usize,
    pub total: u64,
    /// Pre-interpretations under which the query fails.
    pub failing: u64,
    /// The first failing pre-interpretation in enumeration order.
    pub example: Option<PreInterpretation>,
}

/// The `index`-th pre-interpretation, reading `index` in base `m` with the
/// first cell as the most significant digit.
pub fn nth_interpretation(space: &Arc<CellSpace>, mut index: u64) -> PreInterpretation {
    let m = space.domain_size() as u64;
    let mut values = vec![0; space.len()];
    for v in values.iter_mut().rev() {
        *v = (index % m) as Value;
        index /= m;
    }
    PreInterpretation::new(space.clone(), values).expect("values in range")
}

/// Evaluates the query under every pre-interpretation of size `m`.
pub fn exhaustive_verdict(p: &Program, m: usize, cap: u64) -> Result<OracleReport, OracleError> {
    let sig = p.signature();
    let space = Arc::new(CellSpace::new(&sig, m));
    let count = space.assignment_count();
    let total = match count.to_u64() {
        Some(t) if t <= cap => t,
        _ => return Err(OracleError::TooMany { count, cap }),
    };
    let failing: Vec<u64> = (0..total)
        .into_par_iter()
        .filter(|&i| !query_holds(p, &nth_interpretation(&space, i)))
        .collect();
    Ok(OracleReport {
        m,
        cells: space.len(),
        total,
        failing: failing.len() as u64,
        example: failing.first().map(|&i| nth_interpretation(&space, i)),
    })
}

/// Reflexivity, symmetry, transitivity and substitution for `eq/2` over the
/// given function symbols.
pub fn equality_theory(functions: &[(&str, usize)]) -> Program {
    let mut src =
        String::from("eq(X, X).\neq(Y, X) :- eq(X, Y).\neq(X, Z) :- eq(X, Y), eq(Y, Z).\n");
    for &(f, n) in functions {
        if n == 0 {
            src.push_str(&format!("eq({f}, {f}).\n"));
            continue;
        }
        let xs: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
        let ys: Vec<String> = (1..=n).map(|i| format!("Y{i}")).collect();
        let body: Vec<String> = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| format!("eq({x}, {y})"))
            .collect();
        src.push_str(&format!(
            "eq({f}({}), {f}({})) :- {}.\n",
            xs.join(", "),
            ys.join(", "),
            body.join(", ")
        ));
    }
    src.push_str("?- eq(X, X).\n");
    parse_program(&src).expect("generated equality theory parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    const EVEN_ODD: &str = "even(zero). even(s(X)) :- odd(X). odd(s(X)) :- even(X). \
                            even_odd :- even(X), odd(X). ?- even_odd.";

    fn space(p: &Program, m: usize) -> Arc<CellSpace> {
        Arc::new(CellSpace::new(&p.signature(), m))
    }

    #[test]
    fn even_odd_models() {
        let p = parse_program(EVEN_ODD).unwrap();
        let sp = space(&p, 2);
        let parity = PreInterpretation::new(sp.clone(), vec![1, 0, 0]).unwrap();
        let model = least_model(&p, &parity);
        assert!(model.contains("even", &[0]));
        assert!(model.contains("odd", &[1]));
        assert!(!model.contains("even", &[1]));
        assert!(!query_holds(&p, &parity));
        assert!(query_holds(&p, &PreInterpretation::uniform(sp, 0)));
    }

    #[test]
    fn even_odd_exhaustive() {
        let p = parse_program(EVEN_ODD).unwrap();
        let r = exhaustive_verdict(&p, 2, DEFAULT_CAP).unwrap();
        assert_eq!((r.total, r.cells), (8, 3));
        // s must swap the two elements: zero is free, so 2 of 8.
        assert_eq!(r.failing, 2);
        assert!(exhaustive_verdict(&p, 1, DEFAULT_CAP).unwrap().failing == 0);
    }

    #[test]
    fn cap_is_enforced() {
        let p = parse_program(EVEN_ODD).unwrap();
        assert!(matches!(
            exhaustive_verdict(&p, 2, 7),
            Err(OracleError::TooMany { .. })
        ));
    }

    #[test]
    fn nth_interpretation_is_big_endian() {
        let p = parse_program(EVEN_ODD).unwrap();
        let sp = space(&p, 2);
        assert_eq!(nth_interpretation(&sp, 4).values(), &[1, 0, 0]);
        assert_eq!(nth_interpretation(&sp, 1).values(), &[0, 0, 1]);
    }

    #[test]
    fn semi_naive_agrees() {
        let p = parse_program(EVEN_ODD).unwrap();
        let sp = space(&p, 3);
        for i in 0..27 {
            let j = nth_interpretation(&sp, i);
            assert_eq!(least_model(&p, &j), least_model_semi_naive(&p, &j));
        }
    }

    #[test]
    fn equational_direct_evaluation() {
        let p = parse_program("#equational.\nf(X) = X.\na != b.\n").unwrap();
        let sp = space(&p, 2);
        // cells: a, b, f(0), f(1)
        let ok = PreInterpretation::new(sp.clone(), vec![0, 1, 0, 1]).unwrap();
        assert!(!query_holds(&p, &ok));
        assert!(least_model(&p, &ok).is_empty());
        let bad = PreInterpretation::new(sp, vec![0, 0, 0, 1]).unwrap();
        assert!(query_holds(&p, &bad));
        assert!(least_model(&p, &bad).contains("p", &[]));
    }

    #[test]
    fn equality_theory_is_identity() {
        let p = equality_theory(&[("f", 1), ("c", 0)]);
        let sp = space(&p, 2);
        let identity: BTreeSet<Vec<Value>> = (0..2).map(|v| vec![v, v]).collect();
        for i in 0..8 {
            let model = least_model(&p, &nth_interpretation(&sp, i));
            assert_eq!(model.relation("eq", 2), Some(&identity));
        }
    }
}
