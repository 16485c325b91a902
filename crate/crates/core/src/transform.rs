//! Compilation of programs into the function-free form run by the tabled
//! engine.
//!
//! Every compound term is replaced by a fresh variable and a [`FlatLiteral::Cell`]
//! literal that looks up the term's value in the pre-interpretation. The
//! result satisfies two ordering rules:
//!
//! * program predicates are called with pairwise distinct, unbound variables,
//!   so each predicate is only ever called in its most general form;
//! * a variable is bound by a call or equality before any cell lookup reads it.
//!
//! Cell lookups for call arguments come right after the call; lookups for head
//! arguments come at the end of the clause. Nested arguments are computed
//! inner-first. Variables still unbound where a value is needed are enumerated
//! over the domain by [`FlatLiteral::Ground`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::syntax::{Atom, Clause, Equation, EquationKind, Mode, Program, Signature, Term};

pub type VarId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("expected a standard program, found an equational one")]
    NotStandard,
    #[error("expected an equational problem, found a standard program")]
    NotEquational,
    #[error("ordinary clauses are not allowed in an equational problem")]
    MixedMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FlatLiteral {
    /// Call of a program predicate (index into the signature's predicates).
    Call {
        pred: usize,
        args: Vec<VarId>,
    },
    /// `result = f(args)` under the pre-interpretation (index into the
    /// signature's functions). Unbound arguments are enumerated; a bound
    /// result is checked.
    Cell {
        functor: usize,
        args: Vec<VarId>,
        result: VarId,
    },
    Eq(VarId, VarId),
    Diseq(VarId, VarId),
    /// Enumerates an unbound variable over the domain.
    Ground(VarId),
}

impl FlatLiteral {
    fn vars(&self) -> Vec<VarId> {
        match self {
            FlatLiteral::Call { args, .. } => args.clone(),
            FlatLiteral::Cell { args, result, .. } => {
                let mut v = args.clone();
                v.push(*result);
                v
            }
            FlatLiteral::Eq(a, b) | FlatLiteral::Diseq(a, b) => vec![*a, *b],
            FlatLiteral::Ground(a) => vec![*a],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatClause {
    pub pred: usize,
    /// Pairwise distinct head variables.
    pub head: Vec<VarId>,
    pub body: Vec<FlatLiteral>,
    pub var_names: Vec<String>,
}

impl FlatClause {
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    /// Checks the ordering rules listed in the module docs, plus that every
    /// head variable is bound by the end of the body.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut bound = vec![false; self.num_vars()];
        let name = |v: VarId| &self.var_names[v as usize];
        for lit in &self.body {
            match lit {
                FlatLiteral::Call { args, .. } => {
                    let distinct: BTreeSet<_> = args.iter().collect();
                    if distinct.len() != args.len() {
                        return Err(format!("call with repeated arguments: {lit:?}"));
                    }
                    if let Some(&v) = args.iter().find(|&&v| bound[v as usize]) {
                        return Err(format!("call argument {} already bound", name(v)));
                    }
                }
                FlatLiteral::Eq(a, b) => {
                    if !bound[*a as usize] && !bound[*b as usize] {
                        return Err(format!(
                            "equality {} = {} between free variables",
                            name(*a),
                            name(*b)
                        ));
                    }
                }
                FlatLiteral::Diseq(a, b) => {
                    if !bound[*a as usize] || !bound[*b as usize] {
                        return Err(format!(
                            "disequality {} != {} is not ground",
                            name(*a),
                            name(*b)
                        ));
                    }
                }
                FlatLiteral::Ground(a) => {
                    if bound[*a as usize] {
                        return Err(format!("ground({}) on a bound variable", name(*a)));
                    }
                }
                FlatLiteral::Cell { .. } => {}
            }
            for v in lit.vars() {
                bound[v as usize] = true;
            }
        }
        match self.head.iter().find(|&&v| !bound[v as usize]) {
            Some(&v) => Err(format!("head variable {} is never bound", name(v))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatProgram {
    pub signature: Signature,
    pub clauses: Vec<FlatClause>,
    pub query: usize,
    by_pred: Vec<Vec<usize>>,
}

impl FlatProgram {
    fn new(signature: Signature, clauses: Vec<FlatClause>, query: usize) -> Self {
        let mut by_pred = vec![Vec::new(); signature.predicates.len()];
        for (i, c) in clauses.iter().enumerate() {
            by_pred[c.pred].push(i);
        }
        FlatProgram {
            signature,
            clauses,
            query,
            by_pred,
        }
    }

    /// Indices of the clauses defining `pred`, in program order.
    pub fn clauses_of(&self, pred: usize) -> &[usize] {
        &self.by_pred[pred]
    }

    pub fn predicate(&self, pred: usize) -> (&str, usize) {
        let (n, a) = &self.signature.predicates[pred];
        (n, *a)
    }

    pub fn functor(&self, f: usize) -> (&str, usize) {
        let (n, a) = &self.signature.functions[f];
        (n, *a)
    }
}

struct ClauseBuilder<'a> {
    sig: &'a Signature,
    names: Vec<String>,
    index: HashMap<String, VarId>,
    reserved: BTreeSet<String>,
    counter: usize,
    body: Vec<FlatLiteral>,
    seen: Vec<bool>,
}

impl<'a> ClauseBuilder<'a> {
    fn new<'b>(sig: &'a Signature, user_vars: impl IntoIterator<Item = &'b str>) -> Self {
        ClauseBuilder {
            sig,
            names: Vec::new(),
            index: HashMap::new(),
            reserved: user_vars.into_iter().map(str::to_string).collect(),
            counter: 0,
            body: Vec::new(),
            seen: Vec::new(),
        }
    }

    fn var(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = self.names.len() as VarId;
        self.names.push(name.to_string());
        self.seen.push(false);
        self.index.insert(name.to_string(), v);
        v
    }

    fn fresh(&mut self) -> VarId {
        loop {
            let name = format!("_{}", self.counter);
            self.counter += 1;
            if !self.reserved.contains(&name) {
                return self.var(&name);
            }
        }
    }

    fn push(&mut self, lit: FlatLiteral) {
        for v in lit.vars() {
            self.seen[v as usize] = true;
        }
        self.body.push(lit);
    }

    fn functor(&self, name: &str, arity: usize) -> usize {
        self.sig
            .function_index(name, arity)
            .expect("functor missing from signature")
    }

    /// Emits cell lookups computing `t`, inner terms first, and returns the
    /// variable holding its value (`target` when given).
    fn term(&mut self, t: &Term, target: Option<VarId>) -> VarId {
        match t {
            Term::Var(x) => {
                let v = self.var(x);
                if let Some(target) = target {
                    self.push(FlatLiteral::Eq(target, v));
                }
                v
            }
            Term::App(f, args) => {
                let args: Vec<VarId> = args.iter().map(|a| self.term(a, None)).collect();
                let result = target.unwrap_or_else(|| self.fresh());
                let functor = self.functor(f, args.len());
                self.push(FlatLiteral::Cell {
                    functor,
                    args,
                    result,
                });
                result
            }
        }
    }

    fn call(&mut self, atom: &Atom) {
        let pred = self
            .sig
            .predicate_index(&atom.pred, atom.arity())
            .expect("predicate missing from signature");
        let mut args = Vec::with_capacity(atom.arity());
        let mut eqs = Vec::new();
        let mut terms = Vec::new();
        for a in &atom.args {
            match a {
                Term::Var(x) => {
                    let v = self.var(x);
                    if self.seen[v as usize] || args.contains(&v) {
                        let y = self.fresh();
                        args.push(y);
                        eqs.push(FlatLiteral::Eq(y, v));
                    } else {
                        args.push(v);
                    }
                }
                Term::App(..) => {
                    let t = self.fresh();
                    args.push(t);
                    terms.push((a, t));
                }
            }
        }
        self.push(FlatLiteral::Call { pred, args });
        for eq in eqs {
            self.push(eq);
        }
        for (t, v) in terms {
            self.term(t, Some(v));
        }
    }

    /// Inserts `Ground` literals where a value is needed but none is bound.
    fn finish(self, pred: usize, head: Vec<VarId>) -> FlatClause {
        let mut bound = vec![false; self.names.len()];
        let mut body = Vec::with_capacity(self.body.len());
        for lit in self.body {
            match &lit {
                FlatLiteral::Eq(a, b) if !bound[*a as usize] && !bound[*b as usize] => {
                    body.push(FlatLiteral::Ground(*b));
                    bound[*b as usize] = true;
                }
                FlatLiteral::Diseq(a, b) => {
                    for v in [*a, *b] {
                        if !bound[v as usize] {
                            body.push(FlatLiteral::Ground(v));
                            bound[v as usize] = true;
                        }
                    }
                }
                _ => {}
            }
            for v in lit.vars() {
                bound[v as usize] = true;
            }
            body.push(lit);
        }
        for &h in &head {
            if !bound[h as usize] {
                body.push(FlatLiteral::Ground(h));
                bound[h as usize] = true;
            }
        }
        FlatClause {
            pred,
            head,
            body,
            var_names: self.names,
        }
    }
}

fn flatten_clause(sig: &Signature, clause: &Clause) -> FlatClause {
    let mut b = ClauseBuilder::new(sig, clause.variables());
    let mut head = Vec::with_capacity(clause.head.arity());
    let mut head_terms = Vec::new();
    let mut head_eqs = Vec::new();
    for a in &clause.head.args {
        match a {
            Term::Var(x) => {
                let v = b.var(x);
                if head.contains(&v) {
                    let y = b.fresh();
                    head.push(y);
                    head_eqs.push(FlatLiteral::Eq(y, v));
                } else {
                    head.push(v);
                }
            }
            Term::App(..) => {
                let t = b.fresh();
                head.push(t);
                head_terms.push((a, t));
            }
        }
    }
    for atom in &clause.body {
        b.call(atom);
    }
    for (t, v) in head_terms {
        b.term(t, Some(v));
    }
    for eq in head_eqs {
        b.push(eq);
    }
    let pred = sig
        .predicate_index(&clause.head.pred, clause.head.arity())
        .expect("head predicate missing from signature");
    b.finish(pred, head)
}

/// Compiles a standard program.
pub fn flatten(p: &Program) -> Result<FlatProgram, TransformError> {
    if p.mode != Mode::Standard {
        return Err(TransformError::NotStandard);
    }
    let sig = p.signature();
    let clauses = p.clauses.iter().map(|c| flatten_clause(&sig, c)).collect();
    let query = sig
        .predicate_index(&p.query.pred, p.query.arity())
        .expect("query predicate missing from signature");
    Ok(FlatProgram::new(sig, clauses, query))
}

fn equation_clause(sig: &Signature, e: &Equation) -> FlatClause {
    let mut b = ClauseBuilder::new(sig, e.variables());
    match e.kind {
        EquationKind::Fact => {
            // p :- ground(Vars), X1 = t1, X2 = t2, X1 != X2.
            for v in e.variables() {
                let v = b.var(v);
                b.push(FlatLiteral::Ground(v));
            }
            let x1 = b.term(&e.lhs, None);
            let x2 = b.term(&e.rhs, None);
            b.push(FlatLiteral::Diseq(x1, x2));
        }
        EquationKind::Denial => {
            // p :- X1 = s1, X2 = s2, X1 = X2.
            let x1 = b.term(&e.lhs, None);
            let x2 = b.term(&e.rhs, None);
            b.push(FlatLiteral::Eq(x1, x2));
        }
    }
    b.finish(0, Vec::new())
}

/// Compiles an equational problem into clauses for the zero-arity query
/// predicate: one clause per fact, succeeding when some instance of the fact
/// is violated, and one per denial, succeeding when some instance of the
/// denied equation holds. Equality is the identity on the domain.
pub fn equationalize(p: &Program) -> Result<FlatProgram, TransformError> {
    if p.mode != Mode::Equational {
        return Err(TransformError::NotEquational);
    }
    if !p.clauses.is_empty() {
        return Err(TransformError::MixedMode);
    }
    let mut sig = p.signature();
    sig.predicates = vec![(p.query.pred.clone(), 0)];
    let clauses = p
        .equations
        .iter()
        .map(|e| equation_clause(&sig, e))
        .collect();
    Ok(FlatProgram::new(sig, clauses, 0))
}

/// Dispatches on the program's mode.
pub fn compile(p: &Program) -> Result<FlatProgram, TransformError> {
    match p.mode {
        Mode::Standard => flatten(p),
        Mode::Equational => equationalize(p),
    }
}

fn write_vars(f: &mut fmt::Formatter<'_>, c: &FlatClause, vars: &[VarId]) -> fmt::Result {
    for (i, v) in vars.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        f.write_str(&c.var_names[*v as usize])?;
    }
    Ok(())
}

fn write_flat_clause(f: &mut fmt::Formatter<'_>, p: &FlatProgram, c: &FlatClause) -> fmt::Result {
    let (name, _) = p.predicate(c.pred);
    f.write_str(name)?;
    if !c.head.is_empty() {
        f.write_str("(")?;
        write_vars(f, c, &c.head)?;
        f.write_str(")")?;
    }
    for (i, lit) in c.body.iter().enumerate() {
        f.write_str(if i == 0 { " :- " } else { ", " })?;
        let name = |v: &VarId| c.var_names[*v as usize].as_str();
        match lit {
            FlatLiteral::Call { pred, args } => {
                f.write_str(p.predicate(*pred).0)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    write_vars(f, c, args)?;
                    f.write_str(")")?;
                }
            }
            FlatLiteral::Cell {
                functor,
                args,
                result,
            } => {
                write!(f, "cell_{}(", p.functor(*functor).0)?;
                for a in args {
                    write!(f, "{}, ", name(a))?;
                }
                write!(f, "{})", name(result))?;
            }
            FlatLiteral::Eq(a, b) => write!(f, "{} = {}", name(a), name(b))?,
            FlatLiteral::Diseq(a, b) => write!(f, "{} != {}", name(a), name(b))?,
            FlatLiteral::Ground(a) => write!(f, "ground({})", name(a))?,
        }
    }
    f.write_str(".")
}

impl fmt::Display for FlatProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            write_flat_clause(f, self, c)?;
            writeln!(f)?;
        }
        writeln!(f, "?- {}.", self.predicate(self.query).0)
    }
}

/// How conflict sets are collected during evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FaMode {
    /// Every component consulted by a derivation belongs to its conflict set.
    Elementary,
    /// Values carry the components used to compute them; a clause's conflict
    /// set only grows when two values are compared.
    Advanced,
}

impl fmt::Display for FaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaMode::Elementary => "elementary",
            FaMode::Advanced => "advanced",
        })
    }
}

/// A compiled program together with the failure analysis it is run under.
/// Every predicate implicitly gains a conflict-set output and every clause
/// ends in an answer check; the engine interprets both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstrumentedProgram {
    pub flat: FlatProgram,
    pub fa: FaMode,
}

pub fn instrument(flat: FlatProgram, fa: FaMode) -> InstrumentedProgram {
    InstrumentedProgram { flat, fa }
}

/// Prolog-style listing of the instrumented clauses: predicates carry a
/// trailing conflict-set argument, cell lookups go through `comp`, and
/// equalities through `unify`/`disunify`.
impl fmt::Display for InstrumentedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.flat;
        for c in &p.clauses {
            let name = |v: &VarId| c.var_names[*v as usize].clone();
            let list = |vs: &[VarId]| vs.iter().map(name).collect::<Vec<_>>().join(", ");
            let mut k = 0usize;
            let mut next_cs = || {
                k += 1;
                format!("CS{}", k - 1)
            };
            let mut cur: Option<String> = None;
            let mut goals = Vec::new();
            let mut bound = vec![false; c.num_vars()];
            let mut temps = 0usize;
            for lit in &c.body {
                match lit {
                    FlatLiteral::Call { pred, args } => {
                        let out = next_cs();
                        let (pname, _) = p.predicate(*pred);
                        if args.is_empty() {
                            goals.push(format!("{pname}({out})"));
                        } else {
                            goals.push(format!("{pname}({}, {out})", list(args)));
                        }
                        cur = Some(match cur.take() {
                            None => out,
                            Some(prev) => {
                                let merged = next_cs();
                                goals.push(format!("merge({prev}, {out}, {merged})"));
                                merged
                            }
                        });
                    }
                    FlatLiteral::Cell {
                        functor,
                        args,
                        result,
                    } => {
                        let fname = p.functor(*functor).0;
                        let cin = cur.clone().unwrap_or_else(|| "[]".into());
                        match self.fa {
                            FaMode::Elementary => {
                                let out = next_cs();
                                goals.push(format!(
                                    "comp(p_{fname}, [{}], {}, {cin}, {out})",
                                    list(args),
                                    name(result)
                                ));
                                cur = Some(out);
                            }
                            FaMode::Advanced if bound[*result as usize] => {
                                let tmp = format!("R{temps}");
                                temps += 1;
                                let out = next_cs();
                                goals.push(format!("comp(p_{fname}, [{}], {tmp})", list(args)));
                                goals.push(format!("unify({}, {tmp}, {cin}, {out})", name(result)));
                                cur = Some(out);
                            }
                            FaMode::Advanced => {
                                goals.push(format!(
                                    "comp(p_{fname}, [{}], {})",
                                    list(args),
                                    name(result)
                                ));
                            }
                        }
                    }
                    FlatLiteral::Eq(a, b) | FlatLiteral::Diseq(a, b) => {
                        let op = if matches!(lit, FlatLiteral::Eq(..)) {
                            "unify"
                        } else {
                            "disunify"
                        };
                        let cin = cur.clone().unwrap_or_else(|| "[]".into());
                        let out = next_cs();
                        goals.push(format!("{op}({}, {}, {cin}, {out})", name(a), name(b)));
                        cur = Some(out);
                    }
                    FlatLiteral::Ground(a) => goals.push(format!("ground({})", name(a))),
                }
                for v in lit.vars() {
                    bound[v as usize] = true;
                }
            }
            let cs = cur.unwrap_or_else(|| "[]".into());
            let (pname, _) = p.predicate(c.pred);
            let head = if c.head.is_empty() {
                format!("{pname}({cs})")
            } else {
                format!("{pname}({}, {cs})", list(&c.head))
            };
            goals.push(format!("check_return({head})"));
            writeln!(f, "{head} :- {}.", goals.join(", "))?;
        }
        Ok(())
    }
}
