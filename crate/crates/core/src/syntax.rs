//! Abstract syntax of definite programs, queries and equational problems.
//!
//! Terms are first-order: a variable or a functor applied to arguments. A
//! constant is a functor with no arguments. List sugar is removed by the
//! parser, so `[H|T]` is stored as `cons(H, T)` and `[]` as `nil`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Functor used for non-empty lists.
pub const CONS: &str = "cons";
/// Constant used for the empty list.
pub const NIL: &str = "nil";
/// Name of the predicate whose failure encodes an equational problem.
pub const EQUATIONAL_QUERY: &str = "p";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::App(name.into(), Vec::new())
    }

    pub fn app(name: impl Into<String>, args: Vec<Term>) -> Self {
        Term::App(name.into(), args)
    }

    /// Visits every variable occurrence, left to right.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Term::Var(v) => f(v),
            Term::App(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }

    /// Visits every functor occurrence as `(name, arity)`.
    pub fn for_each_functor<'a>(&'a self, f: &mut impl FnMut(&'a str, usize)) {
        if let Term::App(name, args) = self {
            f(name, args.len());
            args.iter().for_each(|a| a.for_each_functor(f));
        }
    }

    fn rename_vars(&mut self, f: &mut impl FnMut(&str) -> Option<String>) {
        match self {
            Term::Var(v) => {
                if let Some(n) = f(v) {
                    *v = n;
                }
            }
            Term::App(_, args) => args.iter_mut().for_each(|a| a.rename_vars(f)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::App(name, args) => {
                f.write_str(name)?;
                write_args(f, args)
            }
        }
    }
}

fn write_args<T: fmt::Display>(f: &mut fmt::Formatter<'_>, args: &[T]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        write_args(f, &self.args)
    }
}

/// A definite clause `head :- body`. An empty body is a fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn fact(head: Atom) -> Self {
        Clause {
            head,
            body: Vec::new(),
        }
    }

    /// Variable names in order of first occurrence (head first).
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for atom in std::iter::once(&self.head).chain(&self.body) {
            for t in &atom.args {
                t.for_each_var(&mut |v| {
                    if seen.insert(v) {
                        out.push(v);
                    }
                });
            }
        }
        out
    }

    pub(crate) fn rename_vars(&mut self, mut f: impl FnMut(&str) -> Option<String>) {
        for atom in std::iter::once(&mut self.head).chain(self.body.iter_mut()) {
            for t in &mut atom.args {
                t.rename_vars(&mut f);
            }
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{b}")?;
        }
        f.write_str(".")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EquationKind {
    /// `lhs = rhs` must hold for every value of its variables.
    Fact,
    /// `lhs != rhs`: the equation must be false for every value of its variables.
    Denial,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Equation {
    pub kind: EquationKind,
    pub lhs: Term,
    pub rhs: Term,
}

impl Equation {
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in [&self.lhs, &self.rhs] {
            t.for_each_var(&mut |v| {
                if seen.insert(v) {
                    out.push(v);
                }
            });
        }
        out
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.kind {
            EquationKind::Fact => "=",
            EquationKind::Denial => "!=",
        };
        write!(f, "{} {op} {}.", self.lhs, self.rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Standard,
    Equational,
}

/// A parsed problem: either a definite program with a zero-arity query, or
/// an equational problem made of facts and denials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub mode: Mode,
    pub clauses: Vec<Clause>,
    pub equations: Vec<Equation>,
    pub query: Atom,
}

impl Program {
    pub fn signature(&self) -> Signature {
        Signature::of(self)
    }

    /// Clauses whose head predicate is `name/arity`.
    pub fn clauses_for<'a>(
        &'a self,
        name: &'a str,
        arity: usize,
    ) -> impl Iterator<Item = &'a Clause> {
        self.clauses
            .iter()
            .filter(move |c| c.head.pred == name && c.head.arity() == arity)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Mode::Standard => {
                for c in &self.clauses {
                    writeln!(f, "{c}")?;
                }
                writeln!(f, "?- {}.", self.query)
            }
            Mode::Equational => {
                writeln!(f, "#equational.")?;
                for e in &self.equations {
                    writeln!(f, "{e}")?;
                }
                Ok(())
            }
        }
    }
}

/// Function symbols and predicates of a program, each sorted by name then arity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Signature {
    pub functions: Vec<(String, usize)>,
    pub predicates: Vec<(String, usize)>,
}

impl Signature {
    pub fn of(p: &Program) -> Self {
        let mut functions = BTreeSet::new();
        let mut predicates = BTreeSet::new();
        let mut add_term = |t: &Term| {
            t.for_each_functor(&mut |n, a| {
                functions.insert((n.to_string(), a));
            })
        };
        for c in &p.clauses {
            for atom in std::iter::once(&c.head).chain(&c.body) {
                predicates.insert((atom.pred.clone(), atom.arity()));
                atom.args.iter().for_each(&mut add_term);
            }
        }
        for e in &p.equations {
            add_term(&e.lhs);
            add_term(&e.rhs);
        }
        predicates.insert((p.query.pred.clone(), p.query.arity()));
        Signature {
            functions: functions.into_iter().collect(),
            predicates: predicates.into_iter().collect(),
        }
    }

    pub fn function_index(&self, name: &str, arity: usize) -> Option<usize> {
        self.functions
            .binary_search_by(|(n, a)| (n.as_str(), *a).cmp(&(name, arity)))
            .ok()
    }

    pub fn predicate_index(&self, name: &str, arity: usize) -> Option<usize> {
        self.predicates
            .binary_search_by(|(n, a)| (n.as_str(), *a).cmp(&(name, arity)))
            .ok()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &[(String, usize)]| {
            xs.iter()
                .map(|(n, a)| format!("{n}/{a}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        write!(
            f,
            "functions {{{}}}, predicates {{{}}}",
            list(&self.functions),
            list(&self.predicates)
        )
    }
}

/// Records the first arity seen for each name, reporting the first clash.
#[derive(Default)]
pub(crate) struct ArityMap(BTreeMap<String, usize>);

impl ArityMap {
    pub(crate) fn check(&mut self, name: &str, arity: usize) -> Result<(), usize> {
        match self.0.get(name) {
            Some(&a) if a != arity => Err(a),
            Some(_) => Ok(()),
            None => {
                self.0.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }
}
