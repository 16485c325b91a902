//! Reader for the problem input format.
//!
//! ```text
//! clause   := atom ( ":-" atom ( "," atom )* )? "."
//! query    := "?-" atom ( "," atom )* "."
//! directive:= "#equational" "."
//! equation := term ( "=" | "!=" ) term "."      (equational mode only)
//! ```
//!
//! `%` starts a comment running to the end of the line. Variables start with
//! an uppercase letter or `_`; a lone `_` is anonymous and receives a fresh
//! name. Lists are sugar for `cons/2` and `nil/0`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::syntax::{
    ArityMap, Atom, Clause, Equation, EquationKind, Mode, Program, Term, CONS, EQUATIONAL_QUERY,
    NIL,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{kind} {name} is used with arity {first} and with arity {second}")]
    Arity {
        kind: &'static str,
        name: String,
        first: usize,
        second: usize,
    },
    #[error("predicate {name}/{arity} is called but never defined")]
    UndefinedPredicate { name: String, arity: usize },
    #[error("no query: expected a `?- goal.` directive")]
    MissingQuery,
    #[error("{line}:{col}: only one query is allowed")]
    DuplicateQuery { line: usize, col: usize },
    #[error("{line}:{col}: {message}")]
    MixedMode {
        line: usize,
        col: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Bar,
    Comma,
    Dot,
    Neck,
    QueryNeck,
    Eq,
    NotEq,
    Directive(String),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Var(s) => format!("variable `{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::QueryNeck => "`?-`".into(),
            Tok::Eq => "`=`".into(),
            Tok::NotEq => "`!=`".into(),
            Tok::Directive(d) => format!("`#{d}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let ident_char = |c: char| c.is_ascii_alphanumeric() || c == '_';
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two = chars.get(i + 1).copied();
        let tok = match (c, two) {
            (':', Some('-')) => {
                advance(2, &mut i, &mut col);
                Tok::Neck
            }
            ('?', Some('-')) => {
                advance(2, &mut i, &mut col);
                Tok::QueryNeck
            }
            ('!', Some('=')) => {
                advance(2, &mut i, &mut col);
                Tok::NotEq
            }
            _ if c.is_ascii_lowercase()
                || c.is_ascii_digit()
                || c.is_ascii_uppercase()
                || c == '_' =>
            {
                let start = i;
                while i < chars.len() && ident_char(chars[i]) {
                    i += 1;
                }
                col += i - start;
                let word: String = chars[start..i].iter().collect();
                if c.is_ascii_digit() && !word.chars().all(|d| d.is_ascii_digit()) {
                    return Err(ParseError::Syntax {
                        line: l0,
                        col: c0,
                        message: format!("malformed numeric constant `{word}`"),
                    });
                }
                if c.is_ascii_uppercase() || c == '_' {
                    Tok::Var(word)
                } else {
                    Tok::Ident(word)
                }
            }
            ('#', _) => {
                let start = i + 1;
                i += 1;
                while i < chars.len() && ident_char(chars[i]) {
                    i += 1;
                }
                col += i - start + 1;
                Tok::Directive(chars[start..i].iter().collect())
            }
            _ => {
                let t = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '|' => Tok::Bar,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    '=' => Tok::Eq,
                    _ => {
                        return Err(ParseError::Syntax {
                            line: l0,
                            col: c0,
                            message: format!("unexpected character `{c}`"),
                        })
                    }
                };
                advance(1, &mut i, &mut col);
                t
            }
        };
        out.push(Spanned {
            tok,
            line: l0,
            col: c0,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, at: &Spanned, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: at.line,
            col: at.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<Spanned, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.error_at(
                &t,
                format!("expected {}, found {}", want.describe(), t.tok.describe()),
            ))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if &self.peek().tok == want {
            self.next();
            true
        } else {
            false
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Ident(name) => Ok(Term::App(name, self.args()?)),
            Tok::LBracket => self.list_tail(),
            other => Err(self.error_at(&t, format!("expected a term, found {}", other.describe()))),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        if !self.eat(&Tok::LParen) {
            return Ok(Vec::new());
        }
        let mut args = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    // Called after `[`.
    fn list_tail(&mut self) -> Result<Term, ParseError> {
        if self.eat(&Tok::RBracket) {
            return Ok(Term::constant(NIL));
        }
        let mut items = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            items.push(self.term()?);
        }
        let tail = if self.eat(&Tok::Bar) {
            self.term()?
        } else {
            Term::constant(NIL)
        };
        self.expect(Tok::RBracket)?;
        Ok(items
            .into_iter()
            .rev()
            .fold(tail, |acc, item| Term::app(CONS, vec![item, acc])))
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Ident(name) => Ok(Atom::new(name, self.args()?)),
            other => Err(self.error_at(
                &t,
                format!("expected a predicate, found {}", other.describe()),
            )),
        }
    }

    fn goals(&mut self) -> Result<Vec<Atom>, ParseError> {
        let mut goals = vec![self.atom()?];
        while self.eat(&Tok::Comma) {
            goals.push(self.atom()?);
        }
        Ok(goals)
    }
}

/// Parses and validates a program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut mode = Mode::Standard;
    let mut clauses = Vec::new();
    let mut equations = Vec::new();
    let mut query_goals: Option<Vec<Atom>> = None;

    loop {
        let start = p.peek().clone();
        match &start.tok {
            Tok::Eof => break,
            Tok::Directive(d) => {
                if d != "equational" {
                    return Err(p.error_at(&start, format!("unknown directive `#{d}`")));
                }
                p.next();
                p.expect(Tok::Dot)?;
                if !clauses.is_empty() || query_goals.is_some() {
                    return Err(ParseError::MixedMode {
                        line: start.line,
                        col: start.col,
                        message: "`#equational.` must precede every clause".into(),
                    });
                }
                mode = Mode::Equational;
            }
            Tok::QueryNeck => {
                if mode == Mode::Equational {
                    return Err(ParseError::MixedMode {
                        line: start.line,
                        col: start.col,
                        message: "equational problems have an implicit query".into(),
                    });
                }
                p.next();
                if query_goals.is_some() {
                    return Err(ParseError::DuplicateQuery {
                        line: start.line,
                        col: start.col,
                    });
                }
                query_goals = Some(p.goals()?);
                p.expect(Tok::Dot)?;
            }
            _ if mode == Mode::Equational => {
                let lhs = p.term()?;
                let op = p.next();
                let kind = match op.tok.clone() {
                    Tok::Eq => EquationKind::Fact,
                    Tok::NotEq => EquationKind::Denial,
                    Tok::Neck | Tok::Dot => {
                        return Err(ParseError::MixedMode {
                            line: start.line,
                            col: start.col,
                            message: "ordinary clauses are not allowed in equational mode".into(),
                        })
                    }
                    other => {
                        return Err(p.error_at(
                            &op,
                            format!("expected `=` or `!=`, found {}", other.describe()),
                        ))
                    }
                };
                let rhs = p.term()?;
                p.expect(Tok::Dot)?;
                equations.push(Equation { kind, lhs, rhs });
            }
            _ => {
                let head = p.atom()?;
                let body = if p.eat(&Tok::Neck) {
                    p.goals()?
                } else {
                    Vec::new()
                };
                let end = p.next();
                match end.tok.clone() {
                    Tok::Dot => {}
                    Tok::Eq | Tok::NotEq => {
                        return Err(ParseError::MixedMode {
                            line: end.line,
                            col: end.col,
                            message: "equations require the `#equational.` directive".into(),
                        })
                    }
                    other => {
                        return Err(
                            p.error_at(&end, format!("expected `.`, found {}", other.describe()))
                        )
                    }
                }
                clauses.push(Clause { head, body });
            }
        }
    }

    let query = match mode {
        Mode::Equational => Atom::new(EQUATIONAL_QUERY, Vec::new()),
        Mode::Standard => {
            let goals = query_goals.ok_or(ParseError::MissingQuery)?;
            if goals.len() == 1 && goals[0].args.is_empty() {
                goals.into_iter().next().unwrap()
            } else {
                let name = wrapper_name(&clauses);
                let head = Atom::new(name, Vec::new());
                clauses.push(Clause {
                    head: head.clone(),
                    body: goals,
                });
                head
            }
        }
    };

    for c in &mut clauses {
        name_anonymous(c);
    }
    for e in &mut equations {
        name_anonymous_in_equation(e);
    }

    let program = Program {
        mode,
        clauses,
        equations,
        query,
    };
    validate(&program)?;
    Ok(program)
}

fn wrapper_name(clauses: &[Clause]) -> String {
    let used: BTreeSet<&str> = clauses
        .iter()
        .flat_map(|c| std::iter::once(&c.head).chain(&c.body))
        .map(|a| a.pred.as_str())
        .collect();
    std::iter::once("query".to_string())
        .chain((1..).map(|i| format!("query_{i}")))
        .find(|n| !used.contains(n.as_str()))
        .unwrap()
}

fn fresh_names(used: BTreeSet<String>) -> impl FnMut() -> String {
    let mut counter = 0usize;
    move || loop {
        let name = format!("_G{counter}");
        counter += 1;
        if !used.contains(&name) {
            return name;
        }
    }
}

fn name_anonymous(c: &mut Clause) {
    let used: BTreeSet<String> = c.variables().into_iter().map(str::to_string).collect();
    if !used.contains("_") {
        return;
    }
    let mut fresh = fresh_names(used);
    c.rename_vars(|v| (v == "_").then(&mut fresh));
}

fn name_anonymous_in_equation(e: &mut Equation) {
    let used: BTreeSet<String> = e.variables().into_iter().map(str::to_string).collect();
    if !used.contains("_") {
        return;
    }
    let mut fresh = fresh_names(used);
    fn walk(t: &mut Term, f: &mut dyn FnMut() -> String) {
        match t {
            Term::Var(v) if v == "_" => *v = f(),
            Term::Var(_) => {}
            Term::App(_, args) => args.iter_mut().for_each(|a| walk(a, f)),
        }
    }
    walk(&mut e.lhs, &mut fresh);
    walk(&mut e.rhs, &mut fresh);
}

fn validate(p: &Program) -> Result<(), ParseError> {
    let mut functions = ArityMap::default();
    let mut predicates = ArityMap::default();
    let mut function_error = None;
    let mut check_term = |t: &Term| {
        t.for_each_functor(&mut |name, arity| {
            if function_error.is_none() {
                if let Err(first) = functions.check(name, arity) {
                    function_error = Some(ParseError::Arity {
                        kind: "function",
                        name: name.to_string(),
                        first,
                        second: arity,
                    });
                }
            }
        })
    };
    for c in &p.clauses {
        for atom in std::iter::once(&c.head).chain(&c.body) {
            atom.args.iter().for_each(&mut check_term);
        }
    }
    for e in &p.equations {
        check_term(&e.lhs);
        check_term(&e.rhs);
    }
    if let Some(e) = function_error {
        return Err(e);
    }
    let atoms = p
        .clauses
        .iter()
        .flat_map(|c| std::iter::once(&c.head).chain(&c.body))
        .chain(std::iter::once(&p.query));
    for atom in atoms {
        if let Err(first) = predicates.check(&atom.pred, atom.arity()) {
            return Err(ParseError::Arity {
                kind: "predicate",
                name: atom.pred.clone(),
                first,
                second: atom.arity(),
            });
        }
    }
    if p.mode == Mode::Standard {
        let defined: BTreeSet<(&str, usize)> = p
            .clauses
            .iter()
            .map(|c| (c.head.pred.as_str(), c.head.arity()))
            .collect();
        let called = p
            .clauses
            .iter()
            .flat_map(|c| &c.body)
            .chain(std::iter::once(&p.query));
        for atom in called {
            if !defined.contains(&(atom.pred.as_str(), atom.arity())) {
                return Err(ParseError::UndefinedPredicate {
                    name: atom.pred.clone(),
                    arity: atom.arity(),
                });
            }
        }
    }
    Ok(())
}
