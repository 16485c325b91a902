//! Built-in benchmark problems.
//!
//! Sources live in `corpus/*.pl` and are compiled into the library. Each entry
//! records the domain size the problem is usually run at and the structural
//! facts expected there: the number of program predicates (the query
//! predicate excluded) and the number of cells.

use thiserror::Error;

use crate::parser::{parse_program, ParseError};
use crate::syntax::{Mode, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("unknown problem `{0}`")]
    Unknown(String),
    #[error("corpus problem {name} does not parse: {source}")]
    Parse { name: String, source: ParseError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expectation {
    /// Some pre-interpretation of `domain_size` elements makes the query fail.
    Fails,
    /// The query succeeds in the least Herbrand model; no proof of failure exists.
    Succeeds,
    /// Not asserted.
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
    pub domain_size: usize,
    pub predicates: usize,
    pub cells: usize,
    pub expectation: Expectation,
}

impl CorpusEntry {
    pub fn program(&self) -> Result<Program, CorpusError> {
        parse_program(self.source).map_err(|source| CorpusError::Parse {
            name: self.name.to_string(),
            source,
        })
    }
}

macro_rules! entry {
    ($name:literal, $m:expr, $preds:expr, $cells:expr, $exp:ident) => {
        CorpusEntry {
            name: $name,
            source: include_str!(concat!("../corpus/", $name, ".pl")),
            domain_size: $m,
            predicates: $preds,
            cells: $cells,
            expectation: Expectation::$exp,
        }
    };
}

pub const CORPUS: &[CorpusEntry] = &[
    entry!("evenodd", 2, 2, 3, Fails),
    entry!("appendlast", 3, 2, 12, Fails),
    entry!("reverselast", 3, 2, 12, Fails),
    entry!("nreverselast", 5, 3, 28, Fails),
    entry!("multiset1o", 2, 1, 7, Fails),
    entry!("multiset2o", 2, 1, 7, Fails),
    entry!("multiset3o", 2, 1, 7, Succeeds),
    entry!("blockpair2o", 2, 3, 19, Fails),
    entry!("blockpair3o", 2, 3, 36, Fails),
    entry!("blockpair2l", 2, 5, 19, Fails),
    entry!("blockpair3l", 2, 5, 36, Fails),
    entry!("blockzero2o", 2, 3, 19, Fails),
    entry!("blockzero3o", 2, 3, 35, Fails),
    entry!("blockzero2l", 2, 5, 19, Fails),
    entry!("blockzero3l", 2, 5, 35, Fails),
    entry!("blockzero2ls", 2, 5, 19, Succeeds),
    entry!("tba", 3, 1, 32, Fails),
    entry!("grp", 2, 1, 17, Fails),
    entry!("cl3", 3, 1, 12, Fails),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    CORPUS.iter().map(|e| e.name)
}

pub fn entry(name: &str) -> Result<&'static CorpusEntry, CorpusError> {
    CORPUS
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| CorpusError::Unknown(name.to_string()))
}

pub fn load(name: &str) -> Result<Program, CorpusError> {
    entry(name)?.program()
}

/// Predicates of the program proper: the query predicate is excluded, and an
/// equational problem has the single equality predicate.
pub fn program_predicates(p: &Program) -> usize {
    match p.mode {
        Mode::Equational => 1,
        Mode::Standard => p.signature().predicates.len() - 1,
    }
}
