//! Conflict sets and annotated values.
//!
//! A conflict set is a set of components. Component ids are dense
//! (`cell * m + value`), so a set is stored as a bitset and iterates in
//! ascending id order, which is the canonical order used everywhere.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

use crate::preinterp::{ComponentId, Value};

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct ConflictSet {
    // Invariant: no trailing zero words.
    words: SmallVec<[u64; 2]>,
}

impl ConflictSet {
    pub fn new() -> Self {
        ConflictSet::default()
    }

    pub fn singleton(c: ComponentId) -> Self {
        let mut s = ConflictSet::new();
        s.insert(c);
        s
    }

    pub fn insert(&mut self, c: ComponentId) {
        let (w, b) = (c as usize / 64, c % 64);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1u64 << b;
    }

    pub fn remove(&mut self, c: ComponentId) {
        let (w, b) = (c as usize / 64, c % 64);
        if let Some(word) = self.words.get_mut(w) {
            *word &= !(1u64 << b);
            self.trim();
        }
    }

    pub fn contains(&self, c: ComponentId) -> bool {
        let (w, b) = (c as usize / 64, c % 64);
        self.words
            .get(w)
            .is_some_and(|word| word & (1u64 << b) != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Canonical union.
    pub fn merge(&self, other: &ConflictSet) -> ConflictSet {
        let mut out = self.clone();
        out.merge_in(other);
        out
    }

    pub fn merge_in(&mut self, other: &ConflictSet) {
        if self.words.len() < other.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn is_subset(&self, other: &ConflictSet) -> bool {
        self.words.len() <= other.words.len()
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    /// Component ids in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                (rest != 0).then(|| {
                    let b = rest.trailing_zeros();
                    rest &= rest - 1;
                    i as u32 * 64 + b
                })
            })
        })
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<ComponentId> for ConflictSet {
    fn from_iter<I: IntoIterator<Item = ComponentId>>(iter: I) -> Self {
        let mut s = ConflictSet::new();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

/// Lexicographic order on the ascending id sequences.
impl Ord for ConflictSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for ConflictSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ConflictSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A domain element together with the components used to compute it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AnnotatedValue {
    pub value: Value,
    pub provenance: ConflictSet,
}

impl AnnotatedValue {
    pub fn new(value: Value, provenance: ConflictSet) -> Self {
        AnnotatedValue { value, provenance }
    }

    pub fn bare(value: Value) -> Self {
        AnnotatedValue::new(value, ConflictSet::new())
    }
}

/// A variable slot during evaluation: free, or bound to an annotated value.
pub type Slot = Option<AnnotatedValue>;

/// Unification of two slots, monitored for conflict-set bookkeeping.
///
/// A free side is bound to the other and `cs` is returned unchanged. When both
/// are bound to the same element their provenances join `cs`; different
/// elements fail. Two free slots cannot occur in compiled clauses.
pub fn monitored_unify(x: &mut Slot, y: &mut Slot, cs: &ConflictSet) -> Option<ConflictSet> {
    match (x.as_ref(), y.as_ref()) {
        (None, Some(v)) => {
            *x = Some(v.clone());
            Some(cs.clone())
        }
        (Some(v), None) => {
            *y = Some(v.clone());
            Some(cs.clone())
        }
        (Some(a), Some(b)) => (a.value == b.value).then(|| {
            let mut out = cs.merge(&a.provenance);
            out.merge_in(&b.provenance);
            out
        }),
        (None, None) => panic!("monitored_unify: both sides are free"),
    }
}

/// Disequality of two ground values: succeeds when they differ, adding both
/// provenances to `cs`.
pub fn monitored_disunify(
    x: &AnnotatedValue,
    y: &AnnotatedValue,
    cs: &ConflictSet,
) -> Option<ConflictSet> {
    (x.value != y.value).then(|| {
        let mut out = cs.merge(&x.provenance);
        out.merge_in(&y.provenance);
        out
    })
}
