//! Finite domains, cells, components and pre-interpretations.
//!
//! Cells are interned once per (signature, domain size) in a [`CellSpace`]:
//! cell ids follow the canonical order (functor order, then argument tuple in
//! lexicographic order) and component ids are `cell * m + value`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conflict::ConflictSet;
use crate::syntax::Signature;

/// A domain element, `0..m`.
pub type Value = u32;
pub type CellId = u32;
pub type ComponentId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreinterpError {
    #[error("cell {0} is not part of this pre-interpretation")]
    UnknownCell(String),
    #[error("value {value} is outside the domain of size {m}")]
    ValueOutOfRange { value: Value, m: usize },
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
}

/// A function symbol applied to domain elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub functor: String,
    pub args: Vec<Value>,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.functor)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

/// A cell together with its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Component {
    pub cell: CellId,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSpace {
    m: usize,
    functors: Vec<(String, usize)>,
    offsets: Vec<CellId>,
    len: usize,
}

impl CellSpace {
    pub fn new(sig: &Signature, m: usize) -> Self {
        assert!(m >= 1, "domain size must be at least 1");
        let mut offsets = Vec::with_capacity(sig.functions.len());
        let mut len = 0usize;
        for (_, arity) in &sig.functions {
            offsets.push(len as CellId);
            len += m.pow(*arity as u32);
        }
        CellSpace {
            m,
            functors: sig.functions.clone(),
            offsets,
            len,
        }
    }

    pub fn domain_size(&self) -> usize {
        self.m
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn functors(&self) -> &[(String, usize)] {
        &self.functors
    }

    pub fn functor_index(&self, name: &str, arity: usize) -> Option<usize> {
        self.functors
            .binary_search_by(|(n, a)| (n.as_str(), *a).cmp(&(name, arity)))
            .ok()
    }

    pub fn cell_id(&self, functor: usize, args: &[Value]) -> CellId {
        debug_assert_eq!(args.len(), self.functors[functor].1);
        let m = self.m as CellId;
        self.offsets[functor] + args.iter().fold(0, |acc, &a| acc * m + a)
    }

    pub fn id_of(&self, cell: &Cell) -> Option<CellId> {
        let f = self.functor_index(&cell.functor, cell.args.len())?;
        cell.args
            .iter()
            .all(|&a| (a as usize) < self.m)
            .then(|| self.cell_id(f, &cell.args))
    }

    pub fn functor_of(&self, id: CellId) -> usize {
        self.offsets.partition_point(|&o| o <= id) - 1
    }

    pub fn cell(&self, id: CellId) -> Cell {
        let f = self.functor_of(id);
        let (name, arity) = &self.functors[f];
        let mut rest = id - self.offsets[f];
        let mut args = vec![0; *arity];
        for slot in args.iter_mut().rev() {
            *slot = rest % self.m as Value;
            rest /= self.m as Value;
        }
        Cell {
            functor: name.clone(),
            args,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len as CellId).map(|id| self.cell(id))
    }

    pub fn component_id(&self, cell: CellId, value: Value) -> ComponentId {
        cell * self.m as ComponentId + value
    }

    pub fn component(&self, id: ComponentId) -> Component {
        Component {
            cell: id / self.m as ComponentId,
            value: id % self.m as ComponentId,
        }
    }

    pub fn format_component(&self, id: ComponentId) -> String {
        let c = self.component(id);
        format!("{}={}", self.cell(c.cell), c.value)
    }

    /// `{f(0)=1, ...}` in canonical order.
    pub fn format_set(&self, cs: &ConflictSet) -> String {
        let parts: Vec<String> = cs.iter().map(|c| self.format_component(c)).collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// m raised to the number of cells.
    pub fn assignment_count(&self) -> BigUint {
        BigUint::from(self.m).pow(self.len as u32)
    }
}

pub fn enumerate_cells(sig: &Signature, m: usize) -> Vec<Cell> {
    CellSpace::new(sig, m).cells().collect()
}

pub fn assignment_count(sig: &Signature, m: usize) -> BigUint {
    CellSpace::new(sig, m).assignment_count()
}

/// One value per cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreInterpretation {
    space: Arc<CellSpace>,
    values: Vec<Value>,
}

impl PreInterpretation {
    pub fn new(space: Arc<CellSpace>, values: Vec<Value>) -> Result<Self, PreinterpError> {
        if values.len() != space.len() {
            return Err(PreinterpError::WrongLength {
                expected: space.len(),
                got: values.len(),
            });
        }
        if let Some(&value) = values.iter().find(|&&v| v as usize >= space.m) {
            return Err(PreinterpError::ValueOutOfRange { value, m: space.m });
        }
        Ok(PreInterpretation { space, values })
    }

    /// Every cell mapped to `value`.
    pub fn uniform(space: Arc<CellSpace>, value: Value) -> Self {
        assert!((value as usize) < space.m);
        let values = vec![value; space.len()];
        PreInterpretation { space, values }
    }

    /// Every cell's first draw from its seeded stream.
    pub fn seeded(space: Arc<CellSpace>, seed: u64) -> Self {
        let values = (0..space.len() as CellId)
            .map(|c| seeded_draw(&space, seed, c, 0))
            .collect();
        PreInterpretation { space, values }
    }

    pub fn space(&self) -> &Arc<CellSpace> {
        &self.space
    }

    pub fn domain_size(&self) -> usize {
        self.space.m
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn lookup(&self, cell: &Cell) -> Result<Value, PreinterpError> {
        self.space
            .id_of(cell)
            .map(|id| self.values[id as usize])
            .ok_or_else(|| PreinterpError::UnknownCell(cell.to_string()))
    }

    pub fn value(&self, cell: CellId) -> Value {
        self.values[cell as usize]
    }

    pub fn set(&mut self, cell: CellId, value: Value) {
        assert!((value as usize) < self.space.m);
        self.values[cell as usize] = value;
    }

    pub fn component_id(&self, cell: CellId) -> ComponentId {
        self.space.component_id(cell, self.values[cell as usize])
    }

    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        self.values.iter().enumerate().map(|(c, &v)| Component {
            cell: c as CellId,
            value: v,
        })
    }

    /// Whether every component of `cs` belongs to this pre-interpretation.
    pub fn contains(&self, cs: &ConflictSet) -> bool {
        cs.iter().all(|id| {
            let c = self.space.component(id);
            (c.cell as usize) < self.values.len() && self.values[c.cell as usize] == c.value
        })
    }
}

/// One line per component, `f(d1,...,dn) = v`, in canonical cell order.
impl fmt::Display for PreInterpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, v) in self.values.iter().enumerate() {
            writeln!(f, "{} = {v}", self.space.cell(id as CellId))?;
        }
        Ok(())
    }
}

// FNV-1a; stable across platforms and toolchains.
fn stable_hash(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// The `draw`-th value of the seeded stream belonging to `cell`.
///
/// Streams are keyed by the cell's printed form, so two problems that share a
/// cell see the same values for it under the same seed.
pub fn seeded_draw(space: &CellSpace, seed: u64, cell: CellId, draw: u64) -> Value {
    let key = stable_hash(&space.cell(cell).to_string());
    let mixed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17)
        ^ key
        ^ draw.wrapping_mul(0xd1b5_4a32_d192_ed03);
    ChaCha8Rng::seed_from_u64(mixed).gen_range(0..space.m as Value)
}
