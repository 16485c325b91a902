#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use failprove::conflict::ConflictSet;
use failprove::corpus;
use failprove::preinterp::{CellSpace, PreInterpretation, Value};
use failprove::syntax::Program;
use failprove::transform::{compile, FlatProgram};

pub fn load(name: &str) -> (Program, FlatProgram) {
    let p = corpus::load(name).unwrap();
    let flat = compile(&p).unwrap();
    (p, flat)
}

pub fn space(p: &Program, m: usize) -> Arc<CellSpace> {
    Arc::new(CellSpace::new(&p.signature(), m))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_interpretation(space: &Arc<CellSpace>, rng: &mut ChaCha8Rng) -> PreInterpretation {
    let m = space.domain_size() as Value;
    let values = (0..space.len()).map(|_| rng.gen_range(0..m)).collect();
    PreInterpretation::new(space.clone(), values).unwrap()
}

/// A random pre-interpretation agreeing with every component of `cs`.
pub fn random_completion(
    space: &Arc<CellSpace>,
    cs: &ConflictSet,
    rng: &mut ChaCha8Rng,
) -> PreInterpretation {
    let mut j = random_interpretation(space, rng);
    for id in cs.iter() {
        let c = space.component(id);
        j.set(c.cell, c.value);
    }
    assert!(j.contains(cs));
    j
}
