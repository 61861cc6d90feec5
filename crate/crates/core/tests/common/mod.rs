//! Random instances shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use qhist_core::linalg::propagator;
use qhist_core::{
    Event, History, HistoryFamily, Ket, Operator, Projector, SampleSpace, Tolerances, C64,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_operator(rng: &mut StdRng, dim: usize) -> Operator {
    Operator::from_fn(dim, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian(rng: &mut StdRng, dim: usize) -> Operator {
    let a = random_operator(rng, dim);
    (&a + &a.adjoint()).scale(C64::new(0.5, 0.0))
}

pub fn random_unitary(rng: &mut StdRng, dim: usize) -> Operator {
    let h = random_hermitian(rng, dim);
    let dt = rng.gen_range(0.1..3.0);
    propagator(&h, dt, &Tolerances::default()).unwrap()
}

pub fn random_ket(rng: &mut StdRng, dim: usize) -> Ket {
    let k = Ket::new(
        (0..dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    )
    .unwrap();
    k.normalized(&Tolerances::default()).unwrap()
}

/// A random decomposition of the identity: the columns of a random unitary,
/// shuffled and cut into `parts` nonempty groups.
pub fn random_sample_space(rng: &mut StdRng, dim: usize, parts: usize) -> SampleSpace {
    assert!(parts >= 1 && parts <= dim);
    let v = random_unitary(rng, dim);
    let mut cols: Vec<usize> = (0..dim).collect();
    cols.shuffle(rng);
    let mut cuts: Vec<usize> = (1..dim).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(parts - 1).collect();
    cuts.sort_unstable();
    cuts.push(dim);
    let tol = Tolerances::default();
    let mut start = 0;
    let mut projectors = Vec::new();
    for end in cuts {
        let kets: Vec<Ket> = cols[start..end].iter().map(|&c| v.column(c)).collect();
        projectors.push(Projector::from_orthonormal(&kets, &tol).unwrap());
        start = end;
    }
    let labels = (0..parts).map(|i| format!("P{i}")).collect();
    SampleSpace::new(projectors, labels, &tol).unwrap()
}

/// One later time, the members of `space` as its events.
pub fn born_family(psi0: &Ket, u: &Operator, space: &SampleSpace) -> HistoryFamily {
    let histories = space
        .iter()
        .map(|(l, p)| History::new(vec![Event::new(1, l, Arc::new(p.clone()))]))
        .collect();
    HistoryFamily::new(
        psi0.clone(),
        vec![u.clone()],
        histories,
        &Tolerances::default(),
    )
    .unwrap()
}
