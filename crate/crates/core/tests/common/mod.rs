#![allow(dead_code)]

use dirmoment::{GridMeasure, Measure, MomentSequence};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `max_atoms` atoms at `t = e^{-s}`, `s ∈ [0, 6]`, weights in
/// `[0.1, 1]`, and with probability `zero_prob` an atom at 0.
pub fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize, zero_prob: f64) -> GridMeasure {
    let count = rng.random_range(1..=max_atoms);
    let atoms = (0..count)
        .map(|_| {
            (
                (-rng.random_range(0.0..6.0f64)).exp(),
                rng.random_range(0.1..1.0),
            )
        })
        .collect();
    let at_zero = if rng.random::<f64>() < zero_prob {
        rng.random_range(0.1..1.0)
    } else {
        0.0
    };
    GridMeasure::unit_interval(atoms, at_zero).unwrap()
}

pub fn moments(mu: &GridMeasure, start: u64, end: u64) -> MomentSequence {
    MomentSequence::from_measure(&Measure::Grid(mu.clone()), start, end).unwrap()
}
