//! Shared fixtures for the criterion benches.

use qbc_core::linalg::ComplexMatrix;
use qbc_core::qstate::{partial_trace_alice, StateVector, SystemLayout};
use qbc_core::{Complex64, DensityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
    let mut r = rng(seed);
    ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

/// Two random states on `dim × dim`.
pub fn state_pair(dim: usize, seed: u64) -> (StateVector, StateVector) {
    let mut r = rng(seed);
    let layout = SystemLayout::bipartite(dim, dim).expect("bench layout");
    (StateVector::random(layout, &mut r), StateVector::random(layout, &mut r))
}

pub fn bob_states(dim: usize, seed: u64) -> (DensityMatrix, DensityMatrix) {
    let (a, b) = state_pair(dim, seed);
    (partial_trace_alice(&a), partial_trace_alice(&b))
}
