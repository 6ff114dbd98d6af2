//! Deterministic random streams keyed by (master seed, worker, round).
//!
//! Every random draw in a run comes from one of these streams, so a trace only
//! depends on its inputs and never on execution order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Worker id reserved for draws made by the server (shared sampling).
pub const SERVER: u64 = u64::MAX;

/// Worker id for problem synthesis and other setup-time randomness.
pub const SETUP: u64 = u64::MAX - 1;

pub fn stream(master_seed: u64, worker: u64, round: u64) -> Stream {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&worker.to_le_bytes());
    seed[16..24].copy_from_slice(&round.to_le_bytes());
    seed[24..32].copy_from_slice(b"indblock");
    ChaCha8Rng::from_seed(seed)
}

/// `k` distinct indices from `0..n` in draw order (partial Fisher-Yates over a
/// virtual permutation, O(k) memory).
pub fn sample_distinct<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut swapped: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let r = rng.random_range(i..n);
        let at_r = *swapped.get(&r).unwrap_or(&r);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(r, at_i);
        out.push(at_r);
    }
    out
}
