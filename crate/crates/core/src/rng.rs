//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose key is a
//! function of the master seed and a domain tag, and whose 64-bit stream id
//! names the consumer (a tree vertex, a replica, a block of replicas). Draws
//! therefore depend only on `(seed, domain, id)` and never on scheduling or
//! exploration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating independent uses of one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Tree = 1,
    Walk = 2,
    Vrjp = 3,
    Mixture = 4,
    Halfline = 5,
    Bootstrap = 6,
    Beta = 7,
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines two words into one well-mixed word (order sensitive).
#[inline]
pub fn combine(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b.wrapping_add(0x632b_e59b_d9b4_e019)))
}

fn key_bytes(seed: u64, domain: Domain) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = combine(seed, domain as u64);
    for chunk in out.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// Opens stream `id` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key_bytes(seed, domain));
    rng.set_stream(id);
    rng
}

/// Stream for replica `index` of an experiment; depends only on `(seed, index)`.
pub fn replica_stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    stream(seed, domain, index)
}

/// Derives a child seed, e.g. the tree seed of replica `index`.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    combine(combine(seed, domain as u64), index)
}

/// Uniform in the open interval (0, 1).
#[inline]
pub fn open01<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Exponential variate with the given rate by inverse CDF.
#[inline]
pub fn exponential<R: rand::Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -open01(rng).ln() / rate
}
