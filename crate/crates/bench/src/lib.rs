//! Shared inputs for the criterion benches in `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vrjp_core::{EnvTree, HalflineEnv, IgParams, MomentEngine, OffspringLaw, Result};

/// Tree with offspring law (0, 0.2, 0.8) at c = 1, well inside the ballistic phase.
pub fn ballistic_tree(seed: u64) -> Result<EnvTree> {
    Ok(EnvTree::new(OffspringLaw::new(vec![0.0, 0.2, 0.8])?, IgParams::new(1.0)?, seed))
}

pub fn halfline_env(engine: &MomentEngine, sites: usize, seed: u64) -> Result<HalflineEnv> {
    HalflineEnv::sample(engine, sites, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
