//! Shared fixtures for the benchmarks.

use dgsp_core::net::{Actor, Standardizer};
use dgsp_core::sim::{World, WorldConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn world() -> World {
    World::build(WorldConfig {
        calibration_rounds: 500,
        ..WorldConfig::default()
    })
    .expect("default world builds")
}

/// Randomly initialized actor with an identity input standardizer.
pub fn actor(world: &World, hidden: &[usize]) -> Actor {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut a = Actor::new(world.feature_len(), hidden, &mut rng).expect("valid shape");
    a.set_normalizer(Standardizer::identity(world.feature_len() + 1))
        .expect("matching width");
    a
}
