//! Independent random substreams derived from one master seed.
//!
//! Each simulation entity draws from its own ChaCha8 stream: same key
//! (the master seed), distinct stream id. Changing how often one entity
//! draws never perturbs the variates seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Entity {
    Arrivals1 = 0,
    Arrivals2 = 1,
    Services1 = 2,
    Services2 = 3,
    Travels = 4,
}

pub fn substream(seed: u64, entity: Entity) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(entity as u64);
    rng
}

/// The five per-entity generators used by one simulation run.
#[derive(Debug, Clone)]
pub struct Streams {
    pub arrivals1: ChaCha8Rng,
    pub arrivals2: ChaCha8Rng,
    pub services1: ChaCha8Rng,
    pub services2: ChaCha8Rng,
    pub travels: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self {
            arrivals1: substream(seed, Entity::Arrivals1),
            arrivals2: substream(seed, Entity::Arrivals2),
            services1: substream(seed, Entity::Services1),
            services2: substream(seed, Entity::Services2),
            travels: substream(seed, Entity::Travels),
        }
    }
}
