//! Seed derivation. Every random draw in the toolchain comes from a
//! [`ChaCha8Rng`] keyed by `master_seed ^ scene_index`, with the ChaCha stream
//! id selecting the consumer so scene synthesis and composition never share a
//! stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SceneRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Synth = 1,
    Compose = 2,
    Cutouts = 3,
}

pub fn scene_seed(master_seed: u64, scene_index: u64) -> u64 {
    master_seed ^ scene_index
}

pub fn derive_rng(seed: u64, stream: Stream) -> SceneRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn scene_rng(master_seed: u64, scene_index: u64, stream: Stream) -> SceneRng {
    derive_rng(scene_seed(master_seed, scene_index), stream)
}
