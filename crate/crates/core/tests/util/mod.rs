//! Helpers shared by the integration test binaries.
#![allow(dead_code)]

use bdris_core::channel::{draw_channels, ChannelSet, ScenarioConfig};
use bdris_core::linalg::seeded_rng;

/// The reference scenario: three 3x3 links, two streams, surface at
/// (40, 25, 5) in a 50 m square, with a configurable element count.
pub fn reference_config(m: usize) -> ScenarioConfig {
    ScenarioConfig { m, ..Default::default() }
}

/// A scenario with every dimension explicit; geometry stays at the default.
pub fn sized_config(k: usize, nt: usize, nr: usize, d: usize, m: usize) -> ScenarioConfig {
    ScenarioConfig { k, nt, nr, d, m, trials: 4, ..Default::default() }
}

/// One deterministic channel draw.
pub fn draw(cfg: &ScenarioConfig, seed: u64) -> ChannelSet {
    draw_channels(cfg, &mut seeded_rng(seed)).expect("channel draw")
}

/// Keep OpenBLAS single-threaded; the tests parallelize at the trial level.
pub fn single_thread_blas() {
    bdris_core::runner::limit_blas_threads(1);
}
