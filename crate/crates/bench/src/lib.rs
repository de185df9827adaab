//! Inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentry_core::corpus::bundled_corpus_dir;
use sentry_core::search::Fitness;
use sentry_core::{analyze_path, ContractAnalysis};

/// `n` objective pairs on a grid of `levels` steps, so ties are common.
pub fn random_fitness(n: usize, levels: u32, seed: u64) -> Vec<Fitness> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coord = || f64::from(rng.gen_range(0..=levels)) / f64::from(levels);
    (0..n).map(|_| Fitness::new(coord(), coord())).collect()
}

/// First contract of a bundled corpus file.
pub fn corpus_contract(file: &str) -> ContractAnalysis {
    let path = bundled_corpus_dir().join(file);
    analyze_path(&path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .remove(0)
}
