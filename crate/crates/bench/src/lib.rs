//! Input generators shared by the benchmarks.

use cemrag::{ConceptDictionary, EmbeddingRecord, EmbeddingStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// A `d`-dimensional dictionary of `m` Gaussian concepts and a centered image.
pub fn lasso_instance(seed: u64, d: usize, m: usize) -> (ConceptDictionary, Vec<f64>) {
    let mut rng = rng(seed);
    let raw = (0..m).map(|_| gaussian(&mut rng, d)).collect();
    let terms = (0..m).map(|j| format!("c{j} x")).collect();
    let dict = ConceptDictionary::build(terms, raw, vec![0.0; d]).expect("random dictionary");
    let v = dict.center_image(&gaussian(&mut rng, d)).expect("random image");
    (dict, v)
}

pub fn store(seed: u64, n: usize, d: usize) -> (EmbeddingStore, Vec<f64>) {
    let mut rng = rng(seed);
    let records = (0..n)
        .map(|i| EmbeddingRecord::new(format!("r{i}"), gaussian(&mut rng, d), None))
        .collect();
    let store = EmbeddingStore::from_records(records, d).expect("random store");
    (store, gaussian(&mut rng, d))
}
