//! Independent reference implementations and instance generators shared by
//! the integration tests.

#![allow(dead_code)]

use cemrag::{ConceptDictionary, EmbeddingRecord, EmbeddingStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

pub fn terms(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("t{j:03} x")).collect()
}

/// Dictionary from Gaussian raw concepts and a centered unit image.
pub fn random_instance(rng: &mut ChaCha8Rng, d: usize, m: usize) -> (ConceptDictionary, Vec<f64>) {
    let raw: Vec<Vec<f64>> = (0..m).map(|_| gaussian(rng, d)).collect();
    let mean = gaussian(rng, d);
    let dict = ConceptDictionary::build(terms(m), raw, mean).unwrap();
    let v = gaussian(rng, d);
    let v_tilde = dict.center_image(&v).unwrap();
    (dict, v_tilde)
}

/// `m ≤ d` orthonormal columns via Gram-Schmidt.
pub fn orthonormal_instance(rng: &mut ChaCha8Rng, d: usize, m: usize) -> (ConceptDictionary, Vec<f64>) {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    while cols.len() < m {
        let mut v = gaussian(rng, d);
        for c in &cols {
            let p = dot(&v, c);
            v.iter_mut().zip(c).for_each(|(x, y)| *x -= p * y);
        }
        if dot(&v, &v) > 1e-6 {
            cols.push(unit(v));
        }
    }
    let dict = ConceptDictionary::from_centered_columns(terms(m), cols, vec![0.0; d]).unwrap();
    (dict, unit(gaussian(rng, d)))
}

pub fn column_products(dict: &ConceptDictionary, v: &[f64]) -> Vec<f64> {
    (0..dict.len()).map(|j| dot(dict.column(j), v)).collect()
}

fn apply(dict: &ConceptDictionary, alpha: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (j, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            out.iter_mut().zip(dict.column(j)).for_each(|(o, c)| *o += a * c);
        }
    }
    out
}

pub fn oracle_objective(dict: &ConceptDictionary, v: &[f64], alpha: &[f64], lambda: f64) -> f64 {
    let r: Vec<f64> = apply(dict, alpha, v.len()).iter().zip(v).map(|(a, b)| a - b).collect();
    dot(&r, &r) + 2.0 * lambda * alpha.iter().sum::<f64>()
}

/// Accelerated projected gradient with adaptive restart on
/// `||Cα − v||² + 2λ·Σα`, `α ≥ 0`. Returns `(α, objective)`.
pub fn projected_gradient(dict: &ConceptDictionary, v: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let m = dict.len();
    let d = v.len();
    let grad = |a: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = apply(dict, a, d).iter().zip(v).map(|(x, y)| x - y).collect();
        (0..m).map(|j| 2.0 * dot(dict.column(j), &r) + 2.0 * lambda).collect()
    };
    // Lipschitz constant 2·σ_max(C)² by power iteration, padded.
    let mut x = vec![1.0; m];
    let mut sigma2 = 0.0;
    for _ in 0..200 {
        let y = apply(dict, &x, d);
        let z: Vec<f64> = (0..m).map(|j| dot(dict.column(j), &y)).collect();
        sigma2 = dot(&z, &z).sqrt() / dot(&x, &x).sqrt();
        x = z;
        let n = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|e| *e /= n);
    }
    let step = 1.0 / (2.0 * sigma2 * 1.01);

    let mut alpha = vec![0.0; m];
    let mut y = alpha.clone();
    let mut t = 1.0f64;
    let mut f_prev = oracle_objective(dict, v, &alpha, lambda);
    for _ in 0..200_000 {
        let g = grad(&y);
        let next: Vec<f64> = y.iter().zip(&g).map(|(a, b)| (a - step * b).max(0.0)).collect();
        let f = oracle_objective(dict, v, &next, lambda);
        if f > f_prev {
            // restart momentum
            t = 1.0;
            y = alpha.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = next
            .iter()
            .zip(&alpha)
            .map(|(n, a)| n + (t - 1.0) / t_next * (n - a))
            .collect();
        t = t_next;
        alpha = next;
        f_prev = f;
        let g = grad(&alpha);
        let residual = alpha
            .iter()
            .zip(&g)
            .map(|(a, gr)| a.min(*gr).abs())
            .fold(0.0f64, f64::max);
        if residual < 1e-12 {
            break;
        }
    }
    let f = oracle_objective(dict, v, &alpha, lambda);
    (alpha, f)
}

pub fn random_f32_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0f32..1.0) as f64).collect()
}

pub fn random_store(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<EmbeddingRecord>, EmbeddingStore) {
    let records: Vec<EmbeddingRecord> = (0..n)
        .map(|i| {
            EmbeddingRecord::new(
                format!("r{i:05}"),
                random_f32_vector(rng, d),
                Some(format!("report {i}")),
            )
        })
        .collect();
    let store = EmbeddingStore::from_records(records.clone(), d).unwrap();
    (records, store)
}

/// Full scan: cosine of every record, sorted by similarity descending then
/// id ascending, truncated to `k`.
pub fn brute_force_top_k(records: &[EmbeddingRecord], query: &[f64], k: usize) -> Vec<(String, f64)> {
    let qn = dot(query, query).sqrt();
    let mut all: Vec<(String, f64)> = records
        .iter()
        .map(|r| {
            (
                r.id.clone(),
                dot(&r.vector, query) / (dot(&r.vector, &r.vector).sqrt() * qn),
            )
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}
