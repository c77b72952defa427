use std::collections::HashMap;

use super::tokenize;

/// Substitute for a zero clipped match count.
pub const BLEU_EPSILON: f64 = 1e-9;

const MAX_ORDER: usize = 4;

/// Clipped n-gram matches and totals, poolable across sentence pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub candidate_len: u64,
    pub reference_len: u64,
}

impl BleuStats {
    pub fn from_tokens(candidate: &[String], reference: &[String]) -> Self {
        let mut s = Self {
            candidate_len: candidate.len() as u64,
            reference_len: reference.len() as u64,
            ..Self::default()
        };
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(reference, n);
            let cand_counts = ngram_counts(candidate, n);
            s.totals[n - 1] = candidate.len().saturating_sub(n - 1) as u64;
            s.matches[n - 1] = cand_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    pub fn from_texts(candidate: &str, reference: &str) -> Self {
        Self::from_tokens(&tokenize(candidate), &tokenize(reference))
    }

    pub fn add(&mut self, other: &Self) {
        for i in 0..MAX_ORDER {
            self.matches[i] += other.matches[i];
            self.totals[i] += other.totals[i];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// BLEU up to order `n`, scaled to `[0, 100]`.
    ///
    /// Orders the candidate is too short to contain are left out of the
    /// geometric mean; a zero match count at an included order becomes
    /// [`BLEU_EPSILON`].
    pub fn score(&self, n: usize) -> f64 {
        assert!((1..=MAX_ORDER).contains(&n), "BLEU order must be in 1..=4");
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for i in 0..n {
            if self.totals[i] == 0 {
                continue;
            }
            let m = (self.matches[i] as f64).max(BLEU_EPSILON);
            log_sum += (m / self.totals[i] as f64).ln();
            orders += 1;
        }
        let precision = (log_sum / orders as f64).exp();
        let ratio = self.reference_len as f64 / self.candidate_len as f64;
        let brevity = (1.0 - ratio).min(0.0).exp();
        100.0 * brevity * precision
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_default() += 1;
        }
    }
    counts
}

/// Single-pair BLEU-`n` in `[0, 100]`; 0 for an empty candidate.
pub fn bleu_n(candidate: &str, reference: &str, n: usize) -> f64 {
    BleuStats::from_texts(candidate, reference).score(n)
}
