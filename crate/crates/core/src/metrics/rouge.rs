use serde::Serialize;

use super::tokenize;

/// Length of the longest common subsequence of two token sequences.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RougeScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// LCS precision over the candidate length, recall over the reference
/// length, and their harmonic mean. All zero when either side is empty.
pub fn rouge_l_scores(candidate: &str, reference: &str) -> RougeScores {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    let lcs = lcs_len(&c, &r) as f64;
    if lcs == 0.0 {
        return RougeScores {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let precision = lcs / c.len() as f64;
    let recall = lcs / r.len() as f64;
    RougeScores {
        precision,
        recall,
        f1: 2.0 * precision * recall / (precision + recall),
    }
}

/// ROUGE-L F-measure with β = 1.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    rouge_l_scores(candidate, reference).f1
}
