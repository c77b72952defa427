use serde::{Deserialize, Serialize};

use super::{ConceptDictionary, SolverError, SparseDecomposition};
use crate::linalg::cosine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub coefficient: f64,
}

/// The keyword set injected into prompts: at most `tau_requested` terms with
/// strictly positive coefficients, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSet {
    pub keywords: Vec<Keyword>,
    pub tau_requested: usize,
}

impl ConceptSet {
    pub fn new(keywords: Vec<Keyword>, tau_requested: usize) -> Self {
        Self {
            keywords,
            tau_requested,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(|k| k.term.as_str())
    }
}

/// Picks the `tau` largest positive coefficients. Equal coefficients keep
/// vocabulary rank order (lower rank first), then lexicographic order.
pub fn select_top_tau(decomp: &SparseDecomposition, terms: &[String], tau: usize) -> Result<ConceptSet, SolverError> {
    if tau == 0 {
        return Err(SolverError::InvalidTau);
    }
    if terms.len() != decomp.alpha.len() {
        return Err(SolverError::LengthMismatch {
            expected: terms.len(),
            found: decomp.alpha.len(),
        });
    }
    let mut active: Vec<usize> = (0..terms.len()).filter(|&j| decomp.alpha[j] > 0.0).collect();
    active.sort_by(|&a, &b| {
        decomp.alpha[b]
            .total_cmp(&decomp.alpha[a])
            .then(a.cmp(&b))
            .then_with(|| terms[a].cmp(&terms[b]))
    });
    active.truncate(tau);
    let keywords = active
        .into_iter()
        .map(|j| Keyword {
            term: terms[j].clone(),
            coefficient: decomp.alpha[j],
        })
        .collect();
    Ok(ConceptSet::new(keywords, tau))
}

/// `cos(C̃α, ṽ)`, or `None` when the decomposition reconstructs nothing.
pub fn reconstruction_similarity(
    dict: &ConceptDictionary,
    decomp: &SparseDecomposition,
    v_tilde: &[f64],
) -> Option<f64> {
    if decomp.all_zero {
        return None;
    }
    cosine(&dict.reconstruct(&decomp.alpha), v_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_nn_lasso, LassoOptions};

    fn decomp(alpha: Vec<f64>) -> SparseDecomposition {
        SparseDecomposition {
            all_zero: alpha.iter().all(|&a| a == 0.0),
            alpha,
            lambda: 0.1,
            objective: 0.0,
            iterations: 1,
            converged: true,
            kkt_residual: 0.0,
        }
    }

    fn terms(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("term {i:02}")).collect()
    }

    #[test]
    fn fewer_positive_than_tau() {
        let s = select_top_tau(&decomp(vec![0.0, 0.4, 0.0, 0.2]), &terms(4), 5).unwrap();
        assert_eq!(s.terms().collect::<Vec<_>>(), ["term 01", "term 03"]);
        assert_eq!(s.tau_requested, 5);
    }

    #[test]
    fn ties_follow_vocabulary_rank() {
        let mut alpha = vec![0.0; 10];
        alpha[7] = 0.25;
        alpha[3] = 0.25;
        alpha[5] = 0.5;
        // rank 3 precedes rank 7 even though "zz" sorts first lexically
        let mut t = terms(10);
        t[3] = "zz top".into();
        t[7] = "aa top".into();
        let s = select_top_tau(&decomp(alpha), &t, 5).unwrap();
        assert_eq!(s.terms().collect::<Vec<_>>(), ["term 05", "zz top", "aa top"]);
    }

    #[test]
    fn truncates_to_tau_and_empty_when_all_zero() {
        let s = select_top_tau(&decomp(vec![0.1, 0.2, 0.3, 0.4]), &terms(4), 2).unwrap();
        assert_eq!(s.terms().collect::<Vec<_>>(), ["term 03", "term 02"]);
        assert!(select_top_tau(&decomp(vec![0.0; 4]), &terms(4), 5).unwrap().is_empty());
        assert_eq!(
            select_top_tau(&decomp(vec![0.0; 4]), &terms(4), 0),
            Err(SolverError::InvalidTau)
        );
    }

    #[test]
    fn reconstruction_cosine_of_orthonormal_example() {
        let dict =
            ConceptDictionary::from_centered_columns(terms(2), vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2])
                .unwrap();
        let v = [0.8, 0.6];
        let d = solve_nn_lasso(&dict, &v, &LassoOptions::with_lambda(0.3)).unwrap();
        let c = reconstruction_similarity(&dict, &d, &v).unwrap();
        // (0.5*0.8 + 0.3*0.6) / sqrt(0.34)
        assert!((c - 0.58 / 0.34f64.sqrt()).abs() < 1e-12);
        assert!((c - 0.994692).abs() < 1e-6);

        let exact = decomp(vec![0.8, 0.6]);
        assert!((reconstruction_similarity(&dict, &exact, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(reconstruction_similarity(&dict, &decomp(vec![0.0, 0.0]), &v), None);
    }
}
