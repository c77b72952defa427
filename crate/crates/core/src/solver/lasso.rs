use serde::{Deserialize, Serialize};

use super::{ConceptDictionary, SolverError};
use crate::linalg::{axpy, dot, norm};

const UNIT_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub lambda: f64,
    /// Bound on both the largest coordinate change of a sweep and the KKT
    /// residual at termination.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            lambda: crate::DEFAULT_LAMBDA,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

impl LassoOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseDecomposition {
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
    /// Number of full coordinate sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    pub all_zero: bool,
    pub kkt_residual: f64,
}

impl SparseDecomposition {
    pub fn nnz(&self) -> usize {
        self.alpha.iter().filter(|&&a| a > 0.0).count()
    }
}

/// `||C̃α − ṽ||² + 2λ·Σα`
pub fn objective(dict: &ConceptDictionary, v_tilde: &[f64], alpha: &[f64], lambda: f64) -> f64 {
    let r = residual(dict, v_tilde, alpha);
    dot(&r, &r) + 2.0 * lambda * alpha.iter().sum::<f64>()
}

/// Largest violation of the optimality conditions: `|c̃ⱼᵀr − λ|` on active
/// coordinates and `max(0, c̃ⱼᵀr − λ)` on inactive ones, with
/// `r = ṽ − C̃α`. Negative coefficients count as violations of their
/// magnitude.
pub fn kkt_violation(dict: &ConceptDictionary, v_tilde: &[f64], alpha: &[f64], lambda: f64) -> f64 {
    let r = residual(dict, v_tilde, alpha);
    alpha
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let g = dot(dict.column(j), &r);
            if a > 0.0 {
                (g - lambda).abs()
            } else if a < 0.0 {
                (-a).max(g - lambda)
            } else {
                (g - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn residual(dict: &ConceptDictionary, v_tilde: &[f64], alpha: &[f64]) -> Vec<f64> {
    let mut r = v_tilde.to_vec();
    for (j, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            axpy(-a, dict.column(j), &mut r);
        }
    }
    r
}

/// Non-negative LASSO by cyclic coordinate descent in fixed order `0..m`.
///
/// Columns have unit norm, so each coordinate step is the closed-form
/// minimiser `max(0, αⱼ + c̃ⱼᵀr − λ)`. The loop stops once a sweep moves
/// no coefficient by `tol` or more and the KKT residual is within `tol`.
pub fn solve_nn_lasso(
    dict: &ConceptDictionary,
    v_tilde: &[f64],
    opts: &LassoOptions,
) -> Result<SparseDecomposition, SolverError> {
    let lambda = opts.lambda;
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(SolverError::InvalidLambda(lambda));
    }
    if v_tilde.len() != dict.dim() {
        return Err(SolverError::DimensionMismatch {
            expected: dict.dim(),
            found: v_tilde.len(),
        });
    }
    let n = norm(v_tilde);
    if (n - 1.0).abs() > UNIT_NORM_TOL || n.is_nan() {
        return Err(SolverError::NotUnitNorm(n));
    }

    let m = dict.len();
    let mut alpha = vec![0.0; m];
    let mut r = v_tilde.to_vec();
    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_change = 0.0f64;
        for (j, a) in alpha.iter_mut().enumerate() {
            let col = dict.column(j);
            let updated = (*a + dot(col, &r) - lambda).max(0.0);
            let delta = updated - *a;
            if delta != 0.0 {
                axpy(-delta, col, &mut r);
                *a = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tol {
            kkt = kkt_violation(dict, v_tilde, &alpha, lambda);
            if kkt <= opts.tol {
                converged = true;
                break;
            }
            // resync the running residual before sweeping again
            r = residual(dict, v_tilde, &alpha);
        }
    }
    if !converged {
        kkt = kkt_violation(dict, v_tilde, &alpha, lambda);
        log::warn!("coordinate descent stopped after {iterations} sweeps with KKT residual {kkt:e}");
    }

    let all_zero = alpha.iter().all(|&a| a == 0.0);
    Ok(SparseDecomposition {
        objective: objective(dict, v_tilde, &alpha, lambda),
        alpha,
        lambda,
        iterations,
        converged,
        all_zero,
        kkt_residual: kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal() -> ConceptDictionary {
        ConceptDictionary::from_centered_columns(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn antipodal_pairs_from_raw_concepts() {
        // raw ±axes have zero mean, so the centered columns are the axes and
        // their negatives
        let d = ConceptDictionary::build(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![0.0, 0.0],
        )
        .unwrap();
        let dec = solve_nn_lasso(&d, &[0.8, 0.6], &LassoOptions::with_lambda(0.3)).unwrap();
        let want = [0.5, 0.3, 0.0, 0.0];
        for (a, w) in dec.alpha.iter().zip(want) {
            assert!((a - w).abs() < 1e-12, "{:?}", dec.alpha);
        }
    }

    #[test]
    fn orthonormal_closed_form() {
        let d = orthonormal();
        let dec = solve_nn_lasso(&d, &[0.8, 0.6], &LassoOptions::with_lambda(0.3)).unwrap();
        let want = [0.5, 0.3];
        for (a, w) in dec.alpha.iter().zip(want) {
            assert!((a - w).abs() < 1e-12, "{:?}", dec.alpha);
        }
        assert!(dec.converged && !dec.all_zero);
        assert_eq!(dec.nnz(), 2);
        let expected_obj = (0.3f64.powi(2) + 0.3f64.powi(2)) + 2.0 * 0.3 * 0.8;
        assert!((dec.objective - expected_obj).abs() < 1e-12);
    }

    #[test]
    fn penalty_above_every_correlation_gives_zero() {
        let dec = solve_nn_lasso(&orthonormal(), &[0.8, 0.6], &LassoOptions::with_lambda(0.9)).unwrap();
        assert!(dec.all_zero);
        assert_eq!(dec.alpha, vec![0.0; 2]);
        assert_eq!(dec.iterations, 1);
        assert!((dec.objective - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = orthonormal();
        assert_eq!(
            solve_nn_lasso(&d, &[0.8, 0.6], &LassoOptions::with_lambda(0.0)),
            Err(SolverError::InvalidLambda(0.0))
        );
        assert!(matches!(
            solve_nn_lasso(&d, &[1.0, 1.0], &LassoOptions::default()),
            Err(SolverError::NotUnitNorm(_))
        ));
        assert!(matches!(
            solve_nn_lasso(&d, &[1.0], &LassoOptions::default()),
            Err(SolverError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kkt_of_returned_solution() {
        let d = orthonormal();
        let dec = solve_nn_lasso(&d, &[0.8, 0.6], &LassoOptions::with_lambda(0.1)).unwrap();
        assert!(kkt_violation(&d, &[0.8, 0.6], &dec.alpha, 0.1) <= 1e-8);
        assert!(kkt_violation(&d, &[0.8, 0.6], &[0.0; 2], 0.1) > 0.5);
    }
}
