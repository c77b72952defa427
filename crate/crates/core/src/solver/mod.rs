//! Sparse non-negative concept decomposition.
//!
//! An image embedding `v` is centered by the training image mean and
//! normalized to `ṽ`; concept text embeddings are centered by their own mean
//! and normalized column by column into `C̃`. The decomposition solves
//!
//! ```text
//! minimize  ||C̃α − ṽ||² + 2λ·Σα_j   subject to  α ≥ 0
//! ```
//!
//! by cyclic coordinate descent, and the strongest coefficients name the
//! keywords that go into the prompt.

mod dictionary;
mod lasso;
mod select;

use thiserror::Error;

pub use dictionary::{center_normalize, ConceptDictionary, ConceptEntry};
pub use lasso::{kkt_violation, objective, solve_nn_lasso, LassoOptions, SparseDecomposition};
pub use select::{reconstruction_similarity, select_top_tau, ConceptSet, Keyword};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("dimension {found} does not match expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector has zero norm after centering")]
    ZeroNorm,
    #[error("concept {0:?} is degenerate: zero norm after centering")]
    DegenerateConcept(String),
    #[error("concept dictionary is empty")]
    EmptyDictionary,
    #[error("concept {term:?}: component {index} is not finite")]
    NonFinite { term: String, index: usize },
    #[error("input must have unit norm, got {0}")]
    NotUnitNorm(f64),
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("tau must be positive")]
    InvalidTau,
    #[error("concept file rank {rank}: expected term {expected:?}, found {found:?}")]
    VocabularyMismatch {
        rank: usize,
        expected: String,
        found: String,
    },
    #[error("no concept embedding for vocabulary term {0:?}")]
    MissingConcept(String),
    #[error("coefficient vector has length {found}, vocabulary has {expected} terms")]
    LengthMismatch { expected: usize, found: usize },
}
