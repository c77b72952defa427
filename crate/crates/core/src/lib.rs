//! Concept-enhanced multimodal retrieval-augmented report generation over
//! precomputed embeddings.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! * [`store`] holds `(embedding, report)` pairs and answers exact cosine
//!   top-k queries.
//! * [`vocab`] turns a report corpus into a ranked bigram vocabulary.
//! * [`solver`] decomposes an image embedding into a sparse non-negative
//!   combination of concept embeddings and picks the strongest keywords.
//! * [`prompt`] renders the four prompting strategies.
//! * [`generation`] talks to an external text-generation service.
//! * [`metrics`] scores generated reports.
//! * [`pipeline`] wires everything together, runs ablation sweeps and
//!   generates synthetic corpora.
//!
//! Encoders and the language model itself are external: every vector and
//! every generated sentence enters through files or HTTP.

pub mod generation;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod prompt;
pub mod solver;
pub mod store;
pub mod vocab;

pub use generation::{GeneratedReport, GenerationClient, GenerationConfig, GenerationError};
pub use metrics::{LabelSet, LabelVector, MetricsReport};
pub use pipeline::{AblationCell, AblationGrid, PipelineConfig, PipelineError};
pub use prompt::{build_prompt, Prompt, PromptError, PromptSpec, Strategy};
pub use solver::{ConceptDictionary, ConceptSet, LassoOptions, SolverError, SparseDecomposition};
pub use store::{EmbeddingRecord, EmbeddingStore, Hit, RetrievalResult, StoreError};
pub use vocab::{TextNormalizationConfig, VocabError, Vocabulary};

/// Number of retrieved reports used by the retrieval strategies.
pub const DEFAULT_K: usize = 3;
/// Number of concept keywords injected into the prompt.
pub const DEFAULT_TAU: usize = 5;
/// Default L1 penalty of the sparse decomposition.
pub const DEFAULT_LAMBDA: f64 = 0.3;
/// Default bigram vocabulary size.
pub const DEFAULT_VOCAB_SIZE: usize = 200;
