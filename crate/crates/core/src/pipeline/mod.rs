//! End-to-end orchestration: decompose, retrieve, prompt, generate,
//! evaluate. Also hosts the ablation sweep and the synthetic corpus
//! generator.

mod ablation;
mod run;
pub mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::{GenerationConfig, GenerationError};
use crate::io::{read_json_file, read_jsonl_file, JsonlError};
use crate::metrics::MetricsError;
use crate::prompt::{PromptError, Strategy, Templates};
use crate::solver::{ConceptDictionary, ConceptEntry, LassoOptions, SolverError};
use crate::store::{EmbeddingStore, StoreError};
use crate::vocab::{TextNormalizationConfig, VocabError, Vocabulary};

pub use ablation::{
    decompose_all, run_ablation, write_ablation_csv, AblationCell, AblationGrid, AblationHeader, DecomposedImage,
};
pub use run::{prepare_image, run_pipeline, PipelineOutput, PreparedImage, RetrievedCase, Trace};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{artifact} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        artifact: String,
        expected: usize,
        found: usize,
    },
    #[error("image {id:?}: {source}")]
    Image {
        id: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub(crate) fn for_image(id: &str, e: impl Into<PipelineError>) -> Self {
        PipelineError::Image {
            id: id.to_string(),
            source: Box::new(e.into()),
        }
    }
}

/// Run configuration. Every field has a default, so a JSON config file may
/// set any subset; command-line flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    /// Binary store file (`.bin`) or JSONL records.
    pub store: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub image_mean: Option<PathBuf>,
    /// When set, the dictionary order is checked against this vocabulary.
    pub vocabulary: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub lambda: f64,
    pub tau: usize,
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub generation: GenerationConfig,
    pub exclude_self: bool,
    /// Worker threads for per-image work and in-flight requests; 1 is serial.
    pub parallelism: usize,
    pub stopwords: Option<PathBuf>,
    pub acronyms: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    /// Only used by synthetic data generation.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lasso = LassoOptions::default();
        Self {
            strategy: Strategy::Cemrag,
            store: None,
            dictionary: None,
            image_mean: None,
            vocabulary: None,
            templates: None,
            lambda: crate::DEFAULT_LAMBDA,
            tau: crate::DEFAULT_TAU,
            k: crate::DEFAULT_K,
            tol: lasso.tol,
            max_iter: lasso.max_iter,
            generation: GenerationConfig::default(),
            exclude_self: false,
            parallelism: 1,
            stopwords: None,
            acronyms: None,
            lemmas: None,
            seed: synth::DEFAULT_SEED,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        Ok(read_json_file(path)?)
    }

    pub fn lasso(&self) -> LassoOptions {
        LassoOptions {
            lambda: self.lambda,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    /// Checks that the fields the strategy needs are present.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(PipelineError::Config(format!(
                    "strategy {} requires {what}",
                    self.strategy
                )))
            }
        };
        if self.strategy.uses_concepts() {
            need(self.dictionary.is_some(), "a concept dictionary")?;
            need(self.image_mean.is_some(), "an image mean")?;
        }
        if self.strategy.uses_retrieval() {
            need(self.store.is_some(), "a store")?;
        }
        self.validate_parameters()
    }

    /// Checks the numeric parameters the strategy uses.
    pub fn validate_parameters(&self) -> Result<(), PipelineError> {
        if self.strategy.uses_concepts() {
            if !(self.lambda > 0.0 && self.lambda.is_finite()) {
                return Err(PipelineError::Config("lambda must be positive".into()));
            }
            if self.tau == 0 {
                return Err(PipelineError::Config("tau must be positive".into()));
            }
        }
        if self.strategy.uses_retrieval() && self.k == 0 {
            return Err(PipelineError::Config("k must be positive".into()));
        }
        Ok(())
    }

    pub fn normalization(&self) -> Result<TextNormalizationConfig, PipelineError> {
        load_normalization(
            self.stopwords.as_deref(),
            self.acronyms.as_deref(),
            self.lemmas.as_deref(),
        )
    }
}

/// Builds a normalization config, replacing each shipped list for which a
/// file is given.
pub fn load_normalization(
    stopwords: Option<&Path>,
    acronyms: Option<&Path>,
    lemmas: Option<&Path>,
) -> Result<TextNormalizationConfig, PipelineError> {
    let mut cfg = TextNormalizationConfig::default();
    if let Some(p) = stopwords {
        cfg = cfg.with_stopwords(&TextNormalizationConfig::read_word_list(p)?)?;
    }
    if let Some(p) = acronyms {
        cfg = cfg.with_acronyms(&TextNormalizationConfig::read_word_list(p)?)?;
    }
    if let Some(p) = lemmas {
        cfg = cfg.with_lemmas(&TextNormalizationConfig::read_lemma_table(p)?)?;
    }
    Ok(cfg)
}

/// Loaded artifacts for a run.
#[derive(Debug, Clone)]
pub struct PipelineResources {
    pub store: Option<EmbeddingStore>,
    pub dictionary: Option<ConceptDictionary>,
    pub templates: Templates,
    pub normalization: TextNormalizationConfig,
}

impl PipelineResources {
    pub fn load(config: &PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let store = match &config.store {
            Some(p) if config.strategy.uses_retrieval() => Some(load_store(p, None)?),
            _ => None,
        };
        let dictionary = match (&config.dictionary, &config.image_mean) {
            (Some(d), Some(m)) if config.strategy.uses_concepts() => {
                let vocab = match &config.vocabulary {
                    Some(v) => Some(Vocabulary::read_tsv(crate::io::open(v)?)?),
                    None => None,
                };
                Some(load_dictionary(d, m, vocab.as_ref())?)
            }
            _ => None,
        };
        let templates = match &config.templates {
            Some(p) => read_json_file(p)?,
            None => Templates::default(),
        };
        let res = Self {
            store,
            dictionary,
            templates,
            normalization: config.normalization()?,
        };
        res.check_dimensions()?;
        Ok(res)
    }

    /// Common embedding dimension of the loaded artifacts.
    pub fn dim(&self) -> Option<usize> {
        self.store
            .as_ref()
            .map(EmbeddingStore::dim)
            .or_else(|| self.dictionary.as_ref().map(ConceptDictionary::dim))
    }

    /// Checks that the artifacts `strategy` needs are loaded.
    pub fn check_strategy(&self, strategy: Strategy) -> Result<(), PipelineError> {
        if strategy.uses_concepts() && self.dictionary.is_none() {
            return Err(PipelineError::Config(format!(
                "strategy {strategy} requires a concept dictionary"
            )));
        }
        if strategy.uses_retrieval() && self.store.is_none() {
            return Err(PipelineError::Config(format!("strategy {strategy} requires a store")));
        }
        Ok(())
    }

    fn check_dimensions(&self) -> Result<(), PipelineError> {
        if let (Some(s), Some(d)) = (&self.store, &self.dictionary) {
            if s.dim() != d.dim() {
                return Err(PipelineError::DimensionMismatch {
                    artifact: "concept dictionary".into(),
                    expected: s.dim(),
                    found: d.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Loads a binary store, or ingests JSONL when the file does not start with
/// the binary magic. `dim` is required for JSONL unless inferable from the
/// first record.
pub fn load_store(path: &Path, dim: Option<usize>) -> Result<EmbeddingStore, PipelineError> {
    let mut head = [0u8; 4];
    let is_binary = {
        use std::io::Read;
        let mut f = std::fs::File::open(path)?;
        f.read(&mut head)? == 4 && &head == crate::store::MAGIC
    };
    if is_binary {
        return Ok(EmbeddingStore::load(path)?);
    }
    let records: Vec<crate::store::EmbeddingRecord> = read_jsonl_file(path)?;
    let dim = dim
        .or_else(|| records.first().map(|r| r.vector.len()))
        .ok_or_else(|| PipelineError::Config(format!("{}: cannot infer dimension of empty store", path.display())))?;
    Ok(EmbeddingStore::from_records(records, dim)?)
}

pub fn load_dictionary(
    dict_path: &Path,
    mean_path: &Path,
    vocabulary: Option<&Vocabulary>,
) -> Result<ConceptDictionary, PipelineError> {
    let entries: Vec<ConceptEntry> = read_jsonl_file(dict_path)?;
    let mean: Vec<f64> = read_json_file(mean_path)?;
    if let Some(e) = entries.iter().find(|e| e.vector.len() != mean.len()) {
        return Err(PipelineError::DimensionMismatch {
            artifact: format!("concept {:?}", e.term),
            expected: mean.len(),
            found: e.vector.len(),
        });
    }
    Ok(ConceptDictionary::from_entries(entries, vocabulary, mean)?)
}

pub(crate) fn thread_pool(parallelism: usize) -> Option<rayon::ThreadPool> {
    if parallelism <= 1 {
        return None;
    }
    rayon::ThreadPoolBuilder::new().num_threads(parallelism).build().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_profile() {
        let c = PipelineConfig::default();
        assert_eq!((c.k, c.tau, c.lambda), (3, 5, 0.3));
        assert_eq!(c.generation.temperature, 0.0);
    }

    #[test]
    fn partial_config_file() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"strategy":"rag","k":4,"generation":{"max_tokens":32}}"#).unwrap();
        assert_eq!(c.strategy, Strategy::Rag);
        assert_eq!(c.k, 4);
        assert_eq!(c.tau, 5);
        assert_eq!(c.generation.max_tokens, 32);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"strategy":"rag","bogus":1}"#).is_err());
    }

    #[test]
    fn strategy_requirements() {
        let mut c = PipelineConfig {
            strategy: Strategy::Cemrag,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
        c.dictionary = Some("d".into());
        c.image_mean = Some("m".into());
        assert!(c.validate().is_err());
        c.store = Some("s".into());
        assert!(c.validate().is_ok());
        let img = PipelineConfig {
            strategy: Strategy::ImageOnly,
            ..PipelineConfig::default()
        };
        assert!(img.validate().is_ok());
    }
}
