//! Planted-concept corpus generator. Each image embedding is a sparse
//! non-negative mixture of known concept columns plus Gaussian noise, and
//! its report mentions a random subset of the planted bigrams, so concept
//! precision can be checked against a known planting rate.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::io::{create, write_json_file, write_jsonl_file};
use crate::linalg::mean;
use crate::solver::{ConceptDictionary, ConceptEntry};
use crate::store::EmbeddingRecord;
use crate::vocab::{build_vocabulary, normalize_text, CorpusDocument, TextNormalizationConfig, Vocabulary};

pub const DEFAULT_SEED: u64 = 17;

const MODIFIERS: &[&str] = &[
    "pleural",
    "cardiac",
    "pulmonary",
    "basilar",
    "hilar",
    "retrocardiac",
    "mediastinal",
    "apical",
    "interstitial",
    "focal",
    "mild",
    "patchy",
    "bibasilar",
    "osseous",
];

const NOUNS: &[&str] = &[
    "effusion",
    "silhouette",
    "edema",
    "opacity",
    "atelectasis",
    "consolidation",
    "congestion",
    "thickening",
    "nodule",
    "pneumothorax",
    "calcification",
    "contour",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_concepts: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Concepts mixed into each image.
    pub planted: usize,
    /// Probability that a planted concept is written into the report.
    pub mention_rate: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            n_concepts: 100,
            dim: 128,
            n_train: 300,
            n_test: 200,
            planted: 5,
            mention_rate: 0.8,
            weight_min: 0.5,
            weight_max: 1.0,
            noise_std: 0.01,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::Config(format!("synthetic corpus: {msg}")));
        if self.dim == 0 || self.n_concepts == 0 || self.n_train == 0 || self.n_test == 0 {
            return bad("dimension and counts must be positive");
        }
        if self.planted == 0 || self.planted > self.n_concepts {
            return bad("planted count must lie in 1..=n_concepts");
        }
        if self.n_concepts > MODIFIERS.len() * NOUNS.len() {
            return bad("not enough distinct concept terms");
        }
        if !(0.0..=1.0).contains(&self.mention_rate) {
            return bad("mention_rate must lie in [0, 1]");
        }
        if !(self.weight_min > 0.0 && self.weight_min < self.weight_max) {
            return bad("weights need 0 < weight_min < weight_max");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be finite and non-negative");
        }
        Ok(())
    }
}

/// Ground truth for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub planted: Vec<String>,
    pub mentioned: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    /// Concept embeddings in vocabulary rank order.
    pub concepts: Vec<ConceptEntry>,
    pub image_mean: Vec<f64>,
    pub vocabulary: Vocabulary,
    /// Retrieval store images; their reports form the vocabulary corpus.
    pub train: Vec<EmbeddingRecord>,
    /// Evaluation split.
    pub test: Vec<EmbeddingRecord>,
    /// One entry per test image.
    pub manifest: Vec<ManifestEntry>,
}

fn concept_terms(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let cfg = TextNormalizationConfig::default();
    let mut all: Vec<String> = MODIFIERS
        .iter()
        .flat_map(|m| NOUNS.iter().map(move |n| format!("{m} {n}")))
        .filter(|t| normalize_text(t, &cfg).join(" ") == *t)
        .collect();
    all.shuffle(rng);
    all.truncate(n);
    all
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn write_report(rng: &mut ChaCha8Rng, mentioned: &[String]) -> String {
    if mentioned.is_empty() {
        return "No findings.".to_string();
    }
    let mut order: Vec<&String> = mentioned.iter().collect();
    order.shuffle(rng);
    order
        .into_iter()
        .map(|t| {
            if rng.random_bool(0.5) {
                format!("There is {t}.")
            } else {
                format!("{}.", capitalize(t))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct Draw {
    vector: Vec<f64>,
    planted: Vec<usize>,
    mentioned: Vec<usize>,
}

/// Generates the corpus. Identical configs give identical corpora.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus, PipelineError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| PipelineError::Config(e.to_string()))?;
    let weights =
        Uniform::new(config.weight_min, config.weight_max).map_err(|e| PipelineError::Config(e.to_string()))?;
    let dim = config.dim;

    let terms = concept_terms(&mut rng, config.n_concepts);
    let concept_offset: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
    let raw: Vec<Vec<f64>> = terms
        .iter()
        .map(|_| concept_offset.iter().map(|o| o + normal.sample(&mut rng)).collect())
        .collect();
    let image_offset: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();

    let provisional = ConceptDictionary::build(terms.clone(), raw.clone(), vec![0.0; dim])?;
    let draw = |rng: &mut ChaCha8Rng| -> Draw {
        let mut planted: Vec<usize> = index::sample(rng, config.n_concepts, config.planted).into_vec();
        planted.sort_unstable();
        let mut vector = image_offset.clone();
        for &j in &planted {
            let w = weights.sample(rng);
            for (x, c) in vector.iter_mut().zip(provisional.column(j)) {
                *x += w * c;
            }
        }
        for x in vector.iter_mut() {
            *x += noise.sample(rng);
        }
        let mentioned = planted
            .iter()
            .copied()
            .filter(|_| rng.random_bool(config.mention_rate))
            .collect();
        Draw {
            vector,
            planted,
            mentioned,
        }
    };

    let train_draws: Vec<Draw> = (0..config.n_train).map(|_| draw(&mut rng)).collect();
    let test_draws: Vec<Draw> = (0..config.n_test).map(|_| draw(&mut rng)).collect();

    let names = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&j| terms[j].clone()).collect() };

    let mut train_mentions: Vec<Vec<usize>> = train_draws.iter().map(|d| d.mentioned.clone()).collect();
    let covered: BTreeSet<usize> = train_mentions.iter().flatten().copied().collect();
    for (i, j) in (0..config.n_concepts).filter(|j| !covered.contains(j)).enumerate() {
        train_mentions[i % config.n_train].push(j);
    }

    let train: Vec<EmbeddingRecord> = train_draws
        .iter()
        .zip(&train_mentions)
        .enumerate()
        .map(|(i, (d, m))| {
            EmbeddingRecord::new(
                format!("train-{i:04}"),
                d.vector.clone(),
                Some(write_report(&mut rng, &names(m))),
            )
        })
        .collect();
    let mut test = Vec::with_capacity(config.n_test);
    let mut manifest = Vec::with_capacity(config.n_test);
    for (i, d) in test_draws.iter().enumerate() {
        let id = format!("test-{i:04}");
        let mentioned = names(&d.mentioned);
        test.push(EmbeddingRecord::new(
            id.clone(),
            d.vector.clone(),
            Some(write_report(&mut rng, &mentioned)),
        ));
        manifest.push(ManifestEntry {
            id,
            planted: names(&d.planted),
            mentioned,
        });
    }

    let reports: Vec<&str> = train.iter().filter_map(|r| r.report.as_deref()).collect();
    let vocabulary = build_vocabulary(&reports, config.n_concepts, &TextNormalizationConfig::default())?;
    let by_term: BTreeMap<&str, usize> = terms.iter().enumerate().map(|(j, t)| (t.as_str(), j)).collect();
    let mut concepts = Vec::with_capacity(config.n_concepts);
    for term in vocabulary.terms() {
        let j = by_term
            .get(term.as_str())
            .ok_or_else(|| PipelineError::Config(format!("synthetic corpus produced unexpected bigram {term:?}")))?;
        concepts.push(ConceptEntry {
            term: term.clone(),
            vector: raw[*j].clone(),
        });
    }
    if concepts.len() != config.n_concepts {
        return Err(PipelineError::Config(format!(
            "synthetic vocabulary has {} terms, expected {}",
            concepts.len(),
            config.n_concepts
        )));
    }

    let image_mean = mean(train.iter().map(|r| r.vector.as_slice()), dim);

    Ok(SynthCorpus {
        config: config.clone(),
        concepts,
        image_mean,
        vocabulary,
        train,
        test,
        manifest,
    })
}

impl SynthCorpus {
    pub fn dictionary(&self) -> Result<ConceptDictionary, PipelineError> {
        Ok(ConceptDictionary::from_entries(
            self.concepts.clone(),
            Some(&self.vocabulary),
            self.image_mean.clone(),
        )?)
    }

    pub fn corpus(&self) -> Vec<CorpusDocument> {
        self.train
            .iter()
            .map(|r| CorpusDocument {
                id: r.id.clone(),
                report: r.report.clone().unwrap_or_default(),
            })
            .collect()
    }

    pub fn train_reports(&self) -> Vec<&str> {
        self.train.iter().filter_map(|r| r.report.as_deref()).collect()
    }

    /// Mean over test images of |mentioned| / |planted|.
    pub fn planting_rate(&self) -> f64 {
        let n = self.manifest.len();
        self.manifest
            .iter()
            .map(|m| m.mentioned.len() as f64 / m.planted.len() as f64)
            .sum::<f64>()
            / n as f64
    }

    /// Writes `concepts.jsonl`, `image_mean.json`, `vocab.tsv`,
    /// `store.jsonl` (train images), `corpus.jsonl` (train reports),
    /// `queries.jsonl` (test images), `manifest.jsonl` and `split.txt`
    /// (test ids, one per line).
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        write_jsonl_file(dir.join("concepts.jsonl"), &self.concepts)?;
        write_json_file(dir.join("image_mean.json"), &self.image_mean)?;
        let mut vocab = create(&dir.join("vocab.tsv"))?;
        self.vocabulary.write_tsv(&mut vocab)?;
        vocab.flush()?;
        write_jsonl_file(dir.join("store.jsonl"), &self.train)?;
        write_jsonl_file(dir.join("corpus.jsonl"), &self.corpus())?;
        write_jsonl_file(dir.join("queries.jsonl"), &self.test)?;
        write_jsonl_file(dir.join("manifest.jsonl"), &self.manifest)?;
        let mut split = create(&dir.join("split.txt"))?;
        for r in &self.test {
            writeln!(split, "{}", r.id)?;
        }
        split.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_concepts: 20,
            dim: 32,
            n_train: 40,
            n_test: 10,
            planted: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.concepts, b.concepts);
        let c = generate(&SynthConfig { seed: 99, ..small() }).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn vocabulary_is_exactly_the_concepts() {
        let c = generate(&small()).unwrap();
        assert_eq!(c.vocabulary.len(), 20);
        let terms: Vec<&str> = c.concepts.iter().map(|e| e.term.as_str()).collect();
        assert_eq!(
            terms,
            c.vocabulary.terms().iter().map(String::as_str).collect::<Vec<_>>()
        );
        assert!(c.dictionary().is_ok());
    }

    #[test]
    fn manifest_is_consistent() {
        let c = generate(&small()).unwrap();
        for (m, r) in c.manifest.iter().zip(&c.test) {
            assert_eq!(m.planted.len(), 3);
            assert!(m.mentioned.iter().all(|t| m.planted.contains(t)));
            let report = r.report.as_deref().unwrap().to_lowercase();
            for t in &m.mentioned {
                assert!(report.contains(t.as_str()));
            }
        }
        let rate = c.planting_rate();
        assert!((0.0..=1.0).contains(&rate));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate(&SynthConfig { planted: 0, ..small() }).is_err());
        assert!(generate(&SynthConfig {
            mention_rate: 1.5,
            ..small()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            n_concepts: 1000,
            ..small()
        })
        .is_err());
    }
}
