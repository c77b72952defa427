use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::linalg::{mean, norm};
use crate::vocab::Vocabulary;

/// One line of the concept embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub term: String,
    pub vector: Vec<f64>,
}

/// `(x − mean) / ||x − mean||₂`
pub fn center_normalize(x: &[f64], mean: &[f64]) -> Result<Vec<f64>, SolverError> {
    if x.len() != mean.len() {
        return Err(SolverError::DimensionMismatch {
            expected: mean.len(),
            found: x.len(),
        });
    }
    let centered: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let n = norm(&centered);
    if n == 0.0 || !n.is_finite() {
        return Err(SolverError::ZeroNorm);
    }
    Ok(centered.into_iter().map(|v| v / n).collect())
}

/// Centered, unit-norm concept columns plus the means needed to bring image
/// embeddings into the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDictionary {
    terms: Vec<String>,
    dim: usize,
    raw: Vec<Vec<f64>>,
    concept_mean: Vec<f64>,
    image_mean: Vec<f64>,
    // column-major, m * dim
    columns: Vec<f64>,
    duplicates: Vec<(usize, usize)>,
    precentered: bool,
}

impl ConceptDictionary {
    pub fn build(terms: Vec<String>, raw_concepts: Vec<Vec<f64>>, image_mean: Vec<f64>) -> Result<Self, SolverError> {
        if raw_concepts.is_empty() {
            return Err(SolverError::EmptyDictionary);
        }
        if terms.len() != raw_concepts.len() {
            return Err(SolverError::LengthMismatch {
                expected: terms.len(),
                found: raw_concepts.len(),
            });
        }
        let dim = image_mean.len();
        for (term, v) in terms.iter().zip(&raw_concepts) {
            if v.len() != dim {
                return Err(SolverError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(SolverError::NonFinite {
                    term: term.clone(),
                    index,
                });
            }
        }

        let concept_mean = mean(raw_concepts.iter().map(Vec::as_slice), dim);
        let mut columns = Vec::with_capacity(raw_concepts.len() * dim);
        for (term, v) in terms.iter().zip(&raw_concepts) {
            let col = center_normalize(v, &concept_mean).map_err(|_| SolverError::DegenerateConcept(term.clone()))?;
            columns.extend(col);
        }

        let mut dict = Self {
            terms,
            dim,
            raw: raw_concepts,
            concept_mean,
            image_mean,
            columns,
            duplicates: Vec::new(),
            precentered: false,
        };
        dict.duplicates = dict.find_duplicates();
        for &(a, b) in &dict.duplicates {
            log::warn!(
                "concepts {:?} and {:?} have identical centered columns",
                dict.terms[a],
                dict.terms[b]
            );
        }
        Ok(dict)
    }

    /// Builds from concept file entries, checking that their order matches
    /// the vocabulary rank order when a vocabulary is given.
    pub fn from_entries(
        entries: Vec<ConceptEntry>,
        vocabulary: Option<&Vocabulary>,
        image_mean: Vec<f64>,
    ) -> Result<Self, SolverError> {
        if let Some(vocab) = vocabulary {
            check_order(&entries, vocab)?;
        }
        let (terms, vectors) = entries.into_iter().map(|e| (e.term, e.vector)).unzip();
        Self::build(terms, vectors, image_mean)
    }

    /// Uses already centered unit-norm columns as `C̃` directly; the concept
    /// mean is reported as zero.
    pub fn from_centered_columns(
        terms: Vec<String>,
        columns: Vec<Vec<f64>>,
        image_mean: Vec<f64>,
    ) -> Result<Self, SolverError> {
        if columns.is_empty() {
            return Err(SolverError::EmptyDictionary);
        }
        if terms.len() != columns.len() {
            return Err(SolverError::LengthMismatch {
                expected: terms.len(),
                found: columns.len(),
            });
        }
        let dim = image_mean.len();
        for c in &columns {
            if c.len() != dim {
                return Err(SolverError::DimensionMismatch {
                    expected: dim,
                    found: c.len(),
                });
            }
            let n = norm(c);
            if (n - 1.0).abs() > 1e-9 || n.is_nan() {
                return Err(SolverError::NotUnitNorm(n));
            }
        }
        let mut dict = Self {
            terms,
            dim,
            columns: columns.concat(),
            raw: columns,
            concept_mean: vec![0.0; dim],
            image_mean,
            duplicates: Vec::new(),
            precentered: true,
        };
        dict.duplicates = dict.find_duplicates();
        Ok(dict)
    }

    /// Dictionary over the first `m` concepts, re-centered on their own mean.
    pub fn prefix(&self, m: usize) -> Result<Self, SolverError> {
        let m = m.min(self.len());
        if self.precentered {
            return Self::from_centered_columns(
                self.terms[..m].to_vec(),
                self.raw[..m].to_vec(),
                self.image_mean.clone(),
            );
        }
        Self::build(
            self.terms[..m].to_vec(),
            self.raw[..m].to_vec(),
            self.image_mean.clone(),
        )
    }

    fn find_duplicates(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                if self.column(a) == self.column(b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn concept_mean(&self) -> &[f64] {
        &self.concept_mean
    }

    pub fn image_mean(&self) -> &[f64] {
        &self.image_mean
    }

    /// Centered, normalized column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.dim..(j + 1) * self.dim]
    }

    /// Pairs of concept indices whose centered columns coincide.
    pub fn duplicate_columns(&self) -> &[(usize, usize)] {
        &self.duplicates
    }

    /// Centers an image embedding by the image mean and normalizes it.
    pub fn center_image(&self, v: &[f64]) -> Result<Vec<f64>, SolverError> {
        center_normalize(v, &self.image_mean)
    }

    /// `C̃α`
    pub fn reconstruct(&self, alpha: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                crate::linalg::axpy(a, self.column(j), &mut out);
            }
        }
        out
    }
}

fn check_order(entries: &[ConceptEntry], vocab: &Vocabulary) -> Result<(), SolverError> {
    for (rank, term) in vocab.terms().iter().enumerate() {
        match entries.get(rank) {
            None => return Err(SolverError::MissingConcept(term.clone())),
            Some(e) if e.term != *term => {
                return Err(SolverError::VocabularyMismatch {
                    rank,
                    expected: term.clone(),
                    found: e.term.clone(),
                })
            }
            Some(_) => {}
        }
    }
    if entries.len() > vocab.len() {
        let extra = &entries[vocab.len()];
        return Err(SolverError::VocabularyMismatch {
            rank: vocab.len(),
            expected: String::new(),
            found: extra.term.clone(),
        });
    }
    Ok(())
}
