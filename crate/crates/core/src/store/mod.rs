//! Exact cosine retrieval over a flat table of `(embedding, report)` pairs.
//!
//! Rows are held as `f32`, the precision of the on-disk format, so a store
//! built from JSONL and the same store reloaded from its binary file answer
//! every query identically. Similarities are accumulated in `f64`.

mod binary;

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{jsonl_iter, JsonlError};

pub use binary::{MAGIC, VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("expected dimension must be positive")]
    InvalidDimension,
    #[error("record {id:?}: dimension {found} does not match expected {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("record {id:?}: component {index} is not finite")]
    NonFinite { id: String, index: usize },
    #[error("record {0:?}: vector has zero norm")]
    ZeroNorm(String),
    #[error("store is empty")]
    EmptyStore,
    #[error("query dimension {found} does not match store dimension {expected}")]
    QueryDimension { expected: usize, found: usize },
    #[error("query vector has zero or non-finite norm")]
    InvalidQuery,
    #[error("k must be positive")]
    InvalidK,
    #[error("malformed store file: {0}")]
    Format(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of the JSONL ingestion format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
    #[serde(default)]
    pub report: Option<String>,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, vector: Vec<f64>, report: Option<String>) -> Self {
        Self {
            id: id.into(),
            vector,
            report,
        }
    }
}

/// Parses the JSONL ingestion format.
pub fn read_records(reader: impl BufRead) -> impl Iterator<Item = Result<EmbeddingRecord, StoreError>> {
    jsonl_iter(reader).map(|r| r.map_err(StoreError::from))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub id: String,
    pub similarity: f64,
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub hits: Vec<Hit>,
    pub k_requested: usize,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.id.as_str()).collect()
    }

    /// Reports of the hits in rank order; hits without a report are skipped.
    pub fn reports(&self) -> Vec<String> {
        self.hits.iter().filter_map(|h| h.report.clone()).collect()
    }
}

/// Immutable after construction; safe to query from many threads.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    reports: Vec<Option<String>>,
    rows: Vec<f32>,
    norms: Vec<f64>,
}

impl EmbeddingStore {
    /// Validates and loads records, preserving their order.
    pub fn ingest<I>(records: I, expected_dim: usize) -> Result<Self, StoreError>
    where
        I: IntoIterator<Item = Result<EmbeddingRecord, StoreError>>,
    {
        if expected_dim == 0 {
            return Err(StoreError::InvalidDimension);
        }
        let mut store = Self {
            dim: expected_dim,
            ids: Vec::new(),
            reports: Vec::new(),
            rows: Vec::new(),
            norms: Vec::new(),
        };
        let mut seen = HashSet::new();
        for record in records {
            let record = record?;
            store.push(record, &mut seen)?;
        }
        Ok(store)
    }

    pub fn from_records(records: Vec<EmbeddingRecord>, expected_dim: usize) -> Result<Self, StoreError> {
        Self::ingest(records.into_iter().map(Ok), expected_dim)
    }

    fn push(&mut self, record: EmbeddingRecord, seen: &mut HashSet<String>) -> Result<(), StoreError> {
        let EmbeddingRecord { id, vector, report } = record;
        if vector.len() != self.dim {
            return Err(StoreError::DimensionMismatch {
                id,
                expected: self.dim,
                found: vector.len(),
            });
        }
        let row: Vec<f32> = vector.iter().map(|&v| v as f32).collect();
        if let Some(index) = vector
            .iter()
            .zip(&row)
            .position(|(v, r)| !v.is_finite() || !r.is_finite())
        {
            return Err(StoreError::NonFinite { id, index });
        }
        let norm = row_norm(&row);
        if norm == 0.0 {
            return Err(StoreError::ZeroNorm(id));
        }
        if !seen.insert(id.clone()) {
            return Err(StoreError::DuplicateId(id));
        }
        self.ids.push(id);
        self.reports.push(report);
        self.rows.extend_from_slice(&row);
        self.norms.push(norm);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn report(&self, i: usize) -> Option<&str> {
        self.reports[i].as_deref()
    }

    /// Cached Euclidean norm of row `i`.
    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    /// Row `i` widened to `f64`, together with its id and report.
    pub fn record(&self, i: usize) -> EmbeddingRecord {
        EmbeddingRecord {
            id: self.ids[i].clone(),
            vector: self.row(i).iter().map(|&v| v as f64).collect(),
            report: self.reports[i].clone(),
        }
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// The `k` rows most cosine-similar to `query`, by full scan.
    pub fn top_k(&self, query: &[f64], k: usize) -> Result<RetrievalResult, StoreError> {
        self.top_k_excluding(query, k, None)
    }

    /// Like [`top_k`](Self::top_k) but never returns the row whose id is
    /// `exclude`.
    pub fn top_k_excluding(
        &self,
        query: &[f64],
        k: usize,
        exclude: Option<&str>,
    ) -> Result<RetrievalResult, StoreError> {
        if k == 0 {
            return Err(StoreError::InvalidK);
        }
        if self.is_empty() {
            return Err(StoreError::EmptyStore);
        }
        if query.len() != self.dim {
            return Err(StoreError::QueryDimension {
                expected: self.dim,
                found: query.len(),
            });
        }
        let qnorm = crate::linalg::norm(query);
        if qnorm == 0.0 || !qnorm.is_finite() {
            return Err(StoreError::InvalidQuery);
        }

        let mut scored: Vec<(usize, f64)> = (0..self.len())
            .filter(|&i| exclude != Some(self.ids[i].as_str()))
            .map(|i| {
                let d: f64 = self.row(i).iter().zip(query).map(|(&r, &q)| r as f64 * q).sum();
                (i, (d / (qnorm * self.norms[i])).clamp(-1.0, 1.0))
            })
            .collect();

        let cmp = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
            b.1.total_cmp(&a.1).then_with(|| self.ids[a.0].cmp(&self.ids[b.0]))
        };
        let take = k.min(scored.len());
        if take > 0 && take < scored.len() {
            scored.select_nth_unstable_by(take - 1, cmp);
            scored.truncate(take);
        }
        scored.sort_unstable_by(cmp);

        let hits = scored
            .into_iter()
            .map(|(i, similarity)| Hit {
                id: self.ids[i].clone(),
                similarity,
                report: self.reports[i].clone(),
            })
            .collect();
        Ok(RetrievalResult { hits, k_requested: k })
    }
}

fn row_norm(row: &[f32]) -> f64 {
    row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}
