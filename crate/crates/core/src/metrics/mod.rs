//! Report quality measures: BLEU, ROUGE-L, concept precision and
//! micro/macro F1 over externally produced label vectors.

mod bleu;
mod f1;
mod report;
mod rouge;

use thiserror::Error;

pub use bleu::{bleu_n, BleuStats, BLEU_EPSILON};
pub use f1::{f1_labels, f1_matrix, F1Mode, LabelSet, LabelVector, CHEXBERT14, TOP5};
pub(crate) use report::mean;
pub use report::{CorpusMetrics, ImageEvaluation, MetricsReport, PerImageMetrics, CSV_HEADER};
pub use rouge::{lcs_len, rouge_l, rouge_l_scores, RougeScores};

use crate::solver::ConceptSet;
use crate::vocab::{normalize_text, TextNormalizationConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("label batch is empty")]
    EmptyBatch,
    #[error("id {0:?} present in only one of the label batches")]
    IdMismatch(String),
    #[error("duplicate id {0:?} in label batch")]
    DuplicateId(String),
    #[error("id {id:?}: label set {found} does not match {expected}")]
    LabelSetMismatch {
        id: String,
        expected: LabelSet,
        found: LabelSet,
    },
    #[error("id {id:?}: {found} labels, label set {set} has {expected}")]
    Arity {
        id: String,
        set: LabelSet,
        expected: usize,
        found: usize,
    },
    #[error("id {id:?}: label values must be 0 or 1, got {value}")]
    LabelValue { id: String, value: i64 },
    #[error("unknown label set {0:?}")]
    UnknownLabelSet(String),
}

/// Lowercased, punctuation-stripped, whitespace-split tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Fraction of keywords whose two lemmas occur as an adjacent pair in the
/// normalized reference. `None` for an empty keyword set.
pub fn concept_precision(keywords: &ConceptSet, reference: &str, config: &TextNormalizationConfig) -> Option<f64> {
    if keywords.is_empty() {
        return None;
    }
    let tokens = normalize_text(reference, config);
    let pairs: std::collections::HashSet<(&str, &str)> =
        tokens.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect();
    let matched = keywords
        .terms()
        .filter(|term| term.split_once(' ').is_some_and(|(a, b)| pairs.contains(&(a, b))))
        .count();
    Some(matched as f64 / keywords.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Keyword;

    fn kw(terms: &[&str]) -> ConceptSet {
        ConceptSet::new(
            terms
                .iter()
                .map(|t| Keyword {
                    term: t.to_string(),
                    coefficient: 1.0,
                })
                .collect(),
            5,
        )
    }

    #[test]
    fn tokenizer_strips_punctuation() {
        assert_eq!(
            tokenize("Heart size: normal, lungs CLEAR."),
            ["heart", "size", "normal", "lungs", "clear"]
        );
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn precision_full_and_partial() {
        let cfg = TextNormalizationConfig::default();
        let reference = "Small left pleural effusion. The cardiac silhouette is enlarged. \
                         Mild pulmonary edema. Bibasilar atelectasis. Degenerative change of the spine.";
        let all = kw(&[
            "pleural effusion",
            "cardiac silhouette",
            "pulmonary edema",
            "bibasilar atelectasis",
            "degenerative change",
        ]);
        assert_eq!(concept_precision(&all, reference, &cfg), Some(1.0));
        let two = kw(&[
            "pleural effusion",
            "pulmonary edema",
            "hiatal hernia",
            "lung nodule",
            "rib fracture",
        ]);
        assert_eq!(concept_precision(&two, reference, &cfg), Some(0.4));
        assert_eq!(concept_precision(&kw(&[]), reference, &cfg), None);
    }

    #[test]
    fn precision_ignores_case_and_punctuation() {
        let cfg = TextNormalizationConfig::default();
        let k = kw(&["pleural effusion", "lung clear"]);
        let a = concept_precision(&k, "pleural effusion. lungs clear", &cfg);
        let b = concept_precision(&k, "PLEURAL, effusion!! Lungs -- clear?", &cfg);
        assert_eq!(a, b);
        assert_eq!(a, Some(1.0));
    }
}
