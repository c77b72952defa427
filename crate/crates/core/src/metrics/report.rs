use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{concept_precision, f1_labels, rouge_l, BleuStats, F1Mode, LabelSet, LabelVector, MetricsError};
use crate::solver::ConceptSet;
use crate::vocab::TextNormalizationConfig;

/// Column order of the flat results table.
pub const CSV_HEADER: &str = "Micro-F1_14,Micro-F1_5,Macro-F1_14,Macro-F1_5,B-1,B-4,R-L";

/// Everything known about one generated report.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEvaluation {
    pub id: String,
    pub candidate: String,
    pub reference: Option<String>,
    /// `None` when the strategy extracted no concepts at all.
    pub keywords: Option<ConceptSet>,
    pub nnz: Option<usize>,
    pub recon_cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerImageMetrics {
    pub bleu1: Option<f64>,
    pub bleu4: Option<f64>,
    pub rouge_l: Option<f64>,
    pub concept_precision: Option<f64>,
    pub nnz: Option<usize>,
    pub recon_cosine: Option<f64>,
}

impl PerImageMetrics {
    /// Text metrics need a reference; concept precision needs both a
    /// reference and a keyword set.
    pub fn evaluate(e: &ImageEvaluation, config: &TextNormalizationConfig) -> Self {
        let (bleu1, bleu4, rouge) = match &e.reference {
            Some(r) => {
                let stats = BleuStats::from_texts(&e.candidate, r);
                (
                    Some(stats.score(1)),
                    Some(stats.score(4)),
                    Some(rouge_l(&e.candidate, r)),
                )
            }
            None => (None, None, None),
        };
        let concept_precision = match (&e.keywords, &e.reference) {
            (Some(k), Some(r)) => concept_precision(k, r, config),
            _ => None,
        };
        Self {
            bleu1,
            bleu4,
            rouge_l: rouge,
            concept_precision,
            nnz: e.nnz,
            recon_cosine: e.recon_cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub images: usize,
    /// Pooled-count BLEU over all images with a reference.
    pub bleu1: Option<f64>,
    pub bleu4: Option<f64>,
    pub rouge_l: Option<f64>,
    pub micro_f1_14: Option<f64>,
    pub macro_f1_14: Option<f64>,
    pub micro_f1_5: Option<f64>,
    pub macro_f1_5: Option<f64>,
    pub mean_precision: Option<f64>,
    /// Images whose keyword set was empty, excluded from `mean_precision`.
    pub precision_undefined: usize,
    pub mean_nnz: Option<f64>,
    pub mean_recon_cosine: Option<f64>,
    /// All-zero decompositions, excluded from `mean_recon_cosine`.
    pub no_reconstruction: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_image: BTreeMap<String, PerImageMetrics>,
    pub corpus: CorpusMetrics,
}

impl MetricsReport {
    pub fn compute(
        evaluations: &[ImageEvaluation],
        labels: Option<(&[LabelVector], &[LabelVector])>,
        config: &TextNormalizationConfig,
    ) -> Result<Self, MetricsError> {
        let mut per_image = BTreeMap::new();
        let mut pooled = BleuStats::default();
        let mut any_reference = false;
        let mut precision_undefined = 0;
        let mut no_reconstruction = 0;

        for e in evaluations {
            if let Some(r) = &e.reference {
                pooled.add(&BleuStats::from_texts(&e.candidate, r));
                any_reference = true;
            }
            let m = PerImageMetrics::evaluate(e, config);
            if e.keywords.is_some() && e.reference.is_some() && m.concept_precision.is_none() {
                precision_undefined += 1;
            }
            if e.nnz == Some(0) {
                no_reconstruction += 1;
            }
            per_image.insert(e.id.clone(), m);
        }

        let (mut micro_14, mut macro_14, mut micro_5, mut macro_5) = (None, None, None, None);
        if let Some((pred, refs)) = labels {
            let set = refs.first().map(|r| r.label_set).ok_or(MetricsError::EmptyBatch)?;
            if set == LabelSet::Chexbert14 {
                micro_14 = Some(f1_labels(pred, refs, F1Mode::Micro)?);
                macro_14 = Some(f1_labels(pred, refs, F1Mode::Macro)?);
            }
            let p5: Vec<LabelVector> = pred.iter().map(LabelVector::to_top5).collect();
            let r5: Vec<LabelVector> = refs.iter().map(LabelVector::to_top5).collect();
            micro_5 = Some(f1_labels(&p5, &r5, F1Mode::Micro)?);
            macro_5 = Some(f1_labels(&p5, &r5, F1Mode::Macro)?);
        }

        let values = |f: fn(&PerImageMetrics) -> Option<f64>| per_image.values().filter_map(f);
        let corpus = CorpusMetrics {
            images: evaluations.len(),
            bleu1: any_reference.then(|| pooled.score(1)),
            bleu4: any_reference.then(|| pooled.score(4)),
            rouge_l: mean(values(|m| m.rouge_l)),
            micro_f1_14: micro_14,
            macro_f1_14: macro_14,
            micro_f1_5: micro_5,
            macro_f1_5: macro_5,
            mean_precision: mean(values(|m| m.concept_precision)),
            precision_undefined,
            mean_nnz: mean(values(|m| m.nnz.map(|n| n as f64))),
            mean_recon_cosine: mean(values(|m| m.recon_cosine)),
            no_reconstruction,
        };
        Ok(Self { per_image, corpus })
    }

    /// Header plus one row in [`CSV_HEADER`] order; undefined cells are empty.
    pub fn to_csv(&self) -> String {
        let c = &self.corpus;
        let cells: Vec<String> = [
            c.micro_f1_14,
            c.micro_f1_5,
            c.macro_f1_14,
            c.macro_f1_5,
            c.bleu1,
            c.bleu4,
            c.rouge_l,
        ]
        .iter()
        .map(|v| v.map(|x| format!("{x:.6}")).unwrap_or_default())
        .collect();
        format!("{CSV_HEADER}\n{}\n", cells.join(","))
    }
}

/// Arithmetic mean in iteration order; `None` for no values.
pub(crate) fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Keyword;

    fn eval(id: &str, cand: &str, reference: &str, kw: Option<&[&str]>, nnz: Option<usize>) -> ImageEvaluation {
        ImageEvaluation {
            id: id.into(),
            candidate: cand.into(),
            reference: Some(reference.into()),
            keywords: kw.map(|k| {
                ConceptSet::new(
                    k.iter()
                        .map(|t| Keyword {
                            term: t.to_string(),
                            coefficient: 0.5,
                        })
                        .collect(),
                    5,
                )
            }),
            nnz,
            recon_cosine: nnz.filter(|&n| n > 0).map(|n| 0.5 + n as f64 / 100.0),
        }
    }

    #[test]
    fn corpus_means_recompute_from_per_image_values() {
        let evals = vec![
            eval(
                "b",
                "pleural effusion is small",
                "small pleural effusion",
                Some(&["pleural effusion"]),
                Some(3),
            ),
            eval(
                "a",
                "lungs are clear",
                "the lungs are clear",
                Some(&["lung clear", "heart size"]),
                Some(2),
            ),
            eval("c", "no change", "stable appearance", Some(&[]), Some(0)),
        ];
        let r = MetricsReport::compute(&evals, None, &TextNormalizationConfig::default()).unwrap();
        let ids: Vec<_> = r.per_image.keys().cloned().collect();
        assert_eq!(ids, ["a", "b", "c"]);

        let rl: Vec<f64> = r.per_image.values().filter_map(|m| m.rouge_l).collect();
        assert_eq!(r.corpus.rouge_l, Some(rl.iter().sum::<f64>() / 3.0));
        assert_eq!(r.corpus.mean_precision, Some((0.5 + 1.0) / 2.0));
        assert_eq!(r.corpus.precision_undefined, 1);
        assert_eq!(r.corpus.no_reconstruction, 1);
        assert_eq!(r.corpus.mean_nnz, Some(5.0 / 3.0));
        assert_eq!(r.corpus.mean_recon_cosine, Some((0.52 + 0.53) / 2.0));

        let mut pooled = BleuStats::default();
        for e in &evals {
            pooled.add(&BleuStats::from_texts(&e.candidate, e.reference.as_deref().unwrap()));
        }
        assert_eq!(r.corpus.bleu1, Some(pooled.score(1)));
        assert_eq!(r.corpus.micro_f1_14, None);
    }

    #[test]
    fn labels_fill_both_subsets_and_csv() {
        let evals = vec![eval("a", "x", "x", None, None)];
        let mut l = vec![false; 14];
        l[1] = true;
        let pred = vec![LabelVector::new("a", l.clone(), LabelSet::Chexbert14).unwrap()];
        let refs = pred.clone();
        let r = MetricsReport::compute(&evals, Some((&pred, &refs)), &TextNormalizationConfig::default()).unwrap();
        assert_eq!(r.corpus.micro_f1_14, Some(1.0));
        assert_eq!(r.corpus.micro_f1_5, Some(1.0));
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 7);
    }
}
