use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{thread_pool, PipelineError};
use crate::metrics::{concept_precision, mean};
use crate::solver::{
    reconstruction_similarity, select_top_tau, solve_nn_lasso, ConceptDictionary, LassoOptions, SolverError,
    SparseDecomposition,
};
use crate::store::EmbeddingRecord;
use crate::vocab::{build_vocabulary, TextNormalizationConfig};

/// Axes of the sweep. Values are sorted and deduplicated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub vocab_sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub taus: Vec<usize>,
}

impl AblationGrid {
    pub fn new(
        mut vocab_sizes: Vec<usize>,
        mut lambdas: Vec<f64>,
        mut taus: Vec<usize>,
    ) -> Result<Self, PipelineError> {
        if vocab_sizes.is_empty() || lambdas.is_empty() || taus.is_empty() {
            return Err(PipelineError::Config("ablation grid axes must be non-empty".into()));
        }
        if vocab_sizes.contains(&0) {
            return Err(PipelineError::Config("vocabulary sizes must be positive".into()));
        }
        if taus.contains(&0) {
            return Err(SolverError::InvalidTau.into());
        }
        if let Some(&l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(SolverError::InvalidLambda(l).into());
        }
        vocab_sizes.sort_unstable();
        vocab_sizes.dedup();
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        taus.sort_unstable();
        taus.dedup();
        Ok(Self {
            vocab_sizes,
            lambdas,
            taus,
        })
    }

    /// Sizes {100, 200, 500, 700, 1000}, λ {0.1, 0.3, 0.5}, τ {3, 5, 7}.
    pub fn reference() -> Self {
        Self {
            vocab_sizes: vec![100, 200, 500, 700, 1000],
            lambdas: vec![0.1, 0.3, 0.5],
            taus: vec![3, 5, 7],
        }
    }

    pub fn len(&self) -> usize {
        self.vocab_sizes.len() * self.lambdas.len() * self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One grid point. Precision means skip images whose precision is undefined
/// (no reference, or an empty keyword set) and count them instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub vocab_size: usize,
    pub lambda: f64,
    pub tau: usize,
    pub images: usize,
    pub mean_precision: Option<f64>,
    pub precision_undefined: usize,
    pub mean_recon_cosine: Option<f64>,
    pub mean_nnz: f64,
    pub all_zero_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedImage {
    pub id: String,
    pub reference: Option<String>,
    pub decomposition: SparseDecomposition,
    pub recon_cosine: Option<f64>,
}

/// Solves every image against `dict`. Results follow input order for any
/// `parallelism`.
pub fn decompose_all(
    dict: &ConceptDictionary,
    images: &[EmbeddingRecord],
    options: &LassoOptions,
    parallelism: usize,
) -> Result<Vec<DecomposedImage>, PipelineError> {
    let one = |img: &EmbeddingRecord| -> Result<DecomposedImage, PipelineError> {
        let v = dict
            .center_image(&img.vector)
            .map_err(|e| PipelineError::for_image(&img.id, e))?;
        let decomposition = solve_nn_lasso(dict, &v, options).map_err(|e| PipelineError::for_image(&img.id, e))?;
        Ok(DecomposedImage {
            id: img.id.clone(),
            reference: img.report.clone(),
            recon_cosine: reconstruction_similarity(dict, &decomposition, &v),
            decomposition,
        })
    };
    match thread_pool(parallelism) {
        Some(pool) => {
            use rayon::prelude::*;
            pool.install(|| images.par_iter().map(one).collect())
        }
        None => images.iter().map(one).collect(),
    }
}

/// Checks that the dictionary lists the corpus vocabulary in rank order for
/// at least `max_size` terms.
fn check_dictionary<S: AsRef<str>>(
    dict: &ConceptDictionary,
    corpus: &[S],
    max_size: usize,
    normalization: &TextNormalizationConfig,
) -> Result<(), PipelineError> {
    let vocab = build_vocabulary(corpus, max_size, normalization)?;
    if vocab.len() < max_size {
        return Err(PipelineError::Config(format!(
            "corpus yields {} bigrams, grid asks for {max_size}",
            vocab.len()
        )));
    }
    for (rank, term) in vocab.terms().iter().enumerate() {
        match dict.terms().get(rank) {
            None => return Err(SolverError::MissingConcept(term.clone()).into()),
            Some(found) if found != term => {
                if !dict.terms().contains(term) {
                    return Err(SolverError::MissingConcept(term.clone()).into());
                }
                return Err(SolverError::VocabularyMismatch {
                    rank,
                    expected: term.clone(),
                    found: found.clone(),
                }
                .into());
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Evaluates every grid point. `corpus` is the report corpus the vocabulary
/// is built from; `dictionary` holds concept embeddings for its top terms in
/// rank order; `images` are the evaluation split, each with its reference
/// report. Cells are sorted by (vocab_size, lambda, tau).
#[allow(clippy::too_many_arguments)]
pub fn run_ablation<S: AsRef<str>>(
    grid: &AblationGrid,
    corpus: &[S],
    dictionary: &ConceptDictionary,
    images: &[EmbeddingRecord],
    normalization: &TextNormalizationConfig,
    tol: f64,
    max_iter: usize,
    parallelism: usize,
) -> Result<Vec<AblationCell>, PipelineError> {
    let max_size = *grid
        .vocab_sizes
        .last()
        .ok_or_else(|| PipelineError::Config("empty grid".into()))?;
    check_dictionary(dictionary, corpus, max_size, normalization)?;

    let mut order: Vec<usize> = (0..images.len()).collect();
    order.sort_by(|&a, &b| images[a].id.cmp(&images[b].id));

    let mut cells = Vec::with_capacity(grid.len());
    for &size in &grid.vocab_sizes {
        let dict = dictionary.prefix(size)?;
        for &lambda in &grid.lambdas {
            let opts = LassoOptions { lambda, tol, max_iter };
            let decomposed = decompose_all(&dict, images, &opts, parallelism)?;
            let sorted: Vec<&DecomposedImage> = order.iter().map(|&i| &decomposed[i]).collect();
            let all_zero_count = sorted.iter().filter(|d| d.decomposition.all_zero).count();
            let mean_recon_cosine = mean(sorted.iter().filter_map(|d| d.recon_cosine));
            let mean_nnz = mean(sorted.iter().map(|d| d.decomposition.nnz() as f64)).unwrap_or(0.0);
            for &tau in &grid.taus {
                let mut precisions = Vec::with_capacity(sorted.len());
                for d in &sorted {
                    let keywords = select_top_tau(&d.decomposition, dict.terms(), tau)?;
                    precisions.push(
                        d.reference
                            .as_deref()
                            .and_then(|r| concept_precision(&keywords, r, normalization)),
                    );
                }
                cells.push(AblationCell {
                    vocab_size: size,
                    lambda,
                    tau,
                    images: sorted.len(),
                    mean_precision: mean(precisions.iter().flatten().copied()),
                    precision_undefined: precisions.iter().filter(|p| p.is_none()).count(),
                    mean_recon_cosine,
                    mean_nnz,
                    all_zero_count,
                });
            }
        }
    }
    Ok(cells)
}

/// Provenance lines written above the CSV table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationHeader {
    pub split: String,
    pub normalization_fingerprint: String,
    pub stopwords: String,
    pub acronyms: String,
    pub lemmas: String,
}

impl AblationHeader {
    pub fn new(split: impl Into<String>, normalization: &TextNormalizationConfig, lists: [Option<String>; 3]) -> Self {
        let [stopwords, acronyms, lemmas] = lists.map(|l| l.unwrap_or_else(|| "default".to_string()));
        Self {
            split: split.into(),
            normalization_fingerprint: normalization.fingerprint(),
            stopwords,
            acronyms,
            lemmas,
        }
    }
}

fn cell_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_ablation_csv(mut w: impl Write, header: &AblationHeader, cells: &[AblationCell]) -> std::io::Result<()> {
    writeln!(w, "# split: {}", header.split)?;
    writeln!(w, "# normalization: {}", header.normalization_fingerprint)?;
    writeln!(w, "# stopwords: {}", header.stopwords)?;
    writeln!(w, "# acronyms: {}", header.acronyms)?;
    writeln!(w, "# lemmas: {}", header.lemmas)?;
    writeln!(
        w,
        "vocab_size,lambda,tau,images,mean_precision,precision_undefined,mean_recon_cosine,mean_nnz,all_zero_count"
    )?;
    let mut sorted: Vec<&AblationCell> = cells.iter().collect();
    sorted.sort_by(|a, b| {
        a.vocab_size
            .cmp(&b.vocab_size)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.tau.cmp(&b.tau))
    });
    for c in sorted {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:.6},{}",
            c.vocab_size,
            c.lambda,
            c.tau,
            c.images,
            cell_value(c.mean_precision),
            c.precision_undefined,
            cell_value(c.mean_recon_cosine),
            c.mean_nnz,
            c.all_zero_count
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_normalized() {
        let g = AblationGrid::new(vec![200, 100, 200], vec![0.5, 0.1], vec![7, 3]).unwrap();
        assert_eq!(g.vocab_sizes, vec![100, 200]);
        assert_eq!(g.lambdas, vec![0.1, 0.5]);
        assert_eq!(g.taus, vec![3, 7]);
        assert_eq!(g.len(), 8);
        assert!(AblationGrid::new(vec![], vec![0.1], vec![3]).is_err());
        assert!(AblationGrid::new(vec![10], vec![-0.1], vec![3]).is_err());
        assert!(AblationGrid::new(vec![10], vec![0.1], vec![0]).is_err());
        assert_eq!(AblationGrid::reference().len(), 45);
    }

    #[test]
    fn csv_rows_sorted() {
        let cell = |vocab_size, lambda, tau| AblationCell {
            vocab_size,
            lambda,
            tau,
            images: 2,
            mean_precision: None,
            precision_undefined: 2,
            mean_recon_cosine: Some(0.5),
            mean_nnz: 1.0,
            all_zero_count: 0,
        };
        let mut out = Vec::new();
        write_ablation_csv(
            &mut out,
            &AblationHeader::default(),
            &[cell(200, 0.1, 3), cell(100, 0.5, 3), cell(100, 0.1, 5)],
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(
            rows,
            vec![
                "100,0.1,5,2,,2,0.500000,1.000000,0",
                "100,0.5,3,2,,2,0.500000,1.000000,0",
                "200,0.1,3,2,,2,0.500000,1.000000,0",
            ]
        );
    }
}
