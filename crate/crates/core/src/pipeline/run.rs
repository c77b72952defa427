use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{thread_pool, PipelineConfig, PipelineError, PipelineResources};
use crate::generation::{GeneratedReport, GenerationClient};
use crate::metrics::{ImageEvaluation, MetricsReport, PerImageMetrics};
use crate::prompt::{build_prompt, Prompt, PromptSpec, Strategy};
use crate::solver::{reconstruction_similarity, select_top_tau, solve_nn_lasso, ConceptSet};
use crate::store::{EmbeddingRecord, RetrievalResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievedCase {
    pub id: String,
    pub similarity: f64,
}

/// One JSONL trace line. Fields a strategy does not use are omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub id: String,
    pub strategy: Strategy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<(String, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nnz: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_zero: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recon_cosine: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<Vec<RetrievedCase>>,
    pub degraded: bool,
    pub prompt_sha256: String,
    pub report: String,
    pub metrics: PerImageMetrics,
}

/// Everything computed for an image before generation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedImage {
    pub id: String,
    pub reference: Option<String>,
    pub keywords: Option<ConceptSet>,
    pub nnz: Option<usize>,
    pub all_zero: Option<bool>,
    pub recon_cosine: Option<f64>,
    pub retrieval: Option<RetrievalResult>,
    pub prompt: Prompt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub traces: Vec<Trace>,
    pub metrics: MetricsReport,
}

/// Decomposition, retrieval and prompt assembly for one image.
pub fn prepare_image(
    config: &PipelineConfig,
    resources: &PipelineResources,
    image: &EmbeddingRecord,
) -> Result<PreparedImage, PipelineError> {
    let wrap = |e: PipelineError| PipelineError::for_image(&image.id, e);
    if let Some(dim) = resources.dim() {
        if image.vector.len() != dim {
            return Err(wrap(PipelineError::DimensionMismatch {
                artifact: format!("image {:?}", image.id),
                expected: dim,
                found: image.vector.len(),
            }));
        }
    }
    let strategy = config.strategy;
    let mut spec = PromptSpec::new(strategy).with_templates(resources.templates.clone());
    let mut prepared = PreparedImage {
        id: image.id.clone(),
        reference: image.report.clone(),
        keywords: None,
        nnz: None,
        all_zero: None,
        recon_cosine: None,
        retrieval: None,
        prompt: Prompt {
            text: String::new(),
            degraded: false,
        },
    };

    if strategy.uses_concepts() {
        let dict = resources
            .dictionary
            .as_ref()
            .ok_or_else(|| wrap(PipelineError::Config("concept dictionary not loaded".into())))?;
        let v_tilde = dict.center_image(&image.vector).map_err(|e| wrap(e.into()))?;
        let decomp = solve_nn_lasso(dict, &v_tilde, &config.lasso()).map_err(|e| wrap(e.into()))?;
        let keywords = select_top_tau(&decomp, dict.terms(), config.tau).map_err(|e| wrap(e.into()))?;
        prepared.recon_cosine = reconstruction_similarity(dict, &decomp, &v_tilde);
        prepared.nnz = Some(decomp.nnz());
        prepared.all_zero = Some(decomp.all_zero);
        if decomp.all_zero {
            log::warn!(
                "image {:?}: all-zero decomposition at lambda {}",
                image.id,
                decomp.lambda
            );
        }
        spec = spec.with_keywords(keywords.clone());
        prepared.keywords = Some(keywords);
    }

    if strategy.uses_retrieval() {
        let store = resources
            .store
            .as_ref()
            .ok_or_else(|| wrap(PipelineError::Config("store not loaded".into())))?;
        let exclude = config.exclude_self.then_some(image.id.as_str());
        let hits = store
            .top_k_excluding(&image.vector, config.k, exclude)
            .map_err(|e| wrap(e.into()))?;
        spec = spec.with_reports(hits.reports());
        prepared.retrieval = Some(hits);
    }

    prepared.prompt = build_prompt(&spec).map_err(|e| wrap(e.into()))?;
    Ok(prepared)
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn finish(
    prepared: PreparedImage,
    report: GeneratedReport,
    resources: &PipelineResources,
    strategy: Strategy,
) -> (Trace, ImageEvaluation) {
    let eval = ImageEvaluation {
        id: prepared.id.clone(),
        candidate: report.text.clone(),
        reference: prepared.reference.clone(),
        keywords: prepared.keywords.clone(),
        nnz: prepared.nnz,
        recon_cosine: prepared.recon_cosine,
    };
    let trace = Trace {
        id: prepared.id,
        strategy,
        keywords: prepared
            .keywords
            .map(|k| k.keywords.into_iter().map(|kw| (kw.term, kw.coefficient)).collect()),
        nnz: prepared.nnz,
        all_zero: prepared.all_zero,
        recon_cosine: prepared.recon_cosine,
        retrieval: prepared.retrieval.map(|r| {
            r.hits
                .into_iter()
                .map(|h| RetrievedCase {
                    id: h.id,
                    similarity: h.similarity,
                })
                .collect()
        }),
        degraded: prepared.prompt.degraded,
        prompt_sha256: sha256_hex(&prepared.prompt.text),
        report: report.text,
        metrics: PerImageMetrics::evaluate(&eval, &resources.normalization),
    };
    (trace, eval)
}

fn write_trace(sink: &mut dyn Write, trace: &Trace) -> Result<(), PipelineError> {
    serde_json::to_writer(&mut *sink, trace).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

/// Runs every image through the configured strategy, writing one trace line
/// per image to `sink` as soon as its report is available.
///
/// Output is ordered by input position and identical for any
/// `config.parallelism`. If generation fails, traces for the images before
/// the failing one have already been written and the error is returned.
pub fn run_pipeline(
    config: &PipelineConfig,
    resources: &PipelineResources,
    images: &[EmbeddingRecord],
    client: &GenerationClient,
    sink: &mut dyn Write,
) -> Result<PipelineOutput, PipelineError> {
    config.validate_parameters()?;
    resources.check_strategy(config.strategy)?;
    let pool = thread_pool(config.parallelism);
    let prepared: Vec<PreparedImage> = match &pool {
        Some(pool) => {
            use rayon::prelude::*;
            pool.install(|| {
                images
                    .par_iter()
                    .map(|img| prepare_image(config, resources, img))
                    .collect::<Result<_, _>>()
            })?
        }
        None => images
            .iter()
            .map(|img| prepare_image(config, resources, img))
            .collect::<Result<_, _>>()?,
    };

    let mut traces = Vec::with_capacity(prepared.len());
    let mut evals = Vec::with_capacity(prepared.len());

    if pool.is_some() {
        let items: Vec<(String, String)> = prepared.iter().map(|p| (p.id.clone(), p.prompt.text.clone())).collect();
        let reports = client.generate_batch(&items, config.parallelism);
        for (p, report) in prepared.into_iter().zip(reports) {
            let report = report.map_err(|e| PipelineError::for_image(&p.id, e))?;
            let (trace, eval) = finish(p, report, resources, config.strategy);
            write_trace(sink, &trace)?;
            traces.push(trace);
            evals.push(eval);
        }
    } else {
        for p in prepared {
            let report = client
                .generate(&p.id, &p.prompt.text)
                .map_err(|e| PipelineError::for_image(&p.id, e))?;
            let (trace, eval) = finish(p, report, resources, config.strategy);
            write_trace(sink, &trace)?;
            traces.push(trace);
            evals.push(eval);
        }
    }

    let metrics = MetricsReport::compute(&evals, None, &resources.normalization)?;
    Ok(PipelineOutput { traces, metrics })
}
