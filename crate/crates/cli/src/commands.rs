use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cemrag::generation::{FixtureServer, Responder};
use cemrag::io::{read_json_file, read_jsonl_file, write_json_file};
use cemrag::metrics::ImageEvaluation;
use cemrag::pipeline::synth::{self, SynthConfig};
use cemrag::pipeline::{
    decompose_all, load_dictionary, load_normalization, load_store, run_ablation, run_pipeline, write_ablation_csv,
    AblationHeader, PipelineResources,
};
use cemrag::prompt::Templates;
use cemrag::solver::{select_top_tau, Keyword};
use cemrag::store::read_records;
use cemrag::vocab::{build_vocabulary, CorpusDocument};
use cemrag::{
    build_prompt, AblationGrid, ConceptSet, EmbeddingRecord, EmbeddingStore, GenerationClient, LabelVector,
    MetricsReport, PipelineConfig, PromptSpec, Vocabulary,
};
use serde::{Deserialize, Serialize};

use crate::args::*;

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_line<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_file(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn override_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn override_val<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_dictionary(cfg: &mut PipelineConfig, d: DictionaryArgs) {
    override_opt(&mut cfg.dictionary, d.dictionary);
    override_opt(&mut cfg.image_mean, d.image_mean);
    override_opt(&mut cfg.vocabulary, d.vocabulary);
}

fn apply_generation(cfg: &mut PipelineConfig, g: GenerationArgs) {
    override_val(&mut cfg.generation.endpoint, g.endpoint);
    override_val(&mut cfg.generation.max_tokens, g.max_tokens);
    override_val(&mut cfg.generation.timeout_ms, g.timeout_ms);
    override_val(&mut cfg.generation.retries, g.retries);
}

fn apply_normalization(cfg: &mut PipelineConfig, n: NormalizationArgs) {
    override_opt(&mut cfg.stopwords, n.stopwords);
    override_opt(&mut cfg.acronyms, n.acronyms);
    override_opt(&mut cfg.lemmas, n.lemmas);
}

fn dictionary_from(cfg: &PipelineConfig) -> Result<cemrag::ConceptDictionary> {
    let (Some(dict), Some(mean)) = (&cfg.dictionary, &cfg.image_mean) else {
        bail!("--dictionary and --image-mean are required");
    };
    let vocab = match &cfg.vocabulary {
        Some(v) => Some(Vocabulary::read_tsv(cemrag::io::open(v)?)?),
        None => None,
    };
    Ok(load_dictionary(dict, mean, vocab.as_ref())?)
}

pub fn store(cmd: StoreCommand, cfg: PipelineConfig) -> Result<()> {
    match cmd {
        StoreCommand::Build { input, dim, output } => {
            let reader = cemrag::io::open(&input)?;
            let store = EmbeddingStore::ingest(read_records(reader), dim)
                .with_context(|| format!("ingesting {}", input.display()))?;
            store.save(&output)?;
            log::info!(
                "wrote {} records of dimension {dim} to {}",
                store.len(),
                output.display()
            );
            Ok(())
        }
        StoreCommand::Query {
            store,
            queries,
            k,
            exclude_id,
            exclude_self,
            output: out,
        } => {
            let store = load_store(&store, None)?;
            let queries: Vec<EmbeddingRecord> = read_jsonl_file(&queries)?;
            let k = k.unwrap_or(cfg.k);
            let exclude_self = exclude_self || cfg.exclude_self;
            let mut w = output(out.as_deref())?;
            for q in &queries {
                let exclude = if exclude_self {
                    Some(q.id.as_str())
                } else {
                    exclude_id.as_deref()
                };
                let result = store
                    .top_k_excluding(&q.vector, k, exclude)
                    .with_context(|| format!("query {:?}", q.id))?;
                let hits: Vec<_> = result
                    .hits
                    .iter()
                    .map(|h| serde_json::json!({ "id": h.id, "similarity": h.similarity }))
                    .collect();
                write_line(&mut w, &serde_json::json!({ "id": q.id, "hits": hits }))?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

pub fn vocab(cmd: VocabCommand, mut cfg: PipelineConfig) -> Result<()> {
    let VocabCommand::Build {
        corpus,
        size,
        output: out,
        normalization,
    } = cmd;
    apply_normalization(&mut cfg, normalization);
    let norm = cfg.normalization()?;
    let docs: Vec<CorpusDocument> = read_jsonl_file(&corpus)?;
    let reports: Vec<&str> = docs.iter().map(|d| d.report.as_str()).collect();
    let vocab = build_vocabulary(&reports, size, &norm)?;
    let mut w = output(Some(&out))?;
    vocab.write_tsv(&mut w)?;
    w.flush()?;
    log::info!("{} terms, normalization {}", vocab.len(), norm.fingerprint());
    Ok(())
}

#[derive(Serialize)]
struct DecomposeLine<'a> {
    id: &'a str,
    keywords: Vec<(&'a str, f64)>,
    recon_cosine: Option<f64>,
    nnz: usize,
    all_zero: bool,
}

pub fn decompose(args: DecomposeArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_dictionary(&mut cfg, args.dictionary);
    override_val(&mut cfg.lambda, args.lambda);
    override_val(&mut cfg.tau, args.tau);
    override_val(&mut cfg.parallelism, args.parallelism);
    let dict = dictionary_from(&cfg)?;
    let images: Vec<EmbeddingRecord> = read_jsonl_file(&args.images)?;
    let decomposed = decompose_all(&dict, &images, &cfg.lasso(), cfg.parallelism)?;
    let mut w = output(args.output.as_deref())?;
    for d in &decomposed {
        let set = select_top_tau(&d.decomposition, dict.terms(), cfg.tau)?;
        write_line(
            &mut w,
            &DecomposeLine {
                id: &d.id,
                keywords: set.keywords.iter().map(|k| (k.term.as_str(), k.coefficient)).collect(),
                recon_cosine: d.recon_cosine,
                nnz: d.decomposition.nnz(),
                all_zero: d.decomposition.all_zero,
            },
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn prompt(cmd: PromptCommand, cfg: PipelineConfig) -> Result<()> {
    let PromptCommand::Build {
        strategy,
        keywords,
        reports,
        templates,
    } = cmd;
    let templates: Templates = match templates.or(cfg.templates) {
        Some(p) => read_json_file(p)?,
        None => Templates::default(),
    };
    let mut spec = PromptSpec::new(strategy).with_templates(templates);
    if strategy.uses_concepts() {
        let n = keywords.len();
        let set = keywords
            .into_iter()
            .map(|term| Keyword { term, coefficient: 0.0 })
            .collect();
        spec = spec.with_keywords(ConceptSet::new(set, n.max(1)));
    }
    if strategy.uses_retrieval() {
        spec = spec.with_reports(reports);
    }
    let prompt = build_prompt(&spec)?;
    if prompt.degraded {
        log::warn!("no keywords given; rendered the retrieval-only layout");
    }
    let mut out = io::stdout().lock();
    out.write_all(prompt.text.as_bytes())?;
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct PromptLine {
    id: String,
    prompt: String,
}

#[derive(Serialize)]
struct ReportLine<'a> {
    id: &'a str,
    report: &'a str,
    attempt_count: u32,
}

pub fn generate(args: GenerateArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_generation(&mut cfg, args.generation);
    override_val(&mut cfg.parallelism, args.parallelism);
    let client = GenerationClient::new(cfg.generation.clone())?;
    for w in client.warnings() {
        log::warn!("{w}");
    }
    let prompts: Vec<PromptLine> = read_jsonl_file(&args.prompts)?;
    let items: Vec<(String, String)> = prompts.into_iter().map(|p| (p.id, p.prompt)).collect();
    let results = client.generate_batch(&items, cfg.parallelism);
    let mut w = output(args.output.as_deref())?;
    for r in results {
        let r = r?;
        write_line(
            &mut w,
            &ReportLine {
                id: &r.id,
                report: &r.text,
                attempt_count: r.attempt_count,
            },
        )?;
        w.flush()?;
    }
    Ok(())
}

/// A generated report, as written by `generate` or `pipeline run`.
#[derive(Deserialize)]
struct CandidateLine {
    id: String,
    #[serde(alias = "text")]
    report: String,
    #[serde(default)]
    keywords: Option<Vec<(String, f64)>>,
    #[serde(default)]
    nnz: Option<usize>,
    #[serde(default)]
    recon_cosine: Option<f64>,
}

pub fn evaluate(args: EvaluateArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_normalization(&mut cfg, args.normalization);
    let norm = cfg.normalization()?;
    let candidates: Vec<CandidateLine> = read_jsonl_file(&args.candidates)?;
    let references: Vec<CorpusDocument> = read_jsonl_file(&args.references)?;
    let mut refs: BTreeMap<String, String> = BTreeMap::new();
    for r in references {
        if refs.insert(r.id.clone(), r.report).is_some() {
            bail!("duplicate reference id {:?}", r.id);
        }
    }
    let mut evals = Vec::with_capacity(candidates.len());
    for c in candidates {
        let Some(reference) = refs.get(&c.id) else {
            bail!("no reference report for {:?}", c.id);
        };
        evals.push(ImageEvaluation {
            reference: Some(reference.clone()),
            keywords: c.keywords.map(|k| {
                let n = k.len();
                ConceptSet::new(
                    k.into_iter()
                        .map(|(term, coefficient)| Keyword { term, coefficient })
                        .collect(),
                    n.max(1),
                )
            }),
            id: c.id,
            candidate: c.report,
            nnz: c.nnz,
            recon_cosine: c.recon_cosine,
        });
    }
    let labels = match (&args.predicted_labels, &args.reference_labels) {
        (Some(p), Some(r)) => Some((read_jsonl_file::<LabelVector>(p)?, read_jsonl_file::<LabelVector>(r)?)),
        _ => None,
    };
    let report = MetricsReport::compute(
        &evals,
        labels.as_ref().map(|(p, r)| (p.as_slice(), r.as_slice())),
        &norm,
    )?;
    match &args.output {
        Some(p) => write_json_file(p, &report)?,
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &report)?;
            out.write_all(b"\n")?;
        }
    }
    if let Some(p) = &args.csv {
        std::fs::write(p, report.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn pipeline(cmd: PipelineCommand, mut cfg: PipelineConfig) -> Result<()> {
    let PipelineCommand::Run(args) = cmd;
    override_val(&mut cfg.strategy, args.strategy);
    override_opt(&mut cfg.store, args.store);
    apply_dictionary(&mut cfg, args.dictionary);
    override_val(&mut cfg.lambda, args.lambda);
    override_val(&mut cfg.tau, args.tau);
    override_val(&mut cfg.k, args.k);
    override_val(&mut cfg.parallelism, args.parallelism);
    cfg.exclude_self |= args.exclude_self;
    apply_generation(&mut cfg, args.generation);

    let resources = PipelineResources::load(&cfg)?;
    let images: Vec<EmbeddingRecord> = read_jsonl_file(&args.images)?;
    let client = GenerationClient::new(cfg.generation.clone())?;
    for w in client.warnings() {
        log::warn!("{w}");
    }
    let file = File::create(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    let mut sink = BufWriter::new(file);
    let out = run_pipeline(&cfg, &resources, &images, &client, &mut sink)
        .with_context(|| format!("partial trace kept in {}", args.output.display()))?;
    sink.flush()?;
    if let Some(p) = &args.metrics {
        write_json_file(p, &out.metrics)?;
    }
    log::info!("{} images, strategy {}", out.traces.len(), cfg.strategy);
    Ok(())
}

fn list_label(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref().map(|p| p.display().to_string())
}

pub fn ablate(args: AblateArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_dictionary(&mut cfg, args.dictionary);
    override_val(&mut cfg.parallelism, args.parallelism);
    let norm = load_normalization(cfg.stopwords.as_deref(), cfg.acronyms.as_deref(), cfg.lemmas.as_deref())?;
    let dict = dictionary_from(&cfg)?;
    let grid = AblationGrid::new(args.vocab_sizes, args.lambdas, args.taus)?;

    let docs: Vec<CorpusDocument> = read_jsonl_file(&args.corpus)?;
    let reports: Vec<&str> = docs.iter().map(|d| d.report.as_str()).collect();
    let split_text =
        std::fs::read_to_string(&args.split).with_context(|| format!("reading {}", args.split.display()))?;
    let split: Vec<&str> = split_text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let wanted: HashSet<&str> = split.iter().copied().collect();
    let images: Vec<EmbeddingRecord> = read_jsonl_file::<EmbeddingRecord>(&args.images)?
        .into_iter()
        .filter(|r| wanted.contains(r.id.as_str()))
        .collect();
    if images.len() != wanted.len() {
        let found: HashSet<&str> = images.iter().map(|r| r.id.as_str()).collect();
        let missing = split
            .iter()
            .find(|id| !found.contains(*id))
            .copied()
            .unwrap_or_default();
        bail!("split id {missing:?} has no image record (or ids repeat)");
    }

    let cells = run_ablation(
        &grid,
        &reports,
        &dict,
        &images,
        &norm,
        cfg.tol,
        cfg.max_iter,
        cfg.parallelism,
    )?;
    let header = AblationHeader::new(
        args.split.display().to_string(),
        &norm,
        [
            list_label(&cfg.stopwords),
            list_label(&cfg.acronyms),
            list_label(&cfg.lemmas),
        ],
    );
    let mut w = output(args.output.as_deref())?;
    write_ablation_csv(&mut w, &header, &cells)?;
    w.flush()?;
    Ok(())
}

pub fn synth_gen(cmd: SynthCommand, cfg: PipelineConfig) -> Result<()> {
    let SynthCommand::Gen {
        seed,
        output_dir,
        concepts,
        dim,
        train,
        test,
    } = cmd;
    let mut sc = SynthConfig {
        seed: seed.unwrap_or(cfg.seed),
        ..SynthConfig::default()
    };
    override_val(&mut sc.n_concepts, concepts);
    override_val(&mut sc.dim, dim);
    override_val(&mut sc.n_train, train);
    override_val(&mut sc.n_test, test);
    let corpus = synth::generate(&sc)?;
    corpus.write_to_dir(&output_dir)?;
    log::info!(
        "seed {}: {} train, {} test images, planting rate {:.4}",
        sc.seed,
        corpus.train.len(),
        corpus.test.len(),
        corpus.planting_rate()
    );
    Ok(())
}

pub fn serve_fixture(args: ServeFixtureArgs) -> Result<()> {
    let responder = match args.fixed {
        Some(t) => Responder::Fixed(t),
        None => Responder::Deterministic,
    };
    let server = FixtureServer::bind(&args.addr, responder, 0, cemrag::generation::FailureMode::ServerError)
        .with_context(|| format!("binding {}", args.addr))?;
    println!("{}", server.url());
    io::stdout().flush()?;
    server.join();
    Ok(())
}
