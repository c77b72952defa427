use std::path::PathBuf;

use cemrag::Strategy;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cemrag",
    version,
    about = "Concept-enhanced retrieval-augmented report generation over precomputed embeddings"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or query an embedding store.
    #[command(subcommand)]
    Store(StoreCommand),
    /// Build a bigram concept vocabulary.
    #[command(subcommand)]
    Vocab(VocabCommand),
    /// Decompose image embeddings into sparse concept keywords.
    Decompose(DecomposeArgs),
    /// Render prompts.
    #[command(subcommand)]
    Prompt(PromptCommand),
    /// Send prompts to a generation service.
    Generate(GenerateArgs),
    /// Score generated reports.
    Evaluate(EvaluateArgs),
    /// Run the full pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Sweep vocabulary size, lambda and tau.
    Ablate(AblateArgs),
    /// Synthetic corpora.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Serve the deterministic fixture generation endpoint.
    ServeFixture(ServeFixtureArgs),
}

#[derive(Debug, Subcommand)]
pub enum StoreCommand {
    /// Ingest JSONL records and write the binary store format.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Top-k cosine neighbours for each query record.
    Query {
        /// Binary or JSONL store.
        #[arg(long)]
        store: PathBuf,
        /// JSONL records with `id` and `vector`.
        #[arg(long)]
        queries: PathBuf,
        #[arg(short, long)]
        k: Option<usize>,
        /// Never return this id.
        #[arg(long)]
        exclude_id: Option<String>,
        /// Never return a row with the query's own id.
        #[arg(long)]
        exclude_self: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct NormalizationArgs {
    /// One stopword per line; replaces the shipped list.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// One excluded acronym per line; replaces the shipped list.
    #[arg(long)]
    pub acronyms: Option<PathBuf>,
    /// Tab-separated `word<TAB>lemma` lines; replaces the shipped table.
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum VocabCommand {
    Build {
        /// JSONL with `id` and `report`.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = cemrag::DEFAULT_VOCAB_SIZE)]
        size: usize,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        normalization: NormalizationArgs,
    },
}

#[derive(Debug, Args)]
pub struct DictionaryArgs {
    /// JSONL with `term` and `vector`, in vocabulary rank order.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// JSON array: mean image embedding of the training split.
    #[arg(long)]
    pub image_mean: Option<PathBuf>,
    /// Vocabulary TSV used to check the dictionary order.
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub dictionary: DictionaryArgs,
    /// JSONL records with `id` and `vector`.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PromptCommand {
    /// Render a single prompt to stdout.
    Build {
        #[arg(long)]
        strategy: Strategy,
        /// Concept keyword, in selection order. Repeatable.
        #[arg(long = "keyword")]
        keywords: Vec<String>,
        /// Retrieved report, in rank order. Repeatable.
        #[arg(long = "report")]
        reports: Vec<String>,
        /// JSON object overriding `instruction`, `task`, `final_instruction`.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GenerationArgs {
    /// Generation endpoint URL; falls back to CEMRAG_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    #[arg(long)]
    pub retries: Option<u32>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSONL with `id` and `prompt`.
    #[arg(long)]
    pub prompts: PathBuf,
    #[command(flatten)]
    pub generation: GenerationArgs,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSONL with `id` and `report` (or pipeline traces).
    #[arg(long)]
    pub candidates: PathBuf,
    /// JSONL with `id` and `report`.
    #[arg(long)]
    pub references: PathBuf,
    /// Predicted label vectors (JSONL `id`, `labels`, `label_set`).
    #[arg(long, requires = "reference_labels")]
    pub predicted_labels: Option<PathBuf>,
    /// Reference label vectors.
    #[arg(long, requires = "predicted_labels")]
    pub reference_labels: Option<PathBuf>,
    /// Write the metrics report here as JSON (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the one-row results table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub normalization: NormalizationArgs,
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSONL records with `id`, `vector` and optional reference `report`.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Binary or JSONL store.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[command(flatten)]
    pub dictionary: DictionaryArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Skip a store row whose id equals the query id.
    #[arg(long)]
    pub exclude_self: bool,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[command(flatten)]
    pub generation: GenerationArgs,
    /// Trace JSONL destination.
    #[arg(long)]
    pub output: PathBuf,
    /// Metrics report JSON destination.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Report corpus the vocabulary is built from (JSONL `id`, `report`).
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub dictionary: DictionaryArgs,
    /// Image records with reference reports (JSONL).
    #[arg(long)]
    pub images: PathBuf,
    /// Ids to evaluate, one per line.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![100, 200, 500, 700, 1000])]
    pub vocab_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3, 0.5])]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![3, 5, 7])]
    pub taus: Vec<usize>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Write a planted-concept corpus to a directory.
    Gen {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        concepts: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct ServeFixtureArgs {
    #[arg(long, default_value = "127.0.0.1:8089")]
    pub addr: String,
    /// Reply with this text instead of the deterministic responder.
    #[arg(long)]
    pub fixed: Option<String>,
}
