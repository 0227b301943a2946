use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sdgmine::pipeline::MalformedPolicy;

#[derive(Debug, Parser)]
#[command(name = "sdgmine", version, about = "Classify research papers against the UN SDGs with an LLM")]
pub struct Cli {
    /// Declarative TOML config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; the run manifest lands in `<out>/manifest.json`.
    #[arg(long, global = true, default_value = "sdgmine-out")]
    pub out: PathBuf,

    /// Log filter, e.g. `info` or `sdgmine=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Query arXiv, download PDFs and extract their text into the cache.
    Harvest(HarvestArgs),
    /// Classify every cached paper text into a JSONL dataset.
    Classify(ClassifyArgs),
    /// Classify a single text file and print the canonical response.
    Assess(AssessArgs),
    /// Write the per-figure CSV reports and a JSON summary.
    Analyze(AnalyzeArgs),
    /// Energy, emissions and cost of recorded or hypothetical calls.
    Footprint(FootprintArgs),
    /// Repeat the classification of one paper and report label stability.
    Consistency(ConsistencyArgs),
    /// Compare several models on the same papers.
    Benchmark(BenchmarkArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Harvest(_) => "harvest",
            Command::Classify(_) => "classify",
            Command::Assess(_) => "assess",
            Command::Analyze(_) => "analyze",
            Command::Footprint(_) => "footprint",
            Command::Consistency(_) => "consistency",
            Command::Benchmark(_) => "benchmark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Requests per minute.
    #[arg(long)]
    pub rpm: Option<f64>,
    #[arg(long)]
    pub max_input_tokens: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    /// recover, drop or retry[:n].
    #[arg(long)]
    pub malformed_policy: Option<MalformedPolicy>,
    /// Artificial latency of the mock provider.
    #[arg(long)]
    pub mock_latency_ms: Option<u64>,
    /// Mock only: drop each detected SDG with this probability.
    #[arg(long)]
    pub mock_drop: Option<f64>,
    #[arg(long)]
    pub mock_seed: Option<u64>,
    /// Alternative SDG corpus (`SDG <n>: <title>` / `<n>.<x>: <text>`).
    #[arg(long)]
    pub sdg_corpus: Option<PathBuf>,
    /// Alternative IFR use-case corpus.
    #[arg(long)]
    pub ifr_corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    #[arg(long)]
    pub category: Option<String>,
    #[arg(long)]
    pub from: NaiveDate,
    #[arg(long)]
    pub to: NaiveDate,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Host serving both the listing API and `/pdf/<id>`.
    #[arg(long)]
    pub arxiv_base: Option<String>,
    #[arg(long)]
    pub page_size: Option<usize>,
    #[arg(long)]
    pub page_delay_ms: Option<u64>,
    #[arg(long)]
    pub fetch_delay_ms: Option<u64>,
    /// Stop after this many papers.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Metadata only.
    #[arg(long)]
    pub no_download: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory of `<id>.txt` files, optionally with `metadata.jsonl`.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Fixed run id instead of a generated one.
    #[arg(long)]
    pub run_id: Option<String>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    /// Earliest publication date kept.
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Latest publication date kept.
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Keep the first N papers by publication date.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub id: Option<String>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Count UN-SDG mentions toward "any impact".
    #[arg(long)]
    pub include_un_sdgs: bool,
    /// JSON field mapping for datasets in a foreign layout.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct FootprintArgs {
    /// Usage ledger; defaults to the dataset's `.usage.jsonl` sidecar.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Hypothetical call counts, `model=n` comma separated.
    #[arg(long, value_delimiter = ',')]
    pub calls: Vec<String>,
    /// Versioned JSON coefficient table.
    #[arg(long)]
    pub coeff_table: Option<PathBuf>,
    /// Models to price with worst-case coefficients.
    #[arg(long, value_delimiter = ',')]
    pub worst_case: Vec<String>,
    /// Price unknown model ids with this table entry.
    #[arg(long)]
    pub as_model: Option<String>,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    /// Plain-text paper.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Paper id inside `--in`.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub runs: u32,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Existing datasets to compare.
    #[arg(long, value_delimiter = ',')]
    pub datasets: Vec<PathBuf>,
    /// Model ids to run on the papers under `--in`.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
}
