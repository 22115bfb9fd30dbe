mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spix::harness::HarnessError;

#[derive(Debug, Parser)]
#[command(
    name = "spix",
    version,
    about = "Build, search and evaluate sparse impact indexes"
)]
pub struct Cli {
    /// Seed for generated data and the loss self-test.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for batch search (results do not depend on this).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML file of defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index file from a corpus.
    Build(BuildArgs),
    /// Run a query file against an index.
    Search(SearchArgs),
    /// Score a results file with MRR@k and, given embeddings, SSS@k.
    Eval(EvalArgs),
    /// Sweep document_k x query_k x threshold and write one CSV row per cell.
    Sweep(SweepArgs),
    /// Estimate expected multiplications per query-document pair.
    Flops(FlopsArgs),
    /// Check loss values and gradients against finite differences.
    LossesSelftest(SelftestArgs),
    /// Write a seeded synthetic corpus, queries, judgments and embeddings.
    GenSynthetic(GenArgs),
}

#[derive(Debug, Args)]
pub struct Bm25Flags {
    /// BM25 term-frequency saturation (text mode).
    #[arg(long)]
    pub k1: Option<f64>,
    /// BM25 length normalization (text mode).
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// `vector` (term:weight pairs) or `text` (BM25-weighted tokens).
    #[arg(long)]
    pub mode: Option<String>,
    /// Keep each document's k heaviest terms; 0 keeps all.
    #[arg(long)]
    pub document_k: Option<usize>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub bm25: Bm25Flags,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Keep each query's k heaviest terms; 0 keeps all.
    #[arg(long)]
    pub query_k: Option<usize>,
    /// Fraction of query terms a document must match, in [0, 1].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Timed repetitions per query.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Results file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// How SSS combines several judged documents: `max` or `mean`.
    #[arg(long)]
    pub sss_aggregation: Option<String>,
    /// Also write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated document_k values (0 = no pruning).
    #[arg(long, value_delimiter = ',')]
    pub document_k: Option<Vec<usize>>,
    /// Comma-separated query_k values (0 = no selection).
    #[arg(long, value_delimiter = ',')]
    pub query_k: Option<Vec<usize>>,
    /// Comma-separated thresholds in [0, 1].
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub sss_aggregation: Option<String>,
    /// Directory for the per-document_k index files; a temporary one when absent.
    #[arg(long)]
    pub index_dir: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub bm25: Bm25Flags,
}

#[derive(Debug, Args)]
pub struct FlopsArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub query_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub docs: Option<usize>,
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub topics: Option<usize>,
}

/// Marks an error as bad invocation (exit 1) rather than bad data (exit 2).
#[derive(Debug)]
pub struct UsageError(pub String);

/// Marks an internal check that failed (exit 3).
#[derive(Debug)]
pub struct InvariantError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for InvariantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for InvariantError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<InvariantError>()
            || matches!(cause.downcast_ref(), Some(HarnessError::Invariant(_)))
        {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
