//! Command-line entry points. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use metarag_core::chunker::ChunkingParams;
use metarag_core::Collection;

use crate::config;
use crate::enrichment::{build_index, EnrichmentOptions};
use crate::eval::{load_dataset, run_benchmark};
use crate::gateway::{Gateway, ProviderKind};
use crate::pipeline::{Pipeline, PipelineConfig, RerankerKind};
use crate::store::Index;
use crate::Error;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProviderArg {
    Mock,
    OpenaiCompatible,
}

impl From<ProviderArg> for ProviderKind {
    fn from(p: ProviderArg) -> Self {
        match p {
            ProviderArg::Mock => ProviderKind::Mock,
            ProviderArg::OpenaiCompatible => ProviderKind::OpenaiCompatible,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CollectionArg {
    Std,
    Ctx,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RerankerArg {
    None,
    External,
    Metadata,
}

#[derive(Debug, Parser)]
#[command(
    name = "metarag",
    version,
    about = "Metadata-enriched hybrid retrieval, answering and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ProviderOpts {
    /// Provider implementation; overrides the kind in --config.
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    /// TOML file whose [provider] section configures the gateway.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enrich, embed and index a directory of Markdown files.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        provider: ProviderOpts,
        #[arg(long, default_value_t = 1000)]
        max_tokens: usize,
        #[arg(long, default_value_t = 100)]
        overlap: usize,
        /// Characters of document text sent for document-level enrichment.
        #[arg(long, default_value_t = 200_000)]
        doc_char_budget: usize,
    },
    /// Answer one question with a chosen architecture.
    Ask {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
        arch: u8,
        #[arg(long, value_enum, default_value = "std")]
        collection: CollectionArg,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 7)]
        k: usize,
        #[arg(long, default_value_t = 25)]
        candidates: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Defaults to the architecture's usual reranker.
        #[arg(long, value_enum)]
        reranker: Option<RerankerArg>,
        /// Print the full answer trace as JSON.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        provider: ProviderOpts,
    },
    /// Run every configured pipeline over a dataset and write reports.
    Bench {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// TOML file with [provider], [hybrid] and [pipeline.N] sections.
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        provider: Option<ProviderArg>,
    },
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn gateway(opts: &ProviderOpts) -> Result<Gateway, Error> {
    let kind = opts.provider.map(ProviderKind::from);
    let cfg = match &opts.config {
        Some(path) => config::load(path, kind)?.provider,
        None => config::parse("", kind.or(Some(ProviderKind::Mock)))?.provider,
    };
    Ok(Gateway::from_config(cfg)?)
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Runtime(Error::io("<stdout>", e))
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Index {
            corpus,
            out: out_dir,
            provider,
            max_tokens,
            overlap,
            doc_char_budget,
        } => {
            let chunking = ChunkingParams::new(max_tokens, overlap);
            chunking.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let gw = gateway(&provider)?;
            let opts = EnrichmentOptions {
                chunking,
                doc_char_budget,
            };
            let index = build_index(&gw, &corpus, &out_dir, &opts)?;
            let m = &index.manifest;
            writeln!(
                out,
                "indexed {} documents into {} chunks ({} collections, dimension {}) at {}",
                m.documents,
                m.chunks,
                m.collections.len(),
                m.dimension,
                out_dir.display()
            )
            .map_err(io_err)?;
            writeln!(
                out,
                "chunk enrichment: {} succeeded, {} failed; failed documents: {}; skipped files: {}",
                m.chunk_enrichment.succeeded,
                m.chunk_enrichment.failed,
                m.failed_documents.len(),
                m.skipped_files.len()
            )
            .map_err(io_err)?;
        }
        Command::Ask {
            index,
            arch,
            collection,
            query,
            k,
            candidates,
            lambda,
            reranker,
            trace,
            provider,
        } => {
            let collection = match collection {
                CollectionArg::Std => Collection::Standard,
                CollectionArg::Ctx => Collection::Contextual,
            };
            let mut cfg = PipelineConfig::new(arch, collection);
            cfg.k = k;
            cfg.hybrid.candidate_pool = candidates;
            cfg.hybrid.lambda = lambda;
            if let Some(r) = reranker {
                cfg.reranker = match r {
                    RerankerArg::None => RerankerKind::None,
                    RerankerArg::External => RerankerKind::External,
                    RerankerArg::Metadata => RerankerKind::Metadata,
                };
            }
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            if query.trim().is_empty() {
                return Err(Failure::Usage("--query must not be empty".into()));
            }
            let gw = gateway(&provider)?;
            let index = Index::load(&index)?;
            if index.manifest.embedder_model != gw.model(crate::gateway::Role::Embedder).map_err(Error::from)? {
                log::warn!(
                    "index was embedded with `{}`; querying with a different embedder",
                    index.manifest.embedder_model
                );
            }
            let t = Pipeline::new(&index, &gw).answer(&query, &cfg)?;
            if trace {
                let json =
                    serde_json::to_string_pretty(&t).map_err(|e| Failure::Runtime(Error::Config(e.to_string())))?;
                writeln!(out, "{json}").map_err(io_err)?;
            } else {
                writeln!(out, "{}\n\nSources: {}", t.answer_text, t.context_ids().join(", ")).map_err(io_err)?;
            }
        }
        Command::Bench {
            index,
            dataset,
            configs,
            out: out_dir,
            provider,
        } => {
            let cfg = config::load(&configs, provider.map(ProviderKind::from)).map_err(|e| match e {
                Error::Format { .. } => Failure::Usage(e.to_string()),
                other => Failure::Runtime(other),
            })?;
            if cfg.pipelines.is_empty() {
                return Err(Failure::Runtime(Error::format(&configs, "no [pipeline.N] sections")));
            }
            let (examples, issues) = load_dataset(&dataset)?;
            if examples.is_empty() {
                return Err(Failure::Runtime(Error::format(&dataset, "no valid examples")));
            }
            let gw = Gateway::from_config(cfg.provider).map_err(Error::from)?;
            let index = Index::load(&index)?;
            let mut report = run_benchmark(&gw, &index, &examples, &cfg.pipelines)?;
            report.dataset_issues = issues;
            report.write(&out_dir)?;
            write!(out, "{}", report.render_table()).map_err(io_err)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Normal output goes to `out`; errors go to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
