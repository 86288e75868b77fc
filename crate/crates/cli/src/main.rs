use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use summeans::llm::{LlmClientSpec, MockFlavor, FULL_CLUSTER_CAP};
use summeans::stream::MergeCounts;
use summeans::types::{NlpMethod, SamplingStrategy, Schedule, SummarizerSpec};
use summeans::EmbeddingProviderSpec;

use summeans_cli::config::{ExperimentConfig, KChoice, Mode};
use summeans_cli::corpus::load_corpus;
use summeans_cli::drift;
use summeans_cli::experiment::{evaluate_saved_run, print_summary, run_experiment, SavedRun};
use summeans_cli::sweep::{render_table, sweep_k};

/// Text clustering with summary-based centroids.
#[derive(Parser)]
#[command(name = "summeans", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a static corpus across one or more seeds.
    Cluster(RunArgs),
    /// Cluster a timestamped corpus as sequential mini-batches.
    Stream(StreamArgs),
    /// Recompute metrics for a saved run against a labeled dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// A report_seedN.json produced by `cluster` or `stream`.
        #[arg(long)]
        run: PathBuf,
        /// Write the metrics JSON here instead of stdout only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the experiment with k swept around the gold label count.
    SweepK {
        #[command(flatten)]
        run: RunArgs,
        /// Relative offsets applied to the label count, e.g. "-0.2,0,0.2".
        #[arg(long, default_value = "-0.2,-0.1,0,0.1,0.2", allow_hyphen_values = true)]
        deltas: String,
    },
    /// Render the textual-centroid drift view of a saved run.
    DriftReport {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSONL dataset: {"id", "text", "label"?, "timestamp"?} per line.
    #[arg(long)]
    dataset: PathBuf,
    /// Embedding backend: testhash | file:PATH | remote:URL.
    #[arg(long, default_value = "testhash")]
    provider: String,
    /// Embedding dimension (testhash and remote).
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Model name sent to a remote embedding endpoint.
    #[arg(long)]
    embed_model: Option<String>,
    /// Request batch size for remote embedding.
    #[arg(long, default_value_t = 128)]
    embed_batch: usize,
    /// Keep raw vector scale instead of unit-normalizing embeddings.
    #[arg(long)]
    no_normalize: bool,
    /// Centroid update at summary steps: none | textrank | centroid | lsa | llm.
    #[arg(long, default_value = "lsa")]
    summarizer: String,
    /// Sentence budget for extractive summaries.
    #[arg(long, default_value_t = 5)]
    q: usize,
    /// Cap on the sentence pool per cluster (default unlimited).
    #[arg(long)]
    pool_cap: Option<usize>,
    /// Documents sampled per LLM prompt: a number, or "full" for the whole
    /// cluster up to --full-cap.
    #[arg(long, default_value = "10")]
    m: String,
    /// Cap applied when --m full.
    #[arg(long, default_value_t = FULL_CLUSTER_CAP)]
    full_cap: usize,
    /// Prompt sampling strategy: kmeanspp | random | centroid | edge.
    #[arg(long, default_value = "kmeanspp")]
    sampling: String,
    /// Summarization instruction prepended to LLM prompts.
    #[arg(
        long,
        default_value = "Write a text that summarizes the following cluster:"
    )]
    instruction: String,
    /// LLM backend: medoid | concat | remote:URL (mocks run offline).
    #[arg(long, default_value = "medoid")]
    llm_client: String,
    /// Model name sent to a remote chat endpoint.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 512)]
    max_output_tokens: u32,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Number of clusters, or "from-labels".
    #[arg(long, default_value = "from-labels")]
    k: String,
    /// Total centroid-update iterations T.
    #[arg(long, default_value_t = 120)]
    iters: usize,
    /// Summarization period l (a summary step every l iterations).
    #[arg(long, default_value_t = 60)]
    period: usize,
    /// Comma-separated seed list.
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    /// Output directory for metrics, reports, prompt logs, and drift files.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Target batch size; the corpus splits into ceil(n / target) batches.
    #[arg(long, default_value_t = 10_000)]
    batch_target: usize,
    /// Denominator for the merge weight: cumulative | prior-batch.
    #[arg(long, default_value = "cumulative")]
    merge_counts: String,
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = raw
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().with_context(|| format!("bad seed {s:?}")))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        bail!("at least one seed is required");
    }
    Ok(seeds)
}

fn parse_deltas(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().with_context(|| format!("bad delta {s:?}")))
        .collect()
}

fn parse_provider(args: &RunArgs) -> Result<EmbeddingProviderSpec> {
    let normalize = !args.no_normalize;
    if args.provider == "testhash" {
        return Ok(EmbeddingProviderSpec::TestHash {
            dim: args.dim,
            normalize,
        });
    }
    if let Some(path) = args.provider.strip_prefix("file:") {
        return Ok(EmbeddingProviderSpec::FileStore {
            path: PathBuf::from(path),
            dim: args.dim,
            normalize,
        });
    }
    if let Some(url) = args.provider.strip_prefix("remote:") {
        let model = args
            .embed_model
            .clone()
            .context("--embed-model is required with a remote embedding provider")?;
        return Ok(EmbeddingProviderSpec::RemoteApi {
            endpoint: url.to_string(),
            model,
            dim: args.dim,
            batch_size: args.embed_batch,
            normalize,
        });
    }
    bail!(
        "unknown provider {:?}; expected testhash, file:PATH, or remote:URL",
        args.provider
    )
}

fn parse_summarizer(args: &RunArgs) -> Result<(SummarizerSpec, Option<LlmClientSpec>)> {
    let sampling = match args.sampling.as_str() {
        "kmeanspp" => SamplingStrategy::KMeansPP,
        "random" => SamplingStrategy::Random,
        "centroid" => SamplingStrategy::NearestCentroid,
        "edge" => SamplingStrategy::Farthest,
        other => bail!("unknown sampling {other:?}; expected kmeanspp, random, centroid, or edge"),
    };
    let spec = match args.summarizer.as_str() {
        "none" => SummarizerSpec::NumericMean,
        "textrank" => SummarizerSpec::Nlp {
            method: NlpMethod::TextRank,
            q: args.q,
        },
        "centroid" => SummarizerSpec::Nlp {
            method: NlpMethod::Centroid,
            q: args.q,
        },
        "lsa" => SummarizerSpec::Nlp {
            method: NlpMethod::Lsa,
            q: args.q,
        },
        "llm" => {
            let m = if args.m == "full" {
                args.full_cap
            } else {
                args.m
                    .parse()
                    .with_context(|| format!("bad --m {:?}; expected a number or \"full\"", args.m))?
            };
            SummarizerSpec::Llm {
                instruction: args.instruction.clone(),
                m,
                sampling,
            }
        }
        other => bail!(
            "unknown summarizer {other:?}; expected none, textrank, centroid, lsa, or llm"
        ),
    };
    let client = if matches!(spec, SummarizerSpec::Llm { .. }) {
        Some(match args.llm_client.as_str() {
            "medoid" => LlmClientSpec::MockDeterministic {
                flavor: MockFlavor::EchoMedoid,
            },
            "concat" => LlmClientSpec::MockDeterministic {
                flavor: MockFlavor::ConcatFirstSentences,
            },
            other => match other.strip_prefix("remote:") {
                Some(url) => LlmClientSpec::RemoteChat {
                    endpoint: url.to_string(),
                    model: args
                        .model
                        .clone()
                        .context("--model is required with a remote llm client")?,
                    temperature: args.temperature,
                    max_output_tokens: args.max_output_tokens,
                    timeout_secs: args.timeout_secs,
                    retries: args.retries,
                },
                None => bail!(
                    "unknown llm client {other:?}; expected medoid, concat, or remote:URL"
                ),
            },
        })
    } else {
        None
    };
    Ok((spec, client))
}

fn build_config(
    args: &RunArgs,
    mode: Mode,
    batch_target: usize,
    merge: MergeCounts,
) -> Result<ExperimentConfig> {
    let (summarizer, llm_client) = parse_summarizer(args)?;
    let k = if args.k == "from-labels" {
        KChoice::FromLabels
    } else {
        KChoice::Explicit(args.k.parse().with_context(|| {
            format!("bad --k {:?}; expected a number or \"from-labels\"", args.k)
        })?)
    };
    Ok(ExperimentConfig {
        dataset_path: args.dataset.clone(),
        provider: parse_provider(args)?,
        summarizer,
        nlp_pool_cap: args.pool_cap,
        llm_client,
        k,
        schedule: Schedule::new(args.iters, args.period).map_err(anyhow::Error::from)?,
        seeds: parse_seeds(&args.seeds)?,
        mode,
        stream_target_batch: batch_target,
        merge_counts: merge,
        output_dir: args.out.clone(),
    })
}

fn load_saved_run(path: &PathBuf) -> Result<SavedRun> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read run file {}", path.display()))?;
    serde_json::from_str(&raw).with_context(|| format!("malformed run file {}", path.display()))
}

fn run_and_report(config: &ExperimentConfig) -> Result<()> {
    let summary = run_experiment(config)?;
    print_summary(&summary);
    if !summary.all_completed() {
        std::process::exit(1);
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Cluster(args) => {
            let config = build_config(&args, Mode::Static, 10_000, MergeCounts::Cumulative)?;
            run_and_report(&config)
        }
        Command::Stream(args) => {
            let merge = match args.merge_counts.as_str() {
                "cumulative" => MergeCounts::Cumulative,
                "prior-batch" => MergeCounts::PriorBatchOnly,
                other => bail!("unknown merge-counts {other:?}"),
            };
            let config = build_config(&args.run, Mode::Stream, args.batch_target, merge)?;
            run_and_report(&config)
        }
        Command::Eval { dataset, run, out } => {
            let docs = load_corpus(&dataset)?;
            let saved = load_saved_run(&run)?;
            let metrics = evaluate_saved_run(&saved, &docs)?;
            let json = metrics.to_json().map_err(anyhow::Error::from)?;
            println!("{json}");
            if let Some(path) = out {
                std::fs::write(path, json)?;
            }
            Ok(())
        }
        Command::SweepK { run, deltas } => {
            let config = build_config(&run, Mode::Static, 10_000, MergeCounts::Cumulative)?;
            let deltas = parse_deltas(&deltas)?;
            let rows = sweep_k(&config, &deltas)?;
            let table = render_table(&rows);
            print!("{table}");
            std::fs::create_dir_all(&config.output_dir)?;
            std::fs::write(config.output_dir.join("sweep_k.txt"), table)?;
            let incomplete = rows
                .iter()
                .filter_map(|r| r.summary.as_ref())
                .any(|s| !s.all_completed());
            if incomplete {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::DriftReport { run, out } => {
            let saved = load_saved_run(&run)?;
            let text = drift::render(&saved);
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(path, text)?;
            }
            Ok(())
        }
    }
}
