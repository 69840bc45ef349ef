use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use idiolens::embed_client::{ClientConfig, HttpTransport};
use idiolens::ingest::{DEFAULT_MAX_FREQ, DEFAULT_MIN_FREQ};
use idiolens::report::{self, EstimateSpec, EvalOptions, FilterOptions, ReportError};
use idiolens::Execution;

const EXIT_PARTIAL: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;

/// Score multiword terms by how well their words explain them.
#[derive(Debug, Parser)]
#[command(name = "idiolens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Keep two-word names whose words all fall inside a frequency band.
    Filter {
        #[arg(long)]
        names: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_FREQ)]
        max_freq: u64,
        #[arg(long, default_value_t = DEFAULT_MIN_FREQ)]
        min_freq: u64,
        /// Count word frequencies over this list instead of `--names`.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        dedup: bool,
    },
    /// Fetch missing term and word embeddings into the store.
    Fetch {
        #[arg(long)]
        terms: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        client: ClientArgs,
    },
    /// Score every term and write a ranked CSV.
    Score {
        #[arg(long)]
        terms: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dedup: bool,
        /// Score on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Emit the low-score tail of a scores CSV.
    Outliers {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = report::DEFAULT_TAIL_FRACTION)]
        tail: f64,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROC, tail recall/precision and annotator agreement.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = report::DEFAULT_TAIL_FRACTION)]
        tail: f64,
        #[arg(long)]
        annotator: Option<String>,
    },
    /// Score histogram, optionally with the idiomatic-distribution estimate.
    Hist {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = report::DEFAULT_BINS)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "estimate_out")]
        annotations: Option<PathBuf>,
        #[arg(long, requires = "annotations")]
        estimate_out: Option<PathBuf>,
        #[arg(long)]
        annotator: Option<String>,
    },
}

#[derive(Debug, Args)]
struct ClientArgs {
    /// Base URL; requests go to `<endpoint>/embed`.
    #[arg(long, env = "IDIOLENS_ENDPOINT")]
    endpoint: String,
    /// Defaults to the store's model when the store exists.
    #[arg(long, env = "IDIOLENS_MODEL", default_value = "")]
    model: String,
    #[arg(long, env = "IDIOLENS_BATCH", default_value_t = 64)]
    batch: usize,
    #[arg(long, env = "IDIOLENS_INFLIGHT", default_value_t = 4)]
    inflight: usize,
    #[arg(long, env = "IDIOLENS_RETRIES", default_value_t = 3)]
    retries: u32,
    #[arg(long, env = "IDIOLENS_TIMEOUT_MS", default_value_t = 30_000)]
    timeout_ms: u64,
    #[arg(long, env = "IDIOLENS_BACKOFF_MS", default_value_t = 200)]
    backoff_ms: u64,
    #[arg(long, env = "IDIOLENS_TOKEN", hide_env_values = true)]
    token: Option<String>,
}

fn require(paths: &[&Path]) -> Result<(), String> {
    for p in paths {
        if !p.exists() {
            return Err(format!("{}: no such file", p.display()));
        }
    }
    Ok(())
}

fn check_range(name: &str, x: usize) -> Result<(), String> {
    if x == 0 {
        return Err(format!("--{name} must be at least 1"));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, (u8, String)> {
    let invalid = |e: String| (EXIT_INVALID, e);
    let report_err = |e: ReportError| (EXIT_INVALID, e.to_string());

    match cli.command {
        Command::Filter {
            names,
            out,
            max_freq,
            min_freq,
            vocab,
            dedup,
        } => {
            require(&[&names]).map_err(invalid)?;
            if let Some(v) = &vocab {
                require(&[v]).map_err(invalid)?;
            }
            let opts = FilterOptions {
                max_freq,
                min_freq,
                dedup,
                vocab_names: vocab,
            };
            let s = report::cmd_filter(&names, &out, &opts).map_err(report_err)?;
            eprintln!("kept {} of {} names", s.kept, s.names);
            Ok(0)
        }
        Command::Fetch {
            terms,
            store,
            client,
        } => {
            require(&[&terms]).map_err(invalid)?;
            check_range("batch", client.batch).map_err(invalid)?;
            check_range("inflight", client.inflight).map_err(invalid)?;
            let transport = HttpTransport::new(
                &client.endpoint,
                Duration::from_millis(client.timeout_ms),
                client.token,
            );
            let cfg = ClientConfig {
                model_id: client.model,
                batch_size: client.batch,
                max_in_flight: client.inflight,
                retries: client.retries,
                backoff: Duration::from_millis(client.backoff_ms),
            };
            let r = report::cmd_fetch(&terms, &store, &transport, &cfg).map_err(report_err)?;
            eprintln!(
                "{} texts: {} cached, {} fetched, {} failed ({} batches, {} requests)",
                r.unique, r.cached, r.fetched, r.failed, r.batches, r.attempts
            );
            for f in &r.failures {
                eprintln!("batch {} ({} texts): {}", f.batch, f.texts.len(), f.error);
            }
            Ok(if r.is_success() { 0 } else { EXIT_TRANSPORT })
        }
        Command::Score {
            terms,
            store,
            out,
            dedup,
            sequential,
        } => {
            require(&[&terms, &store]).map_err(invalid)?;
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::default()
            };
            let s = report::cmd_score(&terms, &store, &out, dedup, exec).map_err(report_err)?;
            eprintln!(
                "scored {} terms; {} missing embeddings, {} rejected, {} degenerate",
                s.scored, s.missing_terms, s.rejected, s.degenerate
            );
            if s.is_partial() {
                eprintln!("see {}", report::sidecar_path(&out).display());
                return Ok(EXIT_PARTIAL);
            }
            Ok(0)
        }
        Command::Outliers {
            scores,
            tail,
            top_k,
            out,
        } => {
            require(&[&scores]).map_err(invalid)?;
            let n = report::cmd_outliers(&scores, tail, top_k, &out).map_err(report_err)?;
            eprintln!("{n} outliers");
            Ok(0)
        }
        Command::Eval {
            scores,
            annotations,
            out_dir,
            tail,
            annotator,
        } => {
            require(&[&scores, &annotations]).map_err(invalid)?;
            let opts = EvalOptions {
                tail_fraction: tail,
                annotator,
            };
            let s = report::cmd_eval(&scores, &annotations, &out_dir, &opts).map_err(report_err)?;
            print!("{}", s.to_json());
            Ok(0)
        }
        Command::Hist {
            scores,
            bins,
            out,
            annotations,
            estimate_out,
            annotator,
        } => {
            require(&[&scores]).map_err(invalid)?;
            let spec = match (annotations, estimate_out) {
                (Some(annotations), Some(out)) => {
                    require(&[&annotations]).map_err(invalid)?;
                    Some(EstimateSpec {
                        annotations,
                        annotator,
                        out,
                    })
                }
                _ => None,
            };
            let s = report::cmd_hist(&scores, bins, &out, spec.as_ref()).map_err(report_err)?;
            print!("{}", s.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
