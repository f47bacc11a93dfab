use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use histevents::export::{ExportOptions, Format, LodeMapping};
use histevents::ingest::RateLimiter;
use histevents::pipeline::{self, PipelineError, RunConfig, SourceKind, DEFAULT_WORKERS};
use histevents::profile::{bundled_profiles, load_profiles_file, ConfigError, Profiles};
use histevents::service::{self, AppState};
use histevents::store::EventStore;

#[derive(Parser)]
#[command(name = "histevents", version, about = "Historical events from Wikipedia year articles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SourceArgs {
    /// Offline corpus root with one directory per language
    #[arg(long, conflicts_with = "live")]
    corpus: Option<PathBuf>,
    /// Fetch pages from the live MediaWiki API
    #[arg(long)]
    live: bool,
    /// Minimum delay between live requests to one host, in milliseconds
    #[arg(long, default_value_t = 200)]
    delay_ms: u64,
}

impl SourceArgs {
    fn kind(&self) -> Result<SourceKind, ConfigError> {
        match (&self.corpus, self.live) {
            (Some(dir), _) => Ok(SourceKind::Offline(dir.clone())),
            (None, true) => Ok(SourceKind::Live(Arc::new(RateLimiter::new(Duration::from_millis(self.delay_ms))))),
            (None, false) => Err(ConfigError::Invalid {
                lang: "-".into(),
                message: "either --corpus DIR or --live is required".into(),
            }),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fetch year pages, extract events and store them
    Extract {
        /// Comma-separated language codes
        #[arg(long, value_delimiter = ',', required = true)]
        lang: Vec<String>,
        /// First year; negative for BCE
        #[arg(long, allow_negative_numbers = true)]
        from: i32,
        /// Last year, inclusive
        #[arg(long, allow_negative_numbers = true)]
        to: i32,
        #[command(flatten)]
        source: SourceArgs,
        /// Profile config file (defaults to the bundled profiles)
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
        /// Assign images while extracting
        #[arg(long)]
        enrich: bool,
        /// Failure log (tab-separated), appended to
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WORKERS)]
        workers: usize,
    },
    /// Assign images to stored events
    Enrich {
        #[arg(long, value_delimiter = ',', required = true)]
        lang: Vec<String>,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WORKERS)]
        workers: usize,
    },
    /// Write all stored events as xml, json or n3
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "n3")]
        format: Format,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        links: bool,
        #[arg(long)]
        html: bool,
        /// Linked-data mapping file (defaults to the bundled mapping)
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Serve the query API
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Print per-page extraction reports
    Report {
        #[arg(long)]
        store: PathBuf,
        /// Print the failure log instead of the table
        #[arg(long)]
        failures: bool,
    },
}

fn profiles(path: &Option<PathBuf>) -> Result<Profiles, ConfigError> {
    match path {
        Some(p) => load_profiles_file(p),
        None => Ok(bundled_profiles()),
    }
}

fn mapping(path: &Option<PathBuf>) -> Result<LodeMapping, ConfigError> {
    match path {
        Some(p) => LodeMapping::from_file(p),
        None => Ok(LodeMapping::bundled()),
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Extract { lang, from, to, source, profiles: pp, store, enrich, report, workers } => {
            let profiles = profiles(&pp)?;
            let cfg = RunConfig {
                languages: lang,
                year_range: (from, to),
                source: source.kind()?,
                store_path: store,
                enrich,
                report_path: report,
                workers,
            };
            let summary = pipeline::run_extract(&cfg, &profiles)?;
            print!("{}", summary.to_tsv());
            eprintln!("stored events: {}", summary.stored_events);
        }
        Command::Enrich { lang, source, profiles: pp, store, workers } => {
            let profiles = profiles(&pp)?;
            let kind = source.kind()?;
            let mut store = EventStore::open(&store)?;
            let (total, with_image) = pipeline::run_enrich(&mut store, &kind, &profiles, &lang, workers)?;
            println!("events\twith_image\tcoverage");
            let coverage = if total == 0 { 0.0 } else { with_image as f64 / total as f64 };
            println!("{total}\t{with_image}\t{coverage:.4}");
        }
        Command::Export { store, format, out, links, html, mapping: mp } => {
            let mapping = mapping(&mp)?;
            let store = EventStore::open(&store)?;
            let doc = pipeline::run_export(&store, format, ExportOptions { links, html }, &mapping);
            match out {
                Some(path) => fs::write(&path, doc).map_err(|source| PipelineError::Io { path, source })?,
                None => print!("{doc}"),
            }
        }
        Command::Serve { store, listen, profiles: pp, mapping: mp } => {
            let state = AppState::new(EventStore::open(&store)?, profiles(&pp)?, mapping(&mp)?);
            let rt = tokio::runtime::Runtime::new().map_err(|source| PipelineError::Io { path: store.clone(), source })?;
            rt.block_on(service::serve(listen, state))
                .map_err(|source| PipelineError::Io { path: PathBuf::from(listen.to_string()), source })?;
        }
        Command::Report { store, failures } => {
            let store = EventStore::open(&store)?;
            if failures {
                for r in store.reports() {
                    for line in r.failure_log_lines() {
                        println!("{line}");
                    }
                }
            } else {
                print!("{}", pipeline::report_table(&store));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
