use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use edubot_core::merge::{run_merge_cli, MergeCliOptions, ReportFormat};
use edubot_core::{open_store, train_corpus, Engine, SqliteStore, TrainOptions};
use edubot_scraper::{load_templates, run_scrape, FetchAuth, ScrapeOptions};
use edubot_service::{run_repl, serve, ServiceConfig};
use url::Url;

#[derive(Parser)]
#[command(name = "edubot", version, about = "Retrieval chatbot for course pages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP chat API.
    Serve {
        #[command(flatten)]
        service: ServiceArgs,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Chat in the terminal. `/quit` or end of input exits.
    Repl {
        #[command(flatten)]
        service: ServiceArgs,
    },
    /// Train a store from a corpus file or a directory of them.
    Train {
        /// A .yml/.yaml file or a directory searched recursively.
        path: PathBuf,
        #[arg(long, default_value = "edubot.sqlite3")]
        db: PathBuf,
        /// Skip statements already trained with the same prompt.
        #[arg(long)]
        dedupe: bool,
    },
    /// Merge learned statements from the databases in DIR into one of them.
    Merge {
        #[arg(default_value = ".")]
        dir: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Do not ask for confirmation (requires --target).
        #[arg(long)]
        yes: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        report: Format,
    },
    /// Fetch pages and write one corpus file per page.
    Scrape {
        #[arg(required = true)]
        urls: Vec<Url>,
        /// Cookie header sent with every request, e.g. a logged-in session.
        #[arg(long)]
        cookie: Option<String>,
        /// Extra request header as `Name: value`. Repeatable.
        #[arg(long = "header")]
        headers: Vec<String>,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
        /// 1 also fetches same-origin links found on the given pages.
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
        depth: u8,
        /// File with one question pattern per line, each containing {heading}.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Milliseconds to wait between requests.
        #[arg(long, default_value_t = 500)]
        delay: u64,
        /// Per-request timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        /// Accept pages that are not served as HTML.
        #[arg(long)]
        force: bool,
    },
}

#[derive(clap::Args)]
struct ServiceArgs {
    /// TOML config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Store file, or `:memory:`.
    #[arg(long)]
    db: Option<String>,
    /// Answer without learning.
    #[arg(long)]
    read_only: bool,
}

impl ServiceArgs {
    fn resolve(&self) -> Result<ServiceConfig, String> {
        let mut config = match &self.config {
            Some(path) => ServiceConfig::load(path).map_err(|e| e.to_string())?,
            None => ServiceConfig::default(),
        };
        if let Some(db) = &self.db {
            config.db = db.clone();
        }
        config.read_only |= self.read_only;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn init_logging(to_stdout: bool) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(if to_stdout { "info" } else { "warn" }));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_target(false);
    if to_stdout {
        builder.with_writer(io::stdout).init();
    } else {
        builder.with_writer(io::stderr).init();
    }
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve { service, port } => {
            init_logging(true);
            let mut config = match service.resolve() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(port) = port {
                config.port = port;
            }
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            let shutdown = async {
                let _ = tokio::signal::ctrl_c().await;
            };
            match runtime.block_on(serve(&config, shutdown)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Repl { service } => {
            init_logging(false);
            let config = match service.resolve() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let engine = match open_store(&config.store_location())
                .map_err(|e| e.to_string())
                .and_then(|store| Engine::new(store, config.engine()).map_err(|e| e.to_string()))
            {
                Ok(engine) => engine,
                Err(e) => return fail(e),
            };
            match run_repl(&engine, io::stdin().lock(), io::stdout().lock()) {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Train { path, db, dedupe } => {
            init_logging(false);
            let store = match SqliteStore::open_exclusive(&db) {
                Ok(store) => store,
                Err(e) => return fail(e),
            };
            match train_corpus(&store, &path, TrainOptions { dedupe }) {
                Ok(stats) => {
                    for failure in &stats.failures {
                        eprintln!("skipped {}: {}", failure.path.display(), failure.reason);
                    }
                    println!(
                        "trained {} statement(s) from {} conversation(s) in {} file(s) into {}",
                        stats.statements,
                        stats.conversations,
                        stats.files,
                        db.display()
                    );
                    if stats.files == 0 {
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Merge {
            dir,
            target,
            yes,
            report,
        } => {
            let options = MergeCliOptions {
                dir,
                target,
                yes,
                report: match report {
                    Format::Text => ReportFormat::Text,
                    Format::Json => ReportFormat::Json,
                },
            };
            let code = run_merge_cli(&options, &mut io::stdin().lock(), &mut io::stdout(), &mut io::stderr());
            ExitCode::from(u8::try_from(code).unwrap_or(1))
        }
        Command::Scrape {
            urls,
            cookie,
            headers,
            out,
            depth,
            templates,
            delay,
            timeout,
            force,
        } => {
            init_logging(false);
            let mut options = ScrapeOptions::new(urls, out);
            let mut auth = Ok(FetchAuth::new());
            if let Some(cookie) = &cookie {
                auth = auth.and_then(|a| a.with_cookie(cookie));
            }
            for line in &headers {
                auth = auth.and_then(|a| a.with_header_line(line));
            }
            options.auth = match auth {
                Ok(auth) => auth,
                Err(e) => return fail(e),
            };
            if let Some(path) = templates {
                options.templates = match load_templates(&path) {
                    Ok(t) => t,
                    Err(e) => return fail(format!("cannot read {}: {e}", path.display())),
                };
            }
            options.depth = depth;
            options.delay = Duration::from_millis(delay);
            options.timeout = Duration::from_secs(timeout);
            options.force = force;

            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            let report = match runtime.block_on(run_scrape(&options)) {
                Ok(report) => report,
                Err(e) => return fail(e),
            };
            for page in &report.pages {
                match (&page.corpus_file, &page.error) {
                    (Some(file), _) => println!("ok {} -> {} ({} sections)", page.url, file.display(), page.sections),
                    (None, Some(e)) => eprintln!("failed {}: {e}", page.url),
                    (None, None) => {}
                }
            }
            ExitCode::from(report.exit_code() as u8)
        }
    }
}
