use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use knowmap::api::{router, AppState};
use knowmap::demo::{write_demo, DEMO_SEED};
use knowmap::ingestion::write_eat;
use knowmap::store::{export_graphdb_script, load_bundle, save_bundle, StoreError};
use knowmap::topography::render_svg;
use knowmap::{build_bundle, BuildConfig, BuildSummary, HierarchyMode};

const DEFAULT_PORT: u16 = 8080;
const DEFAULT_HOST: &str = "127.0.0.1";

#[derive(Parser, Debug)]
#[command(name = "knowmap", version, about = "Build and serve knowledge maps of document collections")]
struct Cli {
    /// TOML file with [build] and [serve] tables and a top-level `bundle`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write a bundle.
    Build(BuildArgs),
    /// Serve a bundle over HTTP.
    Serve(ServeArgs),
    /// Export a bundle to another format.
    Export(ExportArgs),
    /// Write the synthetic demo corpus and gazetteer, optionally building it.
    Demo(DemoArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    Manual,
    Data,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long)]
    eat: Option<PathBuf>,
    /// Keep only these gazetteer source vocabularies.
    #[arg(long = "vocab")]
    vocabs: Vec<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    threshold: Option<u32>,
    /// Topic counts per level, top to bottom, e.g. `10,25,60`.
    #[arg(long, value_delimiter = ',')]
    pyramid: Option<Vec<usize>>,
    #[arg(long)]
    padding: Option<f64>,
    #[arg(long)]
    entity_radius: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output bundle path.
    #[arg(long, short = 'o', env = "BUNDLE")]
    bundle: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, env = "BUNDLE")]
    bundle: Option<PathBuf>,
    #[arg(long, env = "PORT")]
    port: Option<u16>,
    #[arg(long, env = "HOST")]
    host: Option<String>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(value_enum)]
    format: ExportFormat,
    #[arg(long, env = "BUNDLE")]
    bundle: Option<PathBuf>,
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Deepest topic level drawn in the SVG (default: all).
    #[arg(long)]
    level: Option<u32>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ExportFormat {
    Graphdb,
    Svg,
    Eat,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, default_value = "data/demo")]
    out: PathBuf,
    #[arg(long, default_value_t = DEMO_SEED)]
    seed: u64,
    /// Also build a bundle from the demo files.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    bundle: Option<PathBuf>,
    build: BuildConfig,
    serve: ServeConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ServeConfig {
    host: Option<String>,
    port: Option<u16>,
}

/// Failure classes, mapped to exit codes 1 and 2.
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

fn store_failure(e: StoreError, path: &Path) -> Failure {
    Failure::Input(anyhow!(e).context(format!("cannot load bundle {}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}

fn require_bundle(flag: Option<PathBuf>, file: &FileConfig) -> Result<PathBuf, Failure> {
    flag.or_else(|| file.bundle.clone())
        .ok_or_else(|| Failure::Input(anyhow!("no bundle path given (use --bundle, BUNDLE or the config file)")))
}

fn run_build(args: BuildArgs, file: FileConfig) -> Result<(), Failure> {
    let out = require_bundle(args.bundle.clone(), &file)?;
    let mut cfg = file.build;
    if args.corpus.is_some() {
        cfg.corpus = args.corpus;
    }
    // An annotation source given on the command line replaces the configured one.
    if args.gazetteer.is_some() || args.eat.is_some() {
        cfg.gazetteer = args.gazetteer;
        cfg.eat = args.eat;
    }
    if !args.vocabs.is_empty() {
        cfg.vocabs = args.vocabs;
    }
    if let Some(m) = args.mode {
        cfg.mode = match m {
            Mode::Manual => HierarchyMode::Manual,
            Mode::Data => HierarchyMode::Data,
        };
    }
    cfg.threshold = args.threshold.unwrap_or(cfg.threshold);
    cfg.pyramid = args.pyramid.or(cfg.pyramid);
    cfg.padding = args.padding.unwrap_or(cfg.padding);
    cfg.entity_radius = args.entity_radius.unwrap_or(cfg.entity_radius);
    cfg.grid = args.grid.unwrap_or(cfg.grid);
    cfg.bandwidth = args.bandwidth.or(cfg.bandwidth);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    build_to(&cfg, &out)
}

fn build_to(cfg: &BuildConfig, out: &Path) -> Result<(), Failure> {
    let bundle = build_bundle(cfg).map_err(|e| {
        if e.is_input_error() {
            Failure::Input(e.into())
        } else {
            Failure::Internal(e.into())
        }
    })?;
    save_bundle(&bundle, out).with_context(|| format!("cannot write bundle {}", out.display()))?;
    print!("{}", BuildSummary::of(&bundle));
    println!("wrote {}", out.display());
    Ok(())
}

fn run_export(args: ExportArgs, file: FileConfig) -> Result<(), Failure> {
    let path = require_bundle(args.bundle, &file)?;
    let bundle = load_bundle(&path).map_err(|e| store_failure(e, &path))?;
    let out = &args.out;
    match args.format {
        ExportFormat::Graphdb => export_graphdb_script(&bundle, out)?,
        ExportFormat::Svg => {
            let level = args.level.unwrap_or(bundle.thg.max_depth);
            let svg = render_svg(&bundle.layout, &bundle.thg, &bundle.contours, &bundle.color_scale, level);
            std::fs::write(out, svg).with_context(|| format!("cannot write {}", out.display()))?;
        }
        ExportFormat::Eat => write_eat(out, &bundle.annotations)?,
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run_demo(args: DemoArgs) -> Result<(), Failure> {
    write_demo(&args.out, args.seed)?;
    println!("wrote demo corpus to {}", args.out.display());
    if let Some(out) = args.bundle {
        let cfg = BuildConfig {
            corpus: Some(args.out.join("corpus.jsonl")),
            gazetteer: Some(args.out.join("gazetteer.tsv")),
            ..BuildConfig::default()
        };
        build_to(&cfg, &out)?;
    }
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn run_serve(args: ServeArgs, file: FileConfig) -> Result<(), Failure> {
    let path = require_bundle(args.bundle, &file)?;
    let host = args.host.or(file.serve.host).unwrap_or_else(|| DEFAULT_HOST.to_string());
    let port = args.port.or(file.serve.port).unwrap_or(DEFAULT_PORT);
    if !path.is_file() {
        return Err(Failure::Input(anyhow!("bundle {} does not exist", path.display())));
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Internal(e.into()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port))
            .await
            .with_context(|| format!("cannot bind {host}:{port}"))?;
        let addr: SocketAddr = listener.local_addr().map_err(|e| Failure::Internal(e.into()))?;
        let state = Arc::new(AppState::empty());

        // Requests get 503 until the first snapshot is in place.
        let loader = {
            let state = state.clone();
            let path = path.clone();
            tokio::task::spawn_blocking(move || state.reload(&path))
        };
        eprintln!("listening on http://{addr}");

        #[cfg(unix)]
        {
            let state = state.clone();
            let path = path.clone();
            tokio::spawn(async move {
                use tokio::signal::unix::{signal, SignalKind};
                let Ok(mut hup) = signal(SignalKind::hangup()) else { return };
                while hup.recv().await.is_some() {
                    let (st, p) = (state.clone(), path.clone());
                    match tokio::task::spawn_blocking(move || st.reload(&p)).await {
                        Ok(Ok(())) => log::info!("reloaded {}", path.display()),
                        Ok(Err(e)) => log::error!("reload failed, keeping current map: {e}"),
                        Err(e) => log::error!("reload task failed: {e}"),
                    }
                }
            });
        }

        let server = axum::serve(listener, router(state.clone())).with_graceful_shutdown(shutdown_signal());
        let server = tokio::spawn(async move { server.await });
        match loader.await {
            Ok(Ok(())) => {
                let snap = state.current().expect("just loaded");
                log::info!("loaded {} (depth {})", path.display(), snap.max_depth());
            }
            Ok(Err(e)) => return Err(store_failure(e, &path)),
            Err(e) => return Err(Failure::Internal(e.into())),
        }
        server
            .await
            .map_err(|e| Failure::Internal(e.into()))?
            .map_err(|e| Failure::Internal(e.into()))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = load_config(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Build(args) => run_build(args, file),
        Command::Serve(args) => run_serve(args, file),
        Command::Export(args) => run_export(args, file),
        Command::Demo(args) => run_demo(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
