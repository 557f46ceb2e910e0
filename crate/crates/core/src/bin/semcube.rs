use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use semcube::map::LayerRequest;
use semcube::service::{self, CreateMap, Engine};
use semcube::{ingest, open_index, EngineConfig, Measure};

#[derive(Parser)]
#[command(name = "semcube", version, about = "Semantic OLAP over annotated document collections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the index from the configured taxonomy and corpus.
    Ingest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve the HTTP API over a built index.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Build one map without the service and write it as JSON.
    Map {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated `dimension.category` pairs, e.g. `Disease.1,Finding.0`.
        #[arg(long, value_delimiter = ',', required = true)]
        layers: Vec<String>,
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        measure: Option<Measure>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_layer(spec: &str) -> Result<LayerRequest, String> {
    let (dim, level) = spec.rsplit_once('.').ok_or_else(|| format!("layer `{spec}` is not `dimension.category`"))?;
    let level = level.parse().map_err(|_| format!("layer `{spec}`: category must be a number"))?;
    Ok(LayerRequest::category(dim, level))
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Ingest { config } => {
            let config = EngineConfig::load(&config)?;
            let summary = ingest(&config)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Serve { config, port } => {
            let config = EngineConfig::load(&config)?;
            let engine = Arc::new(Engine::from_config(open_index(&config)?, &config));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(service::serve(engine, port.unwrap_or(config.port)))?;
        }
        Command::Map { config, layers, query, measure, delta, out } => {
            let config = EngineConfig::load(&config)?;
            let layers = layers.iter().map(|l| parse_layer(l)).collect::<Result<_, _>>()?;
            let engine = Engine::from_config(open_index(&config)?, &config);
            let req = CreateMap { layers, query, measure, delta, ..CreateMap::default() };
            let map = engine.build_map("cli", &req).map_err(|e| e.message)?;
            std::fs::write(&out, serde_json::to_string_pretty(&map)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
