use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdl_core::evalmap::LabelHierarchy;
use pdl_core::pipeline::{PipelineConfig, Stage};
use pdl_serve::AppState;

#[derive(Parser)]
#[command(name = "pdl", version, about = "Discover patterns of daily living in smart-home sensor logs")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory shared by all stages.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Event log read by `ingest`.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the bundled synthetic household (log and layout).
    Synth,
    /// Parse the log into events, vocabulary, windows, day split and training sample.
    Ingest,
    /// Masked-token pre-training of the encoder on the sampled windows.
    Pretrain,
    /// Cosine h-nearest-neighbor graph over the window embeddings.
    Neighbors,
    /// SCAN fine-tuning and cluster assignment of every window.
    Cluster,
    /// k-means baseline on the pre-trained embeddings.
    Kmeans,
    /// Select centroid windows and open an annotation session.
    Centroids,
    /// Serve layouts, replays and annotation endpoints over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Propagate session labels to windows and events.
    Propagate,
    /// Benchmark clusters against truth labels with majority-vote mapping.
    Evaluate,
    /// Macro F1 with bootstrap intervals across cluster counts.
    SweepK,
    /// Label-share changes between two date ranges.
    Trends,
    /// ingest, pretrain, neighbors, cluster, kmeans and evaluate in sequence.
    Run,
}

fn stages(command: &Command) -> &'static [Stage] {
    match command {
        Command::Synth => &[Stage::Synth],
        Command::Ingest => &[Stage::Ingest],
        Command::Pretrain => &[Stage::Pretrain],
        Command::Neighbors => &[Stage::Neighbors],
        Command::Cluster => &[Stage::Cluster],
        Command::Kmeans => &[Stage::KMeans],
        Command::Centroids => &[Stage::Centroids],
        Command::Propagate => &[Stage::Propagate],
        Command::Evaluate => &[Stage::Evaluate],
        Command::SweepK => &[Stage::SweepK],
        Command::Trends => &[Stage::Trends],
        Command::Run => &[
            Stage::Ingest,
            Stage::Pretrain,
            Stage::Neighbors,
            Stage::Cluster,
            Stage::KMeans,
            Stage::Evaluate,
        ],
        Command::Serve { .. } => &[],
    }
}

fn load_config(common: &Common) -> pdl_core::Result<PipelineConfig> {
    let mut sets = common.sets.clone();
    if let Some(seed) = common.seed {
        sets.push(format!("seed={seed}"));
    }
    if let Some(dataset) = &common.dataset {
        sets.push(format!("dataset={}", toml_string(&dataset.display().to_string())));
    }
    PipelineConfig::load(common.config.as_deref(), &sets, &common.out)
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn serve(config: &PipelineConfig, addr: SocketAddr) -> Result<(), String> {
    let hierarchy = match &config.hierarchy {
        Some(path) => LabelHierarchy::from_json(&pdl_core::io::read_string(path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?,
        None => LabelHierarchy::bundled(),
    };
    let state = AppState::from_dir(&config.out, hierarchy).map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime
        .block_on(pdl_serve::serve(addr, state))
        .map_err(|e| format!("server failed on {addr}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();

    let config = match load_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::Serve { addr } = cli.command {
        return match serve(&config, addr) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        };
    }
    for stage in stages(&cli.command) {
        match stage.run(&config) {
            Ok(manifest) => {
                let names: Vec<&str> = manifest.outputs.keys().map(String::as_str).collect();
                println!("{}: wrote {} to {}", stage.name(), names.join(", "), config.out.display());
            }
            Err(e) => {
                eprintln!("error: {} failed: {e}", stage.name());
                return ExitCode::FAILURE;
            }
        }
    }
    ExitCode::SUCCESS
}
