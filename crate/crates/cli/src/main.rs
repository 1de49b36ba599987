mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::{NoiseSpec, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl From<dqmap::Error> for CliError {
    fn from(e: dqmap::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "dqmap", version, about = "Gate error maps of driven qubits under colored noise")]
struct Cli {
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides simulation.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides output.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filtered integrals, channel snapshots and model error curves.
    Predict,
    /// Monte Carlo ensemble against each analytic channel.
    Validate,
    /// MLE and posterior gate errors from counts, measured or simulated.
    Tomography,
    /// Randomized benchmarking with per-pulse model noise.
    Rb,
    /// Convert a PSD file to the internal two-sided angular convention.
    IngestPsd {
        /// PSD table; defaults to the tabulated dephasing noise in the config.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Predict => "predict",
            Command::Validate => "validate",
            Command::Tomography => "tomography",
            Command::Rb => "rb",
            Command::IngestPsd { .. } => "ingest-psd",
        }
    }
}

#[derive(Serialize)]
struct OutputHash {
    file: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    dqmap_version: &'static str,
    cli_version: &'static str,
    /// Hash of the resolved config with the output directory left out.
    config_sha256: String,
    seed: u64,
    config: &'a RunConfig,
    outputs: Vec<OutputHash>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output.directory = PathBuf::new();
    sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.simulation.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.directory = o.clone();
    }
    Ok(cfg)
}

fn ingest_paths(cfg: &RunConfig, csv: &Option<PathBuf>, sidecar: &Option<PathBuf>) -> Result<(PathBuf, PathBuf), CliError> {
    match (csv, sidecar, &cfg.noise.dephasing) {
        (Some(c), Some(s), _) => Ok((c.clone(), s.clone())),
        (None, None, NoiseSpec::Tabulated { csv, sidecar }) => Ok((csv.clone(), sidecar.clone())),
        _ => Err(CliError::Validation(
            "ingest-psd needs --csv and --sidecar, or tabulated dephasing noise in the config".into(),
        )),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    if cli.dump_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    if let Command::IngestPsd { csv, sidecar } = &cli.command {
        // A standalone conversion only needs the two files.
        let (c, s) = ingest_paths(&cfg, csv, sidecar)?;
        for p in [&c, &s] {
            if !p.exists() {
                return Err(CliError::Validation(format!("{} does not exist", p.display())));
            }
        }
    } else {
        cfg.validate()?;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let dir = &cfg.output.directory;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?;
    let outputs = match &cli.command {
        Command::Predict => commands::predict(&cfg, dir)?,
        Command::Validate => commands::validate(&cfg, dir)?,
        Command::Tomography => commands::tomography(&cfg, dir)?,
        Command::Rb => commands::rb(&cfg, dir)?,
        Command::IngestPsd { csv, sidecar } => {
            let (c, s) = ingest_paths(&cfg, csv, sidecar)?;
            commands::ingest_psd(&c, &s, dir)?
        }
    };
    write_manifest(cli.command.name(), &cfg, dir, outputs)
}

fn write_manifest(command: &'static str, cfg: &RunConfig, dir: &Path, outputs: Vec<PathBuf>) -> Result<(), CliError> {
    let outputs = outputs
        .into_iter()
        .map(|file| {
            let bytes = std::fs::read(dir.join(&file)).map_err(dqmap::Error::from)?;
            Ok(OutputHash { sha256: sha256_hex(&bytes), file })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest {
        command,
        dqmap_version: dqmap::VERSION,
        cli_version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash(cfg),
        seed: cfg.simulation.seed,
        config: cfg,
        outputs,
    };
    dqmap::io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
