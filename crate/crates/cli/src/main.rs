use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evrep_cli::commands::{cmd_evolve, cmd_quorum, cmd_reconstruct, cmd_spectrum};
use evrep_cli::table::Table;
use evrep_cli::{CliError, Format, LoadedConfig};

#[derive(Parser)]
#[command(
    name = "evrep",
    version,
    about = "Spin dynamics as a real linear flow on quorum probabilities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides `output.path`. Reports go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Report quorum directions, Gram conditioning and self-check residuals.
    Quorum {
        #[command(flatten)]
        common: Common,
        /// Also write the quorum as a TOML document for later import.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Propagate the initial state and write the trajectory plus `<out>.summary.json`.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Add an `oracle_dev` column from direct density-matrix evolution.
        #[arg(long)]
        oracle: bool,
    },
    /// Convert between a density matrix and its probability vector.
    Reconstruct {
        #[command(flatten)]
        common: Common,
    },
    /// Print the eigenvalues of `H` and of the generator.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_to(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

struct Target {
    out: Option<PathBuf>,
    format: Format,
}

impl Target {
    fn new(common: &Common, cfg: &LoadedConfig) -> Self {
        let from_file = &cfg.config.output;
        Target {
            out: common
                .out
                .clone()
                .or_else(|| from_file.path.as_ref().map(|p| cfg.resolve(p))),
            format: common.format.or(from_file.format).unwrap_or_default(),
        }
    }

    fn emit(&self, table: &Table) -> Result<(), CliError> {
        match &self.out {
            Some(p) => write_to(p, |w| table.write(w, self.format)),
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                table
                    .write(&mut lock, self.format)
                    .map_err(|e| CliError::Io(e.to_string()))
            }
        }
    }
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".summary.json");
    out.with_file_name(name)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Quorum { common, export } => {
            let cfg = LoadedConfig::load(&common.config)?;
            let report = cmd_quorum(&cfg)?;
            if let Some(path) = &export {
                let text = report.document.to_toml_string();
                write_to(path, |w| w.write_all(text.as_bytes()))?;
            }
            Target::new(&common, &cfg).emit(&report.table)
        }
        Command::Evolve { common, oracle } => {
            let cfg = LoadedConfig::load(&common.config)?;
            let target = Target::new(&common, &cfg);
            let out = target
                .out
                .clone()
                .ok_or_else(|| CliError::Config("evolve needs --out or output.path".into()))?;
            let outcome = cmd_evolve(&cfg, oracle || cfg.config.output.oracle)?;
            target.emit(&outcome.table)?;
            let text = serde_json::to_string_pretty(&outcome.summary)
                .map_err(|e| CliError::Io(e.to_string()))?;
            write_to(&summary_path(&out), |w| writeln!(w, "{text}"))
        }
        Command::Reconstruct { common } => {
            let cfg = LoadedConfig::load(&common.config)?;
            let table = cmd_reconstruct(&cfg)?;
            Target::new(&common, &cfg).emit(&table)
        }
        Command::Spectrum { common } => {
            let cfg = LoadedConfig::load(&common.config)?;
            let table = cmd_spectrum(&cfg)?;
            Target::new(&common, &cfg).emit(&table)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evrep: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
