mod analyze;
mod args;
mod exit;
mod ingest;
mod score;
mod select;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command, ConfigFile};

/// Settings shared by every subcommand.
pub struct Env {
    pub output_dir: PathBuf,
}

impl Env {
    /// `name` inside the output directory, creating the directory if needed.
    pub fn output(&self, name: &str) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("cannot create output directory {}", self.output_dir.display()))?;
        Ok(self.output_dir.join(name))
    }

    pub fn default_path(&self, given: Option<PathBuf>, name: &str) -> PathBuf {
        given.unwrap_or_else(|| self.output_dir.join(name))
    }
}

/// Fails with an input error if a path named on the command line is absent.
pub fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if path.is_file() {
        return Ok(());
    }
    let err = std::io::Error::new(std::io::ErrorKind::NotFound, "no such file");
    Err(anyhow::Error::new(err).context(format!("{what} {} not found", path.display())))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => {
            require_file(path, "config file")?;
            ConfigFile::load(path)?
        }
        None => ConfigFile::default(),
    };
    if let Some(n) = cli.threads.or(config.threads) {
        if n == 0 {
            return Err(exit::config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start the thread pool")?;
    }
    let env = Env {
        output_dir: cli.output_dir.or(config.output_dir.take()).unwrap_or_else(|| PathBuf::from(".")),
    };
    match cli.command {
        Command::Ingest(mut a) => {
            a.merge(config.ingest);
            ingest::run(&env, a)
        }
        Command::Score(mut a) => {
            a.merge(config.score);
            score::run(&env, a)
        }
        Command::Select(mut a) => {
            a.merge(config.select);
            select::run(&env, a)
        }
        Command::Analyze(mut a) => {
            a.merge(config.analyze);
            analyze::analyze(&env, a)
        }
        Command::Report(mut a) => {
            a.merge(config.report);
            analyze::report(&env, a)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e) as u8)
        }
    }
}
