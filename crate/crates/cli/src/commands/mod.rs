//! Subcommand implementations. Each returns the text it prints on stdout.

mod dataset;
mod degrade;
mod eval;
mod sampler;
mod tiles;

pub use degrade::{degrade, PairRow, TraceFile};
pub use dataset::{curate, score_noref, train_noref};
pub use eval::{eval, parse_extra_metric, report};
pub use sampler::sampler_check;
pub use tiles::{geometry, stitch, tile};

use std::path::{Path, PathBuf};

use crate::cli::{Cli, Command};
use crate::config::ConfigFile;
use crate::error::{io_err, CliError, CliResult};

/// Settings shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub seed: u64,
    pub config: Option<ConfigFile>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = cli.global.config.as_deref().map(ConfigFile::load).transpose()?;
    let cfg_u64 = |key: &str| -> CliResult<Option<u64>> {
        config.as_ref().map_or(Ok(None), |c| c.global_u64(key))
    };
    let seed = match cli.global.seed {
        Some(s) => s,
        None => cfg_u64("seed")?.unwrap_or(0),
    };
    let threads = match cli.global.threads {
        Some(t) => Some(t),
        None => cfg_u64("threads")?.map(|t| t as usize),
    };
    if threads == Some(0) {
        return Err(CliError::validation("--threads must be at least 1"));
    }
    let ctx = Context { seed, config };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start thread pool: {e}")))?;
    let text = pool.install(|| dispatch(&cli.command, &ctx))?;
    print!("{text}");
    Ok(())
}

pub fn dispatch(command: &Command, ctx: &Context) -> CliResult<String> {
    match command {
        Command::Degrade(a) => degrade(a, ctx),
        Command::Curate(a) => curate(a, ctx),
        Command::TrainNoref(a) => train_noref(a, ctx),
        Command::ScoreNoref(a) => score_noref(a, ctx),
        Command::Eval(a) => eval(a, ctx),
        Command::Report(a) => report(a, ctx),
        Command::Tile(a) => tile(a, ctx),
        Command::Stitch(a) => stitch(a, ctx),
        Command::Geometry(a) => geometry(a, ctx),
        Command::SamplerCheck(a) => sampler_check(a, ctx),
    }
}

pub(crate) fn existing_dir(path: Option<PathBuf>, field: &str) -> CliResult<PathBuf> {
    let path = crate::config::require(path, field)?;
    if !path.is_dir() {
        return Err(CliError::validation(format!(
            "`{field}`: {} is not a directory",
            path.display()
        )));
    }
    Ok(path)
}

pub(crate) fn existing_file(path: Option<PathBuf>, field: &str) -> CliResult<PathBuf> {
    let path = crate::config::require(path, field)?;
    if !path.is_file() {
        return Err(CliError::validation(format!(
            "`{field}`: {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

pub(crate) fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub(crate) fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
