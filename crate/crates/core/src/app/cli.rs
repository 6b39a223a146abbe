//! Command-line front end. Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};

use super::config::{parse_ndiv_list, parse_re_list, Command, RunConfig};
use super::output::{resolve_output_dir, table_console};
use super::presets::{preset, preset_names};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "asgs", version, about = "Stabilized Casson flow and transport solver")]
pub struct Cli {
    /// Output directory; overrides ASGS_OUTPUT_DIR and the configuration.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Args)]
pub struct Source {
    /// Built-in preset name (see `asgs presets`).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Error table over a sequence of refinements.
    Convergence {
        #[command(flatten)]
        source: Source,
        /// Comma separated resolutions, e.g. 10,20,40,80.
        #[arg(long)]
        ndiv: Option<String>,
    },
    /// Steady lid-driven cavity for one or more Reynolds numbers.
    Cavity {
        #[command(flatten)]
        source: Source,
        /// Comma separated Reynolds numbers, e.g. 100,400,1000.
        #[arg(long)]
        re: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Single configuration with field output.
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        ndiv: Option<String>,
    },
    /// Lists the built-in presets.
    Presets,
}

fn load(source: &Source, default_preset: Option<&str>) -> Result<RunConfig> {
    match (&source.preset, &source.config, default_preset) {
        (Some(name), _, _) => preset(name),
        (None, Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            RunConfig::from_toml(&text)
        }
        (None, None, Some(name)) => preset(name),
        (None, None, None) => Err(Error::Config("either --preset or --config is required".into())),
    }
}

fn expect_command(cfg: &RunConfig, wanted: Command) -> Result<()> {
    if cfg.command != wanted {
        return Err(Error::Config(format!(
            "configuration is for `{:?}`, not `{:?}`",
            cfg.command, wanted
        )));
    }
    Ok(())
}

fn output_dir(cli_dir: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    cli_dir.clone().unwrap_or_else(|| resolve_output_dir(&cfg.output.dir))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() || matches!(e, Error::Io { .. }) {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        CliCommand::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
        CliCommand::Convergence { source, ndiv } => {
            let mut cfg = load(source, None)?;
            expect_command(&cfg, Command::Convergence)?;
            if let Some(list) = ndiv {
                cfg.mesh.n_div = parse_ndiv_list(list)?;
            }
            let dir = output_dir(&cli.output_dir, &cfg);
            let outcome = super::run_convergence(&cfg)?;
            print!("{}", table_console(&outcome.rows));
            report_written(&super::write_convergence(&cfg, &dir, &outcome)?);
            Ok(if outcome.any_failed() { EXIT_NUMERICAL } else { EXIT_OK })
        }
        CliCommand::Cavity { source, re, grid } => {
            let mut cfg = load(source, Some("cavity"))?;
            expect_command(&cfg, Command::Cavity)?;
            if let Some(list) = re {
                cfg.cavity.re = parse_re_list(list)?;
            }
            if let Some(g) = grid {
                cfg.cavity.grid = *g;
            }
            let dir = output_dir(&cli.output_dir, &cfg);
            let outcome = super::run_cavity(&cfg)?;
            print!("{}", outcome.summary_csv());
            report_written(&super::write_cavity(&cfg, &dir, &outcome)?);
            Ok(if outcome.any_failed() { EXIT_NUMERICAL } else { EXIT_OK })
        }
        CliCommand::Solve { source, ndiv } => {
            let mut cfg = load(source, None)?;
            if cfg.command == Command::Cavity {
                return Err(Error::Config("use the `cavity` command for cavity configurations".into()));
            }
            if let Some(list) = ndiv {
                cfg.mesh.n_div = parse_ndiv_list(list)?;
            }
            let dir = output_dir(&cli.output_dir, &cfg);
            let outcome = super::run_solve(&cfg, &dir)?;
            print!("{}", table_console(&outcome.rows));
            eprintln!("output in {}", display(&dir));
            Ok(if outcome.any_failed() { EXIT_NUMERICAL } else { EXIT_OK })
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parse_errors_map_to_config_exit() {
        assert_eq!(run(["asgs", "convergence", "--preset", "nope"]), EXIT_CONFIG);
        assert_eq!(run(["asgs", "convergence", "--preset", "weak_const_re100", "--ndiv", "a"]), EXIT_CONFIG);
        assert_eq!(run(["asgs", "bogus"]), EXIT_CONFIG);
        assert_eq!(run(["asgs", "convergence"]), EXIT_CONFIG);
        assert_eq!(run(["asgs", "cavity", "--re", ""]), EXIT_CONFIG);
        assert_eq!(run(["asgs", "convergence", "--preset", "cavity"]), EXIT_CONFIG);
        assert_eq!(run(["asgs", "presets"]), EXIT_OK);
    }
}
