//! `qsteer`: train, compare, evaluate, and inspect tabular agents on the
//! bundled quantum-control environments.
//!
//! All experiment settings live in an INI config file; any key can be
//! overridden on the command line with `--section.key=value`.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "qsteer",
    version,
    about = "Tabular reinforcement learning for quantum state steering",
    after_help = "Any --section.key=value argument overrides the matching config key,\n\
                  for example --training.seed=7 or --environment.theta_bins=9."
)]
struct Cli {
    /// Experiment configuration file (INI sections with key = value lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for the comparison grid.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    jobs: usize,

    /// Output directory (wins over the config's [output] dir and $QSTEER_OUT).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the training seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Suppress progress lines; errors still go to stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent; writes episodes.csv, summary.json, and artifact.json.
    Run,
    /// Train a strategy x seed grid; writes per-run CSVs and aggregate.csv.
    Compare {
        /// Allow a [compare] section that lists a single strategy.
        #[arg(long)]
        single: bool,
    },
    /// Roll out a trained artifact; writes trajectory.csv.
    Evaluate {
        /// artifact.json written by a previous run.
        artifact: PathBuf,
    },
    /// Apply a pulse-sequence file and print the transition value J = F².
    Landscape {
        /// One pulse per line: signed pulse counts for the three-level task,
        /// action indices otherwise.
        sequence: PathBuf,
    },
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);
    match dispatch(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Pulls `--section.key=value` config overrides out of the raw arguments;
/// everything else goes to the ordinary flag parser.
fn split_overrides(raw: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut args = Vec::with_capacity(raw.len());
    let mut overrides = Vec::new();
    for arg in raw {
        let parsed = arg
            .strip_prefix("--")
            .and_then(|rest| rest.split_once('='))
            .filter(|(name, _)| name.contains('.'))
            .map(|(name, value)| (name.to_string(), value.to_string()));
        match parsed {
            Some(kv) => overrides.push(kv),
            None => args.push(arg),
        }
    }
    (args, overrides)
}

fn dispatch(cli: Cli, mut overrides: Vec<(String, String)>) -> Result<()> {
    let config_path = cli
        .config
        .ok_or_else(|| anyhow!("--config PATH is required"))?;
    if let Some(seed) = cli.seed {
        overrides.push(("training.seed".to_string(), seed.to_string()));
    }
    let cfg = config::parse_config(&config_path, &overrides)?;
    let out_dir = output::resolve_out_dir(cli.out.as_deref(), cfg.out_dir.as_deref());
    match cli.command {
        Command::Run => commands::cmd_run(&cfg, &out_dir, cli.quiet),
        Command::Compare { single } => {
            commands::cmd_compare(&cfg, cli.jobs, &out_dir, cli.quiet, single)
        }
        Command::Evaluate { artifact } => {
            commands::cmd_evaluate(&cfg, &artifact, &out_dir, cli.quiet)
        }
        Command::Landscape { sequence } => commands::cmd_landscape(&cfg, &sequence),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(parts: &[&str]) -> Vec<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn override_arguments_are_separated_from_flags() {
        let (args, overrides) = split_overrides(strings(&[
            "qsteer",
            "run",
            "--config=spin.cfg",
            "--training.seed=7",
            "--quiet",
            "--environment.theta_bins=9",
            "--out=./out.dir",
        ]));
        assert_eq!(
            args,
            strings(&["qsteer", "run", "--config=spin.cfg", "--quiet", "--out=./out.dir"])
        );
        assert_eq!(
            overrides,
            vec![
                ("training.seed".to_string(), "7".to_string()),
                ("environment.theta_bins".to_string(), "9".to_string()),
            ]
        );
    }

    #[test]
    fn cli_grammar_parses_all_subcommands() {
        Cli::parse_from(["qsteer", "run", "--config", "x.cfg", "--jobs", "4"]);
        Cli::parse_from(["qsteer", "compare", "--single", "--config", "x.cfg"]);
        Cli::parse_from(["qsteer", "evaluate", "artifact.json", "--config", "x.cfg"]);
        Cli::parse_from(["qsteer", "landscape", "seq.txt", "--config", "x.cfg"]);
    }
}
