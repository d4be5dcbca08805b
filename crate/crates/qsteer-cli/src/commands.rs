//! The four subcommands: `run`, `compare`, `evaluate`, and `landscape`.
//!
//! Each training run owns its environment, tables, and generator, so the
//! comparison grid parallelizes over (strategy, seed) with no shared mutable
//! state; every file is written by exactly one writer after its run finishes.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use qsteer_core::envs::Environment;
use qsteer_core::trainer::{
    aggregate_runs, evaluate_policy, train, EvalMode, RunResult, StrategyRun,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{EnvSpec, ExperimentConfig, StrategyName};
use crate::output::{self, RolloutSummary};

// --- run -----------------------------------------------------------------------

/// Trains one agent and writes `episodes.csv`, `summary.json`, and
/// `artifact.json` into the output directory.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path, quiet: bool) -> Result<()> {
    let strategy = cfg.training.strategy;
    let seed = cfg.training.seed;
    let mut env = cfg.env.build()?;
    let train_cfg = cfg.train_config(strategy, seed);
    let result = train(env.as_mut(), &train_cfg)?;
    let rollout = final_rollout(cfg, env.as_mut(), &result, seed)?;
    output::write_file(out_dir, "episodes.csv", &output::episode_csv(&result.records))?;
    output::write_file(
        out_dir,
        "summary.json",
        &output::summary_json(cfg, seed, &result, &rollout),
    )?;
    output::write_file(
        out_dir,
        "artifact.json",
        &output::artifact_json(cfg, strategy.name(), seed, env.as_ref(), &result),
    )?;
    if !quiet {
        println!(
            "{} seed {seed}: {}; outputs in {}",
            strategy.name(),
            describe_convergence(&result, cfg.training.max_episodes),
            out_dir.display()
        );
    }
    Ok(())
}

/// Greedy rollout with the learned tables, summarizing end-of-run quality.
fn final_rollout(
    cfg: &ExperimentConfig,
    env: &mut dyn Environment,
    result: &RunResult,
    seed: u64,
) -> Result<RolloutSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = evaluate_policy(
        env,
        &result.q,
        EvalMode::Greedy,
        result.policy.as_ref(),
        cfg.evaluate.max_steps,
        &mut rng,
    )?;
    Ok(RolloutSummary {
        steps: steps.len(),
        fidelity: steps.last().and_then(|s| s.fidelity),
    })
}

fn describe_convergence(result: &RunResult, max_episodes: usize) -> String {
    match result.convergence_episode {
        Some(e) => format!("converged at episode {e}"),
        None => format!("no convergence within {max_episodes} episodes"),
    }
}

// --- compare ----------------------------------------------------------------------

/// Trains the full strategy × seed grid, writes one `strategy_seed.csv` per
/// run plus `aggregate.csv`, and fails if any individual run failed.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    jobs: usize,
    out_dir: &Path,
    quiet: bool,
    single: bool,
) -> Result<()> {
    let compare = cfg.compare.as_ref().ok_or_else(|| {
        anyhow!("compare needs a [compare] section with 'strategies' and 'seeds'")
    })?;
    if compare.strategies.len() < 2 && !single {
        bail!(
            "compare.strategies lists only '{}'; add more strategies or pass --single",
            compare.strategies[0].name()
        );
    }
    let grid: Vec<(StrategyName, u64)> = compare
        .strategies
        .iter()
        .flat_map(|&s| compare.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot build the worker pool")?;
    let outcomes: Vec<(StrategyName, u64, Result<RunResult>)> = pool.install(|| {
        grid.par_iter()
            .map(|&(strategy, seed)| {
                let run = cfg.env.build().and_then(|mut env| {
                    let train_cfg = cfg.train_config(strategy, seed);
                    Ok(train(env.as_mut(), &train_cfg)?)
                });
                (strategy, seed, run)
            })
            .collect()
    });

    let mut runs = Vec::new();
    let mut failed = 0usize;
    for (strategy, seed, outcome) in outcomes {
        match outcome {
            Ok(result) => {
                let file = format!("{}_{}.csv", strategy.name(), seed);
                output::write_file(out_dir, &file, &output::episode_csv(&result.records))?;
                if !quiet {
                    println!(
                        "{} seed {seed}: {}",
                        strategy.name(),
                        describe_convergence(&result, cfg.training.max_episodes)
                    );
                }
                runs.push(StrategyRun {
                    strategy: cfg.strategy_config(strategy),
                    seed,
                    result,
                });
            }
            Err(err) => {
                eprintln!("{} seed {seed}: failed: {err:#}", strategy.name());
                failed += 1;
            }
        }
    }
    let aggregate = aggregate_runs(&runs);
    output::write_file(out_dir, "aggregate.csv", &output::aggregate_csv(&aggregate))?;
    if !quiet {
        for row in &aggregate {
            println!(
                "{}: median convergence {}, success rate {:.2}, median cumulative steps {}",
                row.strategy,
                row.median_convergence_episode,
                row.success_rate,
                row.median_cumulative_steps
            );
        }
        println!("aggregate over {} runs in {}", runs.len(), out_dir.display());
    }
    if failed > 0 {
        bail!("{failed} of {} runs failed", grid.len());
    }
    Ok(())
}

// --- evaluate -----------------------------------------------------------------------

/// Rolls out a trained artifact on the configured environment and writes
/// `trajectory.csv`.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    artifact_path: &Path,
    out_dir: &Path,
    quiet: bool,
) -> Result<()> {
    let artifact = output::load_artifact(artifact_path)?;
    if artifact.kind != cfg.env.kind() {
        bail!(
            "artifact was trained on '{}' but the config describes '{}'",
            artifact.kind,
            cfg.env.kind()
        );
    }
    let mut env = cfg.env.build()?;
    if artifact.n_states != env.n_states() || artifact.n_actions != env.n_actions() {
        bail!(
            "artifact tables are {} states x {} actions but the configured environment \
             is {} x {}",
            artifact.n_states,
            artifact.n_actions,
            env.n_states(),
            env.n_actions()
        );
    }
    if cfg.evaluate.mode == EvalMode::PolicyTable && artifact.policy.is_none() {
        bail!(
            "artifact from strategy '{}' carries no policy table; use evaluate.mode = greedy",
            artifact.strategy
        );
    }
    // Seeded from the artifact so policy-mode rollouts are reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(artifact.seed);
    let steps = evaluate_policy(
        env.as_mut(),
        &artifact.q,
        cfg.evaluate.mode,
        artifact.policy.as_ref(),
        cfg.evaluate.max_steps,
        &mut rng,
    )?;
    output::write_file(
        out_dir,
        "trajectory.csv",
        &output::trajectory_csv(&artifact.kind, &steps)?,
    )?;
    if !quiet {
        match steps.last().and_then(|s| s.fidelity) {
            Some(f) => println!(
                "rollout: {} steps, final fidelity {f}; trajectory in {}",
                steps.len(),
                out_dir.display()
            ),
            None => println!(
                "rollout: {} steps; trajectory in {}",
                steps.len(),
                out_dir.display()
            ),
        }
    }
    Ok(())
}

// --- landscape ----------------------------------------------------------------------

/// Applies a pulse sequence from a file and prints the transition value
/// J = F² together with the terminal fidelity F.
///
/// Sequence files hold one integer per line in the environment's native
/// labels: signed pulse counts E ∈ [−bound, bound] for the three-level task,
/// plain action indices for everything else. `#` comments and blank lines
/// are skipped.
pub fn cmd_landscape(cfg: &ExperimentConfig, sequence_path: &Path) -> Result<()> {
    let text = fs::read_to_string(sequence_path)
        .with_context(|| format!("cannot read sequence file '{}'", sequence_path.display()))?;
    let mut env = cfg.env.build()?;
    let actions = parse_sequence(&text, sequence_path, &cfg.env, env.n_actions())?;
    if actions.is_empty() {
        bail!(
            "sequence file '{}' is empty; expected one pulse per line",
            sequence_path.display()
        );
    }
    env.reset();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.training.seed);
    let mut fidelity = None;
    for (i, &(action, line_no)) in actions.iter().enumerate() {
        let step = env
            .step(action, &mut rng)
            .map_err(|e| anyhow!("{}:{line_no}: {e}", sequence_path.display()))?;
        fidelity = step.fidelity;
        if (step.terminal || step.truncated) && i + 1 < actions.len() {
            bail!(
                "the episode ended after {} steps but '{}' has {} pulses",
                i + 1,
                sequence_path.display(),
                actions.len()
            );
        }
    }
    let f = fidelity.ok_or_else(|| {
        anyhow!(
            "environment '{}' exposes no fidelity; the transition landscape is only \
             defined for the quantum environments",
            cfg.env.kind()
        )
    })?;
    println!("J = {}", output::fmt_real(f * f));
    println!("fidelity = {}", output::fmt_real(f));
    Ok(())
}

/// Maps file lines to action indices, remembering source lines for errors.
fn parse_sequence(
    text: &str,
    path: &Path,
    env: &EnvSpec,
    n_actions: usize,
) -> Result<Vec<(usize, usize)>> {
    let mut actions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: i64 = line.parse().map_err(|_| {
            anyhow!("{}:{line_no}: '{line}' is not an integer", path.display())
        })?;
        let action = match env {
            EnvSpec::Lambda(c) => {
                let bound = c.pulse_bound as i64;
                if !(-bound..=bound).contains(&value) {
                    bail!(
                        "{}:{line_no}: pulse count {value} is outside [{}, {bound}]",
                        path.display(),
                        -bound
                    );
                }
                (value + bound) as usize
            }
            _ => {
                if value < 0 || value as usize >= n_actions {
                    bail!(
                        "{}:{line_no}: action index {value} is outside [0, {n_actions})",
                        path.display()
                    );
                }
                value as usize
            }
        };
        actions.push((action, line_no));
    }
    Ok(actions)
}
