//! Serialization of run results: episode and trajectory CSVs, comparison
//! aggregates, the trained-run artifact, and the run summary.
//!
//! Every CSV uses a `.` decimal separator, 17-significant-digit reals
//! (`{:.16e}`), LF line endings, UTF-8, and always starts with a header row,
//! so repeated runs of the same (config, seed) produce byte-identical files
//! on any platform. Reals that can be absent (fidelity on environments
//! without one) serialize as an empty field.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use qsteer_core::envs::Environment;
use qsteer_core::quantum::state_to_bloch;
use qsteer_core::quantum::QuantumState;
use qsteer_core::rl::{PolicyTable, QTable};
use qsteer_core::trainer::{EpisodeRecord, EvalStep, RunResult, StrategyAggregate};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

// --- output directory ---------------------------------------------------------

/// Resolves the output directory: an explicit `--out` wins, then the config's
/// `[output] dir`, then the `QSTEER_OUT` environment variable, then `./out`.
pub fn resolve_out_dir(cli_out: Option<&Path>, cfg_out: Option<&Path>) -> PathBuf {
    if let Some(dir) = cli_out {
        return dir.to_path_buf();
    }
    if let Some(dir) = cfg_out {
        return dir.to_path_buf();
    }
    if let Some(dir) = std::env::var_os("QSTEER_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("out")
}

/// Creates the directory (and parents) and writes the file, with the path in
/// any error message.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory '{}'", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .with_context(|| format!("cannot write output file '{}'", path.display()))?;
    Ok(path)
}

// --- scalar formatting ----------------------------------------------------------

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

// --- CSV writers ------------------------------------------------------------------

/// Per-episode training metrics.
pub fn episode_csv(records: &[EpisodeRecord]) -> String {
    let mut out =
        String::from("episode,steps,total_reward,terminal_fidelity,mean_entropy,truncated\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.episode,
            r.steps,
            fmt_real(r.total_reward),
            fmt_opt_real(r.terminal_fidelity),
            fmt_real(r.mean_entropy),
            r.truncated,
        ));
    }
    out
}

/// Per-strategy comparison aggregate, one row per strategy (sorted by name).
pub fn aggregate_csv(rows: &[StrategyAggregate]) -> String {
    let mut out = String::from(
        "strategy,seed_count,median_convergence_episode,success_rate,median_cumulative_steps\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.strategy,
            r.seed_count,
            fmt_real(r.median_convergence_episode),
            fmt_real(r.success_rate),
            fmt_real(r.median_cumulative_steps),
        ));
    }
    out
}

/// Environment-specific trailer columns for trajectory rows.
enum TrajectoryExtra {
    /// Two-level steering: Bloch angles of the state after each step.
    Bloch,
    /// Three-level transfer: level populations after each step.
    Populations(usize),
    /// No continuous state to report.
    None,
}

/// Rollout trajectory: step index, chosen action, reward, fidelity, the raw
/// amplitudes, and per-environment extras (Bloch angles or populations).
pub fn trajectory_csv(kind: &str, steps: &[EvalStep]) -> Result<String> {
    let dim = steps
        .iter()
        .find_map(|s| s.amplitudes.as_ref().map(|a| a.dim()))
        .unwrap_or(0);
    let extra = match kind {
        "spin_half" => TrajectoryExtra::Bloch,
        "lambda" => TrajectoryExtra::Populations(dim),
        _ => TrajectoryExtra::None,
    };
    let mut header = String::from("step,action,reward,fidelity");
    for i in 1..=dim {
        header.push_str(&format!(",re_c{i},im_c{i}"));
    }
    match extra {
        TrajectoryExtra::Bloch => header.push_str(",theta,phi"),
        TrajectoryExtra::Populations(d) => {
            for i in 1..=d {
                header.push_str(&format!(",pop_{i}"));
            }
        }
        TrajectoryExtra::None => {}
    }
    let mut out = header;
    out.push('\n');
    for (idx, s) in steps.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}",
            idx,
            s.action,
            fmt_real(s.reward),
            fmt_opt_real(s.fidelity)
        ));
        if let Some(amplitudes) = &s.amplitudes {
            for c in amplitudes.entries() {
                out.push_str(&format!(",{},{}", fmt_real(c.re), fmt_real(c.im)));
            }
            match extra {
                TrajectoryExtra::Bloch => {
                    let psi = QuantumState::new(amplitudes.clone())?;
                    let angles = state_to_bloch(&psi)?;
                    out.push_str(&format!(
                        ",{},{}",
                        fmt_real(angles.theta),
                        fmt_real(angles.phi)
                    ));
                }
                TrajectoryExtra::Populations(_) => {
                    for c in amplitudes.entries() {
                        out.push_str(&format!(",{}", fmt_real(c.norm_sqr())));
                    }
                }
                TrajectoryExtra::None => {}
            }
        }
        out.push('\n');
    }
    Ok(out)
}

// --- run summary -------------------------------------------------------------------

/// Final rollout metrics included in the run summary.
pub struct RolloutSummary {
    pub steps: usize,
    pub fidelity: Option<f64>,
}

/// JSON summary of one training run: convergence, a final greedy rollout,
/// wall time, the seed, and a config echo that reproduces the run.
pub fn summary_json(
    cfg: &ExperimentConfig,
    seed: u64,
    result: &RunResult,
    rollout: &RolloutSummary,
) -> String {
    let value = json!({
        "convergence_episode": result.convergence_episode,
        "final_greedy_steps": rollout.steps,
        "final_greedy_fidelity": rollout.fidelity,
        "wall_time": result.wall_time,
        "seed": seed,
        "status": "ok",
        "config": cfg.render(),
    });
    to_pretty(&value)
}

// --- trained-run artifact --------------------------------------------------------------

/// Serializes the learned tables with enough context to reload and roll them
/// out: environment kind and dimensions, strategy, seed, convergence episode,
/// and the full config echo.
pub fn artifact_json(
    cfg: &ExperimentConfig,
    strategy: &str,
    seed: u64,
    env: &dyn Environment,
    result: &RunResult,
) -> String {
    let q_rows: Vec<Vec<f64>> = (0..env.n_states()).map(|s| result.q.row(s).to_vec()).collect();
    let policy_rows: Option<Vec<Vec<f64>>> = result
        .policy
        .as_ref()
        .map(|p| (0..env.n_states()).map(|s| p.row(s).to_vec()).collect());
    let value = json!({
        "kind": cfg.env.kind(),
        "n_states": env.n_states(),
        "n_actions": env.n_actions(),
        "strategy": strategy,
        "seed": seed,
        "convergence_episode": result.convergence_episode,
        "q": q_rows,
        "policy": policy_rows,
        "p_min": result.policy.as_ref().map(|p| p.p_min()),
        "config": cfg.render(),
    });
    to_pretty(&value)
}

/// A reloaded trained-run artifact.
#[derive(Debug)]
pub struct Artifact {
    pub kind: String,
    pub n_states: usize,
    pub n_actions: usize,
    pub strategy: String,
    pub seed: u64,
    pub q: QTable,
    pub policy: Option<PolicyTable>,
}

/// Loads an artifact written by [`artifact_json`].
pub fn load_artifact(path: &Path) -> Result<Artifact> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read artifact '{}'", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("artifact '{}' is not valid JSON", path.display()))?;
    let field = |name: &str| {
        value
            .get(name)
            .ok_or_else(|| anyhow!("artifact '{}' is missing '{name}'", path.display()))
    };
    let as_usize = |name: &str| -> Result<usize> {
        field(name)?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| anyhow!("artifact field '{name}' is not an integer"))
    };
    let kind = field("kind")?
        .as_str()
        .ok_or_else(|| anyhow!("artifact field 'kind' is not a string"))?
        .to_string();
    let n_states = as_usize("n_states")?;
    let n_actions = as_usize("n_actions")?;
    let strategy = field("strategy")?
        .as_str()
        .ok_or_else(|| anyhow!("artifact field 'strategy' is not a string"))?
        .to_string();
    let seed = field("seed")?
        .as_u64()
        .ok_or_else(|| anyhow!("artifact field 'seed' is not an integer"))?;
    let q_values = flat_table(field("q")?, n_states, n_actions, "q")?;
    let q = QTable::from_values(n_states, n_actions, q_values)
        .map_err(|e| anyhow!("artifact Q-table is invalid: {e}"))?;
    let policy = match field("policy")? {
        Value::Null => None,
        rows => {
            let p_min = field("p_min")?
                .as_f64()
                .ok_or_else(|| anyhow!("artifact field 'p_min' is not a number"))?;
            let probs = flat_table(rows, n_states, n_actions, "policy")?;
            Some(
                PolicyTable::from_probs(n_states, n_actions, probs, p_min)
                    .map_err(|e| anyhow!("artifact policy table is invalid: {e}"))?,
            )
        }
    };
    Ok(Artifact {
        kind,
        n_states,
        n_actions,
        strategy,
        seed,
        q,
        policy,
    })
}

fn flat_table(rows: &Value, n_states: usize, n_actions: usize, name: &str) -> Result<Vec<f64>> {
    let rows = rows
        .as_array()
        .ok_or_else(|| anyhow!("artifact field '{name}' is not an array of rows"))?;
    if rows.len() != n_states {
        bail!(
            "artifact field '{name}' has {} rows but n_states = {n_states}",
            rows.len()
        );
    }
    let mut flat = Vec::with_capacity(n_states * n_actions);
    for (s, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| anyhow!("artifact '{name}' row {s} is not an array"))?;
        if row.len() != n_actions {
            bail!(
                "artifact '{name}' row {s} has {} entries but n_actions = {n_actions}",
                row.len()
            );
        }
        for entry in row {
            flat.push(
                entry
                    .as_f64()
                    .ok_or_else(|| anyhow!("artifact '{name}' row {s} holds a non-number"))?,
            );
        }
    }
    Ok(flat)
}

fn to_pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serialization cannot fail");
    text.push('\n');
    text
}
