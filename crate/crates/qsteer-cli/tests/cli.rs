//! End-to-end tests of the `qsteer` binary: flag handling, config errors,
//! output formats, and determinism of the written files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qsteer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsteer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn expect_ok(args: &[&str]) -> Output {
    let out = qsteer(args);
    assert!(
        out.status.success(),
        "qsteer {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn expect_err(args: &[&str]) -> String {
    let out = qsteer(args);
    assert!(!out.status.success(), "qsteer {args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(path: PathBuf) -> String {
    fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

/// Small spin task that trains in milliseconds.
const TINY_SPIN: &str = "[environment]\nkind = spin_half\ntheta_bins = 3\nphi_bins = 3\n\
                         step_cap = 40\n\
                         [training]\nstrategy = fidelity_probabilistic\nmax_episodes = 3\n";

// --- run ---------------------------------------------------------------------------

#[test]
fn run_writes_episodes_summary_and_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY_SPIN);
    let out = dir.path().join("out");
    expect_ok(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);

    let episodes = read(out.join("episodes.csv"));
    let lines: Vec<&str> = episodes.lines().collect();
    assert_eq!(
        lines[0],
        "episode,steps,total_reward,terminal_fidelity,mean_entropy,truncated"
    );
    assert_eq!(lines.len(), 1 + 3, "header plus one row per episode");

    let summary: Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    for key in [
        "convergence_episode",
        "final_greedy_steps",
        "final_greedy_fidelity",
        "wall_time",
        "seed",
        "config",
    ] {
        assert!(summary.get(key).is_some(), "summary is missing '{key}'");
    }
    assert_eq!(summary["seed"], 1);

    let artifact: Value = serde_json::from_str(&read(out.join("artifact.json"))).unwrap();
    assert_eq!(artifact["kind"], "spin_half");
    assert_eq!(artifact["n_states"], 9);
    assert_eq!(artifact["n_actions"], 3);
    assert_eq!(artifact["q"].as_array().unwrap().len(), 9);
}

#[test]
fn reruns_and_the_config_echo_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY_SPIN);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    expect_ok(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    expect_ok(&["run", "--config", &cfg, "--out", b.to_str().unwrap()]);
    assert_eq!(read(a.join("episodes.csv")), read(b.join("episodes.csv")));
    assert_eq!(read(a.join("artifact.json")), read(b.join("artifact.json")));

    // Re-running from the echoed config reproduces the run bit-for-bit.
    let summary: Value = serde_json::from_str(&read(a.join("summary.json"))).unwrap();
    let echo = write_cfg(dir.path(), "echo.cfg", summary["config"].as_str().unwrap());
    expect_ok(&["run", "--config", &echo, "--out", c.to_str().unwrap()]);
    assert_eq!(read(a.join("episodes.csv")), read(c.join("episodes.csv")));
    assert_eq!(read(a.join("artifact.json")), read(c.join("artifact.json")));
}

#[test]
fn seed_flag_and_dotted_overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY_SPIN);
    let out = dir.path().join("out");
    expect_ok(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--training.max_episodes=2",
    ]);
    let summary: Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    assert_eq!(summary["seed"], 9);
    let echo = summary["config"].as_str().unwrap();
    assert!(echo.contains("seed = 9"), "override missing from echo:\n{echo}");
    assert!(echo.contains("max_episodes = 2"), "{echo}");
    assert_eq!(read(out.join("episodes.csv")).lines().count(), 1 + 2);
}

#[test]
fn run_on_the_random_mdp_leaves_fidelity_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "mdp.cfg",
        "[environment]\nkind = random_mdp\nn_states = 4\nn_actions = 2\n\
         [training]\nstrategy = epsilon_greedy\nmax_episodes = 3\nstep_cap = 25\n",
    );
    let out = dir.path().join("out");
    expect_ok(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let episodes = read(out.join("episodes.csv"));
    let row = episodes.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[3], "", "terminal_fidelity must be an empty field");
    let summary: Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    assert_eq!(summary["final_greedy_fidelity"], Value::Null);
}

#[test]
fn fidelity_shaped_strategies_refuse_blind_environments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "mdp.cfg",
        "[environment]\nkind = random_mdp\n[training]\nstrategy = fidelity_probabilistic\n",
    );
    let err = expect_err(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(err.contains("fidelity"), "{err}");
}

// --- config errors --------------------------------------------------------------------

#[test]
fn config_errors_name_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_cfg(
        dir.path(),
        "bad_key.cfg",
        "[environment]\nkind = spin_half\n[training]\nstrategy = greedy\nblah = 1\n",
    );
    let err = expect_err(&["run", "--config", &bad_key]);
    assert!(err.contains("unknown key 'training.blah'"), "{err}");

    let empty = write_cfg(dir.path(), "empty.cfg", "");
    let err = expect_err(&["run", "--config", &empty]);
    assert!(err.contains("environment.kind"), "{err}");
    assert!(err.contains("training.strategy"), "{err}");

    let gamma = write_cfg(
        dir.path(),
        "gamma.cfg",
        "[environment]\nkind = spin_half\n[training]\nstrategy = greedy\ngamma = 1.0\n",
    );
    let err = expect_err(&["run", "--config", &gamma]);
    assert!(err.contains("[0, 1)"), "{err}");

    let err = expect_err(&["run"]);
    assert!(err.contains("--config"), "{err}");

    let err = expect_err(&["run", "--config", "/nonexistent/x.cfg"]);
    assert!(err.contains("cannot read config file"), "{err}");
}

// --- output directory resolution ----------------------------------------------------------

#[test]
fn output_directory_precedence_is_flag_config_env() {
    let dir = tempfile::tempdir().unwrap();
    let from_env = dir.path().join("from_env");
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY_SPIN);
    let out = Command::new(env!("CARGO_BIN_EXE_qsteer"))
        .args(["run", "--config", &cfg, "--quiet"])
        .env("QSTEER_OUT", from_env.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(from_env.join("episodes.csv").exists());

    // A [output] dir in the config wins over the environment variable.
    let from_cfg = dir.path().join("from_cfg");
    let cfg2 = write_cfg(
        dir.path(),
        "tiny2.cfg",
        &format!("{TINY_SPIN}[output]\ndir = {}\n", from_cfg.display()),
    );
    let out = Command::new(env!("CARGO_BIN_EXE_qsteer"))
        .args(["run", "--config", &cfg2, "--quiet"])
        .env("QSTEER_OUT", dir.path().join("ignored").to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(from_cfg.join("episodes.csv").exists());
}

// --- compare ----------------------------------------------------------------------------

#[test]
fn compare_writes_per_run_files_and_a_sorted_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "cmp.cfg",
        "[environment]\nkind = spin_half\ntheta_bins = 3\nphi_bins = 3\nstep_cap = 40\n\
         [training]\nstrategy = probabilistic\nmax_episodes = 4\n\
         [compare]\nstrategies = probabilistic,epsilon_greedy\nseeds = 2,1\n",
    );
    let out = dir.path().join("out");
    expect_ok(&["compare", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    for file in [
        "epsilon_greedy_1.csv",
        "epsilon_greedy_2.csv",
        "probabilistic_1.csv",
        "probabilistic_2.csv",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
        assert_eq!(read(out.join(file)).lines().count(), 1 + 4);
    }
    let aggregate = read(out.join("aggregate.csv"));
    let lines: Vec<&str> = aggregate.lines().collect();
    assert_eq!(
        lines[0],
        "strategy,seed_count,median_convergence_episode,success_rate,median_cumulative_steps"
    );
    assert_eq!(lines.len(), 3);
    // Rows are sorted by strategy name regardless of config order.
    assert!(lines[1].starts_with("epsilon_greedy,2,"));
    assert!(lines[2].starts_with("probabilistic,2,"));
}

#[test]
fn compare_requires_a_grid_or_the_single_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY_SPIN);
    let err = expect_err(&["compare", "--config", &cfg]);
    assert!(err.contains("[compare] section"), "{err}");

    let one = write_cfg(
        dir.path(),
        "one.cfg",
        &format!("{TINY_SPIN}[compare]\nstrategies = probabilistic\nseeds = 1\n"),
    );
    let err = expect_err(&["compare", "--config", &one]);
    assert!(err.contains("--single"), "{err}");
    let out = dir.path().join("out");
    expect_ok(&["compare", "--config", &one, "--single", "--out", out.to_str().unwrap()]);
    assert!(out.join("probabilistic_1.csv").exists());
}

// --- evaluate ---------------------------------------------------------------------------

#[test]
fn evaluate_writes_a_trajectory_and_checks_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY_SPIN);
    let out = dir.path().join("out");
    expect_ok(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let artifact = out.join("artifact.json");

    expect_ok(&["evaluate", artifact.to_str().unwrap(), "--config", &cfg, "--out", out.to_str().unwrap()]);
    let trajectory = read(out.join("trajectory.csv"));
    assert_eq!(
        trajectory.lines().next().unwrap(),
        "step,action,reward,fidelity,re_c1,im_c1,re_c2,im_c2,theta,phi"
    );
    assert!(trajectory.lines().count() >= 2);

    // A mismatching environment is rejected with both shapes in the message.
    let bigger = write_cfg(
        dir.path(),
        "bigger.cfg",
        "[environment]\nkind = spin_half\ntheta_bins = 4\nphi_bins = 4\n\
         [training]\nstrategy = fidelity_probabilistic\n",
    );
    let err = expect_err(&["evaluate", artifact.to_str().unwrap(), "--config", &bigger]);
    assert!(err.contains("9 states x 3 actions"), "{err}");
    assert!(err.contains("16 x 3"), "{err}");
}

#[test]
fn evaluating_a_zero_q_artifact_always_picks_action_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "tiny.cfg",
        "[environment]\nkind = spin_half\ntheta_bins = 3\nphi_bins = 3\nstep_cap = 10\n\
         [training]\nstrategy = greedy\n",
    );
    let zero_rows: Vec<Vec<f64>> = vec![vec![0.0; 3]; 9];
    let artifact = serde_json::json!({
        "kind": "spin_half",
        "n_states": 9,
        "n_actions": 3,
        "strategy": "greedy",
        "seed": 1,
        "convergence_episode": null,
        "q": zero_rows,
        "policy": null,
        "p_min": null,
        "config": "",
    });
    let path = dir.path().join("zero.json");
    fs::write(&path, serde_json::to_string(&artifact).unwrap()).unwrap();
    let out = dir.path().join("out");
    expect_ok(&["evaluate", path.to_str().unwrap(), "--config", &cfg, "--out", out.to_str().unwrap()]);
    let trajectory = read(out.join("trajectory.csv"));
    for row in trajectory.lines().skip(1) {
        assert_eq!(row.split(',').nth(1).unwrap(), "0", "greedy ties break to action 0");
    }
}

// --- landscape ---------------------------------------------------------------------------

#[test]
fn landscape_reports_j_and_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let lambda = write_cfg(
        dir.path(),
        "lambda.cfg",
        "[environment]\nkind = lambda\n[training]\nstrategy = fidelity_probabilistic\n",
    );
    // 100 zero pulses: free evolution is diagonal, so nothing reaches level 3.
    let zeros = dir.path().join("zeros.txt");
    fs::write(&zeros, "0\n".repeat(100)).unwrap();
    let out = expect_ok(&["landscape", zeros.to_str().unwrap(), "--config", &lambda]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("J = 0.0000000000000000e0"), "{stdout}");
    assert!(stdout.contains("fidelity = 0.0000000000000000e0"), "{stdout}");

    // Pulse counts outside [-bound, bound] are rejected with the line number.
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0\n25\n").unwrap();
    let err = expect_err(&["landscape", bad.to_str().unwrap(), "--config", &lambda]);
    assert!(err.contains(":2") && err.contains("[-20, 20]"), "{err}");

    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let err = expect_err(&["landscape", empty.to_str().unwrap(), "--config", &lambda]);
    assert!(err.contains("is empty"), "{err}");

    // The spin environment takes plain action indices.
    let spin = write_cfg(dir.path(), "spin.cfg", TINY_SPIN);
    let seq = dir.path().join("seq.txt");
    fs::write(&seq, "0\n1\n2\n").unwrap();
    let out = expect_ok(&["landscape", seq.to_str().unwrap(), "--config", &spin]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let j: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("J = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&j), "{stdout}");

    // No fidelity on the random MDP, so no landscape either.
    let mdp = write_cfg(
        dir.path(),
        "mdp.cfg",
        "[environment]\nkind = random_mdp\n[training]\nstrategy = greedy\n",
    );
    let one = dir.path().join("one.txt");
    fs::write(&one, "0\n").unwrap();
    let err = expect_err(&["landscape", one.to_str().unwrap(), "--config", &mdp]);
    assert!(err.contains("fidelity"), "{err}");
}
