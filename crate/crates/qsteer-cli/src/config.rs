//! Experiment configuration.
//!
//! Experiments are described by flat INI-style files: `[section]` headers with
//! `key = value` lines, `#`/`;` comments, and no nesting. The parser fills
//! unset keys with the defaults used throughout the crate (γ = 0.99, α = 0.01,
//! k = 0.01, ε = 0.1), rejects unknown sections and keys by name, and
//! validates ranges up front so a bad run dies before it starts.
//!
//! [`ExperimentConfig::render`] produces a canonical INI rendering with every
//! effective key spelled out; parsing that text again reproduces the exact
//! same configuration, which is what lets run summaries embed a self-contained
//! config echo.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use qsteer_core::envs::{
    make_random_mdp, Environment, LambdaEnv, LambdaEnvConfig, RewardMode, SpinHalfEnv,
    SpinHalfEnvConfig, TargetSpec,
};
use qsteer_core::quantum::BlochAngles;
use qsteer_core::rl::StrategyConfig;
use qsteer_core::trainer::{ConvergenceMetric, EnvChange, EvalMode, LearningRate, TrainConfig};

// --- raw INI layer -----------------------------------------------------------

/// Parsed but untyped config: section → key → value, in file order.
#[derive(Debug, Default)]
struct RawConfig {
    sections: Vec<(String, BTreeMap<String, String>)>,
}

impl RawConfig {
    fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut current: Option<usize> = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("{origin}:{line_no}: unclosed section header"))?
                    .trim();
                if name.is_empty() {
                    bail!("{origin}:{line_no}: empty section name");
                }
                current = Some(raw.section_index(name));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                anyhow!("{origin}:{line_no}: expected 'key = value' or '[section]'")
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                bail!("{origin}:{line_no}: missing key before '='");
            }
            let Some(section) = current else {
                bail!("{origin}:{line_no}: key '{key}' appears before any [section] header");
            };
            let entries = &mut raw.sections[section].1;
            if entries.contains_key(key) {
                bail!(
                    "{origin}:{line_no}: duplicate key '{}.{key}'",
                    raw.sections[section].0
                );
            }
            entries.insert(key.to_string(), value.to_string());
        }
        Ok(raw)
    }

    fn section_index(&mut self, name: &str) -> usize {
        if let Some(i) = self.sections.iter().position(|(n, _)| n == name) {
            return i;
        }
        self.sections.push((name.to_string(), BTreeMap::new()));
        self.sections.len() - 1
    }

    /// Applies `--section.key=value` overrides, replacing or inserting keys.
    fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<()> {
        for (path, value) in overrides {
            let (section, key) = path.split_once('.').ok_or_else(|| {
                anyhow!("override '--{path}={value}' must use the form --section.key=value")
            })?;
            if section.is_empty() || key.is_empty() {
                bail!("override '--{path}={value}' must use the form --section.key=value");
            }
            let idx = self.section_index(section);
            self.sections[idx]
                .1
                .insert(key.to_string(), value.to_string());
        }
        Ok(())
    }

    fn is_empty(&self) -> bool {
        self.sections.iter().all(|(_, entries)| entries.is_empty())
    }

    fn take_section(&mut self, name: &str) -> Section {
        let entries = self
            .sections
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, e)| std::mem::take(e))
            .unwrap_or_default();
        Section {
            name: name.to_string(),
            entries,
        }
    }

    /// Errors on any section that no `take_section` call consumed.
    fn finish(self) -> Result<()> {
        for (name, entries) in &self.sections {
            if !entries.is_empty() {
                bail!(
                    "unknown section [{name}] (expected one of: environment, training, \
                     compare, environment_change, evaluate, output)"
                );
            }
        }
        Ok(())
    }
}

/// One consumed section: typed getters pop keys so leftovers can be rejected.
struct Section {
    name: String,
    entries: BTreeMap<String, String>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(text) => text
                .parse::<T>()
                .map(Some)
                .map_err(|_| anyhow!("{} = '{text}' is not {what}", self.path(key))),
        }
    }

    fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let value = self
            .take_parsed::<f64>(key, "a number")?
            .unwrap_or(default);
        if !value.is_finite() {
            bail!("{} must be finite", self.path(key));
        }
        Ok(value)
    }

    fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self
            .take_parsed::<usize>(key, "a non-negative integer")?
            .unwrap_or(default))
    }

    fn take_u64(&mut self, key: &str, default: u64) -> Result<u64> {
        Ok(self
            .take_parsed::<u64>(key, "a non-negative integer")?
            .unwrap_or(default))
    }

    fn take_angle(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(text) => parse_angle(&text)
                .ok_or_else(|| {
                    anyhow!(
                        "{} = '{text}' is not an angle (use a plain number or a π fraction \
                         such as 'pi/30' or '41pi/60')",
                        self.path(key)
                    )
                })
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(anyhow!("{} must be finite", self.path(key)))
                    }
                }),
        }
    }

    /// Errors on any key that no getter consumed, naming the first offender.
    fn finish(self, known: &str) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            bail!(
                "unknown key '{}' (known {} keys: {known})",
                self.path(key),
                self.name
            );
        }
        Ok(())
    }
}

/// Parses `"pi"`, `"2pi"`, `"pi/30"`, `"41pi/60"`, `"-pi/4"`, or a plain
/// number. Returns `None` when the text matches neither form.
fn parse_angle(text: &str) -> Option<f64> {
    let t = text.trim();
    let Some(idx) = t.find("pi") else {
        return t.parse::<f64>().ok();
    };
    let coefficient = match t[..idx].trim() {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => s.parse::<f64>().ok()?,
    };
    let denominator = match t[idx + 2..].trim() {
        "" => 1.0,
        s => {
            let d = s.strip_prefix('/')?.trim().parse::<f64>().ok()?;
            if d == 0.0 {
                return None;
            }
            d
        }
    };
    Some(coefficient * PI / denominator)
}

// --- typed configuration ------------------------------------------------------

/// Which environment a config describes, with its full settings.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    SpinHalf(SpinHalfEnvConfig),
    Lambda(LambdaEnvConfig),
    RandomMdp {
        n_states: usize,
        n_actions: usize,
        mdp_seed: u64,
    },
}

impl EnvSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            EnvSpec::SpinHalf(_) => "spin_half",
            EnvSpec::Lambda(_) => "lambda",
            EnvSpec::RandomMdp { .. } => "random_mdp",
        }
    }

    /// Fresh environment instance; each run builds its own.
    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSpec::SpinHalf(cfg) => Box::new(SpinHalfEnv::new(cfg.clone())?),
            EnvSpec::Lambda(cfg) => Box::new(LambdaEnv::new(cfg.clone())?),
            EnvSpec::RandomMdp {
                n_states,
                n_actions,
                mdp_seed,
            } => Box::new(make_random_mdp(*n_states, *n_actions, *mdp_seed)),
        })
    }

    /// Natural rollout length: the episode cap for goal-reaching tasks, the
    /// horizon for the fixed-length transfer task.
    fn natural_eval_steps(&self, training_step_cap: usize) -> usize {
        match self {
            EnvSpec::SpinHalf(cfg) => cfg.step_cap,
            EnvSpec::Lambda(cfg) => cfg.horizon,
            EnvSpec::RandomMdp { .. } => training_step_cap,
        }
    }
}

/// Exploration strategy selector; parameters live in [`TrainingSettings`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    Greedy,
    EpsilonGreedy,
    Softmax,
    Probabilistic,
    FidelityProbabilistic,
}

impl StrategyName {
    pub const ALL: &'static str =
        "greedy, epsilon_greedy, softmax, probabilistic, fidelity_probabilistic";

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "greedy" => Ok(StrategyName::Greedy),
            "epsilon_greedy" => Ok(StrategyName::EpsilonGreedy),
            "softmax" => Ok(StrategyName::Softmax),
            "probabilistic" => Ok(StrategyName::Probabilistic),
            "fidelity_probabilistic" => Ok(StrategyName::FidelityProbabilistic),
            other => Err(anyhow!(
                "unknown strategy '{other}' (expected one of: {})",
                Self::ALL
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyName::Greedy => "greedy",
            StrategyName::EpsilonGreedy => "epsilon_greedy",
            StrategyName::Softmax => "softmax",
            StrategyName::Probabilistic => "probabilistic",
            StrategyName::FidelityProbabilistic => "fidelity_probabilistic",
        }
    }
}

/// The `[training]` section with defaults resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSettings {
    pub strategy: StrategyName,
    pub alpha: LearningRate,
    pub gamma: f64,
    pub epsilon: f64,
    pub k: f64,
    pub tau: f64,
    pub max_episodes: usize,
    pub step_cap: usize,
    pub seed: u64,
    pub convergence_window: usize,
    pub convergence_tolerance: f64,
    pub metric: ConvergenceMetric,
}

/// The `[compare]` section: a strategy × seed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareSettings {
    pub strategies: Vec<StrategyName>,
    pub seeds: Vec<u64>,
}

/// The `[environment_change]` section: a mid-run goal swap (spin-½ only,
/// since the new target is given as Bloch angles).
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSettings {
    pub episode: usize,
    pub target_theta: f64,
    pub target_phi: f64,
}

/// The `[evaluate]` section controlling rollout of a trained artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateSettings {
    pub mode: EvalMode,
    pub max_steps: usize,
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub training: TrainingSettings,
    pub compare: Option<CompareSettings>,
    pub change: Option<ChangeSettings>,
    pub evaluate: EvaluateSettings,
    pub out_dir: Option<PathBuf>,
}

/// Reads and validates a config file, then applies `--section.key=value`
/// overrides on top (overrides win over file contents).
pub fn parse_config(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file '{}'", path.display()))?;
    parse_config_text(&text, &path.display().to_string(), overrides)
}

/// Same as [`parse_config`] for in-memory text; `origin` labels parse errors.
pub fn parse_config_text(
    text: &str,
    origin: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text, origin)?;
    raw.apply_overrides(overrides)?;
    if raw.is_empty() {
        bail!(
            "config '{origin}' is empty; required keys: environment.kind \
             (spin_half | lambda | random_mdp) and training.strategy ({}); \
             compare runs additionally need compare.strategies and compare.seeds",
            StrategyName::ALL
        );
    }
    resolve(raw)
}

fn resolve(mut raw: RawConfig) -> Result<ExperimentConfig> {
    // [environment]
    let mut section = raw.take_section("environment");
    let kind = section
        .take("kind")
        .ok_or_else(|| anyhow!("missing required key 'environment.kind'"))?;
    let env = match kind.as_str() {
        "spin_half" => {
            let d = SpinHalfEnvConfig::default();
            let cfg = SpinHalfEnvConfig {
                theta_bins: section.take_usize("theta_bins", d.theta_bins)?,
                phi_bins: section.take_usize("phi_bins", d.phi_bins)?,
                initial: BlochAngles {
                    theta: section.take_angle("initial_theta", d.initial.theta)?,
                    phi: section.take_angle("initial_phi", d.initial.phi)?,
                },
                target: BlochAngles {
                    theta: section.take_angle("target_theta", d.target.theta)?,
                    phi: section.take_angle("target_phi", d.target.phi)?,
                },
                success_fidelity: section.take_f64("success_fidelity", d.success_fidelity)?,
                step_cap: section.take_usize("step_cap", d.step_cap)?,
                step_reward: section.take_f64("step_reward", d.step_reward)?,
                goal_reward: section.take_f64("goal_reward", d.goal_reward)?,
            };
            section.finish(
                "kind, theta_bins, phi_bins, initial_theta, initial_phi, target_theta, \
                 target_phi, success_fidelity, step_cap, step_reward, goal_reward",
            )?;
            EnvSpec::SpinHalf(cfg)
        }
        "lambda" => {
            let d = LambdaEnvConfig::default();
            let reward_mode = match section.take("reward_mode") {
                None => d.reward_mode,
                Some(text) => match text.as_str() {
                    "binary" => RewardMode::Binary,
                    "fidelity_squared" => RewardMode::FidelitySquared,
                    other => bail!(
                        "environment.reward_mode = '{other}' (expected binary or \
                         fidelity_squared)"
                    ),
                },
            };
            let cfg = LambdaEnvConfig {
                horizon: section.take_usize("horizon", d.horizon)?,
                pulse_bound: section.take_usize("pulse_bound", d.pulse_bound)?,
                dt: section.take_f64("dt", d.dt)?,
                coupling: section.take_f64("coupling", d.coupling)?,
                success_fidelity: section.take_f64("success_fidelity", d.success_fidelity)?,
                goal_reward: section.take_f64("goal_reward", d.goal_reward)?,
                reward_mode,
            };
            section.finish(
                "kind, horizon, pulse_bound, dt, coupling, success_fidelity, goal_reward, \
                 reward_mode",
            )?;
            EnvSpec::Lambda(cfg)
        }
        "random_mdp" => {
            let spec = EnvSpec::RandomMdp {
                n_states: section.take_usize("n_states", 6)?,
                n_actions: section.take_usize("n_actions", 3)?,
                mdp_seed: section.take_u64("mdp_seed", 1)?,
            };
            if let EnvSpec::RandomMdp {
                n_states,
                n_actions,
                ..
            } = &spec
            {
                if *n_states < 2 || *n_actions < 2 {
                    bail!(
                        "random_mdp needs environment.n_states >= 2 and \
                         environment.n_actions >= 2 (got {n_states} x {n_actions})"
                    );
                }
            }
            section.finish("kind, n_states, n_actions, mdp_seed")?;
            spec
        }
        other => bail!(
            "environment.kind = '{other}' (expected spin_half, lambda, or random_mdp)"
        ),
    };

    // [training]: defaults are the shared experiment parameters; the
    // convergence metric follows the task shape unless overridden.
    let mut section = raw.take_section("training");
    let strategy_text = section
        .take("strategy")
        .ok_or_else(|| anyhow!("missing required key 'training.strategy'"))?;
    let strategy = StrategyName::parse(&strategy_text)
        .map_err(|e| anyhow!("training.strategy: {e}"))?;
    let alpha_text = section.take("alpha").unwrap_or_else(|| "0.01".to_string());
    let alpha = LearningRate::parse(&alpha_text).map_err(|e| {
        anyhow!("training.alpha = '{alpha_text}': {e} (use a constant, 'harmonic:c', or 'power:c:rho')")
    })?;
    let gamma = section.take_f64("gamma", 0.99)?;
    if !(0.0..1.0).contains(&gamma) {
        bail!(
            "training.gamma = {gamma} is out of range: the discount factor must lie in \
             [0, 1) for discounted returns to stay bounded"
        );
    }
    let epsilon = section.take_f64("epsilon", 0.1)?;
    if !(0.0..=1.0).contains(&epsilon) {
        bail!("training.epsilon = {epsilon} must lie in [0, 1]");
    }
    let k = section.take_f64("k", 0.01)?;
    if k <= 0.0 {
        bail!("training.k = {k} must be positive");
    }
    let tau = section.take_f64("tau", 1.0)?;
    if tau <= 0.0 {
        bail!("training.tau = {tau} must be positive");
    }
    let (default_tol, default_metric) = match &env {
        EnvSpec::Lambda(_) => (0.01, ConvergenceMetric::TerminalFidelity),
        _ => (0.0, ConvergenceMetric::Steps),
    };
    let metric = match section.take("metric") {
        None => default_metric,
        Some(text) => match text.as_str() {
            "steps" => ConvergenceMetric::Steps,
            "terminal_fidelity" => ConvergenceMetric::TerminalFidelity,
            other => bail!(
                "training.metric = '{other}' (expected steps or terminal_fidelity)"
            ),
        },
    };
    let training = TrainingSettings {
        strategy,
        alpha,
        gamma,
        epsilon,
        k,
        tau,
        max_episodes: section.take_usize("max_episodes", 500)?,
        step_cap: section.take_usize("step_cap", 10_000)?,
        seed: section.take_u64("seed", 1)?,
        convergence_window: section.take_usize("convergence_window", 20)?,
        convergence_tolerance: section.take_f64("convergence_tolerance", default_tol)?,
        metric,
    };
    if training.max_episodes == 0 {
        bail!("training.max_episodes must be at least 1");
    }
    if training.step_cap == 0 {
        bail!("training.step_cap must be at least 1");
    }
    if training.convergence_window == 0 {
        bail!("training.convergence_window must be at least 1");
    }
    if training.convergence_tolerance < 0.0 {
        bail!("training.convergence_tolerance must be non-negative");
    }
    section.finish(
        "strategy, alpha, gamma, epsilon, k, tau, max_episodes, step_cap, seed, \
         convergence_window, convergence_tolerance, metric",
    )?;

    // [compare]
    let mut section = raw.take_section("compare");
    let compare = match (section.take("strategies"), section.take("seeds")) {
        (None, None) => None,
        (Some(strategies), Some(seeds)) => Some(CompareSettings {
            strategies: parse_strategies(&strategies)?,
            seeds: parse_seeds(&seeds)?,
        }),
        (Some(_), None) => bail!("compare.strategies is set but compare.seeds is missing"),
        (None, Some(_)) => bail!("compare.seeds is set but compare.strategies is missing"),
    };
    section.finish("strategies, seeds")?;

    // [environment_change]
    let mut section = raw.take_section("environment_change");
    let change = match section.take("episode") {
        None => {
            if let Some(key) = section.entries.keys().next() {
                bail!(
                    "environment_change.{key} is set but environment_change.episode is missing"
                );
            }
            None
        }
        Some(text) => {
            let episode = text.parse::<usize>().map_err(|_| {
                anyhow!("environment_change.episode = '{text}' is not a non-negative integer")
            })?;
            let change = ChangeSettings {
                episode,
                target_theta: section.take_angle("target_theta", f64::NAN)?,
                target_phi: section.take_angle("target_phi", f64::NAN)?,
            };
            if change.target_theta.is_nan() || change.target_phi.is_nan() {
                bail!(
                    "environment_change needs both target_theta and target_phi for the new goal"
                );
            }
            if !matches!(env, EnvSpec::SpinHalf(_)) {
                bail!(
                    "environment_change requires environment.kind = spin_half (the new \
                     target is given as Bloch angles)"
                );
            }
            Some(change)
        }
    };
    section.finish("episode, target_theta, target_phi")?;

    // [evaluate]
    let mut section = raw.take_section("evaluate");
    let mode = match section.take("mode") {
        None => EvalMode::Greedy,
        Some(text) => match text.as_str() {
            "greedy" => EvalMode::Greedy,
            "policy" => EvalMode::PolicyTable,
            other => bail!("evaluate.mode = '{other}' (expected greedy or policy)"),
        },
    };
    let max_steps = section.take_usize(
        "max_steps",
        env.natural_eval_steps(training.step_cap),
    )?;
    if max_steps == 0 {
        bail!("evaluate.max_steps must be at least 1");
    }
    section.finish("mode, max_steps")?;
    let evaluate = EvaluateSettings { mode, max_steps };

    // [output]
    let mut section = raw.take_section("output");
    let out_dir = section.take("dir").map(PathBuf::from);
    section.finish("dir")?;

    raw.finish()?;
    Ok(ExperimentConfig {
        env,
        training,
        compare,
        change,
        evaluate,
        out_dir,
    })
}

fn parse_strategies(text: &str) -> Result<Vec<StrategyName>> {
    let mut strategies = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            bail!("compare.strategies contains an empty entry");
        }
        let strategy = StrategyName::parse(part).map_err(|e| anyhow!("compare.strategies: {e}"))?;
        if strategies.contains(&strategy) {
            bail!("compare.strategies lists '{part}' twice");
        }
        strategies.push(strategy);
    }
    Ok(strategies)
}

/// Seeds are either an inclusive range `lo..hi` or a comma-separated list.
fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let parse = |s: &str| {
            s.trim().parse::<u64>().map_err(|_| {
                anyhow!("compare.seeds = '{text}': range bounds must be non-negative integers")
            })
        };
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if lo > hi {
            bail!("compare.seeds = '{text}': range is empty (lo > hi)");
        }
        return Ok((lo..=hi).collect());
    }
    let mut seeds = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            bail!("compare.seeds contains an empty entry");
        }
        let seed = part.parse::<u64>().map_err(|_| {
            anyhow!("compare.seeds entry '{part}' is not a non-negative integer")
        })?;
        if seeds.contains(&seed) {
            bail!("compare.seeds lists {seed} twice");
        }
        seeds.push(seed);
    }
    Ok(seeds)
}

// --- derived run configuration -------------------------------------------------

impl ExperimentConfig {
    /// Core strategy config for one named strategy, with this config's
    /// exploration parameters filled in.
    pub fn strategy_config(&self, name: StrategyName) -> StrategyConfig {
        match name {
            StrategyName::Greedy => StrategyConfig::Greedy,
            StrategyName::EpsilonGreedy => StrategyConfig::EpsilonGreedy {
                epsilon: self.training.epsilon,
            },
            StrategyName::Softmax => StrategyConfig::Softmax {
                tau: self.training.tau,
            },
            StrategyName::Probabilistic => StrategyConfig::Probabilistic {
                k: self.training.k,
            },
            StrategyName::FidelityProbabilistic => StrategyConfig::FidelityProbabilistic {
                k: self.training.k,
            },
        }
    }

    /// Full trainer configuration for one (strategy, seed) run.
    pub fn train_config(&self, strategy: StrategyName, seed: u64) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            strategy: self.strategy_config(strategy),
            alpha: t.alpha.clone(),
            gamma: t.gamma,
            max_episodes: t.max_episodes,
            step_cap: t.step_cap,
            seed,
            convergence_window: t.convergence_window,
            convergence_tolerance: t.convergence_tolerance,
            metric: t.metric,
            environment_change: self.change.as_ref().map(|c| EnvChange {
                episode: c.episode,
                target: TargetSpec::Angles(BlochAngles {
                    theta: c.target_theta,
                    phi: c.target_phi,
                }),
            }),
        }
    }

    /// Canonical INI rendering with every effective key spelled out.
    /// Parsing the result reproduces this configuration exactly.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("[environment]\n");
        let _ = writeln!(out, "kind = {}", self.env.kind());
        match &self.env {
            EnvSpec::SpinHalf(c) => {
                let _ = writeln!(out, "theta_bins = {}", c.theta_bins);
                let _ = writeln!(out, "phi_bins = {}", c.phi_bins);
                let _ = writeln!(out, "initial_theta = {}", c.initial.theta);
                let _ = writeln!(out, "initial_phi = {}", c.initial.phi);
                let _ = writeln!(out, "target_theta = {}", c.target.theta);
                let _ = writeln!(out, "target_phi = {}", c.target.phi);
                let _ = writeln!(out, "success_fidelity = {}", c.success_fidelity);
                let _ = writeln!(out, "step_cap = {}", c.step_cap);
                let _ = writeln!(out, "step_reward = {}", c.step_reward);
                let _ = writeln!(out, "goal_reward = {}", c.goal_reward);
            }
            EnvSpec::Lambda(c) => {
                let _ = writeln!(out, "horizon = {}", c.horizon);
                let _ = writeln!(out, "pulse_bound = {}", c.pulse_bound);
                let _ = writeln!(out, "dt = {}", c.dt);
                let _ = writeln!(out, "coupling = {}", c.coupling);
                let _ = writeln!(out, "success_fidelity = {}", c.success_fidelity);
                let _ = writeln!(out, "goal_reward = {}", c.goal_reward);
                let _ = writeln!(
                    out,
                    "reward_mode = {}",
                    match c.reward_mode {
                        RewardMode::Binary => "binary",
                        RewardMode::FidelitySquared => "fidelity_squared",
                    }
                );
            }
            EnvSpec::RandomMdp {
                n_states,
                n_actions,
                mdp_seed,
            } => {
                let _ = writeln!(out, "n_states = {n_states}");
                let _ = writeln!(out, "n_actions = {n_actions}");
                let _ = writeln!(out, "mdp_seed = {mdp_seed}");
            }
        }
        let t = &self.training;
        out.push_str("\n[training]\n");
        let _ = writeln!(out, "strategy = {}", t.strategy.name());
        let _ = writeln!(out, "alpha = {}", t.alpha.id());
        let _ = writeln!(out, "gamma = {}", t.gamma);
        let _ = writeln!(out, "epsilon = {}", t.epsilon);
        let _ = writeln!(out, "k = {}", t.k);
        let _ = writeln!(out, "tau = {}", t.tau);
        let _ = writeln!(out, "max_episodes = {}", t.max_episodes);
        let _ = writeln!(out, "step_cap = {}", t.step_cap);
        let _ = writeln!(out, "seed = {}", t.seed);
        let _ = writeln!(out, "convergence_window = {}", t.convergence_window);
        let _ = writeln!(out, "convergence_tolerance = {}", t.convergence_tolerance);
        let _ = writeln!(
            out,
            "metric = {}",
            match t.metric {
                ConvergenceMetric::Steps => "steps",
                ConvergenceMetric::TerminalFidelity => "terminal_fidelity",
            }
        );
        if let Some(c) = &self.compare {
            out.push_str("\n[compare]\n");
            let names: Vec<&str> = c.strategies.iter().map(|s| s.name()).collect();
            let _ = writeln!(out, "strategies = {}", names.join(","));
            let seeds: Vec<String> = c.seeds.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "seeds = {}", seeds.join(","));
        }
        if let Some(c) = &self.change {
            out.push_str("\n[environment_change]\n");
            let _ = writeln!(out, "episode = {}", c.episode);
            let _ = writeln!(out, "target_theta = {}", c.target_theta);
            let _ = writeln!(out, "target_phi = {}", c.target_phi);
        }
        out.push_str("\n[evaluate]\n");
        let _ = writeln!(
            out,
            "mode = {}",
            match self.evaluate.mode {
                EvalMode::Greedy => "greedy",
                EvalMode::PolicyTable => "policy",
            }
        );
        let _ = writeln!(out, "max_steps = {}", self.evaluate.max_steps);
        if let Some(dir) = &self.out_dir {
            out.push_str("\n[output]\n");
            let _ = writeln!(out, "dir = {}", dir.display());
        }
        out
    }
}
