//! Episode loop, learning-rate schedules, convergence detection, evaluation
//! rollouts, a value-iteration oracle, and multi-seed strategy comparisons.
//!
//! A run is fully determined by its [`TrainConfig`]: every episode draws from
//! its own counter-derived random stream, so results are bit-stable across
//! platforms and episode counts, and two runs with the same seed agree
//! episode-for-episode regardless of how many episodes each executes.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{Environment, MdpTables, TargetSpec};
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::rl::{
    entropy_bits, epsilon_greedy_select, greedy_action, mean_exploration_entropy,
    policy_update_fpql, policy_update_pql, probabilistic_select, q_update, softmax_select,
    softmax_weights, PolicyTable, QTable, StrategyConfig, DEFAULT_P_MIN,
};

/// Step-size schedule, indexed by the per-pair visit count n = 1, 2, ….
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    /// α_n = α.
    Constant(f64),
    /// α_n = c / n.
    Harmonic { c: f64 },
    /// α_n = c / n^ρ.
    Power { c: f64, rho: f64 },
}

impl LearningRate {
    /// Parses `"0.01"`, `"harmonic:c"`, or `"power:c:rho"`.
    pub fn parse(text: &str) -> Result<Self> {
        if let Ok(alpha) = text.trim().parse::<f64>() {
            return Ok(LearningRate::Constant(alpha));
        }
        let unknown = || Error::UnknownSchedule {
            id: text.to_string(),
        };
        let parts: Vec<&str> = text.trim().split(':').collect();
        match parts.as_slice() {
            ["harmonic", c] => Ok(LearningRate::Harmonic {
                c: c.parse().map_err(|_| unknown())?,
            }),
            ["power", c, rho] => Ok(LearningRate::Power {
                c: c.parse().map_err(|_| unknown())?,
                rho: rho.parse().map_err(|_| unknown())?,
            }),
            _ => Err(unknown()),
        }
    }

    /// Canonical string form, inverse of [`LearningRate::parse`].
    pub fn id(&self) -> String {
        match self {
            LearningRate::Constant(alpha) => format!("{alpha}"),
            LearningRate::Harmonic { c } => format!("harmonic:{c}"),
            LearningRate::Power { c, rho } => format!("power:{c}:{rho}"),
        }
    }

    /// Step size for the n-th visit of a state-action pair (n starts at 1).
    pub fn rate(&self, n: u64) -> f64 {
        debug_assert!(n >= 1, "visit counts start at 1");
        match *self {
            LearningRate::Constant(alpha) => alpha,
            LearningRate::Harmonic { c } => c / n as f64,
            LearningRate::Power { c, rho } => c / (n as f64).powf(rho),
        }
    }

    /// The first step size must itself be a valid α in (0, 1].
    pub fn validate(&self) -> Result<()> {
        let (first, rho_ok) = match *self {
            LearningRate::Constant(alpha) => (alpha, true),
            LearningRate::Harmonic { c } => (c, true),
            LearningRate::Power { c, rho } => (c, rho.is_finite() && rho > 0.0),
        };
        if !(first > 0.0 && first <= 1.0) {
            return Err(Error::OutOfRange {
                what: "alpha",
                value: first,
                range: "(0, 1]",
            });
        }
        if !rho_ok {
            return Err(Error::OutOfRange {
                what: "rho",
                value: match *self {
                    LearningRate::Power { rho, .. } => rho,
                    _ => unreachable!(),
                },
                range: "(0, inf)",
            });
        }
        Ok(())
    }
}

/// Outcome of checking a schedule against the stochastic-approximation
/// step-size conditions Σα = ∞ and Σα² < ∞.
#[derive(Debug, Clone, PartialEq)]
pub enum RobbinsMonroVerdict {
    Pass,
    /// Conditions violated but the schedule is standard practice anyway.
    Warn { reason: String },
    Fail { reason: String },
}

/// Analytic series test of the step-size conditions.
///
/// A constant rate violates square-summability but is downgraded to a warning
/// because small constant rates are the usual working choice; c/n passes both
/// conditions; c/n^ρ passes exactly when ρ ∈ (0.5, 1].
pub fn check_robbins_monro(schedule: &LearningRate) -> RobbinsMonroVerdict {
    match *schedule {
        LearningRate::Constant(_) => RobbinsMonroVerdict::Warn {
            reason: "constant step size: the squared sum diverges, so asymptotic \
                     convergence is not guaranteed"
                .to_string(),
        },
        LearningRate::Harmonic { .. } => RobbinsMonroVerdict::Pass,
        LearningRate::Power { rho, .. } => {
            if rho <= 0.5 {
                RobbinsMonroVerdict::Fail {
                    reason: format!("rho = {rho}: the squared sum diverges for rho <= 0.5"),
                }
            } else if rho > 1.0 {
                RobbinsMonroVerdict::Fail {
                    reason: format!("rho = {rho}: the step-size sum converges for rho > 1"),
                }
            } else {
                RobbinsMonroVerdict::Pass
            }
        }
    }
}

/// Which per-episode quantity convergence detection watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceMetric {
    /// Episode length; suits goal-reaching tasks where shorter is better.
    Steps,
    /// Fidelity at episode end; suits fixed-horizon tasks.
    TerminalFidelity,
}

/// Mid-run goal swap: before `episode` starts, the environment target is
/// replaced while all learned tables carry over.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvChange {
    pub episode: usize,
    pub target: TargetSpec,
}

/// Everything that determines a training run besides the environment itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub strategy: StrategyConfig,
    pub alpha: LearningRate,
    pub gamma: f64,
    pub max_episodes: usize,
    /// Trainer-side bound on episode length, independent of any cap the
    /// environment enforces itself.
    pub step_cap: usize,
    pub seed: u64,
    pub convergence_window: usize,
    pub convergence_tolerance: f64,
    pub metric: ConvergenceMetric,
    pub environment_change: Option<EnvChange>,
}

impl TrainConfig {
    /// Defaults shared by all experiments: α = 0.01, γ = 0.99, watching
    /// episode length with a 20-episode zero-tolerance window.
    pub fn new(strategy: StrategyConfig) -> Self {
        Self {
            strategy,
            alpha: LearningRate::Constant(0.01),
            gamma: 0.99,
            max_episodes: 500,
            step_cap: 10_000,
            seed: 1,
            convergence_window: 20,
            convergence_tolerance: 0.0,
            metric: ConvergenceMetric::Steps,
            environment_change: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.alpha.validate()?;
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::OutOfRange {
                what: "gamma",
                value: self.gamma,
                range: "[0, 1)",
            });
        }
        if self.step_cap == 0 {
            return Err(Error::OutOfRange {
                what: "step_cap",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if self.convergence_window == 0 {
            return Err(Error::OutOfRange {
                what: "convergence_window",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if !(self.convergence_tolerance >= 0.0) {
            return Err(Error::OutOfRange {
                what: "convergence_tolerance",
                value: self.convergence_tolerance,
                range: "[0, inf)",
            });
        }
        Ok(())
    }
}

/// Per-episode metrics; one row of the learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    pub total_reward: f64,
    pub terminal_fidelity: Option<f64>,
    pub mean_entropy: f64,
    pub truncated: bool,
}

/// Learned tables plus visit counts, carried across episodes.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub q: QTable,
    pub policy: Option<PolicyTable>,
    visits: Vec<u64>,
}

impl TrainState {
    pub fn new(n_states: usize, n_actions: usize, strategy: &StrategyConfig) -> Self {
        Self {
            q: QTable::new(n_states, n_actions),
            policy: strategy
                .uses_policy_table()
                .then(|| PolicyTable::new(n_states, n_actions, DEFAULT_P_MIN)),
            visits: vec![0; n_states * n_actions],
        }
    }

    /// Number of updates applied at (s, a) so far.
    pub fn visit_count(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.q.n_actions() + a]
    }

    /// Total updates applied across all pairs.
    pub fn total_updates(&self) -> u64 {
        self.visits.iter().sum()
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<EpisodeRecord>,
    pub q: QTable,
    pub policy: Option<PolicyTable>,
    pub convergence_episode: Option<usize>,
    /// Wall-clock seconds; the only field not determined by (config, seed).
    pub wall_time: f64,
}

impl RunResult {
    /// Steps accumulated up to and including the convergence episode, or over
    /// the whole run when it never converged: the experience the agent
    /// consumed to reach (or fail to reach) a stable policy.
    pub fn cumulative_steps(&self) -> u64 {
        let end = match self.convergence_episode {
            Some(e) => e + 1,
            None => self.records.len(),
        };
        self.records[..end].iter().map(|r| r.steps as u64).sum()
    }
}

fn select_action(
    state: &TrainState,
    s: usize,
    strategy: &StrategyConfig,
    rng: &mut dyn RngCore,
) -> Result<usize> {
    match *strategy {
        StrategyConfig::Greedy => Ok(greedy_action(&state.q, s)),
        StrategyConfig::EpsilonGreedy { epsilon } => {
            Ok(epsilon_greedy_select(&state.q, s, epsilon, rng))
        }
        StrategyConfig::Softmax { tau } => Ok(softmax_select(&state.q, s, tau, rng)),
        StrategyConfig::Probabilistic { .. } | StrategyConfig::FidelityProbabilistic { .. } => {
            let p = state.policy.as_ref().ok_or(Error::MissingPolicyTable)?;
            probabilistic_select(p, s, rng)
        }
    }
}

/// Mean action-distribution entropy in bits under the given strategy.
///
/// Probabilistic strategies read their policy table (which must be present);
/// value-based strategies score the distribution their selection rule implies
/// on the current Q table.
pub fn mean_policy_entropy(
    q: &QTable,
    strategy: &StrategyConfig,
    policy: Option<&PolicyTable>,
) -> f64 {
    let m = q.n_actions();
    match *strategy {
        StrategyConfig::Probabilistic { .. } | StrategyConfig::FidelityProbabilistic { .. } => {
            mean_exploration_entropy(policy.expect("policy table required for this strategy"))
        }
        StrategyConfig::Greedy => 0.0,
        StrategyConfig::EpsilonGreedy { epsilon } => {
            let mut dist = vec![epsilon / m as f64; m];
            // The entropy value is the same whichever action is greedy.
            dist[0] += 1.0 - epsilon;
            entropy_bits(&dist)
        }
        StrategyConfig::Softmax { tau } => {
            let mut dist = vec![0.0; m];
            (0..q.n_states())
                .map(|s| {
                    softmax_weights(q.row(s), tau, &mut dist);
                    entropy_bits(&dist)
                })
                .sum::<f64>()
                / q.n_states() as f64
        }
    }
}

/// Runs one episode, applying value (and, for probabilistic strategies,
/// policy) updates at every step, and returns its metrics row.
///
/// The value update is applied first, so the policy increment
/// k·(r + max Q(s′) [+ F(s′)]) sees the freshly updated successor row.
pub fn run_episode(
    env: &mut dyn Environment,
    state: &mut TrainState,
    cfg: &TrainConfig,
    episode: usize,
    rng: &mut dyn RngCore,
) -> Result<EpisodeRecord> {
    if state.q.n_states() != env.n_states() {
        return Err(Error::DimensionMismatch {
            left: state.q.n_states(),
            right: env.n_states(),
        });
    }
    if state.q.n_actions() != env.n_actions() {
        return Err(Error::DimensionMismatch {
            left: state.q.n_actions(),
            right: env.n_actions(),
        });
    }
    let mut s = env.reset();
    let mut steps = 0usize;
    let mut total_reward = 0.0;
    let mut terminal_fidelity = None;
    let truncated = loop {
        let a = select_action(state, s, &cfg.strategy, rng)?;
        let step = env.step(a, rng)?;
        steps += 1;
        total_reward += step.reward;
        if step.fidelity.is_some() {
            terminal_fidelity = step.fidelity;
        }

        let n = {
            let slot = &mut state.visits[s * state.q.n_actions() + a];
            *slot += 1;
            *slot
        };
        q_update(
            &mut state.q,
            s,
            a,
            step.reward,
            step.next_state,
            cfg.alpha.rate(n),
            cfg.gamma,
            step.terminal,
        )?;
        if let Some(p) = state.policy.as_mut() {
            let bootstrap = if step.terminal {
                0.0
            } else {
                state.q.max_row(step.next_state)
            };
            match cfg.strategy {
                StrategyConfig::Probabilistic { k } => {
                    policy_update_pql(p, s, a, step.reward, bootstrap, k)?;
                }
                StrategyConfig::FidelityProbabilistic { k } => {
                    let f = step.fidelity.ok_or(Error::FidelityUnavailable {
                        strategy: cfg.strategy.name(),
                        env: env.name(),
                    })?;
                    policy_update_fpql(p, s, a, step.reward, bootstrap, f, k)?;
                }
                _ => unreachable!("policy table exists only for probabilistic strategies"),
            }
        }

        s = step.next_state;
        if step.terminal {
            break step.truncated;
        }
        if step.truncated || steps >= cfg.step_cap {
            break true;
        }
    };
    Ok(EpisodeRecord {
        episode,
        steps,
        total_reward,
        terminal_fidelity,
        mean_entropy: mean_policy_entropy(&state.q, &cfg.strategy, state.policy.as_ref()),
        truncated,
    })
}

/// Trains for up to `max_episodes` episodes and collects the learning curve.
///
/// Episode i draws from random stream i of the seed, so records are
/// reproducible bit-for-bit and prefix-stable: shortening `max_episodes`
/// yields a prefix of the longer run's records.
pub fn train(env: &mut dyn Environment, cfg: &TrainConfig) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.strategy.needs_fidelity() && !env.supports_fidelity() {
        return Err(Error::FidelityUnavailable {
            strategy: cfg.strategy.name(),
            env: env.name(),
        });
    }
    let start = Instant::now();
    let mut state = TrainState::new(env.n_states(), env.n_actions(), &cfg.strategy);
    let mut records = Vec::with_capacity(cfg.max_episodes);
    for episode in 0..cfg.max_episodes {
        if let Some(change) = &cfg.environment_change {
            if change.episode == episode {
                env.set_target(change.target.clone())?;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(episode as u64);
        records.push(run_episode(env, &mut state, cfg, episode, &mut rng)?);
    }
    let convergence_episode = convergence_episode(
        &records,
        cfg.convergence_window,
        cfg.convergence_tolerance,
        cfg.metric,
    );
    Ok(RunResult {
        records,
        q: state.q,
        policy: state.policy,
        convergence_episode,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// First episode opening a window of `window` non-truncated episodes whose
/// metric values all lie within `tolerance` of the window's best value.
pub fn convergence_episode(
    records: &[EpisodeRecord],
    window: usize,
    tolerance: f64,
    metric: ConvergenceMetric,
) -> Option<usize> {
    assert!(window >= 1, "window must be positive");
    if records.len() < window {
        return None;
    }
    'candidates: for e in 0..=records.len() - window {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in &records[e..e + window] {
            if r.truncated {
                continue 'candidates;
            }
            let v = match metric {
                ConvergenceMetric::Steps => r.steps as f64,
                ConvergenceMetric::TerminalFidelity => match r.terminal_fidelity {
                    Some(f) => f,
                    None => continue 'candidates,
                },
            };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo <= tolerance {
            return Some(e);
        }
    }
    None
}

/// How actions are chosen during an evaluation rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Argmax over the Q table.
    Greedy,
    /// Sample from the learned policy table.
    PolicyTable,
}

/// One step of an evaluation rollout, including the continuous quantum state
/// after the step when the environment exposes one.
#[derive(Debug, Clone)]
pub struct EvalStep {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub fidelity: Option<f64>,
    pub amplitudes: Option<ComplexVector>,
}

/// Rolls out one episode with frozen tables and no learning updates.
pub fn evaluate_policy(
    env: &mut dyn Environment,
    q: &QTable,
    mode: EvalMode,
    policy: Option<&PolicyTable>,
    max_steps: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<EvalStep>> {
    if q.n_states() != env.n_states() {
        return Err(Error::DimensionMismatch {
            left: q.n_states(),
            right: env.n_states(),
        });
    }
    if mode == EvalMode::PolicyTable && policy.is_none() {
        return Err(Error::MissingPolicyTable);
    }
    let mut s = env.reset();
    let mut trajectory = Vec::new();
    for _ in 0..max_steps {
        let a = match mode {
            EvalMode::Greedy => greedy_action(q, s),
            EvalMode::PolicyTable => probabilistic_select(policy.unwrap(), s, rng)?,
        };
        let step = env.step(a, rng)?;
        trajectory.push(EvalStep {
            state: s,
            action: a,
            reward: step.reward,
            fidelity: step.fidelity,
            amplitudes: env.quantum_state().map(|st| st.amplitudes().clone()),
        });
        s = step.next_state;
        if step.terminal || step.truncated {
            break;
        }
    }
    Ok(trajectory)
}

/// Solves the explicit MDP by synchronous sweeps of
/// Q(s,a) ← r(s,a) + γ Σ_{s'} P(s'|s,a)·max_{a'} Q(s',a')
/// until the max-norm change drops below `tol`. The terminal state's row is
/// held at zero, matching episode semantics where entering it ends learning.
pub fn value_iteration(mdp: &MdpTables, gamma: f64, tol: f64) -> Result<QTable> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::OutOfRange {
            what: "gamma",
            value: gamma,
            range: "[0, 1)",
        });
    }
    assert!(tol > 0.0, "tolerance must be positive");
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let sum: f64 = (0..mdp.n_states).map(|s2| mdp.transition(s, a, s2)).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NonStochasticRow {
                    state: s,
                    action: a,
                    sum,
                });
            }
        }
    }
    let mut q = QTable::new(mdp.n_states, mdp.n_actions);
    loop {
        let values: Vec<f64> = (0..mdp.n_states).map(|s| q.max_row(s)).collect();
        let mut delta = 0.0f64;
        for s in 0..mdp.n_states {
            if s == mdp.terminal_state {
                continue;
            }
            for a in 0..mdp.n_actions {
                let backup: f64 = mdp.reward(s, a)
                    + gamma
                        * (0..mdp.n_states)
                            .map(|s2| mdp.transition(s, a, s2) * values[s2])
                            .sum::<f64>();
                delta = delta.max((backup - q.get(s, a)).abs());
                q.set(s, a, backup);
            }
        }
        if delta < tol {
            return Ok(q);
        }
    }
}

/// Per-strategy summary over seeds; medians treat non-convergence as +∞.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyAggregate {
    pub strategy: String,
    pub seed_count: usize,
    pub median_convergence_episode: f64,
    pub success_rate: f64,
    pub median_cumulative_steps: f64,
}

/// One completed (strategy, seed) run.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: StrategyConfig,
    pub seed: u64,
    pub result: RunResult,
}

fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Groups runs by strategy and reduces each group to its aggregate row;
/// rows come back sorted by strategy name for stable output.
pub fn aggregate_runs(runs: &[StrategyRun]) -> Vec<StrategyAggregate> {
    let mut names: Vec<&'static str> = Vec::new();
    for run in runs {
        let name = run.strategy.name();
        if !names.contains(&name) {
            names.push(name);
        }
    }
    names.sort_unstable();
    names
        .into_iter()
        .map(|name| {
            let group: Vec<&StrategyRun> =
                runs.iter().filter(|r| r.strategy.name() == name).collect();
            let convergences: Vec<f64> = group
                .iter()
                .map(|r| {
                    r.result
                        .convergence_episode
                        .map_or(f64::INFINITY, |e| e as f64)
                })
                .collect();
            let converged = convergences.iter().filter(|c| c.is_finite()).count();
            StrategyAggregate {
                strategy: name.to_string(),
                seed_count: group.len(),
                median_convergence_episode: median(convergences),
                success_rate: converged as f64 / group.len() as f64,
                median_cumulative_steps: median(
                    group
                        .iter()
                        .map(|r| r.result.cumulative_steps() as f64)
                        .collect(),
                ),
            }
        })
        .collect()
}

/// Trains every (strategy, seed) pair on a fresh environment and aggregates.
///
/// Runs are independent — each owns its environment, tables, and random
/// streams — so callers may execute them in any order or in parallel and
/// reduce with [`aggregate_runs`]; this sequential form is the reference.
pub fn compare_strategies<F>(
    make_env: F,
    strategies: &[StrategyConfig],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<(Vec<StrategyAggregate>, Vec<StrategyRun>)>
where
    F: Fn() -> Box<dyn Environment>,
{
    assert!(!seeds.is_empty(), "at least one seed required");
    let mut runs = Vec::with_capacity(strategies.len() * seeds.len());
    for &strategy in strategies {
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.strategy = strategy;
            cfg.seed = seed;
            let mut env = make_env();
            let result = train(env.as_mut(), &cfg)?;
            runs.push(StrategyRun {
                strategy,
                seed,
                result,
            });
        }
    }
    Ok((aggregate_runs(&runs), runs))
}
