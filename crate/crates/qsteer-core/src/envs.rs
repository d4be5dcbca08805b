//! Episodic control environments behind a common trait.
//!
//! Three environments are provided:
//!
//! - [`SpinHalfEnv`]: steer a two-level system across a discretized Bloch
//!   sphere using three fixed control propagators.
//! - [`LambdaEnv`]: drive a three-level population transfer with a fixed
//!   number of pulse amplitudes over a fixed horizon; states form a virtual
//!   chain indexed by the step counter, so the learned policy is an open-loop
//!   pulse schedule.
//! - [`RandomMdp`]: seeded finite MDPs with exposed tables, used to test the
//!   learner against a value-iteration reference.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, ComplexMatrix};
use crate::quantum::{
    apply, bloch_to_state, fidelity, state_to_bloch, BlochAngles, Propagator, QuantumState,
};

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub next_state: usize,
    pub reward: f64,
    /// Episode over (goal reached or truncated).
    pub terminal: bool,
    /// Episode ended by hitting the step cap rather than the goal.
    pub truncated: bool,
    /// Instantaneous fidelity to the target; present iff the environment
    /// supports fidelity.
    pub fidelity: Option<f64>,
}

/// Retargeting request for environments that track a goal state.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Angles(BlochAngles),
    State(QuantumState),
}

/// Common contract for all episodic environments.
pub trait Environment {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn supports_fidelity(&self) -> bool;
    fn name(&self) -> &'static str;
    /// Starts a new episode and returns the initial state index.
    fn reset(&mut self) -> usize;
    /// Advances one step. Errors if the previous episode already ended.
    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<EnvStep>;
    /// Replaces the goal state; learned tables and state space are untouched.
    fn set_target(&mut self, _target: TargetSpec) -> Result<()> {
        Err(Error::TargetUnsupported { env: self.name() })
    }
    /// Current continuous quantum state, when the environment has one.
    fn quantum_state(&self) -> Option<&QuantumState> {
        None
    }
}

/// Uniform f64 in [0, 1) from the top 53 bits of one u64 draw.
pub(crate) fn uniform_f64(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in 0..m.
pub(crate) fn uniform_index(rng: &mut dyn RngCore, m: usize) -> usize {
    ((uniform_f64(rng) * m as f64) as usize).min(m - 1)
}

// --- spin-1/2 environment ----------------------------------------------------

/// z-axis spin operator I_z = diag(1/2, -1/2).
pub fn spin_iz() -> ComplexMatrix {
    ComplexMatrix::new(
        2,
        vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-0.5, 0.0),
        ],
    )
    .expect("static matrix")
}

/// x-axis spin operator I_x with 1/2 on the off-diagonal.
pub fn spin_ix() -> ComplexMatrix {
    ComplexMatrix::new(
        2,
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    )
    .expect("static matrix")
}

/// The three fixed spin controls:
/// U₁ = exp(−i I_z π/15) (free evolution),
/// U₂ = exp(−i (I_z + 0.5 I_x) π/15) (positive pulse),
/// U₃ = exp(−i (I_z − 0.5 I_x) π/15) (negative pulse).
pub fn build_spin_propagators() -> [Propagator; 3] {
    let scale = PI / 15.0;
    let iz = spin_iz();
    let ix = spin_ix();
    let tilt = |sign: f64| {
        let mut h = iz.clone();
        for i in 0..2 {
            for j in 0..2 {
                h.set(i, j, h.get(i, j) + ix.get(i, j) * (0.5 * sign));
            }
        }
        h
    };
    let u1 = Propagator::new(expm_hermitian(&iz, scale).expect("Hermitian"), "U1");
    let u2 = Propagator::new(expm_hermitian(&tilt(1.0), scale).expect("Hermitian"), "U2");
    let u3 = Propagator::new(expm_hermitian(&tilt(-1.0), scale).expect("Hermitian"), "U3");
    [
        u1.expect("unitary by construction"),
        u2.expect("unitary by construction"),
        u3.expect("unitary by construction"),
    ]
}

/// Cell index of a Bloch point on a theta_bins × phi_bins grid:
/// clamp(floor(θ/π·tb), 0, tb−1)·pb + floor(φ/2π·pb) mod pb.
pub fn bloch_discretize(angles: BlochAngles, theta_bins: usize, phi_bins: usize) -> usize {
    assert!(theta_bins >= 2 && phi_bins >= 2, "need at least 2 bins");
    let ti = ((angles.theta / PI * theta_bins as f64).floor() as i64)
        .clamp(0, theta_bins as i64 - 1) as usize;
    let pi_raw = (angles.phi / TAU * phi_bins as f64).floor() as i64;
    let pi = pi_raw.rem_euclid(phi_bins as i64) as usize;
    ti * phi_bins + pi
}

/// Configuration of the spin-steering task.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinHalfEnvConfig {
    pub theta_bins: usize,
    pub phi_bins: usize,
    pub initial: BlochAngles,
    pub target: BlochAngles,
    pub success_fidelity: f64,
    pub step_cap: usize,
    pub step_reward: f64,
    pub goal_reward: f64,
}

impl Default for SpinHalfEnvConfig {
    fn default() -> Self {
        Self {
            theta_bins: 60,
            phi_bins: 60,
            initial: BlochAngles {
                theta: PI / 60.0,
                phi: PI / 30.0,
            },
            target: BlochAngles {
                theta: 41.0 * PI / 60.0,
                phi: 29.0 * PI / 30.0,
            },
            success_fidelity: 0.999,
            step_cap: 10_000,
            step_reward: -1.0,
            goal_reward: 1000.0,
        }
    }
}

impl SpinHalfEnvConfig {
    fn validate(&self) -> Result<()> {
        if self.theta_bins < 2 {
            return Err(Error::OutOfRange {
                what: "theta_bins",
                value: self.theta_bins as f64,
                range: "[2, inf)",
            });
        }
        if self.phi_bins < 2 {
            return Err(Error::OutOfRange {
                what: "phi_bins",
                value: self.phi_bins as f64,
                range: "[2, inf)",
            });
        }
        if self.step_cap < 1 {
            return Err(Error::OutOfRange {
                what: "step_cap",
                value: self.step_cap as f64,
                range: "[1, inf)",
            });
        }
        if !(self.success_fidelity > 0.0 && self.success_fidelity <= 1.0) {
            return Err(Error::OutOfRange {
                what: "success_fidelity",
                value: self.success_fidelity,
                range: "(0, 1]",
            });
        }
        Ok(())
    }
}

/// Two-level steering task on a discretized Bloch sphere.
///
/// Dynamics evolve the continuous amplitude vector; the MDP state is only the
/// grid cell, so cell transitions are deterministic in the continuous state
/// and approximately Markov in the cell index (a known aliasing source).
pub struct SpinHalfEnv {
    cfg: SpinHalfEnvConfig,
    propagators: [Propagator; 3],
    initial_state: QuantumState,
    target_state: QuantumState,
    psi: QuantumState,
    steps: usize,
    done: bool,
}

impl SpinHalfEnv {
    pub fn new(cfg: SpinHalfEnvConfig) -> Result<Self> {
        cfg.validate()?;
        let initial_state = bloch_to_state(cfg.initial);
        let target_state = bloch_to_state(cfg.target);
        Ok(Self {
            psi: initial_state.clone(),
            initial_state,
            target_state,
            propagators: build_spin_propagators(),
            cfg,
            steps: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &SpinHalfEnvConfig {
        &self.cfg
    }

    pub fn propagators(&self) -> &[Propagator] {
        &self.propagators
    }

    pub fn initial_state(&self) -> &QuantumState {
        &self.initial_state
    }

    pub fn target_state(&self) -> &QuantumState {
        &self.target_state
    }
}

impl Environment for SpinHalfEnv {
    fn n_states(&self) -> usize {
        self.cfg.theta_bins * self.cfg.phi_bins
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn supports_fidelity(&self) -> bool {
        true
    }

    fn name(&self) -> &'static str {
        "spin_half"
    }

    fn reset(&mut self) -> usize {
        self.psi = self.initial_state.clone();
        self.steps = 0;
        self.done = false;
        bloch_discretize(self.cfg.initial, self.cfg.theta_bins, self.cfg.phi_bins)
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<EnvStep> {
        if self.done {
            return Err(Error::StepAfterTerminal);
        }
        if action >= 3 {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: action,
                size: 3,
            });
        }
        self.psi = apply(&self.propagators[action], &self.psi)?;
        self.steps += 1;
        let f = fidelity(&self.psi, &self.target_state)?;
        let angles = state_to_bloch(&self.psi)?;
        let next_state = bloch_discretize(angles, self.cfg.theta_bins, self.cfg.phi_bins);

        let (reward, terminal, truncated) = if f >= self.cfg.success_fidelity {
            (self.cfg.goal_reward, true, false)
        } else if self.steps >= self.cfg.step_cap {
            (self.cfg.step_reward, true, true)
        } else {
            (self.cfg.step_reward, false, false)
        };
        self.done = terminal;
        Ok(EnvStep {
            next_state,
            reward,
            terminal,
            truncated,
            fidelity: Some(f),
        })
    }

    fn set_target(&mut self, target: TargetSpec) -> Result<()> {
        let state = match target {
            TargetSpec::Angles(angles) => bloch_to_state(angles),
            TargetSpec::State(state) => {
                if state.dim() != 2 {
                    return Err(Error::DimensionMismatch {
                        left: state.dim(),
                        right: 2,
                    });
                }
                state
            }
        };
        self.target_state = state;
        Ok(())
    }

    fn quantum_state(&self) -> Option<&QuantumState> {
        Some(&self.psi)
    }
}

// --- three-level (Lambda) environment ---------------------------------------

/// Reward handed out at the end of the fixed horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// goal_reward iff terminal fidelity clears success_fidelity, else 0.
    Binary,
    /// goal_reward · F², a graded alternative to the sparse binary payout.
    FidelitySquared,
}

/// Drift Hamiltonian H₀ = diag(1.5, 1, 0): two close lower levels and one
/// upper level at zero energy.
pub fn lambda_h0() -> ComplexMatrix {
    let z = Complex64::new(0.0, 0.0);
    ComplexMatrix::new(
        3,
        vec![
            Complex64::new(1.5, 0.0),
            z,
            z,
            z,
            Complex64::new(1.0, 0.0),
            z,
            z,
            z,
            z,
        ],
    )
    .expect("static matrix")
}

/// Control Hamiltonian H₁ coupling levels 1 and 2 to level 3.
pub fn lambda_h1() -> ComplexMatrix {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    ComplexMatrix::new(3, vec![z, z, one, z, z, one, one, one, z]).expect("static matrix")
}

/// Configuration of the three-level transfer task.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEnvConfig {
    /// Number of control steps per episode.
    pub horizon: usize,
    /// Pulse count bound: E ranges over {−bound, …, 0, …, +bound}.
    pub pulse_bound: usize,
    pub dt: f64,
    /// Field strength per pulse count (the 0.1 factor in front of E·H₁).
    pub coupling: f64,
    pub success_fidelity: f64,
    pub goal_reward: f64,
    pub reward_mode: RewardMode,
}

impl Default for LambdaEnvConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            pulse_bound: 20,
            dt: 0.1,
            coupling: 0.1,
            success_fidelity: 0.99,
            goal_reward: 1000.0,
            reward_mode: RewardMode::Binary,
        }
    }
}

impl LambdaEnvConfig {
    fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::OutOfRange {
                what: "horizon",
                value: self.horizon as f64,
                range: "[1, inf)",
            });
        }
        if self.pulse_bound < 1 {
            return Err(Error::OutOfRange {
                what: "pulse_bound",
                value: self.pulse_bound as f64,
                range: "[1, inf)",
            });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::OutOfRange {
                what: "dt",
                value: self.dt,
                range: "(0, inf)",
            });
        }
        Ok(())
    }
}

/// All 2·bound+1 propagators U_E = exp(−i·dt·(H₀ + coupling·E·H₁)),
/// ordered by action index (E = index − bound).
pub fn build_lambda_propagators(cfg: &LambdaEnvConfig) -> Result<Vec<Propagator>> {
    let h0 = lambda_h0();
    let h1 = lambda_h1();
    let bound = cfg.pulse_bound as i64;
    let mut out = Vec::with_capacity(2 * cfg.pulse_bound + 1);
    for e in -bound..=bound {
        let mut h = h0.clone();
        let factor = cfg.coupling * e as f64;
        for i in 0..3 {
            for j in 0..3 {
                h.set(i, j, h.get(i, j) + h1.get(i, j) * factor);
            }
        }
        let u = expm_hermitian(&h, cfg.dt)?;
        out.push(Propagator::new(u, format!("E={e}"))?);
    }
    Ok(out)
}

/// Three-level population-transfer task over a fixed pulse horizon.
///
/// The MDP state is the step counter (a virtual chain of horizon+1 states),
/// so the optimal policy is an open-loop pulse schedule.
pub struct LambdaEnv {
    cfg: LambdaEnvConfig,
    propagators: Vec<Propagator>,
    initial_state: QuantumState,
    target_state: QuantumState,
    psi: QuantumState,
    step_idx: usize,
    done: bool,
}

impl LambdaEnv {
    pub fn new(cfg: LambdaEnvConfig) -> Result<Self> {
        cfg.validate()?;
        let propagators = build_lambda_propagators(&cfg)?;
        let initial_state = QuantumState::basis(3, 0);
        let target_state = QuantumState::basis(3, 2);
        Ok(Self {
            psi: initial_state.clone(),
            initial_state,
            target_state,
            propagators,
            cfg,
            step_idx: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &LambdaEnvConfig {
        &self.cfg
    }

    pub fn propagators(&self) -> &[Propagator] {
        &self.propagators
    }

    pub fn initial_state(&self) -> &QuantumState {
        &self.initial_state
    }

    pub fn target_state(&self) -> &QuantumState {
        &self.target_state
    }
}

impl Environment for LambdaEnv {
    fn n_states(&self) -> usize {
        self.cfg.horizon + 1
    }

    fn n_actions(&self) -> usize {
        2 * self.cfg.pulse_bound + 1
    }

    fn supports_fidelity(&self) -> bool {
        true
    }

    fn name(&self) -> &'static str {
        "lambda"
    }

    fn reset(&mut self) -> usize {
        self.psi = self.initial_state.clone();
        self.step_idx = 0;
        self.done = false;
        0
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<EnvStep> {
        if self.done {
            return Err(Error::StepAfterTerminal);
        }
        let m = self.n_actions();
        if action >= m {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: action,
                size: m,
            });
        }
        self.psi = apply(&self.propagators[action], &self.psi)?;
        self.step_idx += 1;
        let f = fidelity(&self.psi, &self.target_state)?;
        let terminal = self.step_idx >= self.cfg.horizon;
        let reward = if terminal {
            match self.cfg.reward_mode {
                RewardMode::Binary => {
                    if f >= self.cfg.success_fidelity {
                        self.cfg.goal_reward
                    } else {
                        0.0
                    }
                }
                RewardMode::FidelitySquared => self.cfg.goal_reward * f * f,
            }
        } else {
            0.0
        };
        self.done = terminal;
        Ok(EnvStep {
            next_state: self.step_idx,
            reward,
            terminal,
            truncated: false,
            fidelity: Some(f),
        })
    }

    fn set_target(&mut self, target: TargetSpec) -> Result<()> {
        match target {
            TargetSpec::Angles(_) => Err(Error::DimensionMismatch { left: 2, right: 3 }),
            TargetSpec::State(state) => {
                if state.dim() != 3 {
                    return Err(Error::DimensionMismatch {
                        left: state.dim(),
                        right: 3,
                    });
                }
                self.target_state = state;
                Ok(())
            }
        }
    }

    fn quantum_state(&self) -> Option<&QuantumState> {
        Some(&self.psi)
    }
}

// --- seeded random MDPs -------------------------------------------------------

/// Exact tables of a generated MDP, exposed for the value-iteration oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpTables {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major transitions\[s\]\[a\]\[s'\], each (s, a) row summing to 1.
    pub transitions: Vec<f64>,
    /// rewards\[s\]\[a\] in [−1, 1], received on taking a in s.
    pub rewards: Vec<f64>,
    /// Absorbing terminal state; entering it ends the episode.
    pub terminal_state: usize,
}

impl MdpTables {
    pub fn transition(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + s_next]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }
}

/// Finite MDP with uniformly drawn, normalized transition rows and rewards in
/// [−1, 1]; the last state is absorbing and terminal.
pub struct RandomMdp {
    tables: MdpTables,
    state: usize,
    done: bool,
}

impl RandomMdp {
    pub fn tables(&self) -> &MdpTables {
        &self.tables
    }
}

/// Builds a seeded random MDP. Same seed → identical tables.
pub fn make_random_mdp(n_states: usize, n_actions: usize, seed: u64) -> RandomMdp {
    assert!(n_states >= 2, "need at least 2 states");
    assert!(n_actions >= 2, "need at least 2 actions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terminal_state = n_states - 1;
    let mut transitions = vec![0.0; n_states * n_actions * n_states];
    let mut rewards = vec![0.0; n_states * n_actions];
    for s in 0..n_states {
        for a in 0..n_actions {
            let base = (s * n_actions + a) * n_states;
            if s == terminal_state {
                transitions[base + s] = 1.0;
                // reward stays 0: absorbing state.
                continue;
            }
            let raw: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.0..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            for (i, r) in raw.iter().enumerate() {
                transitions[base + i] = r / sum;
            }
            rewards[s * n_actions + a] = rng.gen_range(-1.0..1.0);
        }
    }
    RandomMdp {
        tables: MdpTables {
            n_states,
            n_actions,
            transitions,
            rewards,
            terminal_state,
        },
        state: 0,
        done: true,
    }
}

impl Environment for RandomMdp {
    fn n_states(&self) -> usize {
        self.tables.n_states
    }

    fn n_actions(&self) -> usize {
        self.tables.n_actions
    }

    fn supports_fidelity(&self) -> bool {
        false
    }

    fn name(&self) -> &'static str {
        "random_mdp"
    }

    fn reset(&mut self) -> usize {
        self.state = 0;
        self.done = false;
        0
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<EnvStep> {
        if self.done {
            return Err(Error::StepAfterTerminal);
        }
        let (n, m) = (self.tables.n_states, self.tables.n_actions);
        if action >= m {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: action,
                size: m,
            });
        }
        let reward = self.tables.reward(self.state, action);
        let u = uniform_f64(rng);
        let base = (self.state * m + action) * n;
        let mut acc = 0.0;
        let mut next_state = n - 1;
        for (i, p) in self.tables.transitions[base..base + n].iter().enumerate() {
            acc += p;
            if u < acc {
                next_state = i;
                break;
            }
        }
        self.state = next_state;
        let terminal = next_state == self.tables.terminal_state;
        self.done = terminal;
        Ok(EnvStep {
            next_state,
            reward,
            terminal,
            truncated: false,
            fidelity: None,
        })
    }
}
