//! Tabular values, policy rows, action selection, and the learning updates.
//!
//! Two families of agents are supported. Value-based agents act on a
//! [`QTable`] through ε-greedy or softmax exploration. Probabilistic agents
//! additionally keep a [`PolicyTable`] of per-state action probabilities,
//! updated from the reward and bootstrapped value — and, in the
//! fidelity-shaped variant, from the successor state's fidelity to the target
//! so that exploration is steered toward it.

use rand::RngCore;

use crate::envs::{uniform_f64, uniform_index};
use crate::error::{Error, Result};

/// Default probability floor applied before row renormalization.
///
/// Increments can be negative (step rewards of −1), and a row entry absorbed
/// at 0 could never recover; the floor keeps every action reachable.
pub const DEFAULT_P_MIN: f64 = 1e-6;

/// State-action value table, initialized to all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        assert!(n_states > 0 && n_actions > 0, "table dims must be positive");
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    /// Rebuilds a table from a flat row-major value buffer (e.g. a saved run).
    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: n_states * n_actions,
            });
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::OutOfRange {
                what: "Q-table entry",
                value: bad,
                range: "finite",
            });
        }
        assert!(n_states > 0 && n_actions > 0, "table dims must be positive");
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// max_a Q(s, a).
    pub fn max_row(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Max-norm distance to another table of the same shape.
    pub fn max_norm_distance(&self, other: &QTable) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_indices(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                size: self.n_states,
            });
        }
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                size: self.n_actions,
            });
        }
        Ok(())
    }
}

/// Per-state action-probability table, initialized uniform at 1/m.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
    p_min: f64,
}

impl PolicyTable {
    pub fn new(n_states: usize, n_actions: usize, p_min: f64) -> Self {
        assert!(n_states > 0 && n_actions > 0, "table dims must be positive");
        assert!(
            (0.0..1.0 / n_actions as f64).contains(&p_min),
            "p_min must lie in [0, 1/m)"
        );
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
            p_min,
        }
    }

    /// Rebuilds a table from a flat row-major probability buffer (e.g. a
    /// saved run). Every row must already be a probability distribution.
    pub fn from_probs(
        n_states: usize,
        n_actions: usize,
        probs: Vec<f64>,
        p_min: f64,
    ) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                left: probs.len(),
                right: n_states * n_actions,
            });
        }
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::RowNotNormalized {
                    state: s,
                    sum: row.iter().sum(),
                    tolerance: 1e-6,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::RowNotNormalized { state: s, sum, tolerance: 1e-6 });
            }
        }
        assert!(n_states > 0 && n_actions > 0, "table dims must be positive");
        assert!(
            (0.0..1.0 / n_actions as f64).contains(&p_min),
            "p_min must lie in [0, 1/m)"
        );
        Ok(Self {
            n_states,
            n_actions,
            probs,
            p_min,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

/// One-step value update:
/// Q(s,a) ← (1−α)·Q(s,a) + α·(r + γ·max_a' Q(s',a')), bootstrapping 0 at
/// terminal transitions.
pub fn q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
    terminal: bool,
) -> Result<()> {
    q.check_indices(s, a)?;
    q.check_indices(s_next, 0)?;
    if !r.is_finite() {
        return Err(Error::NonFiniteValue {
            what: "reward",
            value: r,
        });
    }
    debug_assert!(alpha > 0.0 && alpha <= 1.0, "alpha outside (0, 1]");
    debug_assert!((0.0..1.0).contains(&gamma), "gamma outside [0, 1)");
    let bootstrap = if terminal { 0.0 } else { q.max_row(s_next) };
    let target = r + gamma * bootstrap;
    let old = q.get(s, a);
    q.set(s, a, (1.0 - alpha) * old + alpha * target);
    Ok(())
}

/// Argmax over the state's row; ties go to the lowest action index.
pub fn greedy_action(q: &QTable, s: usize) -> usize {
    let row = q.row(s);
    let mut best = 0;
    for (a, &value) in row.iter().enumerate().skip(1) {
        if value > row[best] {
            best = a;
        }
    }
    best
}

/// Greedy with probability 1−ε, otherwise a uniform draw over all actions.
pub fn epsilon_greedy_select(q: &QTable, s: usize, epsilon: f64, rng: &mut dyn RngCore) -> usize {
    assert!((0.0..1.0).contains(&epsilon), "epsilon outside [0, 1)");
    if epsilon > 0.0 && uniform_f64(rng) < epsilon {
        uniform_index(rng, q.n_actions())
    } else {
        greedy_action(q, s)
    }
}

/// Samples with probability proportional to e^{Q(s,a)/τ} (max-subtracted).
pub fn softmax_select(q: &QTable, s: usize, tau: f64, rng: &mut dyn RngCore) -> usize {
    let mut weights = vec![0.0; q.n_actions()];
    softmax_weights(q.row(s), tau, &mut weights);
    sample_from(&weights, rng)
}

/// Boltzmann distribution over a Q row, written into `out`.
pub(crate) fn softmax_weights(row: &[f64], tau: f64, out: &mut [f64]) {
    assert!(tau > 0.0, "tau must be positive");
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (w, &v) in out.iter_mut().zip(row) {
        *w = ((v - max) / tau).exp();
        sum += *w;
    }
    for w in out.iter_mut() {
        *w /= sum;
    }
}

/// Inverse-CDF draw from a probability row.
pub(crate) fn sample_from(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u = uniform_f64(rng);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples an action from the learned probability row.
pub fn probabilistic_select(p: &PolicyTable, s: usize, rng: &mut dyn RngCore) -> Result<usize> {
    let row = p.row(s);
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::RowNotNormalized {
            state: s,
            sum,
            tolerance: 1e-6,
        });
    }
    Ok(sample_from(row, rng))
}

/// Probability update p(s,a) += k·(r + max_a' Q(s',a')), then floor-clamp and
/// renormalize the row.
pub fn policy_update_pql(
    p: &mut PolicyTable,
    s: usize,
    a: usize,
    r: f64,
    max_q_next: f64,
    k: f64,
) -> Result<()> {
    policy_update_shaped(p, s, a, r, max_q_next, 0.0, k)
}

/// Fidelity-shaped update p(s,a) += k·(r + max_a' Q(s',a') + F(s', target)).
pub fn policy_update_fpql(
    p: &mut PolicyTable,
    s: usize,
    a: usize,
    r: f64,
    max_q_next: f64,
    fidelity_next: f64,
    k: f64,
) -> Result<()> {
    if !(0.0..=1.0).contains(&fidelity_next) {
        return Err(Error::FidelityOutOfRange {
            value: fidelity_next,
        });
    }
    policy_update_shaped(p, s, a, r, max_q_next, fidelity_next, k)
}

fn policy_update_shaped(
    p: &mut PolicyTable,
    s: usize,
    a: usize,
    r: f64,
    max_q_next: f64,
    fidelity_next: f64,
    k: f64,
) -> Result<()> {
    if s >= p.n_states {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: s,
            size: p.n_states,
        });
    }
    if a >= p.n_actions {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: a,
            size: p.n_actions,
        });
    }
    for (what, value) in [("reward", r), ("max_q_next", max_q_next), ("k", k)] {
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { what, value });
        }
    }
    if k < 0.0 {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            range: "[0, inf)",
        });
    }
    let p_min = p.p_min;
    let row = p.row_mut(s);
    row[a] += k * (r + max_q_next + fidelity_next);
    normalize_row(row, p_min)
}

/// Clamps entries below at `p_min`, then divides by the sum so the row is a
/// probability distribution again.
pub fn normalize_row(row: &mut [f64], p_min: f64) -> Result<()> {
    if row.iter().all(|x| !x.is_finite()) {
        return Err(Error::NoFiniteEntries);
    }
    let mut sum = 0.0;
    for x in row.iter_mut() {
        // f64::max ignores a NaN operand, so non-finite entries land on the floor.
        *x = p_min.max(*x);
        sum += *x;
    }
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::OutOfRange {
            what: "row sum after clamping",
            value: sum,
            range: "(0, inf)",
        });
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
    Ok(())
}

/// Shannon entropy in bits of one probability row; 0·log 0 is 0.
pub fn entropy_bits(row: &[f64]) -> f64 {
    row.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}

/// Exploration entropy of a state's action distribution.
pub fn exploration_entropy(p: &PolicyTable, s: usize) -> f64 {
    entropy_bits(p.row(s))
}

/// Mean exploration entropy over all states.
pub fn mean_exploration_entropy(p: &PolicyTable) -> f64 {
    (0..p.n_states())
        .map(|s| exploration_entropy(p, s))
        .sum::<f64>()
        / p.n_states() as f64
}

/// Which action-selection rule drives the agent, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyConfig {
    Greedy,
    EpsilonGreedy { epsilon: f64 },
    Softmax { tau: f64 },
    Probabilistic { k: f64 },
    FidelityProbabilistic { k: f64 },
}

impl StrategyConfig {
    /// Canonical identifier used in configs, file names, and reports.
    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::Greedy => "greedy",
            StrategyConfig::EpsilonGreedy { .. } => "epsilon_greedy",
            StrategyConfig::Softmax { .. } => "softmax",
            StrategyConfig::Probabilistic { .. } => "probabilistic",
            StrategyConfig::FidelityProbabilistic { .. } => "fidelity_probabilistic",
        }
    }

    /// True for the strategies that learn and sample a probability table.
    pub fn uses_policy_table(&self) -> bool {
        matches!(
            self,
            StrategyConfig::Probabilistic { .. } | StrategyConfig::FidelityProbabilistic { .. }
        )
    }

    /// True if the update rule consumes per-step fidelity.
    pub fn needs_fidelity(&self) -> bool {
        matches!(self, StrategyConfig::FidelityProbabilistic { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StrategyConfig::Greedy => Ok(()),
            StrategyConfig::EpsilonGreedy { epsilon } => {
                if !(0.0..1.0).contains(&epsilon) {
                    Err(Error::OutOfRange {
                        what: "epsilon",
                        value: epsilon,
                        range: "[0, 1)",
                    })
                } else {
                    Ok(())
                }
            }
            StrategyConfig::Softmax { tau } => {
                if !(tau > 0.0 && tau.is_finite()) {
                    Err(Error::OutOfRange {
                        what: "tau",
                        value: tau,
                        range: "(0, inf)",
                    })
                } else {
                    Ok(())
                }
            }
            StrategyConfig::Probabilistic { k } | StrategyConfig::FidelityProbabilistic { k } => {
                if !(k >= 0.0 && k.is_finite()) {
                    Err(Error::OutOfRange {
                        what: "k",
                        value: k,
                        range: "[0, inf)",
                    })
                } else {
                    Ok(())
                }
            }
        }
    }
}
