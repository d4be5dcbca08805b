//! Tabular reinforcement learning for quantum state steering.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense complex matrices, Hermitian eigendecomposition, matrix exponentials.
//! - [`quantum`]: pure states, fidelity, Bloch angles, propagators, transition landscapes.
//! - [`envs`]: episodic control environments (spin-1/2 steering, three-level population
//!   transfer, seeded random MDPs) behind a common [`envs::Environment`] trait.
//! - [`rl`]: tabular agents — Q-learning with epsilon-greedy or softmax exploration, and
//!   probabilistic agents that sample actions from a learned distribution, optionally
//!   shaped by state fidelity.
//! - [`trainer`]: episode loop, multi-seed comparison harness, policy evaluation,
//!   value-iteration reference solver, and learning-rate schedule checks.

pub mod envs;
pub mod error;
pub mod linalg;
pub mod quantum;
pub mod rl;
pub mod trainer;

pub use error::{Error, Result};
