//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    /// A matrix or vector was constructed with zero dimension.
    #[error("dimension must be positive")]
    ZeroDimension,
    /// Entry count does not match the declared square/vector shape.
    #[error("expected {expected} entries for dimension {dim}, got {actual}")]
    EntryCount {
        dim: usize,
        expected: usize,
        actual: usize,
    },
    /// A NaN or infinite component where a finite number is required.
    #[error("non-finite entry at index {index}")]
    NonFiniteEntry { index: usize },
    /// Input to a Hermitian-only routine was not Hermitian.
    #[error("matrix is not Hermitian: max |H[i][j] - conj(H[j][i])| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },
    /// The Jacobi eigensolver failed to reach its off-diagonal threshold.
    #[error("eigensolver did not converge after {sweeps} sweeps (largest off-diagonal entry {remainder:.3e})")]
    EigNoConvergence { sweeps: usize, remainder: f64 },
    /// A quantum state was not unit-norm within tolerance.
    #[error("state is not normalized: |norm - 1| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotNormalized { deviation: f64, tolerance: f64 },
    /// A propagator matrix failed the unitarity check.
    #[error("matrix is not unitary: max |U U\u{2020} - I| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotUnitary { deviation: f64, tolerance: f64 },
    /// A scalar outside its documented range.
    #[error("{what} = {value} outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    /// A pulse sequence with no entries.
    #[error("pulse sequence is empty")]
    EmptySequence,
    /// `step` was called on an episode that already ended.
    #[error("step called after the episode terminated; call reset first")]
    StepAfterTerminal,
    /// The environment does not support the requested retargeting.
    #[error("environment '{env}' does not support setting a target state")]
    TargetUnsupported { env: &'static str },
    /// A state or action index outside the table bounds.
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    /// A reward, probability, or similar scalar must be finite.
    #[error("non-finite {what}: {value}")]
    NonFiniteValue { what: &'static str, value: f64 },
    /// A probability row that must sum to one does not.
    #[error("policy row for state {state} sums to {sum} (must be 1 within {tolerance:.1e})")]
    RowNotNormalized {
        state: usize,
        sum: f64,
        tolerance: f64,
    },
    /// Fidelity shaping received a value outside [0, 1].
    #[error("fidelity {value} outside [0, 1]")]
    FidelityOutOfRange { value: f64 },
    /// A probability row with nothing finite left to normalize.
    #[error("no finite entries in probability row")]
    NoFiniteEntries,
    /// Fidelity-shaped learning requested on an environment without fidelity.
    #[error("strategy '{strategy}' needs per-step fidelity, but environment '{env}' does not provide it")]
    FidelityUnavailable {
        strategy: &'static str,
        env: &'static str,
    },
    /// A transition-probability row of an MDP does not sum to one.
    #[error("transition row for state {state}, action {action} sums to {sum} (must be 1 within 1e-9)")]
    NonStochasticRow {
        state: usize,
        action: usize,
        sum: f64,
    },
    /// An unknown learning-rate schedule identifier.
    #[error("unknown learning-rate schedule '{id}' (expected constant, harmonic, or power)")]
    UnknownSchedule { id: String },
    /// Policy evaluation asked to sample from a policy table that was not trained.
    #[error("evaluation in policy-table mode requires a trained policy table, but none is present")]
    MissingPolicyTable,
    /// A configuration value outside its legal range.
    #[error("config key '{key}' = {value} out of range: {requirement}")]
    ConfigRange {
        key: String,
        value: String,
        requirement: String,
    },
}
