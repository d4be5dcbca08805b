//! Pure quantum states, fidelity, Bloch-sphere angles, and unitary propagators.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{mat_vec_mul, unitarity_deviation, ComplexMatrix, ComplexVector};

/// Norm tolerance enforced when a state is constructed directly.
pub const STATE_NORM_TOL: f64 = 1e-9;
/// Laxer norm tolerance for fidelity inputs, allowing drift accumulated
/// over long propagation sequences.
const FIDELITY_NORM_TOL: f64 = 1e-6;
/// Unitarity tolerance required of propagator matrices.
pub const PROPAGATOR_TOL: f64 = 1e-10;

/// Pure state as a vector of probability amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: ComplexVector,
}

impl QuantumState {
    /// Builds a state, requiring unit norm within [`STATE_NORM_TOL`].
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        let deviation = (amplitudes.norm() - 1.0).abs();
        if deviation > STATE_NORM_TOL {
            return Err(Error::NotNormalized {
                deviation,
                tolerance: STATE_NORM_TOL,
            });
        }
        Ok(Self { amplitudes })
    }

    /// Basis state |i⟩ in an `dim`-level system.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(i < dim, "basis index out of range");
        let mut entries = vec![Complex64::new(0.0, 0.0); dim];
        entries[i] = Complex64::new(1.0, 0.0);
        Self {
            amplitudes: ComplexVector::new(entries).expect("basis vector is valid"),
        }
    }

    /// Wraps amplitudes produced by a norm-preserving operation without
    /// re-checking the constructor tolerance (unitary steps drift slowly).
    pub(crate) fn from_propagation(amplitudes: ComplexVector) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.dim()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn get(&self, i: usize) -> Complex64 {
        self.amplitudes.get(i)
    }
}

/// Point on the Bloch sphere: polar angle θ ∈ [0, π], azimuth φ ∈ [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::OutOfRange {
                what: "theta",
                value: theta,
                range: "[0, pi]",
            });
        }
        if !phi.is_finite() || !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(Error::OutOfRange {
                what: "phi",
                value: phi,
                range: "[0, 2pi)",
            });
        }
        Ok(Self { theta, phi })
    }
}

/// Unitary advancing the state across one control interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    matrix: ComplexMatrix,
    label: String,
}

impl Propagator {
    /// Wraps a matrix after verifying unitarity within [`PROPAGATOR_TOL`].
    pub fn new(matrix: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let deviation = unitarity_deviation(&matrix);
        if deviation > PROPAGATOR_TOL {
            return Err(Error::NotUnitary {
                deviation,
                tolerance: PROPAGATOR_TOL,
            });
        }
        Ok(Self {
            matrix,
            label: label.into(),
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Overlap magnitude |⟨a|b⟩|, clamped into [0, 1] against roundoff.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    for state in [a, b] {
        let deviation = (state.amplitudes().norm() - 1.0).abs();
        if deviation > FIDELITY_NORM_TOL {
            return Err(Error::NotNormalized {
                deviation,
                tolerance: FIDELITY_NORM_TOL,
            });
        }
    }
    let overlap = a.amplitudes().inner(b.amplitudes())?;
    Ok(overlap.norm().clamp(0.0, 1.0))
}

/// Two-level state cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩.
pub fn bloch_to_state(angles: BlochAngles) -> QuantumState {
    let half = angles.theta / 2.0;
    let c0 = Complex64::new(half.cos(), 0.0);
    let c1 = Complex64::new(0.0, angles.phi).exp() * half.sin();
    QuantumState::from_propagation(
        ComplexVector::new(vec![c0, c1]).expect("finite amplitudes by construction"),
    )
}

/// Bloch angles of a two-level state, with the global phase chosen so c₀ is
/// real non-negative. At the poles (θ = 0 or π) the azimuth is undefined and
/// reported as φ = 0.
pub fn state_to_bloch(psi: &QuantumState) -> Result<BlochAngles> {
    if psi.dim() != 2 {
        return Err(Error::DimensionMismatch {
            left: psi.dim(),
            right: 2,
        });
    }
    let c0 = psi.get(0);
    let c1 = psi.get(1);
    let theta = 2.0 * c0.norm().clamp(0.0, 1.0).acos();
    let phi = if c0.norm() < 1e-12 || c1.norm() < 1e-12 {
        0.0
    } else {
        let mut phi = (c1.arg() - c0.arg()).rem_euclid(std::f64::consts::TAU);
        if phi >= std::f64::consts::TAU {
            phi = 0.0;
        }
        phi
    };
    BlochAngles::new(theta, phi)
}

/// Applies a propagator: |ψ'⟩ = U |ψ⟩.
pub fn apply(u: &Propagator, psi: &QuantumState) -> Result<QuantumState> {
    if u.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim(),
            right: psi.dim(),
        });
    }
    Ok(QuantumState::from_propagation(mat_vec_mul(
        u.matrix(),
        psi.amplitudes(),
    )?))
}

/// Occupation probabilities (|c_i|²)_i.
pub fn populations(psi: &QuantumState) -> Vec<f64> {
    psi.amplitudes()
        .entries()
        .iter()
        .map(|c| c.norm_sqr())
        .collect()
}

/// Transition landscape J = |⟨ψ_f| U_L ··· U_1 |ψ₀⟩|² for a pulse sequence
/// applied left-to-right (U_1 first).
pub fn transition_landscape(
    sequence: &[Propagator],
    psi0: &QuantumState,
    psif: &QuantumState,
) -> Result<f64> {
    if sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut psi = psi0.clone();
    for u in sequence {
        psi = apply(u, &psi)?;
    }
    let f = fidelity(&psi, psif)?;
    Ok((f * f).clamp(0.0, 1.0))
}
