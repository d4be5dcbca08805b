//! Dense complex linear algebra for small Hermitian systems.
//!
//! Everything here targets the tiny dimensions (N ≤ 3 in the shipped environments,
//! N ≤ 8 in tests) that quantum steering needs: row-major storage, a cyclic Jacobi
//! eigensolver for Hermitian matrices, and matrix exponentials built from the
//! eigendecomposition so propagators come out unitary up to roundoff.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermiticity tolerance on max |H[i][j] - conj(H[j][i])|.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Jacobi sweep cap before giving up.
const JACOBI_MAX_SWEEPS: usize = 100;
/// Jacobi convergence threshold on the largest off-diagonal magnitude.
const JACOBI_OFF_THRESHOLD: f64 = 1e-14;

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a `dim` x `dim` matrix from row-major entries, validating shape and finiteness.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if entries.len() != dim * dim {
            return Err(Error::EntryCount {
                dim,
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        check_finite(&entries)?;
        Ok(Self { dim, entries })
    }

    /// All-zeros matrix.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Max deviation from Hermitian symmetry.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    entries: Vec<Complex64>,
}

impl ComplexVector {
    /// Builds a vector, validating that it is non-empty with finite entries.
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::ZeroDimension);
        }
        check_finite(&entries)?;
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        self.entries[i]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Inner product ⟨self|other⟩ = Σ conj(self_i)·other_i.
    pub fn inner(&self, other: &ComplexVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub(crate) fn from_raw(entries: Vec<Complex64>) -> Self {
        Self { entries }
    }
}

fn check_finite(entries: &[Complex64]) -> Result<()> {
    for (index, c) in entries.iter().enumerate() {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::NonFiniteEntry { index });
        }
    }
    Ok(())
}

/// Matrix-vector product `M v`.
pub fn mat_vec_mul(m: &ComplexMatrix, v: &ComplexVector) -> Result<ComplexVector> {
    if m.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: m.dim(),
            right: v.dim(),
        });
    }
    let n = m.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += m.get(i, j) * v.get(j);
        }
        out[i] = acc;
    }
    Ok(ComplexVector::from_raw(out))
}

/// Matrix product `A B`.
pub fn mat_mul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let n = a.dim();
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a.get(i, k);
            for j in 0..n {
                out.set(i, j, out.get(i, j) + aik * b.get(k, j));
            }
        }
    }
    Ok(out)
}

/// Conjugate transpose.
pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.dim();
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, m.get(j, i).conj());
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order (ties keep the order in which the
/// Jacobi iteration produced them) and the matching orthonormal eigenvector
/// columns, so that `H = V diag(λ) V†`.
pub fn eig_hermitian(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            deviation,
            tolerance: HERMITIAN_TOL,
        });
    }

    let n = h.dim();
    let mut a = h.clone();
    let mut v = ComplexMatrix::identity(n);

    let mut converged = n == 1;
    let mut remainder = 0.0;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        remainder = max_offdiag(&a);
        if remainder <= JACOBI_OFF_THRESHOLD {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && max_offdiag(&a) > JACOBI_OFF_THRESHOLD {
        return Err(Error::EigNoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            remainder,
        });
    }

    // Sort ascending; the stable sort keeps earlier columns first on ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.total_cmp(&a.get(j, j).re));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| a.get(k, k).re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, new_col, v.get(row, old_col));
        }
    }
    Ok((eigenvalues, vectors))
}

fn max_offdiag(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(a.get(i, j).norm());
            }
        }
    }
    worst
}

/// One Jacobi rotation zeroing A[p][q]: A ← W† A W, V ← V W, where W is the
/// identity outside the (p,q) plane and, with A[p][q] = |b| e^{iφ},
///
/// ```text
/// W[p][p] = c    W[p][q] = s
/// W[q][p] = -s e^{-iφ}    W[q][q] = c e^{-iφ}
/// ```
///
/// with the classic small-angle tangent choice for numerical stability.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let b = a.get(p, q);
    let mag = b.norm();
    if mag == 0.0 {
        return;
    }
    let phase = b / mag; // e^{iφ}
    let alpha = a.get(p, p).re;
    let gamma = a.get(q, q).re;
    let tau = (gamma - alpha) / (2.0 * mag);
    let t = if tau.is_infinite() {
        0.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let n = a.dim();
    let wpp = Complex64::new(c, 0.0);
    let wpq = Complex64::new(s, 0.0);
    let wqp = -s * phase.conj();
    let wqq = c * phase.conj();

    // Columns: A ← A W.
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, akp * wpp + akq * wqp);
        a.set(k, q, akp * wpq + akq * wqq);
    }
    // Rows: A ← W† A.
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, wpp.conj() * apk + wqp.conj() * aqk);
        a.set(q, k, wpq.conj() * apk + wqq.conj() * aqk);
    }
    // The rotation annihilates these entries exactly; clear the roundoff residue.
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));

    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, vkp * wpp + vkq * wqp);
        v.set(k, q, vkp * wpq + vkq * wqq);
    }
}

/// exp(−i·scale·H) for Hermitian H, via eigendecomposition.
pub fn expm_hermitian(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    if !scale.is_finite() {
        return Err(Error::NonFiniteValue {
            what: "scale",
            value: scale,
        });
    }
    let (eigenvalues, v) = eig_hermitian(h)?;
    let n = h.dim();
    let phases: Vec<Complex64> = eigenvalues
        .iter()
        .map(|&lambda| (Complex64::new(0.0, -scale * lambda)).exp())
        .collect();
    // U = V diag(e^{-i s λ}) V†
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += v.get(i, k) * phases[k] * v.get(j, k).conj();
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Max-entry deviation of M M† from the identity.
pub fn unitarity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let product = mat_mul(m, &dagger(m)).expect("same dimension by construction");
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j { 1.0 } else { 0.0 };
            let d = (product.get(i, j) - Complex64::new(expected, 0.0)).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// True iff max-entry |M M† − I| ≤ tol.
pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    assert!(tol > 0.0, "tolerance must be positive");
    unitarity_deviation(m) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_entry_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        assert_eq!(a.dim(), b.dim());
        let mut worst = 0.0f64;
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                worst = worst.max((a.get(i, j) - b.get(i, j)).norm());
            }
        }
        worst
    }

    fn random_matrix(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
        let entries = (0..dim * dim)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::new(dim, entries).unwrap()
    }

    /// Hermitize a random matrix: H = (A + A†)/2.
    fn random_hermitian(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
        let a = random_matrix(rng, dim);
        let at = dagger(&a);
        let entries = a
            .entries()
            .iter()
            .zip(at.entries())
            .map(|(x, y)| (x + y) * 0.5)
            .collect();
        ComplexMatrix::new(dim, entries).unwrap()
    }

    fn spin_iz() -> ComplexMatrix {
        ComplexMatrix::new(2, vec![c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]).unwrap()
    }

    fn spin_ix() -> ComplexMatrix {
        ComplexMatrix::new(2, vec![c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]).unwrap()
    }

    // --- oracles -------------------------------------------------------

    /// Brute-force reference: out[i] = Σ_j M[i][j] v[j] accumulated one term at a time.
    fn matvec_oracle(m: &ComplexMatrix, v: &ComplexVector) -> Vec<Complex64> {
        let n = m.dim();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = c(0.0, 0.0);
            for j in 0..n {
                acc = acc + m.get(i, j) * v.get(j);
            }
            out.push(acc);
        }
        out
    }

    /// Brute-force triple-loop reference for the matrix product.
    fn matmul_oracle(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let n = a.dim();
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = c(0.0, 0.0);
                for k in 0..n {
                    acc = acc + a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Roots of det(H − λI) for a 3×3 Hermitian matrix, via the trigonometric
    /// closed form for a cubic with three real roots. Returns ascending roots.
    fn cubic_eigenvalue_oracle(h: &ComplexMatrix) -> Vec<f64> {
        assert_eq!(h.dim(), 3);
        let e = |i: usize, j: usize| h.get(i, j);
        // λ³ − c2 λ² + c1 λ − c0 = 0
        let c2 = (e(0, 0) + e(1, 1) + e(2, 2)).re;
        // Sum of principal 2×2 minors.
        let c1 = (e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0)).re
            + (e(0, 0) * e(2, 2) - e(0, 2) * e(2, 0)).re
            + (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)).re;
        let c0 = (e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
            - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
            + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0)))
        .re;
        // Depressed cubic t³ + p t + q with λ = t + c2/3.
        let p = c1 - c2 * c2 / 3.0;
        let q = c2 * c1 / 3.0 - c0 - 2.0 * c2 * c2 * c2 / 27.0;
        let mut roots = if p >= -1e-12 {
            vec![c2 / 3.0; 3]
        } else {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            (0..3)
                .map(|k| c2 / 3.0 + m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
                .collect()
        };
        roots.sort_by(f64::total_cmp);
        roots
    }

    /// Closed-form 2×2 rotation exp(−i(θ/2)(n̂·σ)) = cos(θ/2) I − i sin(θ/2)(n̂·σ).
    fn pauli_rotation_oracle(theta: f64, n: [f64; 3]) -> ComplexMatrix {
        let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let (nx, ny, nz) = (n[0], n[1], n[2]);
        ComplexMatrix::new(
            2,
            vec![
                c(ch, -sh * nz),
                c(-sh * ny, -sh * nx),
                c(sh * ny, -sh * nx),
                c(ch, sh * nz),
            ],
        )
        .unwrap()
    }

    // --- construction --------------------------------------------------

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert_eq!(ComplexMatrix::new(0, vec![]), Err(Error::ZeroDimension));
        assert_eq!(
            ComplexMatrix::new(2, vec![c(1.0, 0.0); 3]),
            Err(Error::EntryCount {
                dim: 2,
                expected: 4,
                actual: 3
            })
        );
        assert_eq!(
            ComplexMatrix::new(1, vec![c(f64::NAN, 0.0)]),
            Err(Error::NonFiniteEntry { index: 0 })
        );
        assert_eq!(ComplexVector::new(vec![]), Err(Error::ZeroDimension));
        assert_eq!(
            ComplexVector::new(vec![c(0.0, f64::INFINITY)]),
            Err(Error::NonFiniteEntry { index: 0 })
        );
    }

    // --- mat_vec_mul ----------------------------------------------------

    #[test]
    fn matvec_identity_returns_input() {
        let v = ComplexVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let out = mat_vec_mul(&ComplexMatrix::identity(2), &v).unwrap();
        assert_eq!(out.entries(), v.entries());
    }

    #[test]
    fn matvec_zero_matrix_gives_zero() {
        let v = ComplexVector::new(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -1.0)]).unwrap();
        let out = mat_vec_mul(&ComplexMatrix::zeros(3), &v).unwrap();
        assert!(out.entries().iter().all(|e| e.norm() == 0.0));
    }

    #[test]
    fn matvec_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 3);
            let v = ComplexVector::new(
                (0..3)
                    .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            )
            .unwrap();
            let got = mat_vec_mul(&m, &v).unwrap();
            let want = matvec_oracle(&m, &v);
            for (g, w) in got.entries().iter().zip(&want) {
                assert!((g - w).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn matvec_dimension_mismatch_is_error() {
        let v = ComplexVector::new(vec![c(1.0, 0.0); 3]).unwrap();
        assert_eq!(
            mat_vec_mul(&ComplexMatrix::identity(2), &v),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        );
    }

    // --- mat_mul ---------------------------------------------------------

    #[test]
    fn matmul_identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 3);
        let out = mat_mul(&a, &ComplexMatrix::identity(3)).unwrap();
        assert!(max_entry_diff(&out, &a) < 1e-15);
    }

    #[test]
    fn matmul_unitary_times_adjoint_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_hermitian(&mut rng, 3);
        let u = expm_hermitian(&h, 0.73).unwrap();
        let out = mat_mul(&u, &dagger(&u)).unwrap();
        assert!(max_entry_diff(&out, &ComplexMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3);
            let b = random_matrix(&mut rng, 3);
            let got = mat_mul(&a, &b).unwrap();
            let want = matmul_oracle(&a, &b);
            assert!(max_entry_diff(&got, &want) < 1e-13);
        }
    }

    #[test]
    fn matmul_dimension_mismatch_is_error() {
        assert_eq!(
            mat_mul(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3)),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        );
    }

    // --- dagger -----------------------------------------------------------

    #[test]
    fn dagger_fixes_real_symmetric() {
        let m = ComplexMatrix::new(
            2,
            vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(-0.5, 0.0)],
        )
        .unwrap();
        assert_eq!(dagger(&m), m);
    }

    #[test]
    fn dagger_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_matrix(&mut rng, 4);
        assert!(max_entry_diff(&dagger(&dagger(&m)), &m) == 0.0);
    }

    #[test]
    fn dagger_direct_definition() {
        let m = ComplexMatrix::new(2, vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        let want = ComplexMatrix::new(
            2,
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0), c(0.0, 0.0)],
        )
        .unwrap();
        assert_eq!(dagger(&m), want);
    }

    // --- eig_hermitian -----------------------------------------------------

    #[test]
    fn eig_diagonal_matrix_sorts_ascending_with_permutation_vectors() {
        let h = ComplexMatrix::new(
            3,
            vec![
                c(1.5, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
            ],
        )
        .unwrap();
        let (vals, vecs) = eig_hermitian(&h).unwrap();
        assert_eq!(vals, vec![0.0, 1.0, 1.5]);
        // Eigenvector for λ=0 is e₂, for λ=1 is e₁, for λ=1.5 is e₀.
        assert!((vecs.get(2, 0).norm() - 1.0).abs() < 1e-14);
        assert!((vecs.get(1, 1).norm() - 1.0).abs() < 1e-14);
        assert!((vecs.get(0, 2).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_spin_x_spectrum() {
        let (vals, _) = eig_hermitian(&spin_ix()).unwrap();
        assert!((vals[0] - (-0.5)).abs() < 1e-14);
        assert!((vals[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn eig_three_level_coupling_matches_cubic_oracle() {
        // H₁: states 1 and 2 both coupled to state 3.
        let h1 = ComplexMatrix::new(
            3,
            vec![
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
            ],
        )
        .unwrap();
        let (vals, _) = eig_hermitian(&h1).unwrap();
        let want = cubic_eigenvalue_oracle(&h1);
        for (g, w) in vals.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "got {g}, oracle {w}");
        }
        // The oracle itself agrees with the analytic spectrum {−√2, 0, √2}.
        assert!((want[0] + 2.0f64.sqrt()).abs() < 1e-12);
        assert!(want[1].abs() < 1e-12);
        assert!((want[2] - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eig_random_hermitian_matches_cubic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let h = random_hermitian(&mut rng, 3);
            let (vals, _) = eig_hermitian(&h).unwrap();
            let want = cubic_eigenvalue_oracle(&h);
            for (g, w) in vals.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "got {g}, oracle {w}");
            }
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::new(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert!(matches!(
            eig_hermitian(&m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eig_reconstructs_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for dim in 1..=8 {
            let h = random_hermitian(&mut rng, dim);
            let (vals, v) = eig_hermitian(&h).unwrap();
            // V diag(λ) V†
            let mut lambda = ComplexMatrix::zeros(dim);
            for (i, &val) in vals.iter().enumerate() {
                lambda.set(i, i, c(val, 0.0));
            }
            let recon = mat_mul(&mat_mul(&v, &lambda).unwrap(), &dagger(&v)).unwrap();
            assert!(
                max_entry_diff(&recon, &h) < 1e-10,
                "reconstruction failed at dim {dim}"
            );
            assert!(is_unitary(&v, 1e-10), "eigenvectors not orthonormal");
            for w in vals.windows(2) {
                assert!(w[0] <= w[1], "eigenvalues not ascending");
            }
        }
    }

    // --- expm_hermitian ------------------------------------------------------

    #[test]
    fn expm_diagonal_generator() {
        let u = expm_hermitian(&spin_iz(), std::f64::consts::PI / 15.0).unwrap();
        let phase = std::f64::consts::PI / 30.0;
        assert!((u.get(0, 0) - c(phase.cos(), -phase.sin())).norm() < 1e-14);
        assert!((u.get(1, 1) - c(phase.cos(), phase.sin())).norm() < 1e-14);
        assert!(u.get(0, 1).norm() < 1e-14);
        assert!(u.get(1, 0).norm() < 1e-14);
    }

    #[test]
    fn expm_zero_scale_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_hermitian(&mut rng, 3);
        let u = expm_hermitian(&h, 0.0).unwrap();
        assert!(max_entry_diff(&u, &ComplexMatrix::identity(3)) < 1e-13);
    }

    #[test]
    fn expm_tilted_spin_generator_matches_pauli_rotation_oracle() {
        // H = I_z + 0.5 I_x = (√1.25 / 2) n̂·σ with n̂ = (0.5, 0, 1)/√1.25,
        // so exp(−i H π/15) is a rotation by θ = √1.25 · π/15 about n̂.
        let mut h = spin_iz();
        let ix = spin_ix();
        for i in 0..2 {
            for j in 0..2 {
                h.set(i, j, h.get(i, j) + ix.get(i, j) * 0.5);
            }
        }
        let u = expm_hermitian(&h, std::f64::consts::PI / 15.0).unwrap();
        let root = 1.25f64.sqrt();
        let theta = root * std::f64::consts::PI / 15.0;
        let want = pauli_rotation_oracle(theta, [0.5 / root, 0.0, 1.0 / root]);
        assert!(max_entry_diff(&u, &want) < 1e-13);
    }

    #[test]
    fn expm_rejects_non_finite_scale() {
        assert!(matches!(
            expm_hermitian(&spin_iz(), f64::NAN),
            Err(Error::NonFiniteValue { .. })
        ));
    }

    // --- is_unitary -------------------------------------------------------

    #[test]
    fn unitary_checks() {
        assert!(is_unitary(&ComplexMatrix::identity(4), 1e-12));
        let mut twice = ComplexMatrix::identity(2);
        twice.set(0, 0, c(2.0, 0.0));
        twice.set(1, 1, c(2.0, 0.0));
        assert!(!is_unitary(&twice, 1e-6));
    }

    #[test]
    fn expm_outputs_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..10 {
            let h = random_hermitian(&mut rng, 3);
            let u = expm_hermitian(&h, rng.gen_range(-5.0..5.0)).unwrap();
            assert!(is_unitary(&u, 1e-10));
        }
    }

    // --- property tests -----------------------------------------------------

    /// Strategy: Hermitian matrix of the given dimension with entries in [-1, 1].
    fn hermitian_strategy(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |raw| {
            let a = ComplexMatrix::new(dim, raw.into_iter().map(|(re, im)| c(re, im)).collect())
                .unwrap();
            let at = dagger(&a);
            let entries = a
                .entries()
                .iter()
                .zip(at.entries())
                .map(|(x, y)| (x + y) * 0.5)
                .collect();
            ComplexMatrix::new(dim, entries).unwrap()
        })
    }

    proptest! {
        #[test]
        fn prop_expm_is_unitary(h in (1usize..=4).prop_flat_map(hermitian_strategy), s in -10.0f64..10.0) {
            let u = expm_hermitian(&h, s).unwrap();
            prop_assert!(is_unitary(&u, 1e-10));
        }

        #[test]
        fn prop_expm_group_law(h in (1usize..=4).prop_flat_map(hermitian_strategy),
                               s1 in -5.0f64..5.0, s2 in -5.0f64..5.0) {
            let u1 = expm_hermitian(&h, s1).unwrap();
            let u2 = expm_hermitian(&h, s2).unwrap();
            let combined = expm_hermitian(&h, s1 + s2).unwrap();
            let product = mat_mul(&u1, &u2).unwrap();
            prop_assert!(max_entry_diff(&product, &combined) < 1e-10);
        }

        #[test]
        fn prop_eig_reconstruction(h in (1usize..=8).prop_flat_map(hermitian_strategy)) {
            let dim = h.dim();
            let (vals, v) = eig_hermitian(&h).unwrap();
            let mut lambda = ComplexMatrix::zeros(dim);
            for (i, &val) in vals.iter().enumerate() {
                lambda.set(i, i, c(val, 0.0));
            }
            let recon = mat_mul(&mat_mul(&v, &lambda).unwrap(), &dagger(&v)).unwrap();
            prop_assert!(max_entry_diff(&recon, &h) < 1e-10);
        }

        #[test]
        fn prop_matmul_associative(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 3);
            let b = random_matrix(&mut rng, 3);
            let d = random_matrix(&mut rng, 3);
            let left = mat_mul(&mat_mul(&a, &b).unwrap(), &d).unwrap();
            let right = mat_mul(&a, &mat_mul(&b, &d).unwrap()).unwrap();
            prop_assert!(max_entry_diff(&left, &right) < 1e-12);
        }
    }
}
