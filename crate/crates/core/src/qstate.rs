//! Pure states and density matrices over Alice / Bob / Bob-ancilla systems.
//!
//! Amplitudes are stored Alice-major: the flat index of `|a⟩|b⟩|l⟩` is
//! `a·(dim_b·dim_anc) + b·dim_anc + l`. With that convention the amplitude
//! matrix (rows = Alice, columns = Bob⊗ancilla) is a pure reshape, and
//! Bob's reduced state is `Mᵀ·M*`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, LinalgError, DEFAULT_MAX_DIM};

/// Tolerance on `‖ψ‖₂ = 1` for stored states.
pub const NORM_TOL: f64 = 1e-9;

/// Tolerance on the density-matrix invariants (Hermiticity, PSD, unit trace).
pub const DENSITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QStateError {
    #[error("subsystem dimensions must be positive (got {dim_a}x{dim_b}x{dim_anc})")]
    ZeroDimension { dim_a: usize, dim_b: usize, dim_anc: usize },
    #[error("total dimension {total} exceeds the cap of {cap}")]
    LayoutTooLarge { total: usize, cap: usize },
    #[error("expected {expected} amplitudes, got {got}")]
    AmplitudeCount { expected: usize, got: usize },
    #[error("amplitude {index} is not finite")]
    NonFinite { index: usize },
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Dimensions of Alice's space, Bob's space and Bob's ancilla.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemLayout {
    dim_a: usize,
    dim_b: usize,
    dim_anc: usize,
}

impl SystemLayout {
    pub fn new(dim_a: usize, dim_b: usize, dim_anc: usize) -> Result<Self, QStateError> {
        Self::with_cap(dim_a, dim_b, dim_anc, DEFAULT_MAX_DIM)
    }

    pub fn with_cap(dim_a: usize, dim_b: usize, dim_anc: usize, cap: usize) -> Result<Self, QStateError> {
        if dim_a == 0 || dim_b == 0 || dim_anc == 0 {
            return Err(QStateError::ZeroDimension { dim_a, dim_b, dim_anc });
        }
        let total = dim_a
            .checked_mul(dim_b)
            .and_then(|x| x.checked_mul(dim_anc))
            .unwrap_or(usize::MAX);
        if total > cap {
            return Err(QStateError::LayoutTooLarge { total, cap });
        }
        Ok(Self { dim_a, dim_b, dim_anc })
    }

    /// Alice ⊗ Bob with no ancilla.
    pub fn bipartite(dim_a: usize, dim_b: usize) -> Result<Self, QStateError> {
        Self::new(dim_a, dim_b, 1)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim_anc(&self) -> usize {
        self.dim_anc
    }

    /// Dimension of everything Bob holds, `dim_b·dim_anc`.
    pub fn bob_dim(&self) -> usize {
        self.dim_b * self.dim_anc
    }

    pub fn total(&self) -> usize {
        self.dim_a * self.bob_dim()
    }

    pub fn index(&self, a: usize, b: usize, l: usize) -> usize {
        debug_assert!(a < self.dim_a && b < self.dim_b && l < self.dim_anc);
        a * self.bob_dim() + b * self.dim_anc + l
    }
}

/// Normalized pure state on a [`SystemLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: SystemLayout,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized within [`NORM_TOL`].
    pub fn new(layout: SystemLayout, amplitudes: Vec<Complex64>) -> Result<Self, QStateError> {
        check_amplitudes(&layout, &amplitudes)?;
        let norm = l2_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QStateError::NotNormalized { norm });
        }
        Ok(Self { layout, amplitudes })
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(layout: SystemLayout, amplitudes: Vec<Complex64>) -> Result<Self, QStateError> {
        check_amplitudes(&layout, &amplitudes)?;
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(QStateError::NotNormalized { norm });
        }
        let amplitudes = amplitudes.into_iter().map(|z| z / norm).collect();
        Ok(Self { layout, amplitudes })
    }

    /// Computational basis state `|a⟩|b⟩|l⟩`.
    pub fn basis(layout: SystemLayout, a: usize, b: usize, l: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.total()];
        amplitudes[layout.index(a, b, l)] = Complex64::new(1.0, 0.0);
        Self { layout, amplitudes }
    }

    /// Gaussian-random direction on the unit sphere (Haar-random pure state).
    pub fn random<R: Rng + ?Sized>(layout: SystemLayout, rng: &mut R) -> Self {
        loop {
            let amplitudes: Vec<Complex64> = (0..layout.total())
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            if let Ok(s) = Self::normalized(layout, amplitudes) {
                return s;
            }
        }
    }

    pub fn layout(&self) -> SystemLayout {
        self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, a: usize, b: usize, l: usize) -> Complex64 {
        self.amplitudes[self.layout.index(a, b, l)]
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64, QStateError> {
        if self.layout != other.layout {
            return Err(layout_mismatch(&self.layout, &other.layout));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(x, y)| x.conj() * y)
            .sum())
    }

    /// Equality up to a global phase, `|⟨self|other⟩| ≥ 1 − tol`.
    pub fn same_ray(&self, other: &StateVector, tol: f64) -> bool {
        self.inner(other).is_ok_and(|z| z.norm() >= 1.0 - tol)
    }
}

fn check_amplitudes(layout: &SystemLayout, amplitudes: &[Complex64]) -> Result<(), QStateError> {
    if amplitudes.len() != layout.total() {
        return Err(QStateError::AmplitudeCount {
            expected: layout.total(),
            got: amplitudes.len(),
        });
    }
    if let Some(index) = amplitudes.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(QStateError::NonFinite { index });
    }
    Ok(())
}

fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn layout_mismatch(a: &SystemLayout, b: &SystemLayout) -> QStateError {
    QStateError::DimMismatch(format!(
        "layouts {}x{}x{} and {}x{}x{} differ",
        a.dim_a, a.dim_b, a.dim_anc, b.dim_a, b.dim_b, b.dim_anc
    ))
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates the density-matrix invariants at [`DENSITY_TOL`].
    pub fn new(matrix: ComplexMatrix) -> Result<Self, QStateError> {
        let rho = Self { matrix };
        rho.validate(DENSITY_TOL)?;
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|` for a unit vector.
    pub fn pure(vector: &[Complex64]) -> Result<Self, QStateError> {
        let n = vector.len();
        let norm = l2_norm(vector);
        if n == 0 || (norm - 1.0).abs() > NORM_TOL {
            return Err(QStateError::NotNormalized { norm });
        }
        Ok(Self {
            matrix: ComplexMatrix::from_fn(n, n, |i, j| vector[i] * vector[j].conj()),
        })
    }

    pub fn validate(&self, tol: f64) -> Result<(), QStateError> {
        let m = &self.matrix;
        if !m.is_square() {
            return Err(QStateError::NotDensityMatrix(format!("{}x{} is not square", m.rows(), m.cols())));
        }
        let dev = m.hermitian_deviation().unwrap_or(f64::INFINITY);
        if dev > tol {
            return Err(QStateError::NotDensityMatrix(format!("Hermitian deviation {dev:.3e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(QStateError::NotDensityMatrix(format!("trace {tr}")));
        }
        let (values, _) = linalg::herm_eig(m)?;
        if let Some(&low) = values.first() {
            if low < -tol {
                return Err(QStateError::NotDensityMatrix(format!("eigenvalue {low:.3e}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// Bob's reduced state `Tr_A |ψ⟩⟨ψ|` on Bob ⊗ ancilla.
pub fn partial_trace_alice(psi: &StateVector) -> DensityMatrix {
    let layout = psi.layout;
    let nb = layout.bob_dim();
    let amps = &psi.amplitudes;
    let mut rho = ComplexMatrix::zeros(nb, nb);
    for a in 0..layout.dim_a {
        let row = &amps[a * nb..(a + 1) * nb];
        for (i, x) in row.iter().enumerate() {
            if *x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, y) in row.iter().enumerate() {
                rho[(i, j)] += x * y.conj();
            }
        }
    }
    DensityMatrix { matrix: rho }
}

/// Uhlmann fidelity `‖√ρ·√σ‖₁` (square-root convention, in `[0, 1]`).
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, QStateError> {
    check_same_dim(rho, sigma)?;
    let a = linalg::psd_sqrt(&rho.matrix)?;
    let b = linalg::psd_sqrt(&sigma.matrix)?;
    let f = linalg::trace_norm(&(&a * &b))?;
    Ok(f.clamp(0.0, 1.0))
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, QStateError> {
    check_same_dim(rho, sigma)?;
    let d = linalg::trace_norm(&(&rho.matrix - &sigma.matrix))?;
    Ok((0.5 * d).clamp(0.0, 1.0))
}

fn check_same_dim(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<(), QStateError> {
    if rho.dim() != sigma.dim() {
        return Err(QStateError::DimMismatch(format!(
            "density matrices of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// Reshape into `M[a, b·dim_anc + l]`.
pub fn amplitude_matrix(psi: &StateVector) -> ComplexMatrix {
    let layout = psi.layout;
    ComplexMatrix::new(layout.dim_a, layout.bob_dim(), psi.amplitudes.clone()).expect("layout-consistent amplitudes")
}

/// `(U ⊗ I_{B⊗Λ})|ψ⟩`.
pub fn apply_alice_unitary(psi: &StateVector, u: &ComplexMatrix) -> Result<StateVector, QStateError> {
    let da = psi.layout.dim_a;
    if u.shape() != (da, da) {
        return Err(QStateError::DimMismatch(format!(
            "Alice operator is {}x{}, Alice space has dimension {da}",
            u.rows(),
            u.cols()
        )));
    }
    let deviation = u.unitarity_deviation().unwrap_or(f64::INFINITY);
    if deviation > linalg::STRUCTURE_TOL {
        return Err(QStateError::NotUnitary { deviation });
    }
    let m = amplitude_matrix(psi);
    let out = u * &m;
    Ok(StateVector {
        layout: psi.layout,
        amplitudes: out.into_vec(),
    })
}

/// Schmidt decomposition across the Alice | Bob⊗ancilla cut.
#[derive(Debug, Clone)]
pub struct Schmidt {
    /// Non-negative, descending.
    pub coefficients: Vec<f64>,
    /// Columns are the Alice-side Schmidt vectors.
    pub alice_basis: ComplexMatrix,
    /// Columns are the Bob-side Schmidt vectors.
    pub bob_basis: ComplexMatrix,
}

impl Schmidt {
    /// `Σ cᵢ |aᵢ⟩|bᵢ⟩` as flat Alice-major amplitudes.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let da = self.alice_basis.rows();
        let nb = self.bob_basis.rows();
        let mut out = vec![Complex64::new(0.0, 0.0); da * nb];
        for (k, &c) in self.coefficients.iter().enumerate() {
            for a in 0..da {
                let x = self.alice_basis[(a, k)] * c;
                for b in 0..nb {
                    out[a * nb + b] += x * self.bob_basis[(b, k)];
                }
            }
        }
        out
    }
}

pub fn schmidt(psi: &StateVector) -> Result<Schmidt, QStateError> {
    let s = linalg::svd(&amplitude_matrix(psi))?;
    Ok(Schmidt {
        coefficients: s.singular_values,
        alice_basis: s.left,
        bob_basis: s.right_adjoint.transpose(),
    })
}
