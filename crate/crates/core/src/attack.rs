//! Alice's entanglement attack.
//!
//! For purifications `ψ⁰`, `ψ¹` with amplitude matrices `M₀`, `M₁`, the
//! cross-Gram matrix `C = M₀·M₁†` turns the attack overlap into a trace:
//! `⟨ψ¹|(U⊗I)|ψ⁰⟩ = Tr(U·C)`. With `C = W·Σ·V†` the choice `U = V·W†`
//! attains `Tr(U·C) = Σσᵢ = ‖C‖₁`, which is the Uhlmann fidelity of Bob's
//! two reduced states. Nothing Alice does on her side can do better.
//!
//! Bob's verification is modelled as the projector onto the honest `|ψ¹⟩`,
//! so the success probability of a plan is the squared overlap.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, complete_orthonormal, ComplexMatrix, LinalgError};
use crate::qstate::{self, QStateError, StateVector};

/// Relative cutoff below which a cross-Gram singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Largest Alice dimension the brute-force oracle accepts.
pub const ORACLE_MAX_DIM: usize = 4;

/// Tolerance for branch weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Tolerance for matching entangled states against their branch states.
pub const BRANCH_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("protocol is not concealing: fidelity {fidelity} < 1 - {tol}")]
    NotConcealing { fidelity: f64, tol: f64 },
    #[error("entangled states do not decompose into the given branches: {0}")]
    InconsistentBranches(String),
    #[error("malformed distribution: {0}")]
    MalformedDistribution(String),
    #[error("oracle supports dim_a <= {max}, got {dim_a}")]
    DimensionTooLarge { dim_a: usize, max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    QState(#[from] QStateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// An Alice-side unitary together with what it achieves.
#[derive(Debug, Clone, Serialize)]
pub struct CheatPlan {
    pub unitary: ComplexMatrix,
    /// `|⟨ψ¹|(U⊗I)|ψ⁰⟩|`, the `1 − ε` of the attack.
    pub achieved_overlap: f64,
    /// Probability that Bob's projection onto `|ψ¹⟩` accepts.
    pub success_probability: f64,
    /// `true` for the closed form, `false` for oracle-found plans.
    pub optimal: bool,
}

impl CheatPlan {
    fn new(unitary: ComplexMatrix, overlap: f64, optimal: bool) -> Self {
        let achieved_overlap = overlap.clamp(0.0, 1.0);
        Self {
            unitary,
            achieved_overlap,
            success_probability: achieved_overlap * achieved_overlap,
            optimal,
        }
    }

    pub fn epsilon(&self) -> f64 {
        1.0 - self.achieved_overlap
    }
}

/// Per-branch deficits of a common unitary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDiagnostics {
    pub omega_label: String,
    /// `1 − |⟨ψ¹(ω)|(Ũ⊗I)|ψ⁰(ω)⟩|` under the common unitary.
    pub delta: f64,
    /// Deficit under the branch's own optimal unitary.
    pub epsilon_solo: f64,
}

/// One branch `ω ↦ (ψ⁰(ω), ψ¹(ω))` with weight `p`, borrowed from a protocol.
#[derive(Debug, Clone, Copy)]
pub struct BranchStates<'a> {
    pub label: &'a str,
    pub psi0: &'a StateVector,
    pub psi1: &'a StateVector,
    pub weight: f64,
}

/// Result of attacking the entangled pair with a single unitary.
#[derive(Debug, Clone, Serialize)]
pub struct CommonCheat {
    pub plan: CheatPlan,
    pub diagnostics: Vec<BranchDiagnostics>,
    pub epsilon_tilde: f64,
}

fn ensure_same_layout(psi0: &StateVector, psi1: &StateVector) -> Result<(), AttackError> {
    let (a, b) = (psi0.layout(), psi1.layout());
    if a != b {
        return Err(AttackError::LayoutMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.dim_a(),
            a.dim_b(),
            a.dim_anc(),
            b.dim_a(),
            b.dim_b(),
            b.dim_anc()
        )));
    }
    Ok(())
}

/// `C = M₀·M₁†`, so that `⟨ψ¹|(U⊗I)|ψ⁰⟩ = Tr(U·C)`.
pub fn cross_gram(psi0: &StateVector, psi1: &StateVector) -> Result<ComplexMatrix, AttackError> {
    ensure_same_layout(psi0, psi1)?;
    let m0 = qstate::amplitude_matrix(psi0);
    let m1 = qstate::amplitude_matrix(psi1);
    Ok(m0.matmul(&m1.adjoint())?)
}

/// Unitary maximizing `|Tr(U·C)|`.
///
/// On the range of `C` this is the polar factor `V_r·W_r†`. The orthogonal
/// complements of the left and right singular subspaces are both filled by
/// Gram-Schmidt over the standard basis in index order and paired up, so
/// the completion is deterministic and acts as the identity whenever the
/// two subspaces coincide.
pub fn unitary_from_cross_gram(c: &ComplexMatrix) -> Result<ComplexMatrix, AttackError> {
    if !c.is_square() {
        return Err(AttackError::InvalidArgument(format!(
            "cross-Gram matrix must be square, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    let n = c.rows();
    let s = linalg::svd(c)?;
    let rank = s.rank(RANK_TOL);
    let right = s.right_adjoint.adjoint();
    let mut w: Vec<Vec<Complex64>> = (0..rank).map(|k| s.left.column(k)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..rank).map(|k| right.column(k)).collect();
    complete_orthonormal(&mut w, n, n);
    complete_orthonormal(&mut v, n, n);
    debug_assert!(w.len() == n && v.len() == n);
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        w.iter().zip(&v).map(|(wk, vk)| vk[i] * wk[j].conj()).sum()
    }))
}

/// Closed-form optimal attack on one pair of purifications.
pub fn optimal_cheat_unitary(psi0: &StateVector, psi1: &StateVector) -> Result<CheatPlan, AttackError> {
    let c = cross_gram(psi0, psi1)?;
    let u = unitary_from_cross_gram(&c)?;
    let overlap = (&u * &c).trace().norm();
    Ok(CheatPlan::new(u, overlap, true))
}

/// The unitary relating two purifications of (numerically) the same state.
///
/// Fails with [`AttackError::NotConcealing`] when Bob's reduced states have
/// fidelity below `1 − tol`.
pub fn exact_hjw_unitary(psi0: &StateVector, psi1: &StateVector, tol: f64) -> Result<ComplexMatrix, AttackError> {
    ensure_same_layout(psi0, psi1)?;
    let f = qstate::fidelity(&qstate::partial_trace_alice(psi0), &qstate::partial_trace_alice(psi1))?;
    if f < 1.0 - tol {
        return Err(AttackError::NotConcealing { fidelity: f, tol });
    }
    let plan = optimal_cheat_unitary(psi0, psi1)?;
    debug_assert!(plan.achieved_overlap >= 1.0 - tol - 1e-9);
    Ok(plan.unitary)
}

/// Attack overlap computed in the joint space, `|⟨ψ¹|(U⊗I)|ψ⁰⟩|`.
pub fn attack_overlap(psi0: &StateVector, psi1: &StateVector, u: &ComplexMatrix) -> Result<f64, AttackError> {
    ensure_same_layout(psi0, psi1)?;
    let moved = qstate::apply_alice_unitary(psi0, u)?;
    Ok(psi1.inner(&moved)?.norm())
}

/// `|⟨ψ¹|(u⊗I)|ψ⁰⟩|²`.
pub fn cheat_success_probability(psi0: &StateVector, psi1: &StateVector, u: &ComplexMatrix) -> Result<f64, AttackError> {
    let o = attack_overlap(psi0, psi1, u)?;
    Ok((o * o).min(1.0))
}

fn check_distribution(weights: &[f64]) -> Result<(), AttackError> {
    if weights.is_empty() {
        return Err(AttackError::MalformedDistribution("no weights".into()));
    }
    if let Some(w) = weights.iter().find(|&&w| !(w > 0.0 && w <= 1.0)) {
        return Err(AttackError::MalformedDistribution(format!("weight {w} outside (0, 1]")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(AttackError::MalformedDistribution(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// Checks that `Ψᵇ = Σᵢ √pᵢ |ψᵇ(ωᵢ)⟩|λᵢ⟩` for the given branches.
fn check_decomposition(big: &StateVector, branches: &[BranchStates<'_>], bit: u8) -> Result<(), AttackError> {
    let layout = big.layout();
    for (i, br) in branches.iter().enumerate() {
        let small = if bit == 0 { br.psi0 } else { br.psi1 };
        let sl = small.layout();
        if sl.dim_anc() != 1 || sl.dim_a() != layout.dim_a() || sl.dim_b() != layout.dim_b() {
            return Err(AttackError::InconsistentBranches(format!(
                "branch {:?} has layout {}x{}x{}, expected {}x{}x1",
                br.label,
                sl.dim_a(),
                sl.dim_b(),
                sl.dim_anc(),
                layout.dim_a(),
                layout.dim_b()
            )));
        }
        let amp = br.weight.sqrt();
        let mut worst: f64 = 0.0;
        for a in 0..layout.dim_a() {
            for b in 0..layout.dim_b() {
                let d = big.amplitude(a, b, i) - small.amplitude(a, b, 0) * amp;
                worst = worst.max(d.norm());
            }
        }
        if worst > BRANCH_MATCH_TOL {
            return Err(AttackError::InconsistentBranches(format!(
                "Psi{bit} differs from branch {:?} by {worst:.3e}",
                br.label
            )));
        }
    }
    Ok(())
}

/// Best single Alice unitary against Bob's entangled superposition of branches,
/// and what it achieves on each branch.
///
/// `entangled0`/`entangled1` carry one ancilla level per branch. Because the
/// ancilla states are orthogonal, `⟨Ψ¹|Ũ|Ψ⁰⟩ = Σ pᵢ⟨ψ¹ᵢ|Ũ|ψ⁰ᵢ⟩`, which forces
/// `ε̃ ≥ Σ pᵢδᵢ`.
pub fn common_cheat_unitary(
    entangled0: &StateVector,
    entangled1: &StateVector,
    branches: &[BranchStates<'_>],
) -> Result<CommonCheat, AttackError> {
    ensure_same_layout(entangled0, entangled1)?;
    let weights: Vec<f64> = branches.iter().map(|b| b.weight).collect();
    check_distribution(&weights)?;
    let layout = entangled0.layout();
    if layout.dim_anc() != branches.len() {
        return Err(AttackError::InconsistentBranches(format!(
            "{} ancilla levels for {} branches",
            layout.dim_anc(),
            branches.len()
        )));
    }
    check_decomposition(entangled0, branches, 0)?;
    check_decomposition(entangled1, branches, 1)?;

    let plan = optimal_cheat_unitary(entangled0, entangled1)?;
    let diagnostics = branches
        .iter()
        .map(|br| {
            let c = cross_gram(br.psi0, br.psi1)?;
            let common = (&plan.unitary * &c).trace().norm().min(1.0);
            let solo = linalg::trace_norm(&c)?.min(1.0);
            Ok(BranchDiagnostics {
                omega_label: br.label.to_string(),
                delta: 1.0 - common,
                epsilon_solo: 1.0 - solo,
            })
        })
        .collect::<Result<Vec<_>, AttackError>>()?;
    let epsilon_tilde = plan.epsilon();
    Ok(CommonCheat {
        plan,
        diagnostics,
        epsilon_tilde,
    })
}

/// `ε̃ − Σ pᵢδᵢ`; non-negative whenever the deltas came from the same attack.
pub fn delta_bound_check(weights: &[f64], deltas: &[f64], epsilon_tilde: f64) -> Result<f64, AttackError> {
    if weights.len() != deltas.len() {
        return Err(AttackError::MalformedDistribution(format!(
            "{} weights for {} deltas",
            weights.len(),
            deltas.len()
        )));
    }
    check_distribution(weights)?;
    if let Some(d) = deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(AttackError::MalformedDistribution(format!("delta {d} outside [0, 1]")));
    }
    let weighted: f64 = weights.iter().zip(deltas).map(|(p, d)| p * d).sum();
    Ok(epsilon_tilde - weighted)
}

/// Search budget for [`brute_force_unitary_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub samples: usize,
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            refine_steps: 200,
            seed: 0,
        }
    }
}

/// Random search over Alice's unitary group.
///
/// Draws Haar-random unitaries, keeps the best, then hill-climbs along
/// random one-parameter subgroups `U·e^{itX}`. Overlaps are evaluated
/// by applying `U⊗I` in the joint space, never through the cross-Gram
/// matrix, so the search is independent of the closed form it certifies.
pub fn brute_force_unitary_oracle(
    psi0: &StateVector,
    psi1: &StateVector,
    config: OracleConfig,
) -> Result<CheatPlan, AttackError> {
    ensure_same_layout(psi0, psi1)?;
    let n = psi0.layout().dim_a();
    if n > ORACLE_MAX_DIM {
        return Err(AttackError::DimensionTooLarge {
            dim_a: n,
            max: ORACLE_MAX_DIM,
        });
    }
    if config.samples == 0 {
        return Err(AttackError::InvalidArgument("samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut best_u = linalg::haar_unitary(n, &mut rng);
    let mut best = attack_overlap(psi0, psi1, &best_u)?;
    for _ in 1..config.samples {
        let u = linalg::haar_unitary(n, &mut rng);
        let o = attack_overlap(psi0, psi1, &u)?;
        if o > best {
            best = o;
            best_u = u;
        }
    }

    // A refinement step is dim_a line searches. Each draws a random Hermitian
    // direction X and fits a parabola through the overlaps at U·e^{∓itX} and
    // U, moving to the best of the probed points and the fitted vertex.
    let mut step = 0.3;
    for _ in 0..config.refine_steps * n {
        let g = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let h = &g + &g.adjoint();
        let h = h.scale(Complex64::new(1.0 / h.frobenius_norm().max(f64::MIN_POSITIVE), 0.0));
        let (lambda, vecs) = linalg::herm_eig(&h)?;
        let along = |t: f64| -> ComplexMatrix {
            let phases: Vec<Complex64> = lambda.iter().map(|&l| Complex64::from_polar(1.0, t * l)).collect();
            let e = &(&vecs * &ComplexMatrix::from_diag(&phases)) * &vecs.adjoint();
            &best_u * &e
        };
        let minus = along(-step);
        let plus = along(step);
        let f_minus = attack_overlap(psi0, psi1, &minus)?;
        let f_plus = attack_overlap(psi0, psi1, &plus)?;
        let mut cands = vec![(minus, f_minus, step), (plus, f_plus, step)];
        let curvature = f_minus - 2.0 * best + f_plus;
        if curvature < 0.0 {
            let t = (step * (f_minus - f_plus) / (2.0 * curvature)).clamp(-4.0 * step, 4.0 * step);
            let u = along(t);
            let f = attack_overlap(psi0, psi1, &u)?;
            cands.push((u, f, t.abs()));
        }
        let (u, f, moved) = cands
            .into_iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite overlaps"))
            .expect("at least two candidates");
        if f > best {
            best = f;
            best_u = u;
            step = (moved * 1.5).clamp(1e-7, 1.0);
        } else {
            step = (step * 0.5).max(1e-7);
        }
    }
    Ok(CheatPlan::new(best_u, best, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{apply_alice_unitary, fidelity, partial_trace_alice, SystemLayout};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn qubits() -> SystemLayout {
        SystemLayout::bipartite(2, 2).unwrap()
    }

    fn ket(a: usize, b: usize) -> StateVector {
        StateVector::basis(qubits(), a, b, 0)
    }

    fn bell() -> StateVector {
        StateVector::new(qubits(), vec![c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(FRAC_1_SQRT_2)]).unwrap()
    }

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    /// Global-phase-insensitive operator comparison: |Tr(A†B)|/n.
    fn same_up_to_phase(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (&a.adjoint() * b).trace().norm() / a.rows() as f64
    }

    #[test]
    fn cross_gram_examples() {
        let c00 = cross_gram(&ket(0, 0), &ket(0, 0)).unwrap();
        assert_eq!(c00, ComplexMatrix::from_real_diag(&[1.0, 0.0]));

        let c = cross_gram(&ket(0, 0), &ket(1, 0)).unwrap();
        assert_eq!(c, ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap());

        let wrong = StateVector::basis(SystemLayout::bipartite(2, 3).unwrap(), 0, 0, 0);
        assert!(matches!(cross_gram(&ket(0, 0), &wrong), Err(AttackError::LayoutMismatch(_))));
    }

    #[test]
    fn cross_gram_trace_matches_joint_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let layout = SystemLayout::new(3, 2, 2).unwrap();
        let psi0 = StateVector::random(layout, &mut rng);
        let psi1 = StateVector::random(layout, &mut rng);
        let c = cross_gram(&psi0, &psi1).unwrap();
        assert!((c.trace() - psi1.inner(&psi0).unwrap()).norm() <= 1e-12);
        for _ in 0..100 {
            let u = linalg::haar_unitary(3, &mut rng);
            let joint = psi1.inner(&apply_alice_unitary(&psi0, &u).unwrap()).unwrap();
            assert!(((&u * &c).trace() - joint).norm() <= 1e-10);
        }
    }

    #[test]
    fn optimal_plan_exact_case() {
        let plan = optimal_cheat_unitary(&ket(0, 0), &ket(1, 0)).unwrap();
        assert_abs_diff_eq!(plan.achieved_overlap, 1.0, epsilon = 1e-12);
        assert!(plan.optimal);
        let moved = apply_alice_unitary(&ket(0, 0), &plan.unitary).unwrap();
        assert!(moved.same_ray(&ket(1, 0), 1e-9));
    }

    #[test]
    fn optimal_plan_imperfect_case() {
        let plan = optimal_cheat_unitary(&bell(), &ket(0, 0)).unwrap();
        assert_abs_diff_eq!(plan.achieved_overlap, FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.success_probability, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn optimal_plan_equal_states_is_identity() {
        let plan = optimal_cheat_unitary(&ket(0, 0), &ket(0, 0)).unwrap();
        assert_abs_diff_eq!(plan.achieved_overlap, 1.0, epsilon = 1e-12);
        assert!(plan.unitary.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = StateVector::random(SystemLayout::bipartite(3, 3).unwrap(), &mut rng);
        let plan = optimal_cheat_unitary(&psi, &psi).unwrap();
        assert!(plan.unitary.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-9);
    }

    #[test]
    fn rank_deficient_completion_is_unitary_and_deterministic() {
        let layout = SystemLayout::bipartite(4, 1).unwrap();
        let psi0 = StateVector::basis(layout, 1, 0, 0);
        let psi1 = StateVector::basis(layout, 3, 0, 0);
        let a = optimal_cheat_unitary(&psi0, &psi1).unwrap();
        let b = optimal_cheat_unitary(&psi0, &psi1).unwrap();
        assert_eq!(a.unitary, b.unitary);
        assert!(a.unitary.is_unitary(1e-12));
        assert_abs_diff_eq!(a.achieved_overlap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hjw_examples() {
        let flipped = apply_alice_unitary(&bell(), &sigma_x()).unwrap();
        let u = exact_hjw_unitary(&bell(), &flipped, 1e-9).unwrap();
        assert_abs_diff_eq!(same_up_to_phase(&u, &sigma_x()), 1.0, epsilon = 1e-9);

        let u = exact_hjw_unitary(&ket(0, 0), &ket(1, 0), 1e-9).unwrap();
        // only the action on |0⟩ is fixed; it must send |0⟩ to |1⟩
        assert_abs_diff_eq!(u[(1, 0)].norm(), 1.0, epsilon = 1e-12);

        match exact_hjw_unitary(&bell(), &ket(0, 0), 1e-9) {
            Err(AttackError::NotConcealing { fidelity, .. }) => assert_abs_diff_eq!(fidelity, FRAC_1_SQRT_2, epsilon = 1e-12),
            other => panic!("expected NotConcealing, got {other:?}"),
        }
    }

    #[test]
    fn success_probability_examples() {
        let plan = optimal_cheat_unitary(&ket(0, 0), &ket(1, 0)).unwrap();
        assert_abs_diff_eq!(cheat_success_probability(&ket(0, 0), &ket(1, 0), &plan.unitary).unwrap(), 1.0, epsilon = 1e-12);
        let id = ComplexMatrix::identity(2);
        assert_eq!(cheat_success_probability(&ket(0, 0), &ket(1, 1), &id).unwrap(), 0.0);
        let plan = optimal_cheat_unitary(&bell(), &ket(0, 0)).unwrap();
        assert_abs_diff_eq!(cheat_success_probability(&bell(), &ket(0, 0), &plan.unitary).unwrap(), 0.5, epsilon = 1e-12);

        let bad = ComplexMatrix::from_real_diag(&[1.0, 0.5]);
        assert!(matches!(
            cheat_success_probability(&ket(0, 0), &ket(0, 0), &bad),
            Err(AttackError::QState(QStateError::NotUnitary { .. }))
        ));
    }

    fn entangle(branches: &[BranchStates<'_>], bit: u8) -> StateVector {
        let base = branches[0].psi0.layout();
        let layout = SystemLayout::new(base.dim_a(), base.dim_b(), branches.len()).unwrap();
        let mut amps = vec![c(0.0); layout.total()];
        for (i, br) in branches.iter().enumerate() {
            let s = if bit == 0 { br.psi0 } else { br.psi1 };
            for a in 0..base.dim_a() {
                for b in 0..base.dim_b() {
                    amps[layout.index(a, b, i)] = s.amplitude(a, b, 0) * br.weight.sqrt();
                }
            }
        }
        StateVector::new(layout, amps).unwrap()
    }

    #[test]
    fn common_single_branch_reduces_to_solo() {
        let (p0, p1) = (bell(), ket(0, 0));
        let branches = [BranchStates { label: "w", psi0: &p0, psi1: &p1, weight: 1.0 }];
        let r = common_cheat_unitary(&entangle(&branches, 0), &entangle(&branches, 1), &branches).unwrap();
        let solo = optimal_cheat_unitary(&p0, &p1).unwrap();
        assert_abs_diff_eq!(r.plan.achieved_overlap, solo.achieved_overlap, epsilon = 1e-12);
        assert_abs_diff_eq!(r.diagnostics[0].delta, r.epsilon_tilde, epsilon = 1e-12);
    }

    #[test]
    fn common_unitary_for_bob_rotated_branches() {
        // ψ⁰(ω) = (I⊗R(ω))Bell, ψ¹(ω) = (σx⊗R(ω))Bell
        let rotated = |theta: f64, flip: bool| {
            let (co, si) = (theta.cos(), theta.sin());
            let r = ComplexMatrix::from_real_rows(&[&[co, -si], &[si, co]]).unwrap();
            let alice = if flip { sigma_x() } else { ComplexMatrix::identity(2) };
            let op = linalg::kron(&alice, &r).unwrap();
            StateVector::new(qubits(), op.apply(bell().amplitudes())).unwrap()
        };
        let (a0, a1, b0, b1) = (rotated(0.0, false), rotated(0.0, true), rotated(0.9, false), rotated(0.9, true));
        let branches = [
            BranchStates { label: "w1", psi0: &a0, psi1: &a1, weight: 0.3 },
            BranchStates { label: "w2", psi0: &b0, psi1: &b1, weight: 0.7 },
        ];
        let r = common_cheat_unitary(&entangle(&branches, 0), &entangle(&branches, 1), &branches).unwrap();
        assert!(r.epsilon_tilde <= 1e-9);
        assert!(r.diagnostics.iter().all(|d| d.delta <= 1e-9));
    }

    #[test]
    fn common_unitary_counterexample() {
        // branch 1 needs σx, branch 2 needs I
        let (a0, a1, b0, b1) = (ket(0, 0), ket(1, 0), ket(0, 0), ket(0, 0));
        let branches = [
            BranchStates { label: "flip", psi0: &a0, psi1: &a1, weight: 0.5 },
            BranchStates { label: "stay", psi0: &b0, psi1: &b1, weight: 0.5 },
        ];
        let big0 = entangle(&branches, 0);
        let big1 = entangle(&branches, 1);
        let r = common_cheat_unitary(&big0, &big1, &branches).unwrap();
        // max_U |½U[1,0] + ½U[0,0]| = 1/√2 for a unit first column
        assert_abs_diff_eq!(r.plan.achieved_overlap, FRAC_1_SQRT_2, epsilon = 1e-12);
        let f = fidelity(&partial_trace_alice(&big0), &partial_trace_alice(&big1)).unwrap();
        assert_abs_diff_eq!(r.plan.achieved_overlap, f, epsilon = 1e-9);
        for d in &r.diagnostics {
            assert_abs_diff_eq!(d.epsilon_solo, 0.0, epsilon = 1e-12);
            assert!(d.delta >= d.epsilon_solo - 1e-9);
        }
        let weights = [0.5, 0.5];
        let deltas: Vec<f64> = r.diagnostics.iter().map(|d| d.delta).collect();
        assert!(delta_bound_check(&weights, &deltas, r.epsilon_tilde).unwrap() >= -1e-9);

        let oracle = brute_force_unitary_oracle(&big0, &big1, OracleConfig { samples: 2000, refine_steps: 200, seed: 5 }).unwrap();
        assert!(oracle.achieved_overlap <= r.plan.achieved_overlap + 1e-7);
        assert!(oracle.achieved_overlap >= r.plan.achieved_overlap - 1e-3);
        assert!(!oracle.optimal);
    }

    #[test]
    fn common_rejects_inconsistent_input() {
        let (a0, a1) = (ket(0, 0), ket(1, 0));
        let branches = [
            BranchStates { label: "x", psi0: &a0, psi1: &a1, weight: 0.5 },
            BranchStates { label: "y", psi0: &a0, psi1: &a1, weight: 0.5 },
        ];
        let big0 = entangle(&branches, 0);
        let other = entangle(&[BranchStates { label: "x", psi0: &a1, psi1: &a1, weight: 0.5 }, branches[1]], 0);
        assert!(matches!(
            common_cheat_unitary(&other, &entangle(&branches, 1), &branches),
            Err(AttackError::InconsistentBranches(_))
        ));
        let skewed = [BranchStates { weight: 0.6, ..branches[0] }, branches[1]];
        assert!(matches!(
            common_cheat_unitary(&big0, &entangle(&branches, 1), &skewed),
            Err(AttackError::MalformedDistribution(_))
        ));
    }

    #[test]
    fn delta_bound_examples() {
        assert_eq!(delta_bound_check(&[1.0], &[0.25], 0.25).unwrap(), 0.0);
        assert_abs_diff_eq!(delta_bound_check(&[0.3, 0.7], &[0.1, 0.2], 0.17).unwrap(), 0.0, epsilon = 1e-12);
        assert!(matches!(delta_bound_check(&[0.5, 0.6], &[0.0, 0.0], 0.0), Err(AttackError::MalformedDistribution(_))));
        assert!(matches!(delta_bound_check(&[1.0], &[1.5], 0.0), Err(AttackError::MalformedDistribution(_))));
        assert!(matches!(delta_bound_check(&[1.0], &[0.0, 0.0], 0.0), Err(AttackError::MalformedDistribution(_))));
    }

    #[test]
    fn oracle_examples() {
        let cfg = OracleConfig { samples: 10_000, refine_steps: 200, seed: 42 };
        let eq = brute_force_unitary_oracle(&bell(), &bell(), cfg).unwrap();
        assert!(eq.achieved_overlap >= 1.0 - 1e-3);

        let o = brute_force_unitary_oracle(&bell(), &ket(0, 0), cfg).unwrap();
        assert!(o.achieved_overlap >= FRAC_1_SQRT_2 - 1e-3);
        assert!(o.achieved_overlap <= FRAC_1_SQRT_2 + 1e-7);
        assert!(o.unitary.is_unitary(1e-9));
        assert_abs_diff_eq!(o.success_probability, o.achieved_overlap * o.achieved_overlap, epsilon = 1e-12);

        let again = brute_force_unitary_oracle(&bell(), &ket(0, 0), cfg).unwrap();
        assert_eq!(again.unitary, o.unitary);
    }

    #[test]
    fn oracle_rejects_large_or_empty() {
        let big = StateVector::basis(SystemLayout::bipartite(5, 1).unwrap(), 0, 0, 0);
        assert!(matches!(
            brute_force_unitary_oracle(&big, &big, OracleConfig::default()),
            Err(AttackError::DimensionTooLarge { dim_a: 5, max: 4 })
        ));
        let cfg = OracleConfig { samples: 0, ..OracleConfig::default() };
        assert!(matches!(brute_force_unitary_oracle(&bell(), &bell(), cfg), Err(AttackError::InvalidArgument(_))));
    }
}
