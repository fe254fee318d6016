//! Protocol instances as families of branches over Bob's secret parameter ω.
//!
//! A protocol is given by its end-of-commitment purifications: for every
//! value ω Bob may pick, the pair `(ψ⁰(ω), ψ¹(ω))` on Alice ⊗ Bob, plus the
//! weights `pᵢ` with which Bob mixes them. Bob can always entangle his choice
//! with an ancilla, `|Ψᵇ⟩ = Σᵢ √pᵢ |ψᵇ(ωᵢ)⟩|λᵢ⟩`; the reports here compare
//! what Alice achieves branch by branch against what a single unitary
//! achieves on that superposition.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::attack::{self, AttackError, BranchDiagnostics, BranchStates, CheatPlan, WEIGHT_SUM_TOL};
use crate::linalg::{self, ComplexMatrix};
use crate::qstate::{self, QStateError, StateVector, SystemLayout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("protocol has no branches")]
    NoBranches,
    #[error("{branches} branches but {weights} weights")]
    WeightCount { branches: usize, weights: usize },
    #[error("bad weights: {0}")]
    BadWeights(String),
    #[error("duplicate omega label {0:?}")]
    DuplicateOmega(String),
    #[error("branch {label:?}: {reason}")]
    BranchLayout { label: String, reason: String },
    #[error("unknown family {0:?} (expected perfect_secret_basis, imperfect_theta or omega_dependent_counterexample)")]
    UnknownFamily(String),
    #[error("family {family} requires parameter {key:?}")]
    MissingParam { family: &'static str, key: &'static str },
    #[error("invalid parameter {key:?}: {reason}")]
    InvalidParam { key: String, reason: String },
    #[error("entangled layout exceeds the dimension cap: {0}")]
    DimensionCapExceeded(QStateError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    QState(#[from] QStateError),
}

/// Bob's choice ω together with the two honest purifications it leads to.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolBranch {
    pub omega_label: String,
    pub psi0: StateVector,
    pub psi1: StateVector,
}

/// A validated protocol instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    name: String,
    layout: SystemLayout,
    branches: Vec<ProtocolBranch>,
    weights: Vec<f64>,
    metadata: BTreeMap<String, String>,
}

impl ProtocolSpec {
    pub fn new(
        name: impl Into<String>,
        layout: SystemLayout,
        branches: Vec<ProtocolBranch>,
        weights: Vec<f64>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, ProtocolError> {
        if branches.is_empty() {
            return Err(ProtocolError::NoBranches);
        }
        if branches.len() != weights.len() {
            return Err(ProtocolError::WeightCount {
                branches: branches.len(),
                weights: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(ProtocolError::BadWeights(format!("weight {w} is not positive")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(ProtocolError::BadWeights(format!("weights sum to {sum}")));
        }
        if layout.dim_anc() != 1 {
            return Err(ProtocolError::BranchLayout {
                label: String::new(),
                reason: "protocol layout must not carry an ancilla".into(),
            });
        }
        let mut seen = HashSet::new();
        for br in &branches {
            if !seen.insert(br.omega_label.as_str()) {
                return Err(ProtocolError::DuplicateOmega(br.omega_label.clone()));
            }
            for (bit, psi) in [(0, &br.psi0), (1, &br.psi1)] {
                if psi.layout() != layout {
                    return Err(ProtocolError::BranchLayout {
                        label: br.omega_label.clone(),
                        reason: format!("psi{bit} is not on the protocol's {}x{} layout", layout.dim_a(), layout.dim_b()),
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            layout,
            branches,
            weights,
            metadata,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layout(&self) -> SystemLayout {
        self.layout
    }

    pub fn branches(&self) -> &[ProtocolBranch] {
        &self.branches
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    fn branch_states(&self) -> Vec<BranchStates<'_>> {
        self.branches
            .iter()
            .zip(&self.weights)
            .map(|(br, &weight)| BranchStates {
                label: &br.omega_label,
                psi0: &br.psi0,
                psi1: &br.psi1,
                weight,
            })
            .collect()
    }
}

/// `|Ψᵇ⟩ = Σᵢ √pᵢ |ψᵇ(ωᵢ)⟩|λᵢ⟩` with `|λᵢ⟩` the ancilla basis states.
pub fn entangle_choices(spec: &ProtocolSpec) -> Result<(StateVector, StateVector), ProtocolError> {
    let base = spec.layout;
    let layout = SystemLayout::new(base.dim_a(), base.dim_b(), spec.branches.len())
        .map_err(ProtocolError::DimensionCapExceeded)?;
    let mut amps0 = vec![Complex64::new(0.0, 0.0); layout.total()];
    let mut amps1 = amps0.clone();
    for (i, (br, &p)) in spec.branches.iter().zip(&spec.weights).enumerate() {
        let amp = p.sqrt();
        for a in 0..base.dim_a() {
            for b in 0..base.dim_b() {
                let k = layout.index(a, b, i);
                amps0[k] = br.psi0.amplitude(a, b, 0) * amp;
                amps1[k] = br.psi1.amplitude(a, b, 0) * amp;
            }
        }
    }
    // weights sum to 1 only within tolerance, so renormalize
    Ok((
        StateVector::normalized(layout, amps0)?,
        StateVector::normalized(layout, amps1)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchConcealing {
    pub omega_label: String,
    pub fidelity: f64,
    pub trace_distance: f64,
}

/// How well Bob's evidence states for b = 0 and b = 1 hide the bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcealingReport {
    pub per_branch: Vec<BranchConcealing>,
    /// Fidelity of Bob's states on B ⊗ ancilla after he entangles his choice.
    pub entangled_fidelity: f64,
    pub entangled_trace_distance: f64,
    /// `1 − entangled_fidelity`.
    pub epsilon: f64,
}

pub fn concealing_report(spec: &ProtocolSpec) -> Result<ConcealingReport, ProtocolError> {
    let per_branch = spec
        .branches
        .iter()
        .map(|br| {
            let r0 = qstate::partial_trace_alice(&br.psi0);
            let r1 = qstate::partial_trace_alice(&br.psi1);
            Ok(BranchConcealing {
                omega_label: br.omega_label.clone(),
                fidelity: qstate::fidelity(&r0, &r1)?,
                trace_distance: qstate::trace_distance(&r0, &r1)?,
            })
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    let (big0, big1) = entangle_choices(spec)?;
    let r0 = qstate::partial_trace_alice(&big0);
    let r1 = qstate::partial_trace_alice(&big1);
    let entangled_fidelity = qstate::fidelity(&r0, &r1)?;
    Ok(ConcealingReport {
        per_branch,
        entangled_fidelity,
        entangled_trace_distance: qstate::trace_distance(&r0, &r1)?,
        epsilon: 1.0 - entangled_fidelity,
    })
}

/// Alice's attacks: one optimal plan per branch and one common plan against
/// Bob's entangled superposition.
#[derive(Debug, Clone, Serialize)]
pub struct BindingReport {
    /// In branch order.
    pub per_branch_plans: Vec<CheatPlan>,
    pub common: CheatPlan,
    pub diagnostics: Vec<BranchDiagnostics>,
    pub epsilon_tilde: f64,
    /// `ε̃ − Σ pᵢδᵢ`, never below `−1e-9` for a correct attack.
    pub bound_residual: f64,
}

pub fn binding_report(spec: &ProtocolSpec) -> Result<BindingReport, ProtocolError> {
    let per_branch_plans = spec
        .branches
        .iter()
        .map(|br| attack::optimal_cheat_unitary(&br.psi0, &br.psi1))
        .collect::<Result<Vec<_>, _>>()?;
    let (big0, big1) = entangle_choices(spec)?;
    let common = attack::common_cheat_unitary(&big0, &big1, &spec.branch_states())?;
    let deltas: Vec<f64> = common.diagnostics.iter().map(|d| d.delta).collect();
    let bound_residual = attack::delta_bound_check(&spec.weights, &deltas, common.epsilon_tilde)?;
    Ok(BindingReport {
        per_branch_plans,
        common: common.plan,
        diagnostics: common.diagnostics,
        epsilon_tilde: common.epsilon_tilde,
        bound_residual,
    })
}

/// Built-in protocol families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Bob rotates his half of a Bell pair by a secret angle; Alice's σx
    /// flips the bit for every angle.
    PerfectSecretBasis,
    /// Single branch whose concealing deficit `1 − cos(θ₀/√N)` vanishes with N.
    ImperfectTheta,
    /// Two perfectly concealing branches needing different unitaries.
    OmegaDependentCounterexample,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::PerfectSecretBasis,
        Family::ImperfectTheta,
        Family::OmegaDependentCounterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::PerfectSecretBasis => "perfect_secret_basis",
            Family::ImperfectTheta => "imperfect_theta",
            Family::OmegaDependentCounterexample => "omega_dependent_counterexample",
        }
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            Family::PerfectSecretBasis => &["angles", "weights"],
            Family::ImperfectTheta => &["theta0", "n"],
            Family::OmegaDependentCounterexample => &["p"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ProtocolError::UnknownFamily(s.to_string()))
    }
}

/// String-valued family parameters, e.g. `theta0 = "1"`, `angles = "0,0.7"`.
pub type FamilyParams = BTreeMap<String, String>;

fn parse_f64(key: &str, raw: &str) -> Result<f64, ProtocolError> {
    let v: f64 = raw.trim().parse().map_err(|_| ProtocolError::InvalidParam {
        key: key.into(),
        reason: format!("{raw:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(ProtocolError::InvalidParam {
            key: key.into(),
            reason: "must be finite".into(),
        });
    }
    Ok(v)
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>, ProtocolError> {
    raw.split(',').map(|x| parse_f64(key, x)).collect()
}

fn required<'a>(family: Family, params: &'a FamilyParams, key: &'static str) -> Result<&'a str, ProtocolError> {
    params.get(key).map(String::as_str).ok_or(ProtocolError::MissingParam {
        family: family.name(),
        key,
    })
}

fn real_state(layout: SystemLayout, amps: &[f64]) -> Result<StateVector, QStateError> {
    StateVector::new(layout, amps.iter().map(|&x| Complex64::new(x, 0.0)).collect())
}

/// Builds a built-in family instance. Unknown parameter keys are rejected.
pub fn family_instantiate(family: &str, params: &FamilyParams) -> Result<ProtocolSpec, ProtocolError> {
    let fam: Family = family.parse()?;
    if let Some(extra) = params.keys().find(|k| !fam.allowed_params().contains(&k.as_str())) {
        return Err(ProtocolError::InvalidParam {
            key: extra.clone(),
            reason: format!("not a parameter of {fam} (expected one of {:?})", fam.allowed_params()),
        });
    }
    let qubits = SystemLayout::bipartite(2, 2)?;
    let mut metadata = BTreeMap::new();
    metadata.insert("family".to_string(), fam.name().to_string());
    for (k, v) in params {
        metadata.insert(format!("param.{k}"), v.clone());
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;

    match fam {
        Family::PerfectSecretBasis => {
            let angles = parse_list("angles", required(fam, params, "angles")?)?;
            let weights = match params.get("weights") {
                Some(raw) => parse_list("weights", raw)?,
                None => vec![1.0 / angles.len() as f64; angles.len()],
            };
            let bell = real_state(qubits, &[h, 0.0, 0.0, h])?;
            let sigma_x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("2x2");
            let id = ComplexMatrix::identity(2);
            let branches = angles
                .iter()
                .enumerate()
                .map(|(k, &theta)| {
                    let (c, s) = (theta.cos(), theta.sin());
                    let bob = ComplexMatrix::from_real_rows(&[&[c, -s], &[s, c]]).expect("2x2");
                    let honest = linalg::kron(&id, &bob).expect("4x4");
                    let flipped = linalg::kron(&sigma_x, &bob).expect("4x4");
                    Ok(ProtocolBranch {
                        omega_label: format!("omega_{k}"),
                        psi0: StateVector::normalized(qubits, honest.apply(bell.amplitudes()))?,
                        psi1: StateVector::normalized(qubits, flipped.apply(bell.amplitudes()))?,
                    })
                })
                .collect::<Result<Vec<_>, ProtocolError>>()?;
            ProtocolSpec::new(fam.name(), qubits, branches, weights, metadata)
        }
        Family::ImperfectTheta => {
            let theta0 = parse_f64("theta0", required(fam, params, "theta0")?)?;
            let raw_n = required(fam, params, "n")?;
            let n: u64 = raw_n.trim().parse().map_err(|_| ProtocolError::InvalidParam {
                key: "n".into(),
                reason: format!("{raw_n:?} is not a positive integer"),
            })?;
            if n < 1 {
                return Err(ProtocolError::InvalidParam {
                    key: "n".into(),
                    reason: "security parameter must be at least 1".into(),
                });
            }
            let x = theta0 / (n as f64).sqrt();
            let branch = ProtocolBranch {
                omega_label: "omega_0".into(),
                psi0: StateVector::basis(qubits, 0, 0, 0),
                psi1: real_state(qubits, &[x.cos(), 0.0, 0.0, x.sin()])?,
            };
            ProtocolSpec::new(fam.name(), qubits, vec![branch], vec![1.0], metadata)
        }
        Family::OmegaDependentCounterexample => {
            let p = match params.get("p") {
                Some(raw) => parse_f64("p", raw)?,
                None => 0.5,
            };
            if !(p > 0.0 && p < 1.0) {
                return Err(ProtocolError::InvalidParam {
                    key: "p".into(),
                    reason: format!("{p} is not in (0, 1)"),
                });
            }
            let ket = |a, b| StateVector::basis(qubits, a, b, 0);
            let branches = vec![
                ProtocolBranch {
                    omega_label: "flip".into(),
                    psi0: ket(0, 0),
                    psi1: ket(1, 0),
                },
                ProtocolBranch {
                    omega_label: "stay".into(),
                    psi0: ket(0, 0),
                    psi1: ket(0, 0),
                },
            ];
            ProtocolSpec::new(fam.name(), qubits, branches, vec![p, 1.0 - p], metadata)
        }
    }
}

/// One row of a security-parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: u64,
    pub epsilon: f64,
    pub cheat_probability: f64,
    pub delta_max: f64,
}

/// Evaluates the family at every `N` (in parallel), returning points sorted by `N`.
pub fn sweep(family: &str, params: &FamilyParams, n_values: &[u64]) -> Result<Vec<SweepPoint>, ProtocolError> {
    if n_values.is_empty() {
        return Err(ProtocolError::InvalidParam {
            key: "n_values".into(),
            reason: "at least one value is required".into(),
        });
    }
    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    ns.par_iter()
        .map(|&n| {
            let mut p = params.clone();
            p.insert("n".into(), n.to_string());
            let spec = family_instantiate(family, &p)?;
            let conceal = concealing_report(&spec)?;
            let binding = binding_report(&spec)?;
            Ok(SweepPoint {
                n,
                epsilon: conceal.epsilon,
                cheat_probability: binding.common.success_probability,
                delta_max: binding.diagnostics.iter().map(|d| d.delta).fold(0.0, f64::max),
            })
        })
        .collect()
}
