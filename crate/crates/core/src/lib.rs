//! Entanglement-attack analysis for quantum bit commitment.
//!
//! A commitment protocol enters as the purified joint states Alice and Bob
//! hold at the end of the commit phase, one pair `(ψ⁰(ω), ψ¹(ω))` per value
//! of Bob's secret parameter ω. From those the crate computes how well Bob's
//! evidence hides the bit ([`protocol::concealing_report`]) and how well
//! Alice can swap it afterwards with a unitary on her side alone
//! ([`protocol::binding_report`]), both per ω and against Bob entangling
//! his choice of ω with an ancilla.
//!
//! Module map:
//! - [`linalg`]: dense complex matrices, SVD, Hermitian eigensolver.
//! - [`qstate`]: layouts, pure states, partial trace, fidelity.
//! - [`attack`]: closed-form and brute-force cheating unitaries.
//! - [`protocol`]: protocol specs, built-in families, reports, sweeps.
//! - [`protofile`]: the `.qbc.json` format.

pub mod attack;
pub mod linalg;
pub mod protocol;
pub mod protofile;
pub mod qstate;

pub use attack::{BranchDiagnostics, CheatPlan, CommonCheat, OracleConfig};
pub use linalg::{ComplexMatrix, SvdResult};
pub use protocol::{
    BindingReport, ConcealingReport, Family, FamilyParams, ProtocolBranch, ProtocolSpec, SweepPoint,
};
pub use protofile::{ParsedProtocol, ProtofileError, ProtofileErrorKind};
pub use qstate::{DensityMatrix, StateVector, SystemLayout};

pub use num_complex::Complex64;
