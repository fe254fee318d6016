use qbc_core::attack;
use qbc_core::linalg;
use qbc_core::protocol::{self, ProtocolBranch, ProtocolSpec};
use qbc_core::qstate::{self, StateVector, SystemLayout};
use qbc_core::protofile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cli::{Format, VerifyArgs};
use crate::input::{self, digest};
use crate::output::{envelope, num, CliError, Outcome, EXIT_VERIFY};

/// The fidelity identity is checked at this tolerance regardless of `--tol`.
const UHLMANN_TOL: f64 = 1e-8;

struct Check {
    name: &'static str,
    residual: f64,
    threshold: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.residual <= self.threshold
    }
}

fn err(e: impl ToString) -> CliError {
    CliError::input("invalid-protocol", e.to_string())
}

/// Residuals of every invariant for one protocol, in a fixed order.
fn residuals(spec: &ProtocolSpec) -> Result<[f64; 5], CliError> {
    let (big0, big1) = protocol::entangle_choices(spec).map_err(CliError::from_protocol)?;
    let binding = protocol::binding_report(spec).map_err(CliError::from_protocol)?;

    let mut pairs: Vec<(&StateVector, &StateVector)> =
        spec.branches().iter().map(|b| (&b.psi0, &b.psi1)).collect();
    pairs.push((&big0, &big1));

    let mut uhlmann: f64 = 0.0;
    for (psi0, psi1) in &pairs {
        let tn = linalg::trace_norm(&attack::cross_gram(psi0, psi1).map_err(err)?).map_err(err)?;
        let f = qstate::fidelity(&qstate::partial_trace_alice(psi0), &qstate::partial_trace_alice(psi1))
            .map_err(err)?;
        uhlmann = uhlmann.max((tn - f).abs());
    }

    let bound = (-binding.bound_residual).max(0.0);

    // Alice's unitaries must leave Bob's reduced state untouched.
    let mut signalling: f64 = 0.0;
    let unitaries = binding.per_branch_plans.iter().map(|p| &p.unitary);
    for ((psi0, _), u) in pairs.iter().zip(unitaries.chain([&binding.common.unitary])) {
        let moved = qstate::apply_alice_unitary(psi0, u).map_err(err)?;
        let d = qstate::trace_distance(&qstate::partial_trace_alice(psi0), &qstate::partial_trace_alice(&moved))
            .map_err(err)?;
        signalling = signalling.max(d);
    }

    let mut normalization = (spec.weights().iter().sum::<f64>() - 1.0).abs();
    for (psi0, psi1) in &pairs {
        normalization = normalization.max((psi0.norm() - 1.0).abs()).max((psi1.norm() - 1.0).abs());
    }

    let text = protofile::serialize(spec);
    let round_trip = match protofile::parse(&text) {
        Ok(p) if p.spec == *spec && protofile::serialize(&p.spec) == text => 0.0,
        _ => 1.0,
    };

    Ok([uhlmann, bound, signalling, normalization, round_trip])
}

fn checks(worst: [f64; 5], tol: f64) -> Vec<Check> {
    let names = ["uhlmann_identity", "bound_residual", "no_signalling", "normalization", "round_trip"];
    names
        .iter()
        .zip(worst)
        .map(|(&name, residual)| Check {
            name,
            residual,
            threshold: if name == "uhlmann_identity" { UHLMANN_TOL } else { tol },
        })
        .collect()
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - head;
    w
}

fn random_spec(rng: &mut ChaCha8Rng, index: usize) -> ProtocolSpec {
    let layout = SystemLayout::bipartite(rng.gen_range(1..=4), rng.gen_range(1..=3)).expect("small layout");
    let count = rng.gen_range(1..=4);
    let branches = (0..count)
        .map(|k| ProtocolBranch {
            omega_label: format!("w{k}"),
            psi0: StateVector::random(layout, rng),
            psi1: StateVector::random(layout, rng),
        })
        .collect();
    let weights = random_weights(rng, count);
    ProtocolSpec::new(format!("fuzz-{index}"), layout, branches, weights, Default::default())
        .expect("generated spec is valid")
}

pub fn verify(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let input = &args.input;
    let format = match input.format.unwrap_or(Format::Table) {
        Format::Csv => return Err(CliError::input("bad-format", "verify has no csv output")),
        f => f,
    };

    let (worst, count, digest) = match args.fuzz {
        Some(n) => {
            let seed = input.seed.unwrap_or(0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut worst = [0.0f64; 5];
            for i in 0..n {
                let r = residuals(&random_spec(&mut rng, i))?;
                for (w, x) in worst.iter_mut().zip(r) {
                    *w = w.max(x);
                }
            }
            (worst, n, digest(format!("fuzz count={n} seed={seed}\n").as_bytes()))
        }
        None => {
            let loaded = input::load(input)?;
            (residuals(&loaded.spec)?, 1, loaded.digest)
        }
    };

    let checks = checks(worst, input.tol);
    let failed = checks.iter().filter(|c| !c.passed()).count();
    let stdout = match format {
        Format::Json => {
            let list: Vec<Value> = checks
                .iter()
                .map(|c| {
                    json!({
                        "invariant": c.name,
                        "passed": c.passed(),
                        "residual": c.residual,
                        "threshold": c.threshold,
                    })
                })
                .collect();
            let results = json!({ "checks": list, "protocols": count, "passed": failed == 0 });
            envelope("verify", &digest, input.seed, results)
        }
        _ => {
            let mut s = String::new();
            for c in &checks {
                let status = if c.passed() { "PASS" } else { "FAIL" };
                s.push_str(&format!(
                    "{status} {} residual={} threshold={}\n",
                    c.name,
                    num(c.residual),
                    num(c.threshold)
                ));
            }
            s.push_str(&format!(
                "{} of {} invariants hold over {count} protocol(s)\n",
                checks.len() - failed,
                checks.len()
            ));
            s
        }
    };
    Ok(Outcome {
        stdout,
        code: if failed == 0 { 0 } else { EXIT_VERIFY },
    })
}
