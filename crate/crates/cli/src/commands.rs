use qbc_core::attack::{self, OracleConfig, ORACLE_MAX_DIM};
use qbc_core::protocol::{self, ProtocolSpec};
use qbc_core::CheatPlan;
use serde_json::{json, Value};

use crate::cli::{AttackArgs, Format, InputArgs, SweepArgs};
use crate::input::{self, family_digest, parse_params};
use crate::output::{envelope, num, pairs, table, CliError, Outcome, EXIT_INVARIANT};

/// Bob's verification model, stated alongside every attack report.
const VERIFICATION_MODEL: &str = "Bob accepts an unveiling of 1 by projecting onto |psi1>; \
success probability is |<psi1|(U (x) I)|psi0>|^2";

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

fn reject_csv(format: Option<Format>, command: &str) -> Result<Format, CliError> {
    match format.unwrap_or(Format::Json) {
        Format::Csv => Err(CliError::input("bad-format", format!("{command} has no csv output"))),
        f => Ok(f),
    }
}

pub fn analyze(args: &InputArgs) -> Result<Outcome, CliError> {
    let format = reject_csv(args.format, "analyze")?;
    let loaded = input::load(args)?;
    let report = protocol::concealing_report(&loaded.spec).map_err(CliError::from_protocol)?;
    let stdout = match format {
        Format::Table => {
            let rows: Vec<Vec<String>> = report
                .per_branch
                .iter()
                .map(|b| vec![b.omega_label.clone(), num(b.fidelity), num(b.trace_distance)])
                .collect();
            let mut s = table(&["omega", "fidelity", "trace_distance"], &rows);
            s.push('\n');
            s.push_str(&pairs(&[
                ("entangled_fidelity", num(report.entangled_fidelity)),
                ("entangled_trace_distance", num(report.entangled_trace_distance)),
                ("epsilon", num(report.epsilon)),
            ]));
            s
        }
        _ => envelope("analyze", &loaded.digest, args.seed, to_value(&report)),
    };
    Ok(Outcome::ok(stdout))
}

struct OracleRow {
    label: String,
    closed_form: f64,
    oracle: f64,
}

impl OracleRow {
    fn json(&self) -> Value {
        json!({
            "omega": self.label,
            "closed_form_overlap": self.closed_form,
            "oracle_overlap": self.oracle,
            "difference": self.closed_form - self.oracle,
        })
    }
}

fn oracle_rows(
    spec: &ProtocolSpec,
    plans: &[CheatPlan],
    common: &CheatPlan,
    seed: u64,
) -> Result<Vec<OracleRow>, CliError> {
    let dim_a = spec.layout().dim_a();
    if dim_a > ORACLE_MAX_DIM {
        return Err(CliError::input(
            "oracle-dimension",
            format!("--oracle-check needs dim a <= {ORACLE_MAX_DIM}, got {dim_a}"),
        ));
    }
    let config = OracleConfig { seed, ..OracleConfig::default() };
    let run = |psi0, psi1| {
        attack::brute_force_unitary_oracle(psi0, psi1, config)
            .map(|p| p.achieved_overlap)
            .map_err(|e| CliError::input("oracle", e.to_string()))
    };
    let mut rows = Vec::new();
    for (br, plan) in spec.branches().iter().zip(plans) {
        rows.push(OracleRow {
            label: br.omega_label.clone(),
            closed_form: plan.achieved_overlap,
            oracle: run(&br.psi0, &br.psi1)?,
        });
    }
    let (big0, big1) = protocol::entangle_choices(spec).map_err(CliError::from_protocol)?;
    rows.push(OracleRow {
        label: "common".into(),
        closed_form: common.achieved_overlap,
        oracle: run(&big0, &big1)?,
    });
    Ok(rows)
}

pub fn attack(args: &AttackArgs) -> Result<Outcome, CliError> {
    let format = reject_csv(args.input.format, "attack")?;
    let loaded = input::load(&args.input)?;
    let spec = &loaded.spec;
    let report = protocol::binding_report(spec).map_err(CliError::from_protocol)?;
    let oracle = if args.oracle_check {
        Some(oracle_rows(spec, &report.per_branch_plans, &report.common, args.input.seed.unwrap_or(0))?)
    } else {
        None
    };

    let stdout = match format {
        Format::Table => {
            let rows: Vec<Vec<String>> = spec
                .branches()
                .iter()
                .zip(&report.per_branch_plans)
                .zip(&report.diagnostics)
                .map(|((br, plan), d)| {
                    vec![
                        br.omega_label.clone(),
                        num(plan.achieved_overlap),
                        num(plan.success_probability),
                        num(d.delta),
                    ]
                })
                .collect();
            let mut s = table(&["omega", "overlap", "success_probability", "common_delta"], &rows);
            s.push('\n');
            s.push_str(&pairs(&[
                ("common_overlap", num(report.common.achieved_overlap)),
                ("common_success_probability", num(report.common.success_probability)),
                ("epsilon_tilde", num(report.epsilon_tilde)),
                ("bound_residual", num(report.bound_residual)),
            ]));
            if let Some(rows) = &oracle {
                let cells: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| vec![r.label.clone(), num(r.closed_form), num(r.oracle), num(r.closed_form - r.oracle)])
                    .collect();
                s.push('\n');
                s.push_str(&table(&["oracle", "closed_form", "found", "difference"], &cells));
            }
            s
        }
        _ => {
            let per_branch: Vec<Value> = spec
                .branches()
                .iter()
                .zip(&report.per_branch_plans)
                .map(|(br, plan)| {
                    let mut v = to_value(plan);
                    v["omega"] = json!(br.omega_label);
                    v
                })
                .collect();
            let mut results = json!({
                "per_branch": per_branch,
                "common": to_value(&report.common),
                "diagnostics": to_value(&report.diagnostics),
                "epsilon_tilde": report.epsilon_tilde,
                "bound_residual": report.bound_residual,
                "verification_model": VERIFICATION_MODEL,
            });
            if let Some(rows) = &oracle {
                results["oracle_check"] = Value::Array(rows.iter().map(OracleRow::json).collect());
            }
            envelope("attack", &loaded.digest, args.input.seed, results)
        }
    };
    let code = if report.bound_residual < -args.input.tol { EXIT_INVARIANT } else { 0 };
    if code != 0 {
        CliError {
            code,
            kind: "invariant-violation".into(),
            message: format!("bound residual {} below -{}", num(report.bound_residual), num(args.input.tol)),
            position: None,
        }
        .report();
    }
    Ok(Outcome { stdout, code })
}

pub fn sweep(args: &SweepArgs) -> Result<Outcome, CliError> {
    let input = &args.input;
    let family = input
        .family
        .as_deref()
        .ok_or_else(|| CliError::input("no-input", "sweep needs --family"))?;
    let params = parse_params(&input.params)?;
    let points = protocol::sweep(family, &params, &args.n_values).map_err(CliError::from_protocol)?;
    let header = ["n", "epsilon", "cheat_probability", "delta_max"];
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.n.to_string(), num(p.epsilon), num(p.cheat_probability), num(p.delta_max)])
        .collect();
    let stdout = match input.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut s = header.join(",");
            s.push('\n');
            for r in &rows {
                s.push_str(&r.join(","));
                s.push('\n');
            }
            s
        }
        Format::Table => table(&header, &rows),
        Format::Json => {
            let results = json!({
                "family": family,
                "params": params,
                "points": to_value(&points),
            });
            envelope("sweep", &family_digest(family, &params), input.seed, results)
        }
    };
    Ok(Outcome::ok(stdout))
}
