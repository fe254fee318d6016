use std::fs;

use qbc_core::protocol::{self, FamilyParams, ProtocolSpec};
use qbc_core::protofile;
use sha2::{Digest, Sha256};

use crate::cli::InputArgs;
use crate::output::CliError;

pub struct Loaded {
    pub spec: ProtocolSpec,
    pub digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn parse_params(raw: &[String]) -> Result<FamilyParams, CliError> {
    let mut params = FamilyParams::new();
    for item in raw {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::input("bad-param", format!("expected key=value, got {item:?}")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::input("bad-param", format!("empty key in {item:?}")));
        }
        if params.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(CliError::input("bad-param", format!("parameter {k:?} given twice")));
        }
    }
    Ok(params)
}

/// Digest of a family invocation: name and sorted parameters, one per line.
pub fn family_digest(family: &str, params: &FamilyParams) -> String {
    let mut text = format!("family={family}\n");
    for (k, v) in params {
        text.push_str(&format!("{k}={v}\n"));
    }
    digest(text.as_bytes())
}

pub fn load(args: &InputArgs) -> Result<Loaded, CliError> {
    match (&args.path, &args.family) {
        (Some(path), None) => {
            let bytes = fs::read(path)
                .map_err(|e| CliError::input("io-error", format!("{}: {e}", path.display())))?;
            let parsed = protofile::parse_bytes(&bytes).map_err(CliError::from_protofile)?;
            for w in &parsed.warnings {
                CliError::warn(&w.message, Some(w.position));
            }
            Ok(Loaded {
                spec: parsed.spec,
                digest: digest(&bytes),
            })
        }
        (None, Some(family)) => {
            let params = parse_params(&args.params)?;
            let spec = protocol::family_instantiate(family, &params).map_err(CliError::from_protocol)?;
            Ok(Loaded {
                spec,
                digest: family_digest(family, &params),
            })
        }
        _ => Err(CliError::input("no-input", "give a protocol file or --family")),
    }
}
