use qbc_core::protocol::ProtocolError;
use qbc_core::protofile::{self, Position, ProtofileError};
use serde_json::{json, Map, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// What a command prints and how the process exits.
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    pub fn ok(stdout: String) -> Self {
        Self { stdout, code: EXIT_OK }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
    pub position: Option<Position>,
}

impl CliError {
    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            kind: kind.into(),
            message: message.into(),
            position: None,
        }
    }

    pub fn from_protofile(e: ProtofileError) -> Self {
        Self {
            code: EXIT_INPUT,
            kind: e.kind.as_str().into(),
            message: e.message,
            position: Some(e.position),
        }
    }

    pub fn from_protocol(e: ProtocolError) -> Self {
        let kind = match e {
            ProtocolError::UnknownFamily(_) => "unknown-family",
            ProtocolError::MissingParam { .. } | ProtocolError::InvalidParam { .. } => "bad-param",
            ProtocolError::BadWeights(_) | ProtocolError::WeightCount { .. } => "bad-weights",
            ProtocolError::DuplicateOmega(_) => "duplicate-omega",
            ProtocolError::DimensionCapExceeded(_) => "dimension-cap",
            _ => "invalid-protocol",
        };
        Self::input(kind, e.to_string())
    }

    fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("kind".into(), json!(self.kind));
        obj.insert("message".into(), json!(self.message));
        obj.insert("exit_code".into(), json!(self.code));
        if let Some(p) = self.position {
            obj.insert("offset".into(), json!(p.offset));
            obj.insert("line".into(), json!(p.line));
            obj.insert("column".into(), json!(p.column));
        }
        json!({ "error": obj })
    }

    pub fn report(&self) {
        eprintln!("{}", self.to_json());
    }

    pub fn warn(message: &str, position: Option<Position>) {
        let mut obj = Map::new();
        obj.insert("message".into(), json!(message));
        if let Some(p) = position {
            obj.insert("line".into(), json!(p.line));
            obj.insert("column".into(), json!(p.column));
        }
        eprintln!("{}", json!({ "warning": obj }));
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn envelope(command: &str, digest: &str, seed: Option<u64>, results: Value) -> String {
    let mut obj = Map::new();
    obj.insert("command".into(), json!(command));
    obj.insert("input_digest".into(), json!(digest));
    obj.insert("results".into(), results);
    obj.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
    if let Some(s) = seed {
        obj.insert("seed".into(), json!(s));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(obj)).expect("json value serializes");
    text.push('\n');
    text
}

pub fn num(x: f64) -> String {
    protofile::format_f64(x)
}

/// Left-aligned columns separated by two spaces.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let mut s = padded.join("  ").trim_end().to_string();
        s.push('\n');
        s
    };
    let mut out = line(headers.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// Two-column key/value block.
pub fn pairs(items: &[(&str, String)]) -> String {
    let rows: Vec<Vec<String>> = items.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
    let body = table(&["", ""], &rows);
    // drop the blank header line
    body.split_once('\n').map(|(_, rest)| rest.to_string()).unwrap_or_default()
}
