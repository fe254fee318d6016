//! The `.qbc.json` protocol file format.
//!
//! ```json
//! {
//!   "branches": [
//!     {
//!       "omega": "flip",
//!       "psi0": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
//!       "psi1": [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]],
//!       "weight": 1.0
//!     }
//!   ],
//!   "dims": {"a": 2, "b": 2},
//!   "name": "example"
//! }
//! ```
//!
//! Amplitudes are Alice-major (`index = a·dim_b + b`), each a `[re, im]`
//! pair. `metadata`, when present, maps strings to strings.
//!
//! [`serialize`] emits the canonical form: keys sorted, floats in shortest
//! round-trip notation, fixed layout and indentation, empty metadata omitted.
//! Parsing keeps its own source positions so every error can point at the
//! offending token.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::protocol::{ProtocolBranch, ProtocolError, ProtocolSpec};
use crate::qstate::{StateVector, SystemLayout};

/// File extension for protocol documents.
pub const EXTENSION: &str = ".qbc.json";

/// Largest deviation of a state's norm from 1 accepted in a file.
pub const PARSE_NORM_TOL: f64 = 1e-6;

/// Files whose states deviate from unit norm by more than this are renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-12;

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtofileErrorKind {
    SyntaxError,
    BadComplex,
    DimMismatch,
    NotNormalized,
    DuplicateOmega,
    BadWeights,
}

impl ProtofileErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SyntaxError => "syntax-error",
            Self::BadComplex => "bad-complex",
            Self::DimMismatch => "dim-mismatch",
            Self::NotNormalized => "not-normalized",
            Self::DuplicateOmega => "duplicate-omega",
            Self::BadWeights => "bad-weights",
        }
    }
}

impl fmt::Display for ProtofileErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Location in the source text; line and column are 1-based, columns count bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Position {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at {position}: {message}")]
pub struct ProtofileError {
    pub kind: ProtofileErrorKind,
    pub position: Position,
    pub message: String,
}

impl ProtofileError {
    fn new(kind: ProtofileErrorKind, position: Position, message: impl Into<String>) -> Self {
        Self {
            kind,
            position,
            message: message.into(),
        }
    }
}

/// Non-fatal finding, currently only renormalization of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub position: Position,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedProtocol {
    pub spec: ProtocolSpec,
    pub warnings: Vec<Warning>,
}

// ---------------------------------------------------------------------------
// JSON with positions

#[derive(Debug, Clone)]
enum Kind {
    Null,
    Bool,
    Number(f64),
    Str(String),
    Array(Vec<Node>),
    Object(Vec<(String, Node)>),
}

#[derive(Debug, Clone)]
struct Node {
    kind: Kind,
    pos: Position,
}

impl Node {
    fn type_name(&self) -> &'static str {
        match self.kind {
            Kind::Null => "null",
            Kind::Bool => "boolean",
            Kind::Number(_) => "number",
            Kind::Str(_) => "string",
            Kind::Array(_) => "array",
            Kind::Object(_) => "object",
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            line_start: 0,
        }
    }

    fn here(&self) -> Position {
        Position {
            offset: self.pos,
            line: self.line,
            column: self.pos - self.line_start + 1,
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> ProtofileError {
        ProtofileError::new(ProtofileErrorKind::SyntaxError, self.here(), msg)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(b)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.bump();
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), ProtofileError> {
        if self.peek() == Some(b) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{}'", b as char)))
        }
    }

    fn value(&mut self, depth: usize) -> Result<Node, ProtofileError> {
        if depth > MAX_DEPTH {
            return Err(self.syntax("nesting too deep"));
        }
        self.skip_ws();
        let pos = self.here();
        let kind = match self.peek() {
            None => return Err(self.syntax("unexpected end of input")),
            Some(b'{') => self.object(depth)?,
            Some(b'[') => self.array(depth)?,
            Some(b'"') => Kind::Str(self.string()?),
            Some(b't') => self.keyword("true", Kind::Bool)?,
            Some(b'f') => self.keyword("false", Kind::Bool)?,
            Some(b'n') => self.keyword("null", Kind::Null)?,
            Some(b'-' | b'0'..=b'9') => Kind::Number(self.number()?),
            Some(_) => return Err(self.syntax("unexpected character")),
        };
        Ok(Node { kind, pos })
    }

    fn keyword(&mut self, word: &str, kind: Kind) -> Result<Kind, ProtofileError> {
        if self.src[self.pos..].starts_with(word.as_bytes()) {
            for _ in 0..word.len() {
                self.bump();
            }
            Ok(kind)
        } else {
            Err(self.syntax("invalid literal"))
        }
    }

    fn digits(&mut self) -> usize {
        let mut n = 0;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.bump();
            n += 1;
        }
        n
    }

    fn number(&mut self) -> Result<f64, ProtofileError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.bump();
        }
        match self.peek() {
            Some(b'0') => {
                self.bump();
            }
            Some(b'1'..=b'9') => {
                self.digits();
            }
            _ => return Err(self.syntax("invalid number")),
        }
        if self.peek() == Some(b'.') {
            self.bump();
            if self.digits() == 0 {
                return Err(self.syntax("expected digits after decimal point"));
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.bump();
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.bump();
            }
            if self.digits() == 0 {
                return Err(self.syntax("expected exponent digits"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ASCII number");
        text.parse::<f64>().map_err(|_| self.syntax("invalid number"))
    }

    fn hex4(&mut self) -> Result<u32, ProtofileError> {
        let mut v = 0;
        for _ in 0..4 {
            let d = self
                .peek()
                .and_then(|b| (b as char).to_digit(16))
                .ok_or_else(|| self.syntax("invalid \\u escape"))?;
            self.bump();
            v = v * 16 + d;
        }
        Ok(v)
    }

    fn string(&mut self) -> Result<String, ProtofileError> {
        self.expect(b'"')?;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.syntax("unterminated string")),
                Some(b'"') => {
                    self.bump();
                    break;
                }
                Some(b'\\') => {
                    self.bump();
                    let c = match self.bump() {
                        Some(b'"') => '"',
                        Some(b'\\') => '\\',
                        Some(b'/') => '/',
                        Some(b'b') => '\u{8}',
                        Some(b'f') => '\u{c}',
                        Some(b'n') => '\n',
                        Some(b'r') => '\r',
                        Some(b't') => '\t',
                        Some(b'u') => {
                            let hi = self.hex4()?;
                            let code = if (0xD800..0xDC00).contains(&hi) {
                                if !(self.peek() == Some(b'\\') && self.src.get(self.pos + 1) == Some(&b'u')) {
                                    return Err(self.syntax("unpaired surrogate"));
                                }
                                self.bump();
                                self.bump();
                                let lo = self.hex4()?;
                                if !(0xDC00..0xE000).contains(&lo) {
                                    return Err(self.syntax("unpaired surrogate"));
                                }
                                0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                            } else {
                                hi
                            };
                            char::from_u32(code).ok_or_else(|| self.syntax("invalid code point"))?
                        }
                        _ => return Err(self.syntax("invalid escape")),
                    };
                    let mut buf = [0u8; 4];
                    out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                }
                Some(b) if b < 0x20 => return Err(self.syntax("control character in string")),
                Some(b) => {
                    self.bump();
                    out.push(b);
                }
            }
        }
        // the source is a &str, so byte runs copied between quotes stay valid UTF-8
        Ok(String::from_utf8(out).expect("valid UTF-8"))
    }

    fn array(&mut self, depth: usize) -> Result<Kind, ProtofileError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.bump();
            return Ok(Kind::Array(items));
        }
        loop {
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.bump();
                }
                Some(b']') => {
                    self.bump();
                    return Ok(Kind::Array(items));
                }
                _ => return Err(self.syntax("expected ',' or ']'")),
            }
        }
    }

    fn object(&mut self, depth: usize) -> Result<Kind, ProtofileError> {
        self.expect(b'{')?;
        let mut fields: Vec<(String, Node)> = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.bump();
            return Ok(Kind::Object(fields));
        }
        loop {
            self.skip_ws();
            let key_pos = self.here();
            if self.peek() != Some(b'"') {
                return Err(self.syntax("expected object key"));
            }
            let key = self.string()?;
            if fields.iter().any(|(k, _)| *k == key) {
                return Err(ProtofileError::new(
                    ProtofileErrorKind::SyntaxError,
                    key_pos,
                    format!("duplicate key {key:?}"),
                ));
            }
            self.skip_ws();
            self.expect(b':')?;
            let v = self.value(depth + 1)?;
            fields.push((key, v));
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.bump();
                }
                Some(b'}') => {
                    self.bump();
                    return Ok(Kind::Object(fields));
                }
                _ => return Err(self.syntax("expected ',' or '}'")),
            }
        }
    }
}

fn parse_json(text: &str) -> Result<Node, ProtofileError> {
    let mut lx = Lexer::new(text);
    let root = lx.value(0)?;
    lx.skip_ws();
    if lx.peek().is_some() {
        return Err(lx.syntax("trailing characters after document"));
    }
    Ok(root)
}

// ---------------------------------------------------------------------------
// schema

fn schema(pos: Position, msg: impl Into<String>) -> ProtofileError {
    ProtofileError::new(ProtofileErrorKind::SyntaxError, pos, msg)
}

struct Fields<'a> {
    pos: Position,
    fields: &'a [(String, Node)],
}

impl<'a> Fields<'a> {
    fn of(node: &'a Node, what: &str, allowed: &[&str]) -> Result<Self, ProtofileError> {
        let Kind::Object(fields) = &node.kind else {
            return Err(schema(node.pos, format!("{what} must be an object, found {}", node.type_name())));
        };
        if let Some((k, v)) = fields.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(schema(v.pos, format!("unknown field {k:?} in {what}")));
        }
        Ok(Self { pos: node.pos, fields })
    }

    fn get(&self, key: &str) -> Option<&'a Node> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn require(&self, key: &str, what: &str) -> Result<&'a Node, ProtofileError> {
        self.get(key)
            .ok_or_else(|| schema(self.pos, format!("{what} is missing field {key:?}")))
    }
}

fn as_str<'a>(node: &'a Node, what: &str) -> Result<&'a str, ProtofileError> {
    match &node.kind {
        Kind::Str(s) => Ok(s),
        _ => Err(schema(node.pos, format!("{what} must be a string, found {}", node.type_name()))),
    }
}

fn as_dim(node: &Node, what: &str) -> Result<usize, ProtofileError> {
    match node.kind {
        Kind::Number(x) if x >= 1.0 && x.fract() == 0.0 && x <= 1e9 => Ok(x as usize),
        _ => Err(ProtofileError::new(
            ProtofileErrorKind::DimMismatch,
            node.pos,
            format!("{what} must be a positive integer"),
        )),
    }
}

fn as_amplitudes(node: &Node, what: &str) -> Result<Vec<Complex64>, ProtofileError> {
    let Kind::Array(items) = &node.kind else {
        return Err(schema(node.pos, format!("{what} must be an array of [re, im] pairs")));
    };
    items
        .iter()
        .map(|item| {
            let bad = || {
                ProtofileError::new(
                    ProtofileErrorKind::BadComplex,
                    item.pos,
                    format!("{what} entries must be [re, im] arrays of two finite numbers"),
                )
            };
            let Kind::Array(pair) = &item.kind else {
                return Err(bad());
            };
            match pair.as_slice() {
                [Node { kind: Kind::Number(re), .. }, Node { kind: Kind::Number(im), .. }]
                    if re.is_finite() && im.is_finite() =>
                {
                    Ok(Complex64::new(*re, *im))
                }
                _ => Err(bad()),
            }
        })
        .collect()
}

fn load_state(
    node: &Node,
    layout: SystemLayout,
    what: &str,
    warnings: &mut Vec<Warning>,
) -> Result<StateVector, ProtofileError> {
    let amps = as_amplitudes(node, what)?;
    if amps.len() != layout.total() {
        return Err(ProtofileError::new(
            ProtofileErrorKind::DimMismatch,
            node.pos,
            format!(
                "{what} has {} amplitudes, dims require {}x{} = {}",
                amps.len(),
                layout.dim_a(),
                layout.dim_b(),
                layout.total()
            ),
        ));
    }
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let dev = (norm - 1.0).abs();
    if dev > PARSE_NORM_TOL {
        return Err(ProtofileError::new(
            ProtofileErrorKind::NotNormalized,
            node.pos,
            format!("{what} has norm {norm}"),
        ));
    }
    let state = if dev > RENORMALIZE_TOL {
        warnings.push(Warning {
            position: node.pos,
            message: format!("{what} had norm {norm}; renormalized"),
        });
        StateVector::normalized(layout, amps)
    } else {
        StateVector::new(layout, amps)
    };
    state.map_err(|e| ProtofileError::new(ProtofileErrorKind::DimMismatch, node.pos, e.to_string()))
}

/// Parses and validates a protocol document.
pub fn parse(text: &str) -> Result<ParsedProtocol, ProtofileError> {
    let root = parse_json(text)?;
    let top = Fields::of(&root, "document", &["name", "dims", "branches", "metadata"])?;
    let name = as_str(top.require("name", "document")?, "name")?.to_string();

    let dims_node = top.require("dims", "document")?;
    let dims = Fields::of(dims_node, "dims", &["a", "b"])?;
    let dim_a = as_dim(dims.require("a", "dims")?, "dims.a")?;
    let dim_b = as_dim(dims.require("b", "dims")?, "dims.b")?;
    let layout = SystemLayout::bipartite(dim_a, dim_b)
        .map_err(|e| ProtofileError::new(ProtofileErrorKind::DimMismatch, dims_node.pos, e.to_string()))?;

    let mut metadata = BTreeMap::new();
    if let Some(meta) = top.get("metadata") {
        let Kind::Object(fields) = &meta.kind else {
            return Err(schema(meta.pos, "metadata must be an object"));
        };
        for (k, v) in fields {
            metadata.insert(k.clone(), as_str(v, "metadata values")?.to_string());
        }
    }

    let branches_node = top.require("branches", "document")?;
    let Kind::Array(items) = &branches_node.kind else {
        return Err(schema(branches_node.pos, "branches must be an array"));
    };
    if items.is_empty() {
        return Err(schema(branches_node.pos, "branches must not be empty"));
    }
    let mut warnings = Vec::new();
    let mut branches = Vec::with_capacity(items.len());
    let mut weights = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let what = format!("branches[{i}]");
        let f = Fields::of(item, &what, &["omega", "weight", "psi0", "psi1"])?;
        let omega_node = f.require("omega", &what)?;
        let omega = as_str(omega_node, "omega")?.to_string();
        if branches.iter().any(|b: &ProtocolBranch| b.omega_label == omega) {
            return Err(ProtofileError::new(
                ProtofileErrorKind::DuplicateOmega,
                omega_node.pos,
                format!("omega {omega:?} appears more than once"),
            ));
        }
        let weight_node = f.require("weight", &what)?;
        let weight = match weight_node.kind {
            Kind::Number(w) if w.is_finite() && w > 0.0 => w,
            _ => {
                return Err(ProtofileError::new(
                    ProtofileErrorKind::BadWeights,
                    weight_node.pos,
                    "weight must be a positive number",
                ))
            }
        };
        let psi0 = load_state(f.require("psi0", &what)?, layout, &format!("{what}.psi0"), &mut warnings)?;
        let psi1 = load_state(f.require("psi1", &what)?, layout, &format!("{what}.psi1"), &mut warnings)?;
        branches.push(ProtocolBranch {
            omega_label: omega,
            psi0,
            psi1,
        });
        weights.push(weight);
    }

    let spec = ProtocolSpec::new(name, layout, branches, weights, metadata).map_err(|e| {
        let kind = match e {
            ProtocolError::BadWeights(_) | ProtocolError::WeightCount { .. } => ProtofileErrorKind::BadWeights,
            ProtocolError::DuplicateOmega(_) => ProtofileErrorKind::DuplicateOmega,
            _ => ProtofileErrorKind::DimMismatch,
        };
        ProtofileError::new(kind, branches_node.pos, e.to_string())
    })?;
    Ok(ParsedProtocol { spec, warnings })
}

/// Like [`parse`], for raw bytes that may not be UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<ParsedProtocol, ProtofileError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let line = 1 + valid.iter().filter(|&&b| b == b'\n').count();
            let line_start = valid.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            Err(ProtofileError::new(
                ProtofileErrorKind::SyntaxError,
                Position {
                    offset: e.valid_up_to(),
                    line,
                    column: e.valid_up_to() - line_start + 1,
                },
                "input is not valid UTF-8",
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// canonical output

/// Shortest decimal that parses back to the same double.
pub fn format_f64(x: f64) -> String {
    serde_json::to_string(&x).expect("finite float")
}

fn format_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn format_amplitudes(v: &[Complex64]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|z| format!("[{}, {}]", format_f64(z.re), format_f64(z.im)))
        .collect();
    format!("[{}]", parts.join(", "))
}

/// Canonical text of a protocol.
pub fn serialize(spec: &ProtocolSpec) -> String {
    let layout = spec.layout();
    let mut out = String::from("{\n  \"branches\": [\n");
    let n = spec.branches().len();
    for (i, (br, w)) in spec.branches().iter().zip(spec.weights()).enumerate() {
        out.push_str("    {\n");
        out.push_str(&format!("      \"omega\": {},\n", format_str(&br.omega_label)));
        out.push_str(&format!("      \"psi0\": {},\n", format_amplitudes(br.psi0.amplitudes())));
        out.push_str(&format!("      \"psi1\": {},\n", format_amplitudes(br.psi1.amplitudes())));
        out.push_str(&format!("      \"weight\": {}\n", format_f64(*w)));
        out.push_str(if i + 1 < n { "    },\n" } else { "    }\n" });
    }
    out.push_str("  ],\n");
    out.push_str(&format!("  \"dims\": {{\"a\": {}, \"b\": {}}},\n", layout.dim_a(), layout.dim_b()));
    if !spec.metadata().is_empty() {
        out.push_str("  \"metadata\": {\n");
        let entries: Vec<String> = spec
            .metadata()
            .iter()
            .map(|(k, v)| format!("    {}: {}", format_str(k), format_str(v)))
            .collect();
        out.push_str(&entries.join(",\n"));
        out.push_str("\n  },\n");
    }
    out.push_str(&format!("  \"name\": {}\n}}\n", format_str(spec.name())));
    out
}
