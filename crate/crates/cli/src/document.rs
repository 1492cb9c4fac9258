//! Problem documents: JSON in, validated with every error reported at once.

use std::fmt;

use dilind_core::functions::{Phi, TestFunction};
use dilind_core::measure::norm::NormMethod;
use dilind_core::serde_complex::ReIm;
use dilind_core::spectral::JordanBlock;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    CrossSection,
    Decide,
    Witness,
    Certify,
    VerifyNorm,
    LambdaProbe,
    ExportOrbit,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Analyze,
        Command::CrossSection,
        Command::Decide,
        Command::Witness,
        Command::Certify,
        Command::VerifyNorm,
        Command::LambdaProbe,
        Command::ExportOrbit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::CrossSection => "cross-section",
            Command::Decide => "decide",
            Command::Witness => "witness",
            Command::Certify => "certify",
            Command::VerifyNorm => "verify-norm",
            Command::LambdaProbe => "lambda-probe",
            Command::ExportOrbit => "export-orbit",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Commands that draw random samples and therefore need a seed.
    pub fn needs_seed(&self) -> bool {
        !matches!(self, Command::Analyze | Command::ExportOrbit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Mode {
    #[default]
    General,
    Structured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BlockSpec {
    #[serde(default)]
    pub real: Vec<JordanBlock>,
    #[serde(default)]
    pub upper: Vec<JordanBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

impl BlockSpec {
    pub fn dim(&self) -> usize {
        self.real.iter().map(|b| b.size).sum::<usize>() + 2 * self.upper.iter().map(|b| b.size).sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl TGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProblemDocument {
    pub command: Command,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlockSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<ReIm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<TestFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<NormMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<TGrid>,
}

impl ProblemDocument {
    pub fn new(command: Command, matrix: Vec<Vec<f64>>) -> Self {
        ProblemDocument {
            command,
            mode: Mode::General,
            matrix: Some(matrix),
            blocks: None,
            times: None,
            coefficients: None,
            p: None,
            function: None,
            seed: None,
            samples: None,
            method: None,
            window: None,
            grid: None,
            point: None,
            t_grid: None,
        }
    }

    pub fn dim(&self) -> usize {
        match (&self.matrix, &self.blocks) {
            (Some(m), _) => m.len(),
            (None, Some(b)) => b.dim(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ValidationError {
    SchemaError { path: String, expected: String },
    DimensionMismatch { path: String, message: String },
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationError::SchemaError { path, expected } => write!(f, "{path}: expected {expected}"),
            ValidationError::DimensionMismatch { path, message } => write!(f, "{path}: {message}"),
        }
    }
}

struct Checker {
    errors: Vec<ValidationError>,
}

impl Checker {
    fn schema(&mut self, path: &str, expected: impl Into<String>) {
        self.errors.push(ValidationError::SchemaError {
            path: path.into(),
            expected: expected.into(),
        });
    }

    fn dimension(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(ValidationError::DimensionMismatch {
            path: path.into(),
            message: message.into(),
        });
    }

    fn number(&mut self, v: &Value, path: &str) -> Option<f64> {
        let x = v.as_f64();
        if x.is_none() {
            self.schema(path, "number");
        }
        x
    }

    fn numbers(&mut self, v: &Value, path: &str) -> Option<Vec<f64>> {
        let Some(arr) = v.as_array() else {
            self.schema(path, "array of numbers");
            return None;
        };
        let xs: Vec<Option<f64>> = arr
            .iter()
            .enumerate()
            .map(|(i, x)| self.number(x, &format!("{path}[{i}]")))
            .collect();
        xs.into_iter().collect()
    }

    fn unsigned(&mut self, v: &Value, path: &str, min: u64) -> Option<u64> {
        match v.as_u64() {
            Some(x) if x >= min => Some(x),
            _ => {
                self.schema(path, format!("integer >= {min}"));
                None
            }
        }
    }

    fn square(&mut self, v: &Value, path: &str) -> Option<usize> {
        let Some(rows) = v.as_array() else {
            self.schema(path, "array of rows");
            return None;
        };
        if rows.is_empty() {
            self.dimension(path, "matrix must have at least one row");
            return None;
        }
        let mut ok = true;
        for (i, r) in rows.iter().enumerate() {
            match self.numbers(r, &format!("{path}[{i}]")) {
                Some(r) if r.len() != rows.len() => {
                    self.dimension(
                        &format!("{path}[{i}]"),
                        format!("row has {} entries but the matrix has {} rows", r.len(), rows.len()),
                    );
                    ok = false;
                }
                Some(_) => {}
                None => ok = false,
            }
        }
        ok.then_some(rows.len())
    }

    fn blocks(&mut self, v: &Value, path: &str) -> Option<usize> {
        let Some(obj) = v.as_object() else {
            self.schema(path, "object with `real`, `upper` and optional `basis`");
            return None;
        };
        let mut n = 0;
        let mut ok = true;
        for key in obj.keys() {
            if !["real", "upper", "basis"].contains(&key.as_str()) {
                self.schema(&format!("{path}.{key}"), "no such field");
                ok = false;
            }
        }
        for (key, factor) in [("real", 1), ("upper", 2)] {
            let Some(list) = obj.get(key) else { continue };
            let Some(list) = list.as_array() else {
                self.schema(&format!("{path}.{key}"), "array of blocks");
                ok = false;
                continue;
            };
            for (i, b) in list.iter().enumerate() {
                let bp = format!("{path}.{key}[{i}]");
                match serde_json::from_value::<JordanBlock>(b.clone()) {
                    Ok(block) if block.size >= 1 => n += factor * block.size,
                    _ => {
                        self.schema(&bp, "{\"eigenvalue\": {\"re\": number, \"im\": number}, \"size\": integer >= 1}");
                        ok = false;
                    }
                }
            }
        }
        if n == 0 && ok {
            self.dimension(path, "block specification is empty");
            ok = false;
        }
        if let Some(basis) = obj.get("basis") {
            match self.square(basis, &format!("{path}.basis")) {
                Some(m) if m != n => {
                    self.dimension(&format!("{path}.basis"), format!("basis is {m}x{m} but the blocks span {n} dimensions"));
                    ok = false;
                }
                Some(_) => {}
                None => ok = false,
            }
        }
        ok.then_some(n)
    }
}

fn require(c: &mut Checker, obj: &Map<String, Value>, key: &str, command: Command) -> bool {
    if obj.contains_key(key) {
        true
    } else {
        c.schema(&format!("$.{key}"), format!("field required by `{}`", command.name()));
        false
    }
}

const FIELDS: [&str; 15] = [
    "command", "mode", "matrix", "blocks", "times", "coefficients", "p", "function", "seed", "samples",
    "method", "window", "grid", "point", "tGrid",
];

/// Validates `value` and converts it; all problems are reported together.
pub fn validate(value: &Value) -> Result<ProblemDocument, Vec<ValidationError>> {
    let mut c = Checker { errors: Vec::new() };
    let Some(obj) = value.as_object() else {
        c.schema("$", "object");
        return Err(c.errors);
    };
    for key in obj.keys() {
        if !FIELDS.contains(&key.as_str()) {
            c.schema(&format!("$.{key}"), "no such field");
        }
    }
    let command = match obj.get("command").map(|v| v.as_str().and_then(Command::parse)) {
        Some(Some(cmd)) => Some(cmd),
        Some(None) => {
            let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
            c.schema("$.command", format!("one of {}", names.join(", ")));
            None
        }
        None => {
            c.schema("$.command", "command name");
            None
        }
    };
    let mode = match obj.get("mode") {
        None => Some(Mode::General),
        Some(v) => match v.as_str() {
            Some("general") => Some(Mode::General),
            Some("structured") => Some(Mode::Structured),
            _ => {
                c.schema("$.mode", "\"general\" or \"structured\"");
                None
            }
        },
    };
    let dim = match (obj.get("matrix"), obj.get("blocks")) {
        (Some(m), None) => {
            if mode == Some(Mode::Structured) {
                c.schema("$.blocks", "block specification in structured mode");
            }
            c.square(m, "$.matrix")
        }
        (None, Some(b)) => {
            if mode == Some(Mode::General) {
                c.schema("$.matrix", "matrix in general mode");
            }
            c.blocks(b, "$.blocks")
        }
        (Some(_), Some(_)) => {
            c.schema("$", "exactly one of `matrix` and `blocks`");
            None
        }
        (None, None) => {
            c.schema("$.matrix", "matrix or block specification");
            None
        }
    };

    let times = obj.get("times").and_then(|v| c.numbers(v, "$.times"));
    if let Some(t) = &times {
        if t.is_empty() {
            c.schema("$.times", "nonempty array");
        }
    }
    if let Some(v) = obj.get("coefficients") {
        match v.as_array() {
            Some(list) => {
                for (i, z) in list.iter().enumerate() {
                    if serde_json::from_value::<ReIm>(z.clone()).is_err() {
                        c.schema(&format!("$.coefficients[{i}]"), "{\"re\": number, \"im\": number}");
                    }
                }
                if let Some(t) = &times {
                    if list.len() != t.len() {
                        c.dimension("$.coefficients", format!("{} coefficients for {} times", list.len(), t.len()));
                    }
                }
            }
            None => c.schema("$.coefficients", "array of complex numbers"),
        }
    }
    if let Some(v) = obj.get("p") {
        if let Some(p) = c.number(v, "$.p") {
            if p < 1.0 {
                c.schema("$.p", "number >= 1");
            }
        }
    }
    if let Some(v) = obj.get("function") {
        match serde_json::from_value::<TestFunction>(v.clone()) {
            Ok(def) => {
                if let Some(n) = dim {
                    if let Err(e) = Phi::new(def, n) {
                        c.schema("$.function", format!("valid function for n = {n} ({e})"));
                    }
                }
            }
            Err(e) => c.schema("$.function", format!("test function ({e})")),
        }
    }
    if let Some(v) = obj.get("seed") {
        c.unsigned(v, "$.seed", 0);
    }
    if let Some(v) = obj.get("samples") {
        c.unsigned(v, "$.samples", 1);
    }
    if let Some(v) = obj.get("method") {
        if serde_json::from_value::<NormMethod>(v.clone()).is_err() {
            c.schema("$.method", "\"monteCarlo\" or \"quadrature\"");
        }
    }
    if let Some(v) = obj.get("window") {
        if let Some(w) = c.number(v, "$.window") {
            if w <= 0.0 {
                c.schema("$.window", "positive number");
            }
        }
    }
    if let Some(v) = obj.get("grid") {
        c.unsigned(v, "$.grid", 5);
    }
    if let Some(v) = obj.get("point") {
        if let (Some(x), Some(n)) = (c.numbers(v, "$.point"), dim) {
            if x.len() != n {
                c.dimension("$.point", format!("point has {} entries, expected {n}", x.len()));
            }
        }
    }
    if let Some(v) = obj.get("tGrid") {
        match serde_json::from_value::<TGrid>(v.clone()) {
            Ok(g) if g.count >= 1 => {}
            _ => c.schema("$.tGrid", "{\"start\": number, \"end\": number, \"count\": integer >= 1}"),
        }
    }

    if let Some(cmd) = command {
        let needed: &[&str] = match cmd {
            Command::Analyze | Command::CrossSection | Command::Witness => &[],
            Command::Decide => &["times", "p"],
            Command::Certify => &["function", "times"],
            Command::VerifyNorm | Command::LambdaProbe => &["function", "p"],
            Command::ExportOrbit => &["point", "tGrid"],
        };
        for key in needed {
            require(&mut c, obj, key, cmd);
        }
        if cmd.needs_seed() {
            require(&mut c, obj, "seed", cmd);
        }
    }

    if !c.errors.is_empty() {
        return Err(c.errors);
    }
    serde_json::from_value(value.clone()).map_err(|e| {
        vec![ValidationError::SchemaError {
            path: "$".into(),
            expected: e.to_string(),
        }]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    Syntax(String),
    Invalid(Vec<ValidationError>),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax(m) => write!(f, "malformed JSON: {m}"),
            ParseError::Invalid(errs) => {
                let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
                write!(f, "{}", lines.join("; "))
            }
        }
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemDocument, ParseError> {
    parse_problem_with_seed(text, None)
}

/// Parses, letting `seed` replace the document's seed before validation.
pub fn parse_problem_with_seed(text: &str, seed: Option<u64>) -> Result<ProblemDocument, ParseError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    if let (Some(s), Some(obj)) = (seed, value.as_object_mut()) {
        obj.insert("seed".into(), Value::from(s));
    }
    validate(&value).map_err(ParseError::Invalid)
}

/// Parses a document for an invoked `command`: the document's own `command`
/// may be omitted but must match when present.
pub fn parse_invocation(text: &str, command: Command, seed: Option<u64>) -> Result<ProblemDocument, ParseError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        match obj.get("command").and_then(Value::as_str) {
            None if !obj.contains_key("command") => {
                obj.insert("command".into(), Value::from(command.name()));
            }
            Some(name) if name == command.name() => {}
            _ => {
                return Err(ParseError::Invalid(vec![ValidationError::SchemaError {
                    path: "$.command".into(),
                    expected: format!("\"{}\" to match the invoked command", command.name()),
                }]))
            }
        }
    }
    parse_problem_with_seed(&value.to_string(), seed)
}

pub fn emit_problem(doc: &ProblemDocument) -> String {
    serde_json::to_string_pretty(doc).expect("problem documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_analyze() {
        let doc = parse_problem(r#"{"command": "analyze", "matrix": [[0, 0], [0, 0]]}"#).unwrap();
        assert_eq!(doc.command, Command::Analyze);
        assert_eq!(doc.dim(), 2);
    }

    #[test]
    fn non_square_is_a_dimension_mismatch() {
        let err = parse_problem(r#"{"command": "analyze", "matrix": [[1, 2], [3, 4], [5, 6]]}"#).unwrap_err();
        match err {
            ParseError::Invalid(errs) => {
                assert!(errs.iter().all(|e| matches!(e, ValidationError::DimensionMismatch { .. })));
                assert_eq!(errs.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_errors_are_collected() {
        let err = parse_problem(r#"{"command": "decide", "matrix": [[1]], "p": "two", "extra": 1}"#).unwrap_err();
        let ParseError::Invalid(errs) = err else { panic!() };
        let paths: Vec<String> = errs
            .iter()
            .map(|e| match e {
                ValidationError::SchemaError { path, .. } | ValidationError::DimensionMismatch { path, .. } => path.clone(),
            })
            .collect();
        for p in ["$.extra", "$.p", "$.times", "$.seed"] {
            assert!(paths.iter().any(|q| q == p), "missing {p} in {paths:?}");
        }
    }

    #[test]
    fn structured_mode_and_seed_override() {
        let text = r#"{"command": "witness", "mode": "structured",
            "blocks": {"upper": [{"eigenvalue": {"re": 0, "im": 1}, "size": 1}]}}"#;
        assert!(parse_problem(text).is_err());
        let doc = parse_problem_with_seed(text, Some(9)).unwrap();
        assert_eq!((doc.dim(), doc.seed), (2, Some(9)));
    }

    #[test]
    fn decide_document_for_the_coupled_rotation() {
        let text = r#"{"command": "decide", "matrix": [[0,1,0,0],[-1,0,0,0],[1,0,0,1],[0,1,-1,0]],
            "times": [0, 1, 2], "p": 2, "seed": 1}"#;
        let doc = parse_problem(text).unwrap();
        assert_eq!(doc.times.as_deref(), Some(&[0.0, 1.0, 2.0][..]));
        assert_eq!(parse_problem(&emit_problem(&doc)).unwrap(), doc);
    }
}
