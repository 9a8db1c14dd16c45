//! JSON formats. Parsing errors carry the line, column and field path;
//! output uses shortest round-trip float formatting, so writing and
//! re-reading a value is lossless and identical inputs give identical bytes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimality::{Multipliers, ProblemSpec};
use crate::symmat::SymMat;

/// Deserializes `text`, reporting `what`, the position and the field path
/// on failure.
pub fn parse<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path == "." { String::new() } else { format!(" at field `{path}`") };
        Error::Parse(format!("{what}{at}: {inner}"))
    })?;
    de.end().map_err(|e| Error::Parse(format!("{what}: {e}")))?;
    Ok(value)
}

/// `{"n": 2, "rows": [[..], [..]]}` or a bare array of rows.
pub fn parse_matrix(text: &str) -> Result<SymMat> {
    parse(text, "matrix")
}

/// Parses and validates a problem description.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let spec: ProblemSpec = parse(text, "problem")?;
    spec.validate()?;
    Ok(spec)
}

/// One multiplier object or an array of them.
pub fn parse_multipliers(text: &str) -> Result<Vec<Multipliers>> {
    if text.trim_start().starts_with('[') {
        parse(text, "multipliers")
    } else {
        Ok(vec![parse(text, "multipliers")?])
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointInput {
    Bare(Vec<f64>),
    Obj {
        x: Vec<f64>,
    },
}

/// `[x₁, …]` or `{"x": [x₁, …]}`.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    let raw: serde_json::Value = parse(text, "point")?;
    match serde_json::from_value(raw) {
        Ok(PointInput::Bare(x)) | Ok(PointInput::Obj { x }) => Ok(x),
        Err(e) => Err(Error::Parse(format!("point: expected an array or {{\"x\": [...]}}: {e}"))),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}
