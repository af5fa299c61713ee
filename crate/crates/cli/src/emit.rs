//! Rendering of results as CSV or JSON.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;
use crate::Format;

/// Floats are written with 17 significant digits, which round-trips every f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_f64(*x),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Float(x) => Value::from(*x),
            Cell::Text(s) => Value::from(s.clone()),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        // seeds above i64::MAX are kept exact as text
        i64::try_from(v).map(Cell::Int).unwrap_or_else(|_| Cell::Text(v.to_string()))
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Long-format table with fixed column order and trailing `# key=value` notes.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<(&'static str, Cell)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &'static str, value: impl Into<Cell>) {
        self.notes.push((key, value.into()));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    Table(Table),
    Json(Value),
}

impl Output {
    pub fn json(value: &impl Serialize) -> Result<Self, CliError> {
        serde_json::to_value(value)
            .map(Output::Json)
            .map_err(|e| CliError::Compute(format!("cannot serialize results: {e}")))
    }
}

/// serde_json formatter that writes floats with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17);
    value.serialize(&mut ser).expect("writing to a Vec cannot fail");
    out.push(b'\n');
    out
}

/// Render `output` with the config digest embedded.
pub fn render(output: &Output, format: Format, digest: &str) -> Result<Vec<u8>, CliError> {
    match (output, format) {
        (Output::Table(t), Format::Csv) => {
            let mut s = t.columns.join(",");
            s.push('\n');
            for row in &t.rows {
                s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            for (k, v) in &t.notes {
                s.push_str(&format!("# {k}={}\n", v.csv()));
            }
            s.push_str(&format!("# config_digest={digest}\n"));
            Ok(s.into_bytes())
        }
        (Output::Table(t), Format::Json) => {
            let rows = t
                .rows
                .iter()
                .map(|r| Value::Object(t.columns.iter().map(|c| c.to_string()).zip(r.iter().map(Cell::json)).collect()))
                .collect();
            let mut obj = Map::new();
            obj.insert("rows".into(), Value::Array(rows));
            for (k, v) in &t.notes {
                obj.insert(k.to_string(), v.json());
            }
            obj.insert("config_digest".into(), Value::from(digest));
            Ok(to_json_bytes(&Value::Object(obj)))
        }
        (Output::Json(v), Format::Json) => {
            let mut obj = match v {
                Value::Object(m) => m.clone(),
                other => Map::from_iter([("results".to_string(), other.clone())]),
            };
            obj.insert("config_digest".into(), Value::from(digest));
            Ok(to_json_bytes(&Value::Object(obj)))
        }
        (Output::Json(_), Format::Csv) => Err(CliError::config("format", "this subcommand only writes json")),
    }
}

/// The digest embedded in a rendered artifact, if any.
pub fn embedded_digest(bytes: &[u8]) -> Option<String> {
    let text = std::str::from_utf8(bytes).ok()?;
    if let Some(line) = text.lines().rev().find(|l| l.starts_with("# config_digest=")) {
        return Some(line["# config_digest=".len()..].to_string());
    }
    let v: Value = serde_json::from_str(text).ok()?;
    v.get("config_digest")?.as_str().map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-300, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_and_json_tables() {
        let mut t = Table::new(&["n", "p"]);
        t.push(vec![4usize.into(), 0.375.into()]);
        t.note("verdict", "ok");
        let csv = String::from_utf8(render(&Output::Table(t.clone()), Format::Csv, "ab").unwrap()).unwrap();
        assert_eq!(csv, "n,p\n4,3.7500000000000000e-1\n# verdict=ok\n# config_digest=ab\n");
        let json = render(&Output::Table(t), Format::Json, "ab").unwrap();
        let v: Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["rows"][0]["p"], 0.375);
        assert_eq!(embedded_digest(&json).unwrap(), "ab");
        assert_eq!(embedded_digest(csv.as_bytes()).unwrap(), "ab");
        assert!(render(&Output::Json(Value::Null), Format::Csv, "x").is_err());
    }
}
