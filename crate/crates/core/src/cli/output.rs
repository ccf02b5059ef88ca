//! Text output: CSV with `#` metadata lines, and JSON documents. Numbers are
//! written with 17 significant digits so files are stable byte for byte.

use std::fmt::Write as _;

use serde::Serialize;

use super::scenario::{Scenario, CSV_ECHO_PREFIX};

pub const TOOL: &str = "armdyn";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// `d.ddddddddddddddddde±x`, or `nan` / `inf` / `-inf`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Quotes a field containing a comma, quote or newline.
pub fn quote(field: &str) -> std::borrow::Cow<'_, str> {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\"")).into()
    } else {
        field.into()
    }
}

pub struct Csv {
    buf: String,
}

impl Csv {
    /// Starts a document with the tool line, the command and the scenario
    /// echo.
    pub fn new(command: &str, scenario: &Scenario) -> Self {
        let mut buf = String::new();
        writeln!(buf, "# {TOOL} {VERSION}").unwrap();
        writeln!(buf, "# command: {command}").unwrap();
        for line in scenario.to_toml().lines() {
            writeln!(buf, "{CSV_ECHO_PREFIX}{line}").unwrap();
        }
        Self { buf }
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        writeln!(self.buf, "# {key}: {value}").unwrap();
        self
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> &mut Self {
        let line: Vec<std::borrow::Cow<str>> = cells.iter().map(|c| quote(c.as_ref())).collect();
        self.buf.push_str(&line.join(","));
        self.buf.push('\n');
        self
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Common envelope of every JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario: Scenario,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: &str, scenario: &Scenario, body: T) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            scenario: scenario.clone(),
            body,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(-0.1), "-1.0000000000000001e-1");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-200, -7.5e300] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("(+,-)"), "\"(+,-)\"");
        assert_eq!(quote("a\"b"), "\"a\"\"b\"");
        assert_eq!(quote("x,\"y\""), "\"x,\"\"y\"\"\"");
        assert_eq!(quote("plain"), "plain");
    }

    #[test]
    fn csv_header_echoes_scenario() {
        let s = Scenario::default().resolve().unwrap();
        let mut c = Csv::new("simulate", &s);
        c.meta("note", "x").row(&["a", "b"]);
        let text = c.finish();
        assert!(text.starts_with("# armdyn "));
        assert_eq!(Scenario::parse(&text).unwrap(), s);
        assert!(text.ends_with("# note: x\na,b\n"));
    }
}
