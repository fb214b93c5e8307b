//! Text, JSON and CSV rendering of command results.

use holdnet::scenarios::{format_sig, round_sig};
use serde_json::{json, Value};

/// Significant digits of every printed float.
pub const DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

pub fn num(v: f64) -> String {
    format_sig(v, DIGITS)
}

/// Rounds every non-integer number in `v` to [`DIGITS`] significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(f) = n.as_f64() {
                *v = json!(round_sig(f, DIGITS));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn aligned(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.columns);
        for row in &self.rows {
            out += &line(row);
        }
        out
    }

    fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

/// A command result in all three renderings.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub sha256: String,
    /// Scalar results; the CSV rendering of a report without a table is one
    /// row of these.
    pub fields: Vec<(String, String)>,
    pub table: Option<Table>,
    pub json: Value,
    /// Replaces the generic CSV body.
    pub csv_override: Option<String>,
}

impl Report {
    pub fn new(command: &'static str, sha256: &str) -> Self {
        Self {
            command,
            sha256: sha256.to_string(),
            fields: Vec::new(),
            table: None,
            json: Value::Null,
            csv_override: None,
        }
    }

    pub fn field(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => {
                let mut out = format!("command: {}\nconfig_sha256: {}\n", self.command, self.sha256);
                for (k, v) in &self.fields {
                    out += &format!("{k}: {v}\n");
                }
                if let Some(t) = &self.table {
                    out += "\n";
                    out += &t.aligned();
                }
                out
            }
            Format::Json => {
                let mut payload = self.json.clone();
                round_json(&mut payload);
                let doc = json!({
                    "command": self.command,
                    "config_sha256": self.sha256,
                    "result": payload,
                });
                serde_json::to_string_pretty(&doc).expect("json values serialise") + "\n"
            }
            Format::Csv => {
                let body = match (&self.csv_override, &self.table) {
                    (Some(s), _) => s.clone(),
                    (None, Some(t)) => t.csv(),
                    (None, None) => {
                        let mut t = Table::new(&[]);
                        t.columns = self.fields.iter().map(|(k, _)| k.clone()).collect();
                        t.push(self.fields.iter().map(|(_, v)| v.clone()).collect());
                        t.csv()
                    }
                };
                format!("# config_sha256: {}\n{body}", self.sha256)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_floats_are_rounded() {
        let mut v = json!({"a": 0.1234567890123456, "b": [3, 2.000000000000001], "c": "x"});
        round_json(&mut v);
        assert_eq!(v, json!({"a": 0.123456789012, "b": [3, 2.0], "c": "x"}));
    }

    #[test]
    fn renders_all_formats() {
        let mut r = Report::new("solve", "ab");
        r.field("z1", num(1.0 / 3.0)).field("note", "a, b");
        r.json = json!({"z1": 1.0 / 3.0});
        assert_eq!(
            r.render(Format::Text),
            "command: solve\nconfig_sha256: ab\nz1: 0.333333333333\nnote: a, b\n"
        );
        assert_eq!(r.render(Format::Csv), "# config_sha256: ab\nz1,note\n0.333333333333,\"a, b\"\n");
        assert!(r.render(Format::Json).contains("\"z1\": 0.333333333333"));
        let mut t = Table::new(&["x", "value"]);
        t.push(vec!["-10".into(), "1".into()]);
        r.table = Some(t);
        assert!(r.render(Format::Text).ends_with("\nx    value\n-10  1\n"));
    }
}
