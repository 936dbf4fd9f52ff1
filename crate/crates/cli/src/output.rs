//! Tabular results in CSV or JSON.

use std::io::Write;

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl Value {
    fn csv_field(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            // 17 significant digits round-trip every f64.
            Value::Float(v) => format!("{v:.16e}"),
            Value::Bool(v) => v.to_string(),
            Value::Text(v) => v.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Value::Int(v) => (*v).into(),
            Value::Float(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or_else(|| serde_json::Value::String(v.to_string())),
            Value::Bool(v) => (*v).into(),
            Value::Text(v) => v.clone().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Provenance written ahead of every table.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub config_hash: String,
    pub seed: u64,
    pub stamp: Option<u64>,
}

impl Header {
    fn line(&self) -> String {
        let mut s = format!(
            "# config_hash={} seed={} version={}",
            self.config_hash,
            self.seed,
            env!("CARGO_PKG_VERSION")
        );
        if let Some(t) = self.stamp {
            s.push_str(&format!(" stamp={t}"));
        }
        s
    }
}

pub fn render(table: &Table, header: &Header, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut out = Vec::new();
            writeln!(out, "{}", header.line()).map_err(io)?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&table.columns).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Value::csv_field)).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| CliError::Io(e.to_string()))
        }
        Format::Json => {
            let mut meta = serde_json::Map::new();
            meta.insert("config_hash".into(), header.config_hash.clone().into());
            meta.insert("seed".into(), header.seed.into());
            meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
            if let Some(t) = header.stamp {
                meta.insert("stamp".into(), t.into());
            }
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|r| serde_json::Value::Array(r.iter().map(Value::json).collect()))
                .collect();
            let doc = serde_json::json!({
                "meta": meta,
                "columns": table.columns,
                "rows": rows,
            });
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["L", "x", "name"]);
        t.push(vec![4usize.into(), 0.1.into(), "spin_spin(0,3)".into()]);
        let h = Header {
            config_hash: "ab".into(),
            seed: 7,
            stamp: None,
        };
        let text = String::from_utf8(render(&t, &h, Format::Csv).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# config_hash=ab seed=7 version="));
        assert_eq!(lines[1], "L,x,name");
        assert_eq!(lines[2], "4,1.0000000000000001e-1,\"spin_spin(0,3)\"");
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn json_layout() {
        let mut t = Table::new(&["L", "x"]);
        t.push(vec![4usize.into(), 0.5.into()]);
        let h = Header {
            config_hash: "ab".into(),
            seed: 7,
            stamp: Some(3),
        };
        let v: serde_json::Value = serde_json::from_slice(&render(&t, &h, Format::Json).unwrap()).unwrap();
        assert_eq!(v["meta"]["seed"], 7);
        assert_eq!(v["meta"]["stamp"], 3);
        assert_eq!(v["rows"][0][1], 0.5);
    }
}
