use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// One JSON object per line.
    Json,
    /// Top-level scalar fields; nested fields are JSON-encoded.
    Csv,
    /// Indented JSON, one document per record.
    Pretty,
}

/// Writes records as they are produced.
pub struct Sink {
    out: Box<dyn Write>,
    format: Format,
    header: Option<Vec<String>>,
}

impl Sink {
    pub fn new(path: Option<&Path>, format: Format) -> io::Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Sink {
            out,
            format,
            header: None,
        })
    }

    pub fn emit(&mut self, record: &Value) -> io::Result<()> {
        match self.format {
            Format::Json => writeln!(self.out, "{}", serde_json::to_string(record)?)?,
            Format::Pretty => writeln!(self.out, "{}", serde_json::to_string_pretty(record)?)?,
            Format::Csv => {
                let empty = Map::new();
                let obj = record.as_object().unwrap_or(&empty);
                if self.header.is_none() {
                    let keys: Vec<String> = obj.keys().cloned().collect();
                    writeln!(self.out, "{}", keys.join(","))?;
                    self.header = Some(keys);
                }
                let row: Vec<String> = self
                    .header
                    .as_ref()
                    .expect("header set")
                    .iter()
                    .map(|k| csv_cell(obj.get(k)))
                    .collect();
                writeln!(self.out, "{}", row.join(","))?;
            }
        }
        self.out.flush()
    }
}

fn csv_cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => quote(s),
        Some(Value::Number(n)) => n.to_string(),
        Some(Value::Bool(b)) => b.to_string(),
        Some(other) => quote(&other.to_string()),
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        assert_eq!(quote("plain"), "plain");
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(quote("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_cell(Some(&Value::Null)), "");
        assert_eq!(csv_cell(Some(&serde_json::json!([1, 2]))), "\"[1,2]\"");
    }
}
