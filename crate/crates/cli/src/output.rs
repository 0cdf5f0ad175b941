//! CSV and JSON writers with fixed numeric formatting.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::config::{RunConfig, CONFIG_BEGIN, CONFIG_END};

/// JSON formatter writing every float with 17 significant digits.
struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` to a JSON string with the fixed float format.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Serialize)]
struct Document<'a, T> {
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

/// JSON document whose `config` field holds the resolved run configuration.
pub fn json_document<T: Serialize>(config: &RunConfig, body: T) -> serde_json::Result<String> {
    to_json(&Document { config, body })
}

/// Shortest decimal that reads back to the same f64.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// A CSV table preceded by `# ` comment lines.
pub struct CsvTable {
    header: Vec<String>,
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(config: &RunConfig, columns: &[&str]) -> Self {
        let mut header = vec![CONFIG_BEGIN.to_string()];
        header.extend(config.to_kv().lines().map(|l| format!("# {l}")));
        header.push(CONFIG_END.to_string());
        CsvTable {
            header,
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Adds a `# key: value` line after the config block.
    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for h in &self.header {
            s.push_str(h);
            s.push('\n');
        }
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}
