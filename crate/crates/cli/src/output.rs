use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Column-ordered result with the metadata every output carries.
#[derive(Debug, Clone)]
pub struct Table {
    pub command: String,
    pub seed: u64,
    /// Resolved parameters; hashed into the config digest.
    pub params: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn new(command: &str, seed: u64, params: Value, columns: &[&str]) -> Self {
        Table {
            command: command.to_string(),
            seed,
            params,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.params.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(&format!("# command: {}\n", self.command));
        out.push_str(&format!("# version: {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("# seed: {}\n", self.seed));
        out.push_str(&format!("# config_sha256: {}\n", self.config_hash()));
        for (k, v) in &self.notes {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell))?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner()?)?);
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let notes: serde_json::Map<String, Value> =
            self.notes.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let doc = json!({
            "metadata": {
                "command": self.command,
                "version": env!("CARGO_PKG_VERSION"),
                "seed": self.seed,
                "config_sha256": self.config_hash(),
                "params": self.params,
                "notes": notes,
            },
            "columns": self.columns,
            "rows": self.rows,
        });
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Plotting script for a CSV file holding this table: every numeric
    /// column after the first against the first.
    pub fn gnuplot(&self, data_path: &Path) -> String {
        let numeric: Vec<usize> = (1..self.columns.len())
            .filter(|&c| self.rows.iter().all(|r| r[c].is_number()))
            .collect();
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set datafile commentschars '#'\n");
        s.push_str("set key autotitle columnhead\n");
        s.push_str(&format!("set xlabel '{}'\n", self.columns[0]));
        let name = data_path.display().to_string().replace('\'', "''");
        let plots: Vec<String> = numeric
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let file = if k == 0 { format!("'{name}'") } else { "''".to_string() };
                format!("{file} using 1:{} with linespoints", c + 1)
            })
            .collect();
        if !plots.is_empty() {
            s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
        }
        s
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn emit(table: &Table, format: Format, out: Option<&Path>, gnuplot: Option<&Path>) -> Result<()> {
    let text = table.render(format)?;
    match out {
        Some(path) => fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    if let Some(script) = gnuplot {
        let Some(data) = out else { bail!("--gnuplot needs --out so the script can reference the data file") };
        if format != Format::Csv {
            bail!("--gnuplot plots CSV output");
        }
        fs::write(script, table.gnuplot(data)).with_context(|| format!("writing {}", script.display()))?;
    }
    Ok(())
}
