use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use shared_lasso::dsl::MseTable;
use shared_lasso::{Error, Result};

use crate::Cli;

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Run record written next to every command's outputs.
pub struct Manifest {
    outputs: Vec<String>,
    extra: Map<String, Value>,
}

impl Manifest {
    pub fn new() -> Self {
        Manifest {
            outputs: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn output(&mut self, path: &Path, out_dir: &Path) {
        let rel = path.strip_prefix(out_dir).unwrap_or(path);
        self.outputs.push(rel.display().to_string());
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.extra.insert(
            key.to_string(),
            serde_json::to_value(value).expect("json values serialize"),
        );
    }

    pub fn write(mut self, cli: &Cli, out_dir: &Path) -> Result<()> {
        self.outputs.sort();
        let argv: Vec<String> = std::env::args().collect();
        let doc = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "argv": argv,
            "seed": cli.seed,
            "threads": cli.threads,
            "command": cli.command,
            "outputs": self.outputs,
            "details": self.extra,
        });
        write_json(&out_dir.join("manifest.json"), &doc)
    }
}

/// Header `model,weights,all,<groups...>`.
pub fn mse_header(groups: &[String]) -> String {
    let mut fields = vec!["model".to_string(), "weights".into(), "all".into()];
    fields.extend(groups.iter().cloned());
    csv_line(&fields)
}

pub fn mse_row(model: &str, weights: &str, t: &MseTable) -> String {
    let mut fields = vec![model.to_string(), weights.to_string(), t.all.to_string()];
    fields.extend(t.per_group.iter().map(|v| v.to_string()));
    csv_line(&fields)
}

/// One CSV record, quoted where needed, LF-terminated.
pub fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn in_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
