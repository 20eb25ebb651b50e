//! Output directory handling, result bundles and the human-readable summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Error;

pub const BUNDLE_FILE: &str = "bundle.json";
pub const RESULT_FILE: &str = "result.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub manifest_sha256: String,
    pub files: Vec<FileEntry>,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultBundle {
    pub fn read(dir: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(dir.join(BUNDLE_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", dir.join(BUNDLE_FILE).display())))
    }

    /// Recomputes every listed hash and reports the files that changed.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, Error> {
        let mut changed = Vec::new();
        for f in &self.files {
            if hash_file(&dir.join(&f.path))? != f.sha256 {
                changed.push(f.path.clone());
            }
        }
        Ok(changed)
    }
}

pub fn hash_file(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects the files a command produces, in creation order.
#[derive(Debug)]
pub struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    pub fn create(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Sink { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Error> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.register(name);
        Ok(())
    }

    /// Path for a writer that creates the file itself; registers it.
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.register(name);
        self.dir.join(name)
    }

    fn register(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn entries(&self) -> Result<Vec<FileEntry>, Error> {
        self.files
            .iter()
            .filter(|f| self.dir.join(f).exists())
            .map(|f| {
                let path = self.dir.join(f);
                let bytes = fs::metadata(&path)?.len();
                Ok(FileEntry { path: f.clone(), sha256: hash_file(&path)?, bytes })
            })
            .collect()
    }
}

/// CSV float format: scientific with 13 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.12e}")
}

/// Writes rows to an in-memory RFC 4180 CSV.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, Error>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// A gnuplot script plotting columns of a CSV file.
pub struct Plot<'a> {
    pub data: &'a str,
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub logx: bool,
    pub logy: bool,
    /// `(x column, y column, legend)`, 1-based columns.
    pub series: Vec<(usize, usize, &'a str)>,
}

impl Plot<'_> {
    pub fn script(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set key autotitle columnhead");
        let _ = writeln!(s, "set title '{}'", self.title);
        let _ = writeln!(s, "set xlabel '{}'", self.xlabel);
        let _ = writeln!(s, "set ylabel '{}'", self.ylabel);
        if self.logx {
            let _ = writeln!(s, "set logscale x");
        }
        if self.logy {
            let _ = writeln!(s, "set logscale y");
        }
        let parts: Vec<String> = self
            .series
            .iter()
            .map(|(x, y, t)| format!("'{}' using {x}:{y} with lines title '{t}'", self.data))
            .collect();
        let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
        s
    }
}

/// One headline line of `result.json`: `{"name", "value", "unit"}`.
pub fn item(name: &str, value: impl Into<Value>, unit: &str) -> Value {
    serde_json::json!({ "name": name, "value": value.into(), "unit": unit })
}

fn render_value(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format!("{:.3e}", n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => "n/a".into(),
        other => other.to_string(),
    }
}

/// Builds `summary.txt` from the contents of `result.json`.
pub fn render_summary(result: &Value) -> String {
    let mut s = String::new();
    let command = result["command"].as_str().unwrap_or("?");
    let scale = result["scale"].as_str().unwrap_or("?");
    let _ = writeln!(s, "gravcollapse {command} (scale {scale})");
    if let Some(items) = result["headline"].as_array() {
        for it in items {
            let name = it["name"].as_str().unwrap_or("");
            let value = render_value(&it["value"]);
            match it["unit"].as_str() {
                Some(u) if !u.is_empty() => {
                    let _ = writeln!(s, "  {name}: {value} {u}");
                }
                _ => {
                    let _ = writeln!(s, "  {name}: {value}");
                }
            }
        }
    }
    if let Some(notes) = result["notes"].as_array() {
        for n in notes.iter().filter_map(Value::as_str) {
            let _ = writeln!(s, "  note: {n}");
        }
    }
    s
}

/// Writes `bundle.json` listing every file produced so far.
pub fn write_bundle(
    sink: &Sink,
    command: &str,
    manifest_sha256: &str,
    summary: &str,
    error: Option<&Error>,
) -> Result<ResultBundle, Error> {
    let bundle = ResultBundle {
        tool: "gravcollapse".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        status: if error.is_some() { "error" } else { "ok" }.into(),
        exit_code: error.map_or(0, Error::exit_code),
        manifest_sha256: manifest_sha256.into(),
        files: sink.entries()?,
        summary: summary.into(),
        error: error.map(ToString::to_string),
    };
    let mut text = serde_json::to_string_pretty(&bundle).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    let path = sink.dir().join(BUNDLE_FILE);
    fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(bundle)
}
