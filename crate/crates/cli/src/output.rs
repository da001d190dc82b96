//! CSV and JSON writers. Numbers are printed with 12 significant digits so
//! identical runs produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use moyal_core::{Function, Kernel};

use crate::CliError;

/// Rounds to 12 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

pub fn fmt(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0"
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn nums(&mut self, cells: &[f64]) {
        let v: Vec<String> = cells.iter().map(|&x| fmt(x)).collect();
        self.row(&v);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.text.as_bytes())
    }
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Node values as `x, p, re, im` rows.
pub fn function_csv(f: &Function) -> Csv {
    let g = f.grid();
    let mut csv = Csv::new(&["x", "p", "re", "im"]);
    for i in 0..g.n_x() {
        for k in 0..g.n_p() {
            let v = f.at(i, k);
            csv.nums(&[g.x(i), g.p(k), v.re, v.im]);
        }
    }
    csv
}

pub fn kernel_csv(k: &Kernel) -> Csv {
    let m = k.values();
    let mut csv = Csv::new(&["i", "j", "re", "im"]);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            csv.row(&[i.to_string(), j.to_string(), fmt(v.re), fmt(v.im)]);
        }
    }
    csv
}

pub fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
