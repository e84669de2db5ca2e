//! Data files. CSVs use LF line endings and 17 significant digits, so values
//! read back bit-exactly; zeros print as `0` and `-0`. JSON data files hold
//! no timestamps; run metadata goes to a separate `run.json`.

use anyhow::Context;
use cornerlab::lsolver::FarFieldPattern;
use cornerlab::C64;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        if x.is_sign_negative() { "-0" } else { "0" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Rows of numbers under a fixed header.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_float).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn far_field_header(dim: usize) -> &'static [&'static str] {
    if dim == 2 {
        &["theta", "re", "im"]
    } else {
        &["theta", "phi", "re", "im"]
    }
}

/// Angles first (radians, ascending), then the complex value.
pub fn far_field_csv(p: &FarFieldPattern) -> String {
    let rows = p.rule.angles().iter().zip(&p.values).map(|(a, v)| {
        let mut row = a.clone();
        row.extend([v.re, v.im]);
        row
    });
    csv(far_field_header(p.dim()), rows)
}

pub fn emit_far_field_csv(p: &FarFieldPattern, path: &Path) -> anyhow::Result<()> {
    write_text(path, &far_field_csv(p))
}

/// Parses a far-field CSV back into `(angles, value)` rows.
pub fn read_far_field_csv(text: &str) -> anyhow::Result<Vec<(Vec<f64>, C64)>> {
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or_default();
    let width = match header {
        "theta,re,im" => 3,
        "theta,phi,re,im" => 4,
        other => anyhow::bail!("unexpected far-field header `{other}`"),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("row {}: malformed number", i + 1))?;
        if cells.len() != width {
            anyhow::bail!("row {}: expected {width} columns, got {}", i + 1, cells.len());
        }
        rows.push((
            cells[..width - 2].to_vec(),
            C64::new(cells[width - 2], cells[width - 1]),
        ));
    }
    Ok(rows)
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn json_text<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_text(path, &json_text(value)?)
}

/// Sidecar with everything that varies between identical runs.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub version: &'static str,
    pub threads: usize,
    pub runtime_seconds: f64,
    pub solver_runtimes: Vec<f64>,
}

/// Writes `name` into `dir`, or prints it to stdout when there is no
/// output directory.
pub struct Sink<'a> {
    pub dir: Option<&'a Path>,
    pub written: Vec<String>,
}

impl<'a> Sink<'a> {
    pub fn new(dir: Option<&'a Path>) -> anyhow::Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).with_context(|| format!("cannot create output directory {}", d.display()))?;
        }
        Ok(Sink {
            dir,
            written: Vec::new(),
        })
    }

    /// Data file; printed to stdout only when `primary` and there is no
    /// output directory.
    pub fn file(&mut self, name: &str, text: &str, primary: bool) -> anyhow::Result<()> {
        match self.dir {
            Some(d) => {
                write_text(&d.join(name), text)?;
                self.written.push(name.to_string());
            }
            None if primary => print!("{text}"),
            None => {}
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T, primary: bool) -> anyhow::Result<()> {
        self.file(name, &json_text(value)?, primary)
    }
}

pub fn complex_row(x: f64, z: C64) -> Vec<f64> {
    vec![x, z.re, z.im]
}

/// Writes the summary line used on stderr.
pub fn summary(command: &str, passed: Option<bool>, detail: &str) -> String {
    let mut s = String::new();
    let status = match passed {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "DONE",
    };
    let _ = write!(s, "{command}: {status}");
    if !detail.is_empty() {
        let _ = write!(s, " {detail}");
    }
    s
}
