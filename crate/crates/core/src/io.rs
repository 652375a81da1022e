//! Dataset and result serialization: libsvm text format and the result CSV.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::data::{Dataset, ExampleRow, Features};
use crate::error::{Error, Result};
use crate::plan::ResultRow;

/// Parses libsvm text: one example per line, `label idx:val idx:val …` with
/// 1-based strictly ascending indices. Blank lines are skipped.
pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut max_dim = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label: f64 = parts
            .next()
            .unwrap() // nonempty line has at least one token
            .parse()
            .map_err(|_| Error::Parse {
                line: lineno,
                message: "label is not a number".to_string(),
            })?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize;
        for tok in parts {
            let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("expected index:value, got {tok:?}"),
            })?;
            let idx: usize = idx_str.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad feature index {idx_str:?}"),
            })?;
            let val: f64 = val_str.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad feature value {val_str:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "feature indices are 1-based".to_string(),
                });
            }
            if idx <= prev_index {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("indices not strictly ascending at {idx}"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: "non-finite feature value".to_string(),
                });
            }
            prev_index = idx;
            entries.push((idx - 1, val));
        }
        max_dim = max_dim.max(prev_index);
        rows.push(ExampleRow::sparse(entries, label).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?);
    }
    Dataset::new(rows, max_dim)
}

pub fn parse_libsvm(path: &Path) -> Result<Dataset> {
    parse_libsvm_str(&fs::read_to_string(path)?)
}

/// Writes a dataset in the same libsvm format (1-based indices, zeros
/// dropped); `parse_libsvm` inverts it.
pub fn write_libsvm(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in data.rows() {
        out.push_str(&fmt_float(r.label));
        match &r.features {
            Features::Dense(v) => {
                for (j, &x) in v.iter().enumerate() {
                    if x != 0.0 {
                        out.push_str(&format!(" {}:{}", j + 1, fmt_float(x)));
                    }
                }
            }
            Features::Sparse(e) => {
                for &(j, x) in e {
                    if x != 0.0 {
                        out.push_str(&format!(" {}:{}", j + 1, fmt_float(x)));
                    }
                }
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// 9 significant digits, scientific; stable across runs for determinism.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

pub const CSV_HEADER: &str = "method,epsilon,delta,trial,seed,metric_name,value,wall_time_ms";

/// Canonically sorted result CSV: rows ordered by (method, ε, trial, metric).
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{CSV_HEADER}")?;
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.trial.cmp(&b.trial))
            .then(a.metric_name.cmp(&b.metric_name))
    });
    for r in sorted {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.method,
            fmt_float(r.epsilon),
            fmt_float(r.delta),
            r.trial,
            r.seed,
            r.metric_name,
            fmt_float(r.value),
            r.wall_time_ms
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Re-reads an emitted CSV (used by round-trip tests and `check`).
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing or wrong CSV header".to_string(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 8 fields, got {}", f.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad {what} {s:?}"),
            })
        };
        let parse_u = |s: &str, what: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad {what} {s:?}"),
            })
        };
        rows.push(ResultRow {
            method: f[0].to_string(),
            epsilon: parse_f(f[1], "epsilon")?,
            delta: parse_f(f[2], "delta")?,
            trial: parse_u(f[3], "trial")? as usize,
            seed: parse_u(f[4], "seed")?,
            metric_name: f[5].to_string(),
            value: parse_f(f[6], "value")?,
            wall_time_ms: parse_u(f[7], "wall_time_ms")?,
        });
    }
    Ok(rows)
}
