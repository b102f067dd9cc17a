//! Numeric CSV and `key = value` text helpers shared by the solvers and the CLI.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Formats `x` with exactly 9 significant digits, switching to exponent
/// notation outside `[1e-5, 1e9)` like C's `%.9g` (trailing zeros kept).
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes a header line and rows of numbers.
pub fn write_csv<W: Write + ?Sized>(
    out: &mut W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let io = |e: std::io::Error| Error::Argument(format!("write failed: {e}"));
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt9(v)).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    Ok(())
}

/// Reads a numeric CSV whose header must equal `header`. Rows and columns in
/// errors are 1-based, the header being row 1.
pub fn read_csv<R: BufRead>(input: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = input.lines();
    let first = match lines.next() {
        Some(Ok(l)) => l,
        Some(Err(e)) => return Err(Error::Parse { row: 1, col: 1, msg: e.to_string() }),
        None => return Err(Error::Parse { row: 1, col: 1, msg: "empty file".into() }),
    };
    let got: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    if got != header {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: format!("expected header `{}`, got `{}`", header.join(","), first.trim()),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        let line = line.map_err(|e| Error::Parse { row, col: 1, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Parse {
                row,
                col: fields.len().min(header.len()) + 1,
                msg: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        let mut vals = Vec::with_capacity(fields.len());
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: format!("not a number: `{}`", f.trim()),
            })?;
            vals.push(v);
        }
        rows.push(vals);
    }
    Ok(rows)
}

/// Writes `key = value` lines.
pub fn write_report<W: Write + ?Sized>(out: &mut W, entries: &[(String, String)]) -> Result<()> {
    for (k, v) in entries {
        writeln!(out, "{k} = {v}").map_err(|e| Error::Argument(format!("write failed: {e}")))?;
    }
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Duplicate keys are rejected.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: idx + 1,
            col: 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Parse { row: idx + 1, col: 1, msg: "empty key".into() });
        }
        if out.iter().any(|(existing, _)| existing == k) {
            return Err(Error::Parse { row: idx + 1, col: 1, msg: format!("duplicate key `{k}`") });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}
