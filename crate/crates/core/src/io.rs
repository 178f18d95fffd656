//! Plain-text feature-set format.
//!
//! ```text
//! K n d
//! v(0,0) v(0,1) ... v(0,K·n-1)
//! ...
//! v(d-1,0) ...      v(d-1,K·n-1)
//! ```
//!
//! One header line, then one line per feature dimension holding that row of
//! the `d × (K·n)` matrix. Values are written with 17 significant digits so a
//! write/read cycle reproduces every bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{PfcError, Result};
use crate::features::FeatureSet;

/// Largest matrix the parser will accept, in elements.
pub const MAX_ELEMENTS: usize = 1 << 28;

/// Round-trip formatting for a single value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_feature_set_string(fs: &FeatureSet) -> String {
    let x = fs.features();
    let mut out = format!("{} {} {}\n", fs.num_classes(), fs.per_class(), fs.dim());
    for r in 0..x.nrows() {
        let row: Vec<String> = x.row(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_feature_set(text: &str) -> Result<FeatureSet> {
    parse_feature_set_named(text, "<feature set>")
}

fn parse_feature_set_named(text: &str, origin: &str) -> Result<FeatureSet> {
    let err = |msg: String| PfcError::format(origin, msg);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| err("missing header line".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(err(format!("header must be `K n d`, got {header:?}")));
    }
    let parse_count = |s: &str, name: &str| {
        s.parse::<usize>()
            .map_err(|_| err(format!("header field {name} = {s:?} is not a count")))
    };
    let k = parse_count(fields[0], "K")?;
    let n = parse_count(fields[1], "n")?;
    let d = parse_count(fields[2], "d")?;
    let cols = k
        .checked_mul(n)
        .filter(|c| c.checked_mul(d).is_some_and(|e| e <= MAX_ELEMENTS))
        .ok_or_else(|| err(format!("matrix {d} x ({k}·{n}) is too large")))?;

    let mut values = Vec::new();
    let mut rows = 0usize;
    for line in lines {
        if rows == d {
            return Err(err(format!("more than d = {d} data rows")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(format!("row {rows}: {tok:?} is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("row {rows}: non-finite value {tok:?}")));
            }
            values.push(v);
            if values.len() - before > cols {
                break;
            }
        }
        if values.len() - before != cols {
            return Err(err(format!(
                "row {rows} has {} values, expected K·n = {cols}",
                values.len() - before
            )));
        }
        rows += 1;
    }
    if rows != d {
        return Err(err(format!("found {rows} data rows, expected d = {d}")));
    }
    let m = DMatrix::from_row_slice(d, cols, &values);
    FeatureSet::new(m, k, n).map_err(|e| err(e.to_string()))
}

pub fn read_feature_set(path: &Path) -> Result<FeatureSet> {
    let text = fs::read_to_string(path)?;
    parse_feature_set_named(&text, &path.display().to_string())
}

pub fn write_feature_set(path: &Path, fs: &FeatureSet) -> Result<()> {
    fs::write(path, write_feature_set_string(fs))?;
    Ok(())
}
