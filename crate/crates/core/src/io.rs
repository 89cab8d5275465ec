//! Dataset ingestion and export.
//!
//! CSV: one point per row, comma-separated decimal floats, no header.
//! Binary: the magic `MAPS`, then `n` and `d` as little-endian `u64`, then
//! `n * d` little-endian `f64` values in row-major order.
//! Sidecar: `key=value` lines (JSON-style `"key": value` is accepted too)
//! with keys `image_shape=[h,w]` and `param_cols=[start,end]`; the param
//! columns are a half-open range of file columns split out of the points.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"MAPS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    F64LeBinary,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "bin" | "binary" | "f64le" | "f64le-binary" => Ok(Self::F64LeBinary),
            other => Err(Error::Parameter(format!("unknown data format `{other}`"))),
        }
    }
}

impl DataFormat {
    /// Guess from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("f64") => Self::F64LeBinary,
            _ => Self::Csv,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sidecar {
    pub image_shape: Option<(usize, usize)>,
    pub param_cols: Option<(usize, usize)>,
}

impl Sidecar {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Sidecar::default();
        for entry in split_entries(text) {
            let Some(sep) = entry.find(['=', ':']) else {
                return Err(Error::Metadata(format!("malformed sidecar entry `{entry}`")));
            };
            let key = entry[..sep].trim().trim_matches('"');
            let pair = parse_pair(entry[sep + 1..].trim())?;
            match key {
                "image_shape" => out.image_shape = Some(pair),
                "param_cols" => {
                    if pair.0 >= pair.1 {
                        return Err(Error::Metadata(format!(
                            "param_cols [{}, {}] is empty",
                            pair.0, pair.1
                        )));
                    }
                    out.param_cols = Some(pair)
                }
                other => return Err(Error::Metadata(format!("unknown sidecar key `{other}`"))),
            }
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        if let Some((h, w)) = self.image_shape {
            s.push_str(&format!("image_shape=[{h},{w}]\n"));
        }
        if let Some((a, b)) = self.param_cols {
            s.push_str(&format!("param_cols=[{a},{b}]\n"));
        }
        s
    }
}

/// Splits on newlines and on commas outside brackets, dropping braces and comments.
fn split_entries(text: &str) -> Vec<String> {
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        let mut depth = 0usize;
        let mut cur = String::new();
        for ch in line.chars() {
            match ch {
                '{' | '}' => {}
                '[' => {
                    depth += 1;
                    cur.push(ch);
                }
                ']' => {
                    depth = depth.saturating_sub(1);
                    cur.push(ch);
                }
                ',' if depth == 0 => entries.push(std::mem::take(&mut cur)),
                _ => cur.push(ch),
            }
        }
        entries.push(cur);
    }
    entries
        .into_iter()
        .map(|e| e.trim().to_string())
        .filter(|e| !e.is_empty())
        .collect()
}

fn parse_pair(value: &str) -> Result<(usize, usize)> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| Error::Metadata(format!("expected [a,b], got `{value}`")))?;
    let nums: Vec<usize> = inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Metadata(format!("bad integer `{}`", t.trim())))
        })
        .collect::<Result<_>>()?;
    match nums.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Metadata(format!("expected two integers, got `{value}`"))),
    }
}

pub fn parse_csv(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut values = Vec::new();
    let mut width = None;
    let mut n = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("line {}: cannot parse `{}`", lineno + 1, field.trim()))
            })?;
            if !v.is_finite() {
                return Err(Error::Value(format!(
                    "line {}: non-finite value `{}`",
                    lineno + 1,
                    field.trim()
                )));
            }
            values.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::Format(format!(
                    "line {}: {count} fields, expected {w}",
                    lineno + 1
                )))
            }
            _ => {}
        }
        n += 1;
    }
    Ok((n, width.unwrap_or(0), values))
}

pub fn parse_binary(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 20 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing MAPS header".into()));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = &bytes[20..];
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "binary body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Value(format!("non-finite value at flat index {pos}")));
    }
    Ok((n, d, values))
}

/// Builds a dataset from raw row-major file columns, splitting out params per the sidecar.
pub fn assemble(n: usize, cols: usize, values: Vec<f64>, sidecar: &Sidecar) -> Result<DataMatrix> {
    let (points, params) = match sidecar.param_cols {
        None => (DataMatrix::new(n, cols, values)?, None),
        Some((start, end)) => {
            if end > cols {
                return Err(Error::Metadata(format!(
                    "param_cols [{start},{end}] exceeds {cols} columns"
                )));
            }
            let p = end - start;
            let d = cols - p;
            let mut pts = Vec::with_capacity(n * d);
            let mut par = Vec::with_capacity(n * p);
            for row in values.chunks_exact(cols.max(1)) {
                pts.extend_from_slice(&row[..start]);
                pts.extend_from_slice(&row[end..]);
                par.extend_from_slice(&row[start..end]);
            }
            (
                DataMatrix::new(n, d, pts)?,
                Some(DMatrix::from_row_slice(n, p, &par)),
            )
        }
    };
    let mut x = points;
    if let Some(params) = params {
        x = x.with_params(params)?;
    }
    if let Some((h, w)) = sidecar.image_shape {
        x = x.with_image_shape(h, w)?;
    }
    Ok(x)
}

pub fn load_dataset(path: &Path, format: DataFormat, meta: Option<&Path>) -> Result<DataMatrix> {
    let (n, cols, values) = match format {
        DataFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text)?
        }
        DataFormat::F64LeBinary => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_binary(&bytes)?
        }
    };
    let sidecar = match meta {
        Some(p) => Sidecar::read(p)?,
        None => Sidecar::default(),
    };
    assemble(n, cols, values, &sidecar)
}

/// Formats a float with 17 significant digits so values round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_line(out: &mut String, fields: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in fields {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&fmt_f64(v));
    }
    out.push('\n');
}

/// Dataset as CSV with any params appended as trailing columns, plus the matching sidecar.
pub fn dataset_to_csv(x: &DataMatrix) -> (String, Sidecar) {
    let mut out = String::new();
    for (i, row) in x.rows().enumerate() {
        let params = x.params().map(|p| p.row(i).iter().copied().collect::<Vec<_>>());
        csv_line(
            &mut out,
            row.iter().copied().chain(params.into_iter().flatten()),
        );
    }
    let sidecar = Sidecar {
        image_shape: x.image_shape(),
        param_cols: x.params().map(|p| (x.d(), x.d() + p.ncols())),
    };
    (out, sidecar)
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        csv_line(&mut out, row.iter().copied());
    }
    out
}

pub fn write_csv_dataset(x: &DataMatrix, path: &Path, meta: Option<&Path>) -> Result<()> {
    let (csv, sidecar) = dataset_to_csv(x);
    fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    if let Some(meta) = meta {
        fs::write(meta, sidecar.render()).map_err(|e| Error::io(meta, e))?;
    }
    Ok(())
}

/// Points only; params and image shape belong in a sidecar.
pub fn write_binary_dataset(x: &DataMatrix, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(20 + x.values().len() * 8);
    bytes.extend_from_slice(BINARY_MAGIC);
    bytes.extend_from_slice(&(x.n() as u64).to_le_bytes());
    bytes.extend_from_slice(&(x.d() as u64).to_le_bytes());
    for v in x.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_by_two_csv() {
        let (n, d, v) = parse_csv("0,0\n1,0\n0,1").unwrap();
        let x = assemble(n, d, v, &Sidecar::default()).unwrap();
        assert_eq!((x.n(), x.d()), (3, 2));
        assert_eq!(x.row(2), &[0.0, 1.0]);
    }

    #[test]
    fn sidecar_shape_accepted_and_rejected() {
        let (n, d, v) = parse_csv("0,0\n1,0\n0,1").unwrap();
        let ok = Sidecar::parse("image_shape=[1,2]").unwrap();
        assert_eq!(assemble(n, d, v.clone(), &ok).unwrap().image_shape(), Some((1, 2)));
        let bad = Sidecar::parse("image_shape=[2,2]").unwrap();
        assert!(matches!(assemble(n, d, v, &bad).unwrap_err(), Error::Metadata(_)));
    }

    #[test]
    fn ragged_rows_are_format_errors() {
        assert!(matches!(parse_csv("0,0\n1\n").unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn nan_and_inf_are_value_errors() {
        assert!(matches!(parse_csv("0,NaN\n1,2").unwrap_err(), Error::Value(_)));
        assert!(matches!(parse_csv("0,inf\n1,2").unwrap_err(), Error::Value(_)));
    }

    #[test]
    fn sidecar_accepts_json_style() {
        let s = Sidecar::parse("{\"image_shape\": [4, 4], \"param_cols\": [16, 18]}").unwrap();
        assert_eq!(s.image_shape, Some((4, 4)));
        assert_eq!(s.param_cols, Some((16, 18)));
        assert_eq!(Sidecar::parse(&s.render()).unwrap(), s);
    }

    #[test]
    fn param_columns_are_split_out() {
        let (n, d, v) = parse_csv("1,2,9\n3,4,8\n").unwrap();
        let s = Sidecar::parse("param_cols=[2,3]").unwrap();
        let x = assemble(n, d, v, &s).unwrap();
        assert_eq!(x.d(), 2);
        assert_eq!(x.params().unwrap().as_slice(), &[9.0, 8.0]);
    }

    #[test]
    fn binary_header_checked() {
        assert!(parse_binary(b"NOPE").is_err());
        let mut bytes = BINARY_MAGIC.to_vec();
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1.5f64.to_le_bytes());
        assert!(matches!(parse_binary(&bytes).unwrap_err(), Error::Format(_)));
        bytes.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(parse_binary(&bytes).unwrap(), (2, 1, vec![1.5, -2.0]));
    }

    #[test]
    fn fmt_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
