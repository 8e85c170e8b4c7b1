//! Text formats for complex matrices and benchmark results.
//!
//! `CPLX-CSV v1` stores a dense complex matrix:
//!
//! ```text
//! #cplx-csv v1 rows=2 cols=2
//! 1.0000000000000000e0:0,0:-2.5000000000000000e-1
//! 0:0,3.1415926535897931e0:1.0000000000000000e0
//! ```
//!
//! Each field is `<re>:<im>`. Nonzero parts are written in scientific
//! notation with 17 significant digits, which round-trips every finite
//! `f64`; zero is written as `0` (`-0` for negative zero). Lines end in LF.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::bench::TrialResult;
use crate::model::CMatrix;
use crate::{Error, Result};

const MAGIC: &str = "#cplx-csv v1";

pub const RESULTS_HEADER: &str =
    "algo,n,m,sigma_n2,trial,seed,correlation,iterations,runtime_ms,sigma_n2_hat";

fn format_real(out: &mut String, v: f64) {
    if v == 0.0 {
        out.push_str(if v.is_sign_negative() { "-0" } else { "0" });
    } else {
        let _ = write!(out, "{v:.16e}");
    }
}

/// Renders `matrix` in CPLX-CSV v1.
pub fn format_cplx(matrix: &CMatrix) -> Result<String> {
    let (rows, cols) = matrix.shape();
    if let Some(v) = matrix.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("cannot write non-finite value {v}")));
    }
    let mut out = format!("{MAGIC} rows={rows} cols={cols}\n");
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push(',');
            }
            let v = matrix[(r, c)];
            format_real(&mut out, v.re);
            out.push(':');
            format_real(&mut out, v.im);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_cplx(path: impl AsRef<Path>, matrix: &CMatrix) -> Result<()> {
    let path = path.as_ref();
    let text = format_cplx(matrix)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_cplx(path: impl AsRef<Path>) -> Result<CMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cplx(&text, path)
}

/// Parses CPLX-CSV v1 text; `origin` only labels errors.
pub fn parse_cplx(text: &str, origin: &Path) -> Result<CMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or("");
    let (rows, cols) = parse_header(header).map_err(|m| err(1, m))?;

    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    let mut seen = 0usize;
    let mut last_line = 1;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        last_line = lineno;
        if seen == rows {
            return Err(err(
                lineno,
                format!("header declares rows={rows} but more data lines follow"),
            ));
        }
        if line.is_empty() {
            return Err(err(lineno, "empty line".into()));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(err(
                lineno,
                format!("expected {cols} fields, found {}", fields.len()),
            ));
        }
        for (c, field) in fields.iter().enumerate() {
            let v = parse_field(field)
                .map_err(|m| err(lineno, format!("field {}: {m}", c + 1)))?;
            data[c * rows + seen] = v;
        }
        seen += 1;
    }
    if seen != rows {
        return Err(err(
            last_line + 1,
            format!("header declares rows={rows} but only {seen} data lines found"),
        ));
    }
    Ok(CMatrix::from_vec(rows, cols, data))
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize), String> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| format!("expected header starting with '{MAGIC}'"))?;
    let mut rows = None;
    let mut cols = None;
    for tok in rest.split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| format!("malformed header token '{tok}'"))?;
        let value: usize = value
            .parse()
            .map_err(|_| format!("invalid {key} value '{value}'"))?;
        match key {
            "rows" => rows = Some(value),
            "cols" => cols = Some(value),
            _ => return Err(format!("unknown header key '{key}'")),
        }
    }
    match (rows, cols) {
        (Some(r), Some(c)) if r > 0 && c > 0 => Ok((r, c)),
        (Some(_), Some(_)) => Err("rows and cols must be positive".into()),
        _ => Err("header must declare rows= and cols=".into()),
    }
}

fn parse_field(field: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = field
        .split_once(':')
        .ok_or_else(|| format!("expected '<re>:<im>', got '{field}'"))?;
    let parse = |s: &str| -> std::result::Result<f64, String> {
        let v: f64 = s.parse().map_err(|_| format!("invalid number '{s}'"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite number '{s}'"))
        }
    };
    Ok(Complex64::new(parse(re)?, parse(im)?))
}

/// Sort key for result rows: algorithm, then M, then noise level, then trial.
pub fn sort_results(rows: &mut [TrialResult]) {
    rows.sort_by(|a, b| {
        a.algo
            .name()
            .cmp(b.algo.name())
            .then(a.m.cmp(&b.m))
            .then(a.sigma_n2.total_cmp(&b.sigma_n2))
            .then(a.trial.cmp(&b.trial))
    });
}

/// Writes one CSV row per trial under [`RESULTS_HEADER`], sorted by
/// [`sort_results`].
pub fn write_results(path: impl AsRef<Path>, rows: &[TrialResult]) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut sorted = rows.to_vec();
    sort_results(&mut sorted);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(RESULTS_HEADER.split(',')).map_err(csv_err)?;
    for row in &sorted {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",");
    if header != RESULTS_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected header '{header}'"),
        });
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
