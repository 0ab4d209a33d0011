//! Matrix Market reader (real `coordinate` and `array` formats, `general`,
//! `symmetric` and `skew-symmetric` symmetry), always producing a dense
//! matrix.

use std::fs;
use std::path::Path;

use gspcond::DenseMatrix;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

pub fn read_matrix_market(path: &Path) -> CliResult<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix_market(&text, path)
}

/// Parses `text`; `origin` only labels diagnostics.
pub fn parse_matrix_market(text: &str, origin: &Path) -> CliResult<DenseMatrix> {
    let err = |line: usize, message: String| CliError::MatrixMarket {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(err(1, format!("bad banner '{banner}'")));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(err(1, format!("unsupported format '{other}'"))),
    };
    match words[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(err(1, format!("unsupported field '{other}'"))),
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| err(1, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(size_line, format!("bad size entry '{t}'"))))
        .collect::<CliResult<_>>()?;
    let want = if layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != want {
        return Err(err(
            size_line,
            format!("expected {want} size entries, got {}", dims.len()),
        ));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        return Err(err(size_line, format!("{rows}x{cols} matrix cannot be symmetric")));
    }
    let mut data = vec![0.0; rows * cols];
    let sign = if symmetry == Symmetry::Skew { -1.0 } else { 1.0 };
    let parse_val = |line: usize, t: &str| -> CliResult<f64> {
        let v: f64 = t.parse().map_err(|_| err(line, format!("bad value '{t}'")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(line, format!("non-finite value '{t}'")))
        }
    };

    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut seen = 0;
            for (ln, l) in body {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(err(ln, format!("expected 'row col value', got '{}'", l.trim())));
                }
                let idx = |s: &str, max: usize| -> CliResult<usize> {
                    match s.parse::<usize>() {
                        Ok(v) if (1..=max).contains(&v) => Ok(v - 1),
                        _ => Err(err(ln, format!("index '{s}' outside 1..={max}"))),
                    }
                };
                let (i, j, v) = (idx(t[0], rows)?, idx(t[1], cols)?, parse_val(ln, t[2])?);
                data[i + j * rows] += v;
                if symmetry != Symmetry::General && i != j {
                    data[j + i * rows] += sign * v;
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(err(size_line, format!("declared {nnz} entries, found {seen}")));
            }
        }
        Layout::Array => {
            // Column-major; symmetric files store the lower triangle only.
            let slots: Vec<(usize, usize)> = match symmetry {
                Symmetry::General => (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))).collect(),
                Symmetry::Symmetric => (0..cols).flat_map(|j| (j..rows).map(move |i| (i, j))).collect(),
                Symmetry::Skew => (0..cols).flat_map(|j| (j + 1..rows).map(move |i| (i, j))).collect(),
            };
            let mut values = Vec::with_capacity(slots.len());
            for (ln, l) in body {
                for t in l.split_whitespace() {
                    values.push((ln, parse_val(ln, t)?));
                }
            }
            if values.len() != slots.len() {
                return Err(err(
                    size_line,
                    format!("expected {} values, found {}", slots.len(), values.len()),
                ));
            }
            for (&(i, j), &(_, v)) in slots.iter().zip(&values) {
                data[i + j * rows] = v;
                if symmetry != Symmetry::General && i != j {
                    data[j + i * rows] = sign * v;
                }
            }
        }
    }
    Ok(DenseMatrix::from_col_major(rows, cols, data)?)
}

/// Writes `m` in general array format.
pub fn write_matrix_market(m: &DenseMatrix) -> String {
    let mut out = format!("%%MatrixMarket matrix array real general\n{} {}\n", m.rows(), m.cols());
    for v in m.as_slice() {
        out.push_str(&format!("{v:?}\n"));
    }
    out
}
