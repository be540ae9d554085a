//! MatrixMarket input and metrics CSV output.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, CsrMatrix, LinearSystem, Matrix};
use crate::rng;

pub use crate::solvers::MetricsRow;

pub const METRICS_HEADER: [&str; 7] = ["iteration", "beta", "error_sq", "residual_sq", "flops", "elapsed_s", "bound"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
    parse_matrix_market(File::open(path)?, path)
}

/// Parses MatrixMarket text; `path` is only used in error messages.
pub fn parse_matrix_market<R: Read>(source: R, path: &Path) -> Result<CsrMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(source).lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, banner) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let banner = banner?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(err(1, format!("malformed banner `{banner}`")));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(err(1, format!("unsupported format `{other}`"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(err(1, format!("unsupported field `{other}`"))),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(err(1, format!("unsupported symmetry `{other}`"))),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err(err(1, "array format cannot use the pattern field".into()));
    }

    let mut content = lines.filter_map(|(no, line)| match line {
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((no, t.to_string())))
            }
        }
        Err(e) => Some(Err(e)),
    });

    let (size_line, size) = content.next().transpose()?.ok_or_else(|| err(1, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| err(size_line, format!("bad size entry `{w}`"))))
        .collect::<Result<_>>()?;
    let expected_dims = if layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != expected_dims {
        return Err(err(size_line, format!("expected {expected_dims} size entries, got {}", dims.len())));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        return Err(err(size_line, "symmetric storage requires a square matrix".into()));
    }

    let parse_value = |no: usize, w: Option<&str>| -> Result<f64> {
        let w = w.ok_or_else(|| err(no, "missing value".into()))?;
        let v: f64 = match field {
            Field::Integer => w
                .parse::<i64>()
                .map(|v| v as f64)
                .map_err(|_| err(no, format!("bad integer `{w}`")))?,
            _ => w.parse().map_err(|_| err(no, format!("bad value `{w}`")))?,
        };
        if !v.is_finite() {
            return Err(err(no, format!("non-finite value `{w}`")));
        }
        Ok(v)
    };

    let mut triplets = Vec::new();
    let mut push = |i: usize, j: usize, v: f64| {
        triplets.push((i, j, v));
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((j, i, v)),
                Symmetry::Skew => triplets.push((j, i, -v)),
            }
        }
    };

    match layout {
        Layout::Coordinate => {
            let count = dims[2];
            let mut seen = 0;
            for item in content {
                let (no, line) = item?;
                if seen == count {
                    return Err(err(no, format!("more than the declared {count} entries")));
                }
                let mut words = line.split_whitespace();
                let mut index = |name: &str, bound: usize| -> Result<usize> {
                    let w = words.next().ok_or_else(|| err(no, format!("missing {name} index")))?;
                    let v: usize = w.parse().map_err(|_| err(no, format!("bad {name} index `{w}`")))?;
                    if v == 0 || v > bound {
                        return Err(err(no, format!("{name} index {v} out of range 1..={bound}")));
                    }
                    Ok(v - 1)
                };
                let i = index("row", rows)?;
                let j = index("column", cols)?;
                let v = match field {
                    Field::Pattern => 1.0,
                    _ => parse_value(no, words.next())?,
                };
                if symmetry != Symmetry::General && j > i {
                    return Err(err(no, "entry above the diagonal in symmetric storage".into()));
                }
                push(i, j, v);
                seen += 1;
            }
            if seen != count {
                return Err(err(size_line, format!("declared {count} entries, found {seen}")));
            }
        }
        Layout::Array => {
            let mut slots = Vec::new();
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::Skew => j + 1,
                };
                slots.extend((start..rows).map(|i| (i, j)));
            }
            let mut next = slots.iter();
            let mut last_line = size_line;
            for item in content {
                let (no, line) = item?;
                last_line = no;
                for w in line.split_whitespace() {
                    let &(i, j) = next
                        .next()
                        .ok_or_else(|| err(no, format!("more than the {} expected values", slots.len())))?;
                    push(i, j, parse_value(no, Some(w))?);
                }
            }
            if next.next().is_some() {
                return Err(err(last_line, format!("expected {} values", slots.len())));
            }
        }
    }
    CsrMatrix::from_triplets(rows, cols, &triplets)
}

/// Consistent system with a seeded signal in the row space:
/// `x* = Aᵀz / ‖Aᵀz‖` for standard normal `z`, and `b = A x*`.
pub fn embed_real_solution(matrix: Matrix, seed: u64) -> Result<LinearSystem> {
    let mut rng = rng::stream(seed, rng::SYSTEM_STREAM);
    let z: Vec<f64> = (0..matrix.nrows()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut x_star = matrix.tr_mul_vec(&z)?;
    let norm = norm_sq(&x_star).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    x_star.iter_mut().for_each(|v| *v /= norm);
    let rhs = matrix.mul_vec(&x_star)?;
    LinearSystem::from_parts(matrix, rhs, x_star)
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no metrics to write".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            fmt_float(r.beta),
            fmt_float(r.error_sq),
            fmt_float(r.residual_sq),
            fmt_float(r.flops),
            fmt_float(r.elapsed_s),
            r.bound.map(fmt_float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx + 2;
        let field = |k: usize| -> Result<&str> {
            record.get(k).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("missing column {}", METRICS_HEADER[k]),
            })
        };
        let float = |k: usize| -> Result<f64> {
            let s = field(k)?;
            s.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("bad {} value `{s}`", METRICS_HEADER[k]),
            })
        };
        let iteration = field(0)?.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: "bad iteration".into(),
        })?;
        let bound = if field(6)?.is_empty() { None } else { Some(float(6)?) };
        rows.push(MetricsRow {
            iteration,
            beta: float(1)?,
            error_sq: float(2)?,
            residual_sq: float(3)?,
            flops: float(4)?,
            elapsed_s: float(5)?,
            bound,
        });
    }
    Ok(rows)
}
