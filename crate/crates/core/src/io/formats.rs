//! Plain-text exchange formats for cone-program data: Matrix Market for `A`,
//! one number per line for `b` and `c`, and a small cone sidecar.

use nalgebra_sparse::io::{load_coo_from_matrix_market_str, save_to_matrix_market_str};
use nalgebra_sparse::CooMatrix;

use crate::canon::ConeProgramData;
use crate::cone::ConeSpec;
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("matrix market: {0}")]
    MatrixMarket(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("cone rows ({cones}), b ({b}), A ({rows}×{cols}) and c ({c}) do not agree")]
    Dimensions {
        cones: usize,
        b: usize,
        rows: usize,
        cols: usize,
        c: usize,
    },
}

/// Coordinate format, 1-indexed, structural zeros kept.
pub fn write_matrix_market(a: &CscMatrix) -> String {
    let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
    for (i, j, v) in a.iter() {
        rows.push(i);
        cols.push(j);
        vals.push(v);
    }
    let coo = CooMatrix::try_from_triplets(a.nrows(), a.ncols(), rows, cols, vals).expect("entries are in bounds");
    save_to_matrix_market_str(&coo)
}

/// Duplicate coordinates are summed.
pub fn read_matrix_market(text: &str) -> Result<CscMatrix, FormatError> {
    let coo =
        load_coo_from_matrix_market_str::<f64>(text).map_err(|e| FormatError::MatrixMarket(e.message().to_string()))?;
    let triplets: Vec<(usize, usize, f64)> = coo.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect();
    Ok(CscMatrix::from_triplets(coo.nrows(), coo.ncols(), &triplets))
}

/// One value per line, shortest round-trip formatting.
pub fn write_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}

/// Blank lines and `#` comments are skipped.
pub fn read_vector(text: &str) -> Result<Vec<f64>, FormatError> {
    content_lines(text)
        .map(|(line, s)| {
            s.parse::<f64>().map_err(|e| FormatError::Line {
                line,
                message: format!("`{s}`: {e}"),
            })
        })
        .collect()
}

/// `zero N`, `nonneg N`, `soc d1 d2 ...`, always in that order.
pub fn write_cones(spec: &ConeSpec) -> String {
    let soc: String = spec.soc.iter().map(|d| format!(" {d}")).collect();
    format!("zero {}\nnonneg {}\nsoc{soc}\n", spec.zero, spec.nonneg)
}

/// Omitted lines mean empty blocks; out-of-order or repeated lines are errors.
pub fn read_cones(text: &str) -> Result<ConeSpec, FormatError> {
    let mut spec = ConeSpec::default();
    let mut next = 0;
    for (line, s) in content_lines(text) {
        let mut words = s.split_whitespace();
        let kind = words.next().expect("content lines are nonblank");
        let rank = match kind {
            "zero" => 0,
            "nonneg" => 1,
            "soc" => 2,
            other => {
                return Err(FormatError::Line {
                    line,
                    message: format!("unknown cone `{other}`"),
                })
            }
        };
        if rank < next {
            return Err(FormatError::Line {
                line,
                message: format!("`{kind}` is out of order or repeated (expected zero, nonneg, soc)"),
            });
        }
        next = rank + 1;
        let dims = words
            .map(|w| {
                w.parse::<usize>().map_err(|e| FormatError::Line {
                    line,
                    message: format!("`{w}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        match (rank, dims.as_slice()) {
            (0, [n]) => spec.zero = *n,
            (1, [n]) => spec.nonneg = *n,
            (2, _) if dims.iter().all(|d| *d >= 1) => spec.soc = dims,
            _ => {
                return Err(FormatError::Line {
                    line,
                    message: format!("bad dimensions for `{kind}`"),
                })
            }
        }
    }
    Ok(spec)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Assembles problem data from the four files' contents and checks dimensions.
pub fn read_cone_program(a: &str, b: &str, c: &str, cones: &str) -> Result<ConeProgramData, FormatError> {
    let data = ConeProgramData {
        a: read_matrix_market(a)?,
        b: read_vector(b)?,
        c: read_vector(c)?,
        cones: read_cones(cones)?,
    };
    let m = data.cones.rows();
    if data.a.nrows() != m || data.b.len() != m || data.a.ncols() != data.c.len() {
        return Err(FormatError::Dimensions {
            cones: m,
            b: data.b.len(),
            rows: data.a.nrows(),
            cols: data.a.ncols(),
            c: data.c.len(),
        });
    }
    Ok(data)
}
