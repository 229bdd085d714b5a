//! Command-line matrix and vector literals.

use nalgebra::{DMatrix, DVector};
use shorcert::{Error, Result, SymMatrix};

/// `diag:1,-1,0` or `dense:1,0;0,1` (rows separated by `;`).
pub fn parse_matrix(s: &str) -> Result<SymMatrix> {
    let (kind, body) = s.split_once(':').ok_or_else(|| {
        Error::Input(format!(
            "matrix literal `{s}` needs a `diag:` or `dense:` prefix"
        ))
    })?;
    match kind {
        "diag" => Ok(SymMatrix::diag(parse_vector(body)?.as_slice())),
        "dense" => {
            let rows: Vec<DVector<f64>> =
                body.split(';').map(parse_vector).collect::<Result<_>>()?;
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::Input(format!("dense literal `{s}` is not square")));
            }
            SymMatrix::try_new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        }
        other => Err(Error::Input(format!("unknown matrix prefix `{other}:`"))),
    }
}

/// Comma-separated numbers.
pub fn parse_vector(s: &str) -> Result<DVector<f64>> {
    let vals = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("`{t}` is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if vals.is_empty() {
        return Err(Error::Input("empty vector literal".into()));
    }
    Ok(DVector::from_vec(vals))
}
