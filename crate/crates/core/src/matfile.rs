//! Matrix file format: nested JSON arrays of [re, im] pairs, dimensions
//! inferred, strict errors on ragged input.

use crate::error::{Error, Result};
use crate::linalg::CMat;
use num_complex::Complex64 as C64;

/// Parses `[[[re,im], …], …]` into a complex matrix.
pub fn parse_matrix(text: &str) -> Result<CMat> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("invalid structured text: {e}")))?;
    let rows = value
        .as_array()
        .ok_or_else(|| Error::Parse("expected an outer array of rows".into()))?;
    if rows.is_empty() {
        return Err(Error::Parse("matrix has no rows".into()));
    }
    let mut data: Vec<Vec<C64>> = Vec::with_capacity(rows.len());
    let mut width: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        let cols = row
            .as_array()
            .ok_or_else(|| Error::Parse(format!("row {i} is not an array")))?;
        match width {
            None => width = Some(cols.len()),
            Some(w) if w != cols.len() => {
                return Err(Error::Parse(format!(
                    "ragged rows: row {i} has {} entries, expected {w}",
                    cols.len()
                )))
            }
            _ => {}
        }
        let mut out_row = Vec::with_capacity(cols.len());
        for (j, entry) in cols.iter().enumerate() {
            let pair = entry
                .as_array()
                .ok_or_else(|| Error::Parse(format!("entry ({i},{j}) is not a [re, im] pair")))?;
            if pair.len() != 2 {
                return Err(Error::Parse(format!(
                    "entry ({i},{j}) has {} components, expected 2",
                    pair.len()
                )));
            }
            let re = pair[0]
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("entry ({i},{j}) re is not a number")))?;
            let im = pair[1]
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("entry ({i},{j}) im is not a number")))?;
            out_row.push(C64::new(re, im));
        }
        data.push(out_row);
    }
    let w = width.unwrap();
    if w == 0 {
        return Err(Error::Parse("matrix has zero columns".into()));
    }
    Ok(CMat::from_fn(data.len(), w, |i, j| data[i][j]))
}

pub fn read_matrix(path: &std::path::Path) -> Result<CMat> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_matrix(&text)
}

pub fn matrix_to_string(m: &CMat) -> String {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    serde_json::to_string(&rows).expect("matrix serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn parse_identity() {
        let m = parse_matrix("[[[1,0],[0,0]],[[0,0],[1,0]]]").unwrap();
        assert_eq!(m.nrows(), 2);
        assert!(linalg::max_abs(&(m - CMat::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn rejects_ragged_and_malformed() {
        assert!(parse_matrix("[[[1,0]],[[0,0],[1,0]]]").is_err());
        assert!(parse_matrix("[[[1,0,0]]]").is_err());
        assert!(parse_matrix("[[1,0]]").is_err());
        assert!(parse_matrix("[]").is_err());
        assert!(parse_matrix("not json").is_err());
    }

    #[test]
    fn round_trip() {
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha8Rng::seed_from_u64(3)
        };
        let m = linalg::random_matrix(&mut rng, 3, 3);
        let s = matrix_to_string(&m);
        let back = parse_matrix(&s).unwrap();
        assert!(linalg::max_abs(&(m - back)) < 1e-15);
    }
}
