use crate::error::{Error, Result};
use crate::linalg::{check_square, Mat};

/// Row/column normalized Amari index of a square matrix.
///
/// Zero exactly when `P` is a scaled permutation.
pub fn amari_distance(p: &Mat) -> Result<f64> {
    check_square("amari_distance", p)?;
    let n = p.nrows();
    if n == 0 {
        return Err(Error::invalid("amari_distance of an empty matrix"));
    }
    let q = p.abs();
    let mut rows = 0.0;
    for r in q.row_iter() {
        let m = r.max();
        if !(m > 0.0) {
            return Err(Error::invalid("amari_distance: zero row"));
        }
        rows += r.sum() / m - 1.0;
    }
    let mut cols = 0.0;
    for c in q.column_iter() {
        let m = c.max();
        if !(m > 0.0) {
            return Err(Error::invalid("amari_distance: zero column"));
        }
        cols += c.sum() / m - 1.0;
    }
    Ok((rows + cols) / (2.0 * n as f64))
}
