use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tolerances::PSD_FLOOR;

/// Spectral radius. The 2x2 case uses the closed-form characteristic roots.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        2 => {
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = tr * tr / 4.0 - det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
            } else {
                // complex pair: |lambda|^2 = det
                det.abs().sqrt()
            }
        }
        _ => m
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
    }
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn symmetry_error(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Smallest eigenvalue of the symmetric part.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn check_psd(name: &str, m: &DMatrix<f64>, definite: bool) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Validation(format!("{name} must be square")));
    }
    if !is_finite(m) {
        return Err(Error::Validation(format!("{name} has non-finite entries")));
    }
    if symmetry_error(m) > 1e-9 * (1.0 + m.amax()) {
        return Err(Error::Validation(format!("{name} is not symmetric")));
    }
    let lmin = min_eigenvalue(m);
    let floor = if definite { PSD_FLOOR } else { -PSD_FLOOR };
    if lmin < floor {
        let kind = if definite { "positive definite" } else { "positive semidefinite" };
        return Err(Error::Validation(format!(
            "{name} is not {kind} (min eigenvalue {lmin:e})"
        )));
    }
    Ok(())
}

pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Validation(format!("{name}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn l1_norm<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    v.into_iter().map(|x| x.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_closed_form_matches_schur() {
        let cases = [
            [1.0, 0.15, 0.1, 1.0],
            [0.0, -2.0, 1.0, 0.0],
            [0.3, 1.7, -0.4, -1.1],
        ];
        for c in cases {
            let m = DMatrix::from_row_slice(2, 2, &c);
            let reference = m
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!((spectral_radius(&m) - reference).abs() < 1e-12);
        }
    }

    #[test]
    fn psd_checks() {
        let q = DMatrix::identity(2, 2) * 10.0;
        assert!(check_psd("q", &q, true).is_ok());
        let z = DMatrix::zeros(2, 2);
        assert!(check_psd("z", &z, false).is_ok());
        assert!(check_psd("z", &z, true).is_err());
        let ns = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(check_psd("ns", &ns, false).is_err());
    }
}
