//! Least-squares kernel shared by the regression and test modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number (of the column-normalized design) above which the
/// design is treated as collinear.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    /// (X'X)^-1, unscaled.
    pub xtx_inv: DMatrix<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub condition: f64,
}

/// Indices of the columns that participate in the near-null direction of `x`.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let (scaled, _) = normalize_columns(x);
    let svd = scaled.svd(false, true);
    let Some(v_t) = svd.v_t else {
        return Vec::new();
    };
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let row = v_t.row(imin);
    (0..row.len()).filter(|&j| row[j].abs() > 0.1).collect()
}

fn normalize_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut scaled = x.clone();
    let mut norms = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let norm = x.column(j).norm();
        norms.push(norm);
        if norm > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    (scaled, norms)
}

/// Condition number of the column-normalized matrix (infinite when a column
/// is identically zero or the matrix is rank deficient).
pub fn condition_number(x: &DMatrix<f64>) -> f64 {
    if x.ncols() == 0 {
        return 1.0;
    }
    let (scaled, norms) = normalize_columns(x);
    if norms.iter().any(|&n| n == 0.0) {
        return f64::INFINITY;
    }
    let sv = scaled.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Ordinary least squares through the SVD of the column-normalized design.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<LeastSquares> {
    let n = x.nrows();
    let k = x.ncols();
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "target has {} rows, design has {n}",
            y.len()
        )));
    }
    if k == 0 {
        let residuals = y.to_vec();
        let rss = residuals.iter().map(|e| e * e).sum();
        return Ok(LeastSquares {
            coef: Vec::new(),
            xtx_inv: DMatrix::zeros(0, 0),
            fitted: vec![0.0; n],
            residuals,
            rss,
            condition: 1.0,
        });
    }
    if n < k {
        return Err(Error::RankDeficient(format!("{n} rows for {k} columns")));
    }
    let (scaled, norms) = normalize_columns(x);
    if let Some(j) = norms.iter().position(|&s| s == 0.0) {
        return Err(Error::RankDeficient(format!("column {j} is identically zero")));
    }
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient(format!(
            "condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let yv = DVector::from_column_slice(y);
    let uty = u.transpose() * &yv;
    let mut scaled_coef = DVector::<f64>::zeros(k);
    for i in 0..k {
        let w = uty[i] / sv[i];
        for j in 0..k {
            scaled_coef[j] += v_t[(i, j)] * w;
        }
    }
    // (Xs'Xs)^-1 = V S^-2 V'
    let mut inv = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let w = 1.0 / (sv[i] * sv[i]);
        for a in 0..k {
            for b in 0..k {
                inv[(a, b)] += v_t[(i, a)] * v_t[(i, b)] * w;
            }
        }
    }
    let coef: Vec<f64> = (0..k).map(|j| scaled_coef[j] / norms[j]).collect();
    for a in 0..k {
        for b in 0..k {
            inv[(a, b)] /= norms[a] * norms[b];
        }
    }
    let fitted_v = x * DVector::from_column_slice(&coef);
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(LeastSquares {
        coef,
        xtx_inv: inv,
        fitted,
        residuals,
        rss,
        condition,
    })
}

/// Builds a column-major design matrix from column vectors of equal length.
pub fn from_columns(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i])
}

/// Inverse of a small symmetric positive-definite matrix, or `None` when it
/// is singular.
pub fn invert_symmetric(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse()).or_else(|| m.clone().try_inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x1: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let x2: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let ls = least_squares(&from_columns(&[x1, x2]), &y).unwrap();
        assert!((ls.coef[0] - 2.0).abs() < 1e-10);
        assert!((ls.coef[1] + 0.5).abs() < 1e-10);
        assert!(ls.rss < 1e-16);
    }

    #[test]
    fn duplicate_columns_are_rejected() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let m = from_columns(&[x.clone(), x.clone()]);
        assert!(least_squares(&m, &x).is_err());
        assert_eq!(collinear_columns(&m), vec![0, 1]);
    }

    #[test]
    fn inverse_matches_normal_equations() {
        let x1: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).cos()).collect();
        let x2: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
        let m = from_columns(&[x1, x2]);
        let ls = least_squares(&m, &vec![1.0; 30]).unwrap();
        let direct = (m.transpose() * &m).try_inverse().unwrap();
        assert!((ls.xtx_inv.clone() - direct).abs().max() < 1e-10);
    }
}
