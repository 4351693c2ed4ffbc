use super::poly::LagPoly;
use crate::error::{Error, Result};

/// `(1 - B)^d (1 - B^S)^D x`. The output is `d + D*S` values shorter.
pub fn difference(series: &[f64], d: usize, seasonal_d: usize, period: usize) -> Result<Vec<f64>> {
    let k = d + seasonal_d * period;
    if series.len() <= k {
        return Err(Error::InsufficientData(format!(
            "differencing removes {k} values from a series of {}",
            series.len()
        )));
    }
    let mut x = series.to_vec();
    for _ in 0..d {
        x = x.windows(2).map(|w| w[1] - w[0]).collect();
    }
    for _ in 0..seasonal_d {
        x = x[period..].iter().zip(&x).map(|(a, b)| a - b).collect();
    }
    Ok(x)
}

/// Inverse of [`difference`]: rebuilds the series from its differences and
/// its first `d + D*S` values.
pub fn integrate(
    diffs: &[f64],
    d: usize,
    seasonal_d: usize,
    period: usize,
    initial: &[f64],
) -> Result<Vec<f64>> {
    let k = d + seasonal_d * period;
    if initial.len() != k {
        return Err(Error::InvalidInput(format!(
            "integration needs {k} initial values, got {}",
            initial.len()
        )));
    }
    let poly = LagPoly::difference(1, d).mul(&LagPoly::difference(period, seasonal_d));
    let terms = poly.sparse();
    let mut x = Vec::with_capacity(k + diffs.len());
    x.extend_from_slice(initial);
    for (i, w) in diffs.iter().enumerate() {
        let t = k + i;
        let mut v = *w;
        for &(j, c) in &terms {
            v -= c * x[t - j];
        }
        x.push(v);
    }
    Ok(x)
}
