//! Lag polynomials and the stationarity-enforcing reparameterization.

/// Lag polynomial `1 + sum c_j B^j`, stored densely with `c[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagPoly(pub Vec<f64>);

impl LagPoly {
    pub fn one() -> LagPoly {
        LagPoly(vec![1.0])
    }

    /// `1 + sign * sum coef_i B^{i*step}`.
    pub fn from_coefficients(coef: &[f64], step: usize, sign: f64) -> LagPoly {
        let mut c = vec![0.0; coef.len() * step + 1];
        c[0] = 1.0;
        for (i, v) in coef.iter().enumerate() {
            c[(i + 1) * step] = sign * v;
        }
        LagPoly(c)
    }

    /// `(1 - B^step)^power`.
    pub fn difference(step: usize, power: usize) -> LagPoly {
        let mut out = LagPoly::one();
        for _ in 0..power {
            out = out.mul(&LagPoly::from_coefficients(&[1.0], step, -1.0));
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn mul(&self, other: &LagPoly) -> LagPoly {
        let mut c = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        LagPoly(c)
    }

    /// Nonzero terms of lag >= 1 as `(lag, coefficient)`.
    pub fn sparse(&self) -> Vec<(usize, f64)> {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect()
    }
}

/// Maps partial autocorrelations in (-1, 1) to the coefficients of a
/// stationary AR polynomial `1 - sum a_j B^j` (Durbin-Levinson).
pub fn pacf_to_ar(r: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(r.len());
    for (m, &rm) in r.iter().enumerate() {
        let prev = a.clone();
        for j in 0..m {
            a[j] = prev[j] - rm * prev[m - 1 - j];
        }
        a.push(rm);
    }
    a
}

/// Inverse of [`pacf_to_ar`]. Returns `None` when the polynomial is not
/// stationary (some partial autocorrelation has modulus >= 1).
pub fn ar_to_pacf(a: &[f64]) -> Option<Vec<f64>> {
    let k = a.len();
    let mut cur = a.to_vec();
    let mut r = vec![0.0; k];
    for m in (0..k).rev() {
        let rm = cur[m];
        if !(rm.abs() < 1.0) {
            return None;
        }
        r[m] = rm;
        let denom = 1.0 - rm * rm;
        let prev: Vec<f64> = (0..m).map(|j| (cur[j] + rm * cur[m - 1 - j]) / denom).collect();
        cur = prev;
    }
    Some(r)
}

/// True when `1 - sum a_j B^j` has all roots outside the unit circle.
pub fn is_stationary(a: &[f64]) -> bool {
    ar_to_pacf(a).is_some()
}

/// Weights of `ma(B) / ar(B)` up to `n` terms, `psi[0] == 1`. Both
/// polynomials use the `1 + sum c_j B^j` storage.
pub fn psi_weights(ar: &LagPoly, ma: &LagPoly, n: usize) -> Vec<f64> {
    let mut psi = vec![0.0; n];
    for j in 0..n {
        let mut v = ma.0.get(j).copied().unwrap_or(0.0);
        for i in 1..=j.min(ar.degree()) {
            v -= ar.0[i] * psi[j - i];
        }
        psi[j] = v;
    }
    psi
}
