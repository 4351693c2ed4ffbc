use crate::error::{Error, Result};

/// Sample autocorrelations for lags `0..=max_lag` (biased autocovariance
/// estimator, so `acf[0] == 1`).
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag + 1 >= n {
        return Err(Error::InsufficientData(format!(
            "acf up to lag {max_lag} needs more than {} observations, got {n}",
            max_lag + 1
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = centered.iter().map(|x| x * x).sum();
    if c0 <= 0.0 {
        return Err(Error::Degenerate("acf of a constant series".into()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let ck: f64 = centered[k..].iter().zip(&centered).map(|(a, b)| a * b).sum();
        out.push(ck / c0);
    }
    Ok(out)
}

/// Partial autocorrelations from an autocorrelation sequence via the
/// Durbin-Levinson recursion. `pacf[0] == 1`.
pub fn pacf_from_acf(rho: &[f64]) -> Vec<f64> {
    let max_lag = rho.len().saturating_sub(1);
    let mut out = vec![1.0];
    let mut phi: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = rho[k] - phi.iter().enumerate().map(|(j, p)| p * rho[k - 1 - j]).sum::<f64>();
        let kappa = if v > 0.0 { num / v } else { 0.0 };
        let prev = phi.clone();
        phi.push(kappa);
        for j in 0..k - 1 {
            phi[j] = prev[j] - kappa * prev[k - 2 - j];
        }
        v *= 1.0 - kappa * kappa;
        out.push(kappa);
    }
    out
}

pub fn pacf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    Ok(pacf_from_acf(&acf(series, max_lag)?))
}

/// `x_t - x_{t-period}`.
pub fn seasonal_difference(series: &[f64], period: usize) -> Result<Vec<f64>> {
    if period == 0 || series.len() <= period {
        return Err(Error::InsufficientData(format!(
            "seasonal difference at lag {period} of {} values",
            series.len()
        )));
    }
    Ok(series[period..].iter().zip(series).map(|(a, b)| a - b).collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Deterministic pseudo-random sequence shared with the statsmodels
    /// reference computations: u_i = frac(sin(12.9898 i) * 43758.5453) - 0.5.
    pub(crate) fn reference_noise() -> Vec<f64> {
        (1..=400)
            .map(|i| {
                let v = (i as f64 * 12.9898).sin() * 43758.5453;
                v - v.floor() - 0.5
            })
            .collect()
    }

    /// AR(1) with coefficient 0.6 driven by [`reference_noise`].
    pub(crate) fn reference_ar() -> Vec<f64> {
        let u = reference_noise();
        let mut ar = vec![0.0; u.len()];
        for t in 1..u.len() {
            ar[t] = 0.6 * ar[t - 1] + u[t];
        }
        ar
    }

    #[test]
    fn matches_statsmodels_reference() {
        let ar = reference_ar();
        let a = acf(&ar, 3).unwrap();
        let p = pacf(&ar, 3).unwrap();
        let want_a = [1.0, 0.6073401685183628, 0.3590077664738193, 0.23444742837072624];
        let want_p = [1.0, 0.6073401685183627, -0.015613566408296411, 0.035636332238807564];
        for k in 0..4 {
            assert!((a[k] - want_a[k]).abs() < 1e-9);
            assert!((p[k] - want_p[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn lag_zero_is_one_and_pacf_one_equals_acf_one() {
        let ar = reference_ar();
        let a = acf(&ar, 10).unwrap();
        let p = pacf(&ar, 10).unwrap();
        assert_eq!(a[0], 1.0);
        assert_eq!(p[1], a[1]);
    }

    #[test]
    fn white_noise_stays_inside_bartlett_bands() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a = acf(&x, 100).unwrap();
        let band = 2.0 / (x.len() as f64).sqrt();
        let inside = a[1..].iter().filter(|r| r.abs() < band).count();
        assert!(inside as f64 >= 0.9 * 100.0, "{inside} of 100 inside");
    }

    #[test]
    fn ar1_acf_decays_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut x = vec![0.0; 10_000];
        for t in 1..x.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[t] = 0.8 * x[t - 1] + e;
        }
        let a = acf(&x, 5).unwrap();
        for k in 1..=5 {
            assert!((a[k] - 0.8f64.powi(k as i32)).abs() < 0.05, "lag {k}: {}", a[k]);
        }
    }

    #[test]
    fn too_many_lags_is_an_error() {
        assert!(acf(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(acf(&[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn seasonal_difference_removes_periodic_pattern() {
        let x: Vec<f64> = (0..96).map(|t| ((t % 24) as f64).sqrt()).collect();
        assert!(seasonal_difference(&x, 24).unwrap().iter().all(|&v| v == 0.0));
    }
}
