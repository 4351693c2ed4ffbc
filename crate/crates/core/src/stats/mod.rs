//! Descriptive statistics, hypothesis tests, autocorrelation functions and
//! windowed correlation analysis.

mod acf;
mod adf;
mod correlation;
mod normality;
mod residual;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use acf::{acf, pacf, pacf_from_acf, seasonal_difference};
pub use adf::{adf_test, mackinnon_critical_values, mackinnon_p_value, AdfOptions, AdfRegression};
pub use correlation::{pearson, windowed_correlation, CorrelationFilter};
pub use normality::{jarque_bera, jarque_bera_statistic};
pub use residual::{breusch_pagan, breusch_pagan_hourly, durbin_watson, ljung_box};

/// Uniform result shape for every hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    /// `None` for statistics reported without a null distribution (Durbin-Watson).
    pub p_value: Option<f64>,
    pub df_or_lags: usize,
    pub decision_note: String,
}

impl TestReport {
    pub(crate) fn new(
        name: &str,
        statistic: f64,
        p_value: Option<f64>,
        df_or_lags: usize,
        decision_note: String,
    ) -> Result<TestReport> {
        if !statistic.is_finite() {
            return Err(Error::Degenerate(format!("{name} statistic is not finite")));
        }
        Ok(TestReport {
            name: name.to_string(),
            statistic,
            p_value: p_value.map(|p| p.clamp(0.0, 1.0)),
            df_or_lags,
            decision_note,
        })
    }

    /// True when the p-value is below `alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value.is_some_and(|p| p < alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
    pub window_note: String,
}

/// Mean, sample standard deviation and adjusted Fisher-Pearson skewness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
}

pub fn moments(series: &[f64]) -> Result<Moments> {
    let n = series.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("moments need n >= 3, got {n}")));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &x in series {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= nf;
    m3 /= nf;
    if m2 <= 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let g1 = m3 / m2.powf(1.5);
    Ok(Moments {
        mean,
        std: (m2 * nf / (nf - 1.0)).sqrt(),
        skewness: (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * g1,
    })
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn symmetric_series_has_zero_skew() {
        let m = moments(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.skewness, 0.0);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.std, 1.0);
    }

    #[test]
    fn exponential_skewness_is_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..100_000).map(|_| Exp1.sample(&mut rng)).collect();
        let m = moments(&x).unwrap();
        assert!((m.skewness - 2.0).abs() < 0.05, "skewness {}", m.skewness);
    }

    #[test]
    fn constant_series_is_an_error() {
        assert!(moments(&[3.0; 10]).is_err());
    }

    #[test]
    fn matches_reference_adjusted_skewness() {
        // scipy.stats.skew(ar, bias=False) on the shared reference sequence
        let ar = acf::tests::reference_ar();
        let m = moments(&ar).unwrap();
        assert!((m.skewness - -0.09725345407189413).abs() < 1e-12);
    }
}
