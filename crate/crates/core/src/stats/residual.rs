use chrono::{NaiveDateTime, Timelike};

use super::acf::acf;
use super::special::chi2_sf;
use super::TestReport;
use crate::error::{Error, Result};
use crate::linalg::{from_columns, least_squares};

/// Koenker's studentized Breusch-Pagan test: LM = n R^2 from regressing the
/// squared residuals on a constant plus `regressors`, chi-square with
/// `regressors.len()` degrees of freedom.
pub fn breusch_pagan(residuals: &[f64], regressors: &[Vec<f64>]) -> Result<TestReport> {
    let n = residuals.len();
    if regressors.is_empty() {
        return Err(Error::InvalidInput("Breusch-Pagan needs at least one regressor".into()));
    }
    if regressors.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("regressor length differs from residuals".into()));
    }
    if residuals.iter().all(|&e| e == 0.0) {
        return Err(Error::Degenerate("Breusch-Pagan: residuals are all zero".into()));
    }
    let k = regressors.len();
    if n <= k + 1 {
        return Err(Error::InsufficientData(format!("Breusch-Pagan with {k} regressors on {n} points")));
    }
    let e2: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    let mut columns = Vec::with_capacity(k + 1);
    columns.push(vec![1.0; n]);
    columns.extend(regressors.iter().cloned());
    let ls = least_squares(&from_columns(&columns), &e2)?;
    let mean = super::mean(&e2);
    let tss: f64 = e2.iter().map(|v| (v - mean).powi(2)).sum();
    if tss <= 0.0 {
        return Err(Error::Degenerate("Breusch-Pagan: squared residuals are constant".into()));
    }
    let r2 = 1.0 - ls.rss / tss;
    let lm = n as f64 * r2;
    let p = chi2_sf(lm, k as f64);
    TestReport::new(
        "breusch_pagan",
        lm,
        Some(p),
        k,
        format!(
            "homoskedasticity {} at 5%",
            if p < 0.05 { "rejected" } else { "not rejected" }
        ),
    )
}

/// Breusch-Pagan against hour-of-day dummies (23 columns, hour 0 as base).
pub fn breusch_pagan_hourly(residuals: &[f64], timestamps: &[NaiveDateTime]) -> Result<TestReport> {
    if residuals.len() != timestamps.len() {
        return Err(Error::InvalidInput("residuals and timestamps differ in length".into()));
    }
    let dummies: Vec<Vec<f64>> = (1..24)
        .map(|h| {
            timestamps
                .iter()
                .map(|ts| if ts.hour() == h { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    breusch_pagan(residuals, &dummies)
}

/// Durbin-Watson statistic. Reported without a p-value.
pub fn durbin_watson(residuals: &[f64]) -> Result<TestReport> {
    if residuals.len() < 2 {
        return Err(Error::InsufficientData("Durbin-Watson needs n >= 2".into()));
    }
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    if ss == 0.0 {
        return Err(Error::Degenerate("Durbin-Watson: residuals are all zero".into()));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let dw = num / ss;
    let note = if dw < 1.5 {
        "positive autocorrelation (DW well below 2)"
    } else if dw > 2.5 {
        "negative autocorrelation (DW well above 2)"
    } else {
        "no strong first-order autocorrelation (DW near 2)"
    };
    TestReport::new("durbin_watson", dw, None, 1, note.to_string())
}

/// Ljung-Box portmanteau test on the first `h` autocorrelations.
pub fn ljung_box(residuals: &[f64], h: usize, fitted_params: usize) -> Result<TestReport> {
    if h <= fitted_params {
        return Err(Error::InvalidInput(format!(
            "Ljung-Box needs h > fitted_params, got h={h}, fitted_params={fitted_params}"
        )));
    }
    let n = residuals.len();
    if n <= h + 1 {
        return Err(Error::InsufficientData(format!("Ljung-Box with h={h} on {n} points")));
    }
    let rho = acf(residuals, h)?;
    let nf = n as f64;
    let q = nf * (nf + 2.0)
        * (1..=h)
            .map(|k| rho[k] * rho[k] / (nf - k as f64))
            .sum::<f64>();
    let df = h - fitted_params;
    let p = chi2_sf(q, df as f64);
    TestReport::new(
        "ljung_box",
        q,
        Some(p),
        df,
        format!(
            "h={h}; no autocorrelation {} at 5%",
            if p < 0.05 { "rejected" } else { "not rejected" }
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::acf::tests::{reference_ar, reference_noise};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn ljung_box_matches_statsmodels() {
        let ar = reference_ar();
        let r = ljung_box(&ar, 10, 0).unwrap();
        assert!((r.statistic - 281.25278543658277).abs() < 1e-8);
        assert!((r.p_value.unwrap() / 1.4165e-54 - 1.0).abs() < 1e-3);
        let r = ljung_box(&ar, 10, 2).unwrap();
        assert_eq!(r.df_or_lags, 8);
        assert!((r.p_value.unwrap() / 4.0002e-56 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ljung_box_rejects_raw_ar() {
        let e = normals(4, 5000);
        let mut x = vec![0.0; e.len()];
        for t in 1..x.len() {
            x[t] = 0.8 * x[t - 1] + e[t];
        }
        assert!(ljung_box(&x, 24, 0).unwrap().p_value.unwrap() < 0.001);
        assert!(ljung_box(&e, 24, 0).unwrap().p_value.unwrap() > 0.05);
    }

    #[test]
    fn ljung_box_needs_positive_df() {
        assert!(ljung_box(&normals(1, 100), 2, 2).is_err());
    }

    #[test]
    fn breusch_pagan_matches_statsmodels() {
        let u = reference_noise();
        let z: Vec<f64> = (1..=400).map(|i| (0.37 * i as f64).cos()).collect();
        let e: Vec<f64> = u.iter().zip(&z).map(|(u, z)| u * (1.0 + 0.8 * z.abs())).collect();
        let r = breusch_pagan(&e, &[z]).unwrap();
        assert!((r.statistic - 3.249720619814722).abs() < 1e-9);
        assert!((r.p_value.unwrap() - 0.07143563290228779).abs() < 1e-10);
    }

    #[test]
    fn breusch_pagan_detects_constructed_heteroskedasticity() {
        let z: Vec<f64> = normals(9, 2000).iter().map(|v| v.abs()).collect();
        let e: Vec<f64> = normals(10, 2000).iter().zip(&z).map(|(e, z)| e * z.sqrt()).collect();
        assert!(breusch_pagan(&e, &[z]).unwrap().p_value.unwrap() < 0.01);
    }

    #[test]
    fn breusch_pagan_rejects_zero_residuals() {
        assert!(breusch_pagan(&[0.0; 50], &[normals(1, 50)]).is_err());
    }

    #[test]
    fn durbin_watson_examples() {
        let r = durbin_watson(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(r.statistic, 3.0);
        assert!(r.p_value.is_none());
        assert_eq!(durbin_watson(&[2.0; 10]).unwrap().statistic, 0.0);
        let dw = durbin_watson(&normals(12, 10_000)).unwrap().statistic;
        assert!((1.9..=2.1).contains(&dw));
        assert!(durbin_watson(&[0.0; 10]).is_err());
        assert!((durbin_watson(&reference_ar()).unwrap().statistic - 0.7801405171234472).abs() < 1e-12);
    }
}
