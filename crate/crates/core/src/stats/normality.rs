use super::special::chi2_sf;
use super::TestReport;
use crate::error::{Error, Result};

/// JB = n/6 (S^2 + K^2/4) with S the skewness and K the excess kurtosis.
pub fn jarque_bera_statistic(n: usize, skewness: f64, excess_kurtosis: f64) -> f64 {
    n as f64 / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0)
}

/// Jarque-Bera normality test (chi-square, 2 df, upper tail).
pub fn jarque_bera(series: &[f64]) -> Result<TestReport> {
    let n = series.len();
    if n < 30 {
        return Err(Error::InsufficientData(format!("Jarque-Bera needs n >= 30, got {n}")));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(Error::Degenerate("Jarque-Bera: zero variance".into()));
    }
    let s = m3 / m2.powf(1.5);
    let k = m4 / (m2 * m2) - 3.0;
    let stat = jarque_bera_statistic(n, s, k);
    let p = chi2_sf(stat, 2.0);
    TestReport::new(
        "jarque_bera",
        stat,
        Some(p),
        2,
        format!("skewness {s:.4}, excess kurtosis {k:.4}; normality {}", verdict(p)),
    )
}

fn verdict(p: f64) -> &'static str {
    if p < 0.05 {
        "rejected at 5%"
    } else {
        "not rejected at 5%"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    #[test]
    fn null_values_give_unit_p() {
        let stat = jarque_bera_statistic(500, 0.0, 0.0);
        assert_eq!(stat, 0.0);
        assert_eq!(chi2_sf(stat, 2.0), 1.0);
    }

    #[test]
    fn normal_sample_is_not_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(jarque_bera(&x).unwrap().p_value.unwrap() > 0.05);
    }

    #[test]
    fn exponential_sample_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..1000).map(|_| Exp1.sample(&mut rng)).collect();
        assert!(jarque_bera(&x).unwrap().p_value.unwrap() < 0.001);
    }

    #[test]
    fn matches_statsmodels_reference() {
        let ar = crate::stats::acf::tests::reference_ar();
        let r = jarque_bera(&ar).unwrap();
        assert!((r.statistic - 8.702342058133969).abs() < 1e-9);
        assert!((r.p_value.unwrap() - 0.012891707173947251).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_an_error() {
        assert!(jarque_bera(&[1.0; 40]).is_err());
    }
}
