use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{integrate, SarimaModel};
use crate::error::{Error, Result};

/// Simulates `n` values of the model. The differenced process is run for
/// `burn_in` extra steps, which are discarded, and then integrated from zero
/// initial values.
pub fn simulate(model: &SarimaModel, n: usize, seed: u64, burn_in: usize) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(model, n, burn_in, &mut rng)
}

pub fn simulate_with_rng(model: &SarimaModel, n: usize, burn_in: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let o = &model.order;
    if burn_in < 10 * o.s {
        return Err(Error::InvalidInput(format!(
            "burn-in of {burn_in} is shorter than ten seasons ({})",
            10 * o.s
        )));
    }
    // re-validate in case the model was built field by field
    let model = SarimaModel::new(model.order, model.params.clone())?;
    let ar = model.ar_poly().sparse();
    let ma = model.ma_poly().sparse();
    let total = n + burn_in;
    let mut e = vec![0.0; total];
    let mut w = vec![0.0; total];
    let sigma = model.params.sigma;
    for t in 0..total {
        let z: f64 = StandardNormal.sample(rng);
        e[t] = sigma * z;
        let mut v = e[t];
        for &(j, c) in &ma {
            if j <= t {
                v += c * e[t - j];
            }
        }
        for &(j, c) in &ar {
            if j <= t {
                v -= c * w[t - j];
            }
        }
        w[t] = v;
    }
    let mean = if model.has_mean() { model.params.mean } else { 0.0 };
    let diffs: Vec<f64> = w[burn_in..].iter().map(|v| v + mean).collect();
    let k = o.diff_len();
    if k == 0 {
        return Ok(diffs);
    }
    let x = integrate(&diffs, o.d, o.sd, o.s, &vec![0.0; k])?;
    Ok(x[k..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sarima::{difference, SarimaOrder, SarimaParams};
    use crate::stats::{acf, pacf};

    #[test]
    fn white_noise_has_unit_std() {
        let m = SarimaModel::new(SarimaOrder::new(0, 0, 0, 0, 0, 0, 24).unwrap(), SarimaParams::white_noise(1.0)).unwrap();
        let x = simulate(&m, 100_000, 7, 240).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt();
        assert!((0.99..=1.01).contains(&sd), "{sd}");
    }

    #[test]
    fn ar1_lag_one_autocorrelation() {
        let mut p = SarimaParams::white_noise(1.0);
        p.phi = vec![0.8];
        let m = SarimaModel::new(SarimaOrder::arima(1, 0, 0), p).unwrap();
        let x = simulate(&m, 100_000, 8, 100).unwrap();
        let r = acf(&x, 1).unwrap()[1];
        assert!((0.79..=0.81).contains(&r), "{r}");
    }

    #[test]
    fn seasonal_model_autocorrelation_signature() {
        let mut p = SarimaParams::white_noise(0.58);
        p.phi = vec![0.83];
        p.seasonal_phi = vec![-0.43];
        let m = SarimaModel::new(SarimaOrder::new(1, 0, 0, 1, 1, 0, 24).unwrap(), p).unwrap();
        let x = simulate(&m, 10_000, 9, 480).unwrap();
        let w = difference(&x, 0, 1, 24).unwrap();
        let a = acf(&w, 25).unwrap();
        let pa = pacf(&w, 25).unwrap();
        // theoretical: acf(24) = -0.4206, pacf(24) = -0.1533
        assert!((a[24] + 0.4206).abs() < 0.05, "acf24 {}", a[24]);
        assert!((pa[24] + 0.1533).abs() < 0.05, "pacf24 {}", pa[24]);
        assert!((a[1] - 0.828).abs() < 0.05);
    }

    #[test]
    fn same_seed_same_path() {
        let mut p = SarimaParams::white_noise(1.0);
        p.phi = vec![0.3];
        let m = SarimaModel::new(SarimaOrder::arima(1, 1, 0), p).unwrap();
        assert_eq!(simulate(&m, 500, 3, 50).unwrap(), simulate(&m, 500, 3, 50).unwrap());
        assert_ne!(simulate(&m, 500, 3, 50).unwrap(), simulate(&m, 500, 4, 50).unwrap());
    }

    #[test]
    fn short_burn_in_and_explosive_parameters_are_errors() {
        let o = SarimaOrder::new(1, 0, 0, 0, 0, 0, 24).unwrap();
        let m = SarimaModel::new(o, SarimaParams { phi: vec![0.5], ..SarimaParams::white_noise(1.0) }).unwrap();
        assert!(simulate(&m, 100, 1, 100).is_err());
        let bad = SarimaModel {
            order: o,
            params: SarimaParams { phi: vec![1.5], ..SarimaParams::white_noise(1.0) },
        };
        assert!(matches!(simulate(&bad, 100, 1, 240), Err(Error::NonStationary(_))));
    }
}
