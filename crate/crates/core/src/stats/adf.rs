//! Augmented Dickey-Fuller unit-root test with MacKinnon p-values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::special::norm_cdf;
use super::TestReport;

use crate::error::{Error, Result};
use crate::linalg::{from_columns, least_squares};

/// Deterministic terms in the test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfRegression {
    None,
    #[default]
    Constant,
    ConstantTrend,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AdfOptions {
    /// Fixed lag order; `None` picks the lag by AIC up to the Schwert bound.
    pub lags: Option<usize>,
    /// Upper bound for the AIC search; defaults to floor(12 (n/100)^(1/4)).
    pub max_lag: Option<usize>,
    pub regression: AdfRegression,
}

// MacKinnon (1994) approximate p-value surfaces, single series.
struct PSurface {
    tau_max: f64,
    tau_min: f64,
    tau_star: f64,
    small: [f64; 3],
    large: [f64; 4],
}

const P_NONE: PSurface = PSurface {
    tau_max: f64::INFINITY,
    tau_min: -19.04,
    tau_star: -1.04,
    small: [0.6344, 1.2378, 3.2496e-2],
    large: [0.4797, 9.3557e-1, -0.6999e-1, 3.3066e-2],
};

const P_CONSTANT: PSurface = PSurface {
    tau_max: 2.74,
    tau_min: -18.83,
    tau_star: -1.61,
    small: [2.1659, 1.4412, 3.8269e-2],
    large: [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2],
};

const P_TREND: PSurface = PSurface {
    tau_max: 0.7,
    tau_min: -16.18,
    tau_star: -2.89,
    small: [3.2512, 1.6047, 4.9588e-2],
    large: [2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2],
};

// MacKinnon (2010) critical-value response surfaces at 1%, 5%, 10%:
// cv(T) = b0 + b1/T + b2/T^2 + b3/T^3.
const CRIT_NONE: [[f64; 4]; 3] = [
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.941, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
];
const CRIT_CONSTANT: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.04],
    [-2.56677, -1.5384, -2.809, 0.0],
];
const CRIT_TREND: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.38],
];

fn polyval(coef: &[f64], x: f64) -> f64 {
    // coef in increasing powers
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Approximate left-tail p-value of the Dickey-Fuller tau statistic.
pub fn mackinnon_p_value(tau: f64, regression: AdfRegression) -> f64 {
    let s = match regression {
        AdfRegression::None => &P_NONE,
        AdfRegression::Constant => &P_CONSTANT,
        AdfRegression::ConstantTrend => &P_TREND,
    };
    if tau > s.tau_max {
        return 1.0;
    }
    if tau < s.tau_min {
        return 0.0;
    }
    if tau <= s.tau_star {
        norm_cdf(polyval(&s.small, tau))
    } else {
        norm_cdf(polyval(&s.large, tau))
    }
}

/// 1%, 5% and 10% critical values for a sample of `nobs` observations.
pub fn mackinnon_critical_values(nobs: usize, regression: AdfRegression) -> [f64; 3] {
    let table = match regression {
        AdfRegression::None => &CRIT_NONE,
        AdfRegression::Constant => &CRIT_CONSTANT,
        AdfRegression::ConstantTrend => &CRIT_TREND,
    };
    let t = nobs as f64;
    let mut out = [0.0; 3];
    for (o, b) in out.iter_mut().zip(table) {
        *o = b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t);
    }
    out
}

struct AdfFit {
    tau: f64,
    aic: f64,
    nobs: usize,
}

/// Design of dy_t on [y_{t-1}, deterministics, dy_{t-1..t-lag}] using
/// observations `t >= start`. Columns for a smaller lag are a prefix.
fn adf_design(y: &[f64], lag: usize, start: usize, regression: AdfRegression) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // dy[i] = y[i+1] - y[i]; observation i uses level y[i] and dy[i-1..i-lag]
    let rows: Vec<usize> = (start..dy.len()).collect();
    let nobs = rows.len();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    columns.push(rows.iter().map(|&i| y[i]).collect());
    match regression {
        AdfRegression::None => {}
        AdfRegression::Constant => columns.push(vec![1.0; nobs]),
        AdfRegression::ConstantTrend => {
            columns.push(vec![1.0; nobs]);
            columns.push(rows.iter().map(|&i| (i + 1) as f64).collect());
        }
    }
    for l in 1..=lag {
        columns.push(rows.iter().map(|&i| dy[i - l]).collect());
    }
    (columns, rows.iter().map(|&i| dy[i]).collect())
}

fn deterministic_count(regression: AdfRegression) -> usize {
    match regression {
        AdfRegression::None => 0,
        AdfRegression::Constant => 1,
        AdfRegression::ConstantTrend => 2,
    }
}

fn adf_regression(y: &[f64], lag: usize, start: usize, regression: AdfRegression) -> Result<AdfFit> {
    let (columns, target) = adf_design(y, lag, start, regression);
    let nobs = target.len();
    let k = columns.len();
    if nobs <= k + 1 {
        return Err(Error::InsufficientData("ADF regression has too few observations".into()));
    }
    let ls = least_squares(&from_columns(&columns), &target)?;
    let sigma2 = ls.rss / (nobs - k) as f64;
    let se = (sigma2 * ls.xtx_inv[(0, 0)]).sqrt();
    let aic = nobs as f64 * (ls.rss / nobs as f64).ln() + 2.0 * k as f64;
    Ok(AdfFit {
        tau: ls.coef[0] / se,
        aic,
        nobs,
    })
}

/// AIC lag search on the common sample. Cross products are formed once and
/// each candidate is solved on a leading block.
fn select_lag(y: &[f64], max_lag: usize, regression: AdfRegression) -> Result<usize> {
    let (columns, target) = adf_design(y, max_lag, max_lag, regression);
    let nobs = target.len();
    let kmax = columns.len();
    if nobs <= kmax + 1 {
        return Err(Error::InsufficientData("ADF regression has too few observations".into()));
    }
    // unit-norm columns keep the normal equations well conditioned
    let scale: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let xtx = DMatrix::from_fn(kmax, kmax, |i, j| {
        columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum::<f64>() / (scale[i] * scale[j])
    });
    let xty = DVector::from_fn(kmax, |i, _| {
        columns[i].iter().zip(&target).map(|(a, b)| a * b).sum::<f64>() / scale[i]
    });
    let yty: f64 = target.iter().map(|v| v * v).sum();
    let base = 1 + deterministic_count(regression);
    let mut best = (f64::INFINITY, 0);
    for l in 0..=max_lag {
        let k = base + l;
        let a = xtx.view((0, 0), (k, k)).into_owned();
        let b = xty.rows(0, k).into_owned();
        let Some(chol) = a.cholesky() else { continue };
        let coef = chol.solve(&b);
        let rss = (yty - coef.dot(&b)).max(f64::MIN_POSITIVE);
        let aic = nobs as f64 * (rss / nobs as f64).ln() + 2.0 * k as f64;
        if aic < best.0 {
            best = (aic, l);
        }
    }
    if best.0.is_infinite() {
        // fall back to the exact regressions if the cross products are singular
        for l in 0..=max_lag {
            let fit = adf_regression(y, l, max_lag, regression)?;
            if fit.aic < best.0 {
                best = (fit.aic, l);
            }
        }
    }
    Ok(best.1)
}

/// Augmented Dickey-Fuller test. Left-tailed: small p-values reject the
/// unit root in favour of stationarity.
pub fn adf_test(series: &[f64], options: &AdfOptions) -> Result<TestReport> {
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("ADF requires a gap-free series".into()));
    }
    let n = series.len();
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    let lag = match options.lags {
        Some(l) => l,
        None => {
            let max_lag = options.max_lag.unwrap_or(schwert);
            if n < max_lag + 52 {
                return Err(Error::InsufficientData(format!(
                    "ADF needs at least 50 observations after lagging, got {}",
                    n.saturating_sub(max_lag + 2)
                )));
            }
            select_lag(series, max_lag, options.regression)?
        }
    };
    if n < lag + 52 {
        return Err(Error::InsufficientData(format!(
            "ADF needs at least 50 observations after lagging, got {}",
            n.saturating_sub(lag + 2)
        )));
    }
    let fit = adf_regression(series, lag, lag, options.regression)?;
    let p = mackinnon_p_value(fit.tau, options.regression);
    let cv = mackinnon_critical_values(fit.nobs, options.regression);
    let verdict = if fit.tau < cv[1] {
        "unit root rejected at 5% (stationary)"
    } else {
        "unit root not rejected at 5%"
    };
    TestReport::new(
        "adf",
        fit.tau,
        Some(p),
        lag,
        format!(
            "critical values 1%/5%/10%: {:.3}/{:.3}/{:.3}; {verdict}",
            cv[0], cv[1], cv[2]
        ),
    )
}
