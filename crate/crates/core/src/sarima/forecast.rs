use serde::{Deserialize, Serialize};

use super::poly::{psi_weights, LagPoly};
use super::{css_residuals, SarimaModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Minimum-MSE forecasts from the end of `history` (undifferenced, in the
/// modeled space). Past innovations are reconstructed from the history with
/// pre-sample innovations set to zero.
pub fn forecast(model: &SarimaModel, horizon: usize, history: &[f64]) -> Result<Forecast> {
    let o = &model.order;
    let ar = model
        .ar_poly()
        .mul(&LagPoly::difference(1, o.d))
        .mul(&LagPoly::difference(o.s, o.sd));
    let ma = model.ma_poly();
    let window = ar.degree();
    if history.len() < window.max(1) {
        return Err(Error::InsufficientData(format!(
            "forecasting {o} needs {window} past values, got {}",
            history.len()
        )));
    }
    if history.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("forecast history has missing values".into()));
    }
    let mean = if model.has_mean() { model.params.mean } else { 0.0 };
    let y: Vec<f64> = history.iter().map(|v| v - mean).collect();
    let ar_terms = ar.sparse();
    let ma_terms = ma.sparse();
    let tail = css_residuals(&y, &ar_terms, &ma_terms, window);
    let n = y.len();
    let mut e = vec![0.0; n - tail.len()];
    e.extend(tail);
    let mut path = y;
    e.resize(n + horizon, 0.0);
    for h in 0..horizon {
        let t = n + h;
        let mut v = 0.0;
        for &(j, c) in &ar_terms {
            v -= c * path[t - j];
        }
        for &(j, c) in &ma_terms {
            v += c * e[t - j];
        }
        path.push(v);
    }
    let psi = psi_weights(&ar, &ma, horizon);
    let sigma = model.params.sigma;
    let mut acc = 0.0;
    let std = psi
        .iter()
        .map(|p| {
            acc += p * p;
            sigma * acc.sqrt()
        })
        .collect();
    Ok(Forecast {
        mean: path[n..].iter().map(|v| v + mean).collect(),
        std,
    })
}
