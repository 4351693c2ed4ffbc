//! Seasonal ARIMA (p,d,q)(P,D,Q)[S]: simulation, conditional-sum-of-squares
//! estimation, order selection and forecasting.
//!
//! Sign conventions: `phi(B) = 1 - sum phi_i B^i`, `Phi(B^S) = 1 - sum Phi_i B^{iS}`,
//! `theta(B) = 1 + sum theta_i B^i`, `Theta(B^S) = 1 + sum Theta_i B^{iS}`.

mod diff;
mod estimate;
mod forecast;
mod optimize;
pub mod poly;
mod simulate;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use poly::LagPoly;

pub use diff::{difference, integrate};
pub use estimate::{fit, fit_segments, fit_with, select_order, select_order_segments, AicRow, FitOptions, SarimaFit};
pub use forecast::{forecast, Forecast};
pub use simulate::{simulate, simulate_with_rng};

/// Largest order accepted for any of p, d, q, P, D, Q.
pub const MAX_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub sp: usize,
    #[serde(rename = "D")]
    pub sd: usize,
    #[serde(rename = "Q")]
    pub sq: usize,
    #[serde(rename = "S")]
    pub s: usize,
}

impl SarimaOrder {
    pub fn new(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize, s: usize) -> Result<SarimaOrder> {
        let o = SarimaOrder { p, d, q, sp, sd, sq, s };
        o.validate()?;
        Ok(o)
    }

    /// Non-seasonal ARMA(p, q) with `d` differences.
    pub fn arima(p: usize, d: usize, q: usize) -> SarimaOrder {
        SarimaOrder {
            p,
            d,
            q,
            sp: 0,
            sd: 0,
            sq: 0,
            s: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::InvalidInput("season length must be at least 1".into()));
        }
        if [self.p, self.d, self.q, self.sp, self.sd, self.sq].iter().any(|&o| o > MAX_ORDER) {
            return Err(Error::InvalidInput(format!("orders above {MAX_ORDER} are not supported: {self}")));
        }
        Ok(())
    }

    /// Coefficients excluding the innovation variance and any mean.
    pub fn n_coefficients(&self) -> usize {
        self.p + self.q + self.sp + self.sq
    }

    /// Values consumed by differencing.
    pub fn diff_len(&self) -> usize {
        self.d + self.sd * self.s
    }

    /// Degree of the expanded AR polynomial of the differenced series.
    pub fn ar_len(&self) -> usize {
        self.p + self.sp * self.s
    }
}

impl fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)?;
        if self.sp + self.sd + self.sq > 0 || self.s > 1 {
            write!(f, "({},{},{})[{}]", self.sp, self.sd, self.sq, self.s)?;
        }
        Ok(())
    }
}

impl FromStr for SarimaOrder {
    type Err = Error;

    /// Parses `(p,d,q)` or `(p,d,q)(P,D,Q)[S]`.
    fn from_str(s: &str) -> Result<SarimaOrder> {
        let bad = || Error::InvalidInput(format!("cannot parse SARIMA order {s:?}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let nums: Vec<usize> = compact
            .split(|c: char| !c.is_ascii_digit())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let order = match nums.as_slice() {
            [p, d, q] if compact.matches('(').count() == 1 && !compact.contains('[') => SarimaOrder::arima(*p, *d, *q),
            [p, d, q, sp, sd, sq, period] if compact.matches('(').count() == 2 && compact.contains('[') => SarimaOrder {
                p: *p,
                d: *d,
                q: *q,
                sp: *sp,
                sd: *sd,
                sq: *sq,
                s: *period,
            },
            _ => return Err(bad()),
        };
        order.validate()?;
        Ok(order)
    }
}

/// Coefficients of a SARIMA model. `mean` is the mean of the differenced
/// series and is only used when `d = D = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaParams {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    #[serde(rename = "Phi")]
    pub seasonal_phi: Vec<f64>,
    #[serde(rename = "Theta")]
    pub seasonal_theta: Vec<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub mean: f64,
}

impl SarimaParams {
    pub fn white_noise(sigma: f64) -> SarimaParams {
        SarimaParams {
            phi: vec![],
            theta: vec![],
            seasonal_phi: vec![],
            seasonal_theta: vec![],
            sigma,
            mean: 0.0,
        }
    }
}

/// An order with concrete coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaModel {
    pub order: SarimaOrder,
    pub params: SarimaParams,
}

impl SarimaModel {
    pub fn new(order: SarimaOrder, params: SarimaParams) -> Result<SarimaModel> {
        order.validate()?;
        let lens = [
            (order.p, params.phi.len(), "phi"),
            (order.q, params.theta.len(), "theta"),
            (order.sp, params.seasonal_phi.len(), "Phi"),
            (order.sq, params.seasonal_theta.len(), "Theta"),
        ];
        for (want, got, name) in lens {
            if want != got {
                return Err(Error::InvalidInput(format!(
                    "order {order} needs {want} {name} coefficient(s), got {got}"
                )));
            }
        }
        if !(params.sigma > 0.0) || !params.sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {}", params.sigma)));
        }
        let m = SarimaModel { order, params };
        m.check_region()?;
        Ok(m)
    }

    fn check_region(&self) -> Result<()> {
        let p = &self.params;
        if !poly::is_stationary(&p.phi) {
            return Err(Error::NonStationary(format!("AR polynomial {:?}", p.phi)));
        }
        if !poly::is_stationary(&p.seasonal_phi) {
            return Err(Error::NonStationary(format!("seasonal AR polynomial {:?}", p.seasonal_phi)));
        }
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        if !poly::is_stationary(&neg(&p.theta)) {
            return Err(Error::NonStationary(format!("MA polynomial {:?} is not invertible", p.theta)));
        }
        if !poly::is_stationary(&neg(&p.seasonal_theta)) {
            return Err(Error::NonStationary(format!(
                "seasonal MA polynomial {:?} is not invertible",
                p.seasonal_theta
            )));
        }
        Ok(())
    }

    /// `phi(B) Phi(B^S)` in `1 + sum c_j B^j` storage.
    pub(crate) fn ar_poly(&self) -> LagPoly {
        ar_poly(&self.order, &self.params.phi, &self.params.seasonal_phi)
    }

    pub(crate) fn ma_poly(&self) -> LagPoly {
        ma_poly(&self.order, &self.params.theta, &self.params.seasonal_theta)
    }

    /// Whether the differenced series carries a mean term.
    pub fn has_mean(&self) -> bool {
        self.order.diff_len() == 0
    }
}

pub(crate) fn ar_poly(order: &SarimaOrder, phi: &[f64], sphi: &[f64]) -> LagPoly {
    LagPoly::from_coefficients(phi, 1, -1.0).mul(&LagPoly::from_coefficients(sphi, order.s, -1.0))
}

pub(crate) fn ma_poly(order: &SarimaOrder, theta: &[f64], stheta: &[f64]) -> LagPoly {
    LagPoly::from_coefficients(theta, 1, 1.0).mul(&LagPoly::from_coefficients(stheta, order.s, 1.0))
}

/// Maximal runs of finite values.
pub fn finite_runs(series: &[f64]) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, v) in series.iter().enumerate() {
        match (v.is_finite(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..series.len());
    }
    runs
}

/// Applies the whitening filter `ma(B)^-1 ar(B) (1-B)^d (1-B^S)^D` to every
/// finite run of `series`, with zero pre-sample innovations. Output has the
/// input length; gaps and the first `d + D*S + p + P*S` values of each run
/// are `NaN`. The mean term is ignored, so the filter is linear.
pub fn whiten(model: &SarimaModel, series: &[f64]) -> Vec<f64> {
    let o = &model.order;
    let ar = model
        .ar_poly()
        .mul(&LagPoly::difference(1, o.d))
        .mul(&LagPoly::difference(o.s, o.sd));
    let ar_terms = ar.sparse();
    let ma_terms = model.ma_poly().sparse();
    let cond = ar.degree();
    let mut out = vec![f64::NAN; series.len()];
    for run in finite_runs(series) {
        if run.len() <= cond {
            continue;
        }
        let e = css_residuals(&series[run.clone()], &ar_terms, &ma_terms, cond);
        out[run.start + cond..run.end].copy_from_slice(&e);
    }
    out
}

/// Residuals `e_t` of `ar(B) w_t = ma(B) e_t` for `t >= cond`, with
/// `e_t = 0` before `cond`.
pub(crate) fn css_residuals(w: &[f64], ar: &[(usize, f64)], ma: &[(usize, f64)], cond: usize) -> Vec<f64> {
    let n = w.len();
    let mut e = vec![0.0; n];
    for t in cond..n {
        let mut v = w[t];
        for &(j, c) in ar {
            v += c * w[t - j];
        }
        for &(j, c) in ma {
            if j <= t {
                v -= c * e[t - j];
            }
        }
        e[t] = v;
    }
    e.split_off(cond.min(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_display_and_parse() {
        let o = SarimaOrder::new(1, 0, 0, 1, 1, 0, 24).unwrap();
        assert_eq!(o.to_string(), "(1,0,0)(1,1,0)[24]");
        assert_eq!("(1,0,0)(1,1,0)[24]".parse::<SarimaOrder>().unwrap(), o);
        assert_eq!("(2, 0, 1)".parse::<SarimaOrder>().unwrap(), SarimaOrder::arima(2, 0, 1));
        assert!("(1,0)".parse::<SarimaOrder>().is_err());
        assert!("(6,0,0)".parse::<SarimaOrder>().is_err());
        assert!(SarimaOrder::new(1, 0, 0, 0, 0, 0, 0).is_err());
    }

    #[test]
    fn model_rejects_explosive_or_noninvertible_parameters() {
        let o = SarimaOrder::arima(1, 0, 1);
        let mut p = SarimaParams::white_noise(1.0);
        p.phi = vec![1.01];
        p.theta = vec![0.2];
        assert!(matches!(SarimaModel::new(o, p.clone()), Err(Error::NonStationary(_))));
        p.phi = vec![0.5];
        p.theta = vec![-1.2];
        assert!(matches!(SarimaModel::new(o, p.clone()), Err(Error::NonStationary(_))));
        p.theta = vec![0.2];
        p.sigma = 0.0;
        assert!(SarimaModel::new(o, p).is_err());
    }

    #[test]
    fn runs_split_on_gaps() {
        let x = [f64::NAN, 1.0, 2.0, f64::NAN, 3.0];
        assert_eq!(finite_runs(&x), vec![1..3, 4..5]);
        assert!(finite_runs(&[f64::NAN]).is_empty());
    }

    #[test]
    fn whitening_recovers_simulated_innovations() {
        let o = SarimaOrder::new(1, 0, 0, 0, 1, 1, 4).unwrap();
        let m = SarimaModel::new(o, SarimaParams {
            phi: vec![0.5],
            seasonal_theta: vec![-0.4],
            ..SarimaParams::white_noise(1.0)
        })
        .unwrap();
        // build a series from known innovations with zero pre-sample
        let e: Vec<f64> = (0..200).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let mut w = vec![0.0; 200];
        for t in 0..200 {
            w[t] = e[t] + if t >= 4 { -0.4 * e[t - 4] } else { 0.0 } + if t >= 1 { 0.5 * w[t - 1] } else { 0.0 };
        }
        let mut y = vec![0.0; 200];
        for t in 0..200 {
            y[t] = w[t] + if t >= 4 { y[t - 4] } else { 0.0 };
        }
        let mut with_gap = y.clone();
        with_gap.insert(0, f64::NAN);
        let out = whiten(&m, &with_gap);
        assert!(out[..6].iter().all(|v| v.is_nan()));
        // after the conditioning window the MA recursion forgets its start
        for t in 150..200 {
            assert!((out[t + 1] - e[t]).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn serialized_names_follow_the_model_notation() {
        let o = SarimaOrder::new(1, 0, 0, 1, 1, 0, 24).unwrap();
        let json = serde_json::to_value(o).unwrap();
        assert_eq!(json["P"], 1);
        assert_eq!(json["S"], 24);
    }
}
