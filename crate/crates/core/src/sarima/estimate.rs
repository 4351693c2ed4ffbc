use log::warn;
use serde::{Deserialize, Serialize};

use super::optimize::{gradient, hessian, nelder_mead};
use super::poly::{ar_to_pacf, pacf_to_ar};
use super::{ar_poly, css_residuals, difference, ma_poly, SarimaModel, SarimaOrder, SarimaParams};
use crate::error::{Error, Result};
use crate::linalg::invert_symmetric;
use crate::stats::special::normal_two_sided;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Iteration cap for each simplex run.
    pub max_iter: usize,
    /// Additional simplex runs restarted from the incumbent.
    pub restarts: usize,
    /// Index of the first observation (in the undifferenced series) that
    /// enters the objective. Defaults to the model's own conditioning
    /// window `d + D*S + p + P*S`.
    pub start: Option<usize>,
    /// Estimate a mean for the differenced series. Defaults to true exactly
    /// when `d = D = 0`.
    pub include_mean: Option<bool>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 5000,
            restarts: 3,
            start: None,
            include_mean: None,
        }
    }
}

/// Estimated SARIMA model with inference and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaFit {
    pub model: SarimaModel,
    /// Coefficient names aligned with `se` and `p_values`; the innovation
    /// standard deviation comes last as `sigma`.
    pub names: Vec<String>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    /// Observations entering the objective.
    pub nobs: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of the objective gradient at the optimum, divided by `nobs`.
    pub scaled_gradient: f64,
}

impl SarimaFit {
    pub fn order(&self) -> SarimaOrder {
        self.model.order
    }

    pub fn params(&self) -> &SarimaParams {
        &self.model.params
    }

    pub fn sigma(&self) -> f64 {
        self.model.params.sigma
    }

    /// Standard error for a named coefficient.
    pub fn se_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.se[i])
    }

    /// Number of estimated parameters counted by the AIC.
    pub fn n_params(&self) -> usize {
        self.names.len()
    }
}

pub(crate) fn coefficient_names(order: &SarimaOrder, mean: bool) -> Vec<String> {
    let mut names = Vec::new();
    names.extend((1..=order.p).map(|i| format!("ar.L{i}")));
    names.extend((1..=order.q).map(|i| format!("ma.L{i}")));
    names.extend((1..=order.sp).map(|i| format!("ar.S.L{}", i * order.s)));
    names.extend((1..=order.sq).map(|i| format!("ma.S.L{}", i * order.s)));
    if mean {
        names.push("mean".into());
    }
    names
}

struct Problem {
    order: SarimaOrder,
    segments: Vec<Vec<f64>>,
    cond: usize,
    mean: bool,
    nobs: usize,
}

impl Problem {
    fn unpack(&self, beta: &[f64]) -> (SarimaParams, f64) {
        let o = &self.order;
        let mut it = beta.iter().copied();
        let mut take = |k: usize| (0..k).map(|_| it.next().unwrap()).collect::<Vec<f64>>();
        let phi = take(o.p);
        let theta = take(o.q);
        let sphi = take(o.sp);
        let stheta = take(o.sq);
        let mean = if self.mean { take(1)[0] } else { 0.0 };
        (
            SarimaParams {
                phi,
                theta,
                seasonal_phi: sphi,
                seasonal_theta: stheta,
                sigma: 1.0,
                mean,
            },
            mean,
        )
    }

    fn in_region(p: &SarimaParams) -> bool {
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        ar_to_pacf(&p.phi).is_some()
            && ar_to_pacf(&p.seasonal_phi).is_some()
            && ar_to_pacf(&neg(&p.theta)).is_some()
            && ar_to_pacf(&neg(&p.seasonal_theta)).is_some()
    }

    fn residuals(&self, beta: &[f64]) -> Option<Vec<f64>> {
        let (p, mean) = self.unpack(beta);
        if !Problem::in_region(&p) {
            return None;
        }
        let ar = ar_poly(&self.order, &p.phi, &p.seasonal_phi).sparse();
        let ma = ma_poly(&self.order, &p.theta, &p.seasonal_theta).sparse();
        let mut out = Vec::with_capacity(self.nobs);
        for w in &self.segments {
            let centered: Vec<f64> = w.iter().map(|v| v - mean).collect();
            out.extend(css_residuals(&centered, &ar, &ma, self.cond));
        }
        Some(out)
    }

    fn sum_squares(&self, beta: &[f64]) -> f64 {
        match self.residuals(beta) {
            Some(e) => e.iter().map(|v| v * v).sum(),
            None => f64::INFINITY,
        }
    }

    /// Negative concentrated log-likelihood up to a constant.
    fn objective(&self, beta: &[f64]) -> f64 {
        let ss = self.sum_squares(beta);
        let n = self.nobs as f64;
        0.5 * n * (ss / n).ln()
    }

    fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        let o = &self.order;
        let mut out = Vec::with_capacity(u.len());
        let mut pos = 0;
        for (k, sign) in [(o.p, 1.0), (o.q, -1.0), (o.sp, 1.0), (o.sq, -1.0)] {
            let r: Vec<f64> = u[pos..pos + k].iter().map(|v| v.tanh()).collect();
            out.extend(pacf_to_ar(&r).into_iter().map(|a| sign * a));
            pos += k;
        }
        if self.mean {
            out.push(u[pos]);
        }
        out
    }

    fn steps(&self, beta: &[f64], scale: f64) -> Vec<f64> {
        let k = self.order.n_coefficients();
        beta.iter()
            .enumerate()
            .map(|(i, b)| if i < k { 1e-4 } else { 1e-4 * b.abs().max(scale) })
            .collect()
    }
}

/// Fits a SARIMA model to a gap-free series by conditional sum of squares.
pub fn fit(series: &[f64], order: SarimaOrder) -> Result<SarimaFit> {
    fit_with(&[series], order, &FitOptions::default())
}

/// Fits one model to several gap-free segments, summing the conditional
/// sum of squares across them.
pub fn fit_segments(segments: &[&[f64]], order: SarimaOrder) -> Result<SarimaFit> {
    fit_with(segments, order, &FitOptions::default())
}

pub fn fit_with(segments: &[&[f64]], order: SarimaOrder, options: &FitOptions) -> Result<SarimaFit> {
    order.validate()?;
    let k_diff = order.diff_len();
    let start = options.start.unwrap_or(k_diff + order.ar_len());
    if start < k_diff + order.ar_len() {
        return Err(Error::InvalidInput(format!(
            "start {start} is inside the conditioning window of {order}"
        )));
    }
    let cond = start - k_diff;
    let mut diffed = Vec::new();
    for seg in segments {
        if seg.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("SARIMA fit needs gap-free segments".into()));
        }
        if seg.len() > start {
            diffed.push(difference(seg, order.d, order.sd, order.s)?);
        }
    }
    let nobs: usize = diffed.iter().map(|w| w.len() - cond).sum();
    let total: usize = segments.iter().map(|s| s.len()).sum();
    let min_len = 10 * (order.n_coefficients() + 1) + k_diff;
    if diffed.is_empty() || total < min_len || nobs < order.n_coefficients() + 2 {
        return Err(Error::InsufficientData(format!(
            "{order} needs at least {min_len} observations in segments longer than {start}"
        )));
    }
    let pooled: Vec<f64> = diffed.iter().flatten().copied().collect();
    let mu = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let var = pooled.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / pooled.len() as f64;
    if !(var > 1e-14 * mu.abs().max(1.0).powi(2)) {
        return Err(Error::Degenerate("differenced series is constant".into()));
    }
    let include_mean = options.include_mean.unwrap_or(k_diff == 0);
    let problem = Problem {
        order,
        segments: diffed,
        cond,
        mean: include_mean,
        nobs,
    };
    let dim = order.n_coefficients() + usize::from(include_mean);
    let sd = var.sqrt();

    let mut u0 = vec![0.0; dim];
    if include_mean {
        u0[dim - 1] = mu;
    }
    let steps: Vec<f64> = (0..dim)
        .map(|i| if include_mean && i == dim - 1 { 0.1 * sd } else { 0.3 })
        .collect();
    let mut f_u = |u: &[f64]| problem.objective(&problem.to_natural(u));
    let mut best = nelder_mead(&mut f_u, &u0, &steps, options.max_iter, 1e-12, 1e-7);
    let mut iterations = best.iterations;
    let mut converged = best.converged;
    for _ in 0..options.restarts {
        let small: Vec<f64> = steps.iter().map(|s| s * 0.3).collect();
        let next = nelder_mead(&mut f_u, &best.x, &small, options.max_iter, 1e-12, 1e-7);
        iterations += next.iterations;
        converged = next.converged;
        let improved = best.f - next.f;
        if next.f <= best.f {
            best = next;
        }
        if improved.abs() < 1e-10 * (1.0 + best.f.abs()) {
            break;
        }
    }
    if !converged || !best.f.is_finite() {
        return Err(Error::NoConvergence {
            iterations,
            best_value: best.f,
            best_params: problem.to_natural(&best.x),
        });
    }

    let mut beta = problem.to_natural(&best.x);
    let mut f_b = |b: &[f64]| problem.objective(b);
    let h0 = problem.steps(&beta, sd);
    newton_polish(&mut f_b, &mut beta, &h0);

    let h = problem.steps(&beta, sd);
    let hess = hessian(&mut f_b, &beta, &h);
    let grad = gradient(&mut f_b, &beta, &h);
    let scaled_gradient = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) / nobs as f64;

    let residuals = problem.residuals(&beta).expect("optimum lies in the admissible region");
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    let n = nobs as f64;
    let sigma2 = ss / n;
    let loglik = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let (mut params, _) = problem.unpack(&beta);
    params.sigma = sigma2.sqrt();

    let mut se = vec![f64::NAN; dim];
    if dim > 0 {
        let hm = nalgebra::DMatrix::from_fn(dim, dim, |i, j| hess[i][j]);
        match invert_symmetric(&hm) {
            Some(cov) => {
                for i in 0..dim {
                    se[i] = if cov[(i, i)] > 0.0 { cov[(i, i)].sqrt() } else { f64::NAN };
                }
            }
            None => warn!("{order}: Hessian is singular at the optimum; standard errors unavailable"),
        }
    }
    let mut p_values: Vec<f64> = beta
        .iter()
        .zip(&se)
        .map(|(b, s)| if s.is_finite() && *s > 0.0 { normal_two_sided(b / s) } else { f64::NAN })
        .collect();
    let mut names = coefficient_names(&order, include_mean);
    names.push("sigma".into());
    se.push(params.sigma / (2.0 * n).sqrt());
    p_values.push(0.0);
    let n_params = dim + 1;
    let model = SarimaModel::new(order, params)?;
    Ok(SarimaFit {
        model,
        names,
        se,
        p_values,
        loglik,
        aic: 2.0 * n_params as f64 - 2.0 * loglik,
        nobs,
        residuals,
        iterations,
        scaled_gradient,
    })
}

/// A few damped Newton steps from the simplex optimum.
fn newton_polish(f: &mut impl FnMut(&[f64]) -> f64, beta: &mut Vec<f64>, h: &[f64]) {
    let dim = beta.len();
    if dim == 0 {
        return;
    }
    let mut fx = f(beta);
    for _ in 0..8 {
        let g = gradient(f, beta, h);
        let hm = hessian(f, beta, h);
        let hm = nalgebra::DMatrix::from_fn(dim, dim, |i, j| hm[i][j]);
        let Some(chol) = hm.cholesky() else { return };
        let step = chol.solve(&nalgebra::DVector::from_column_slice(&g));
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-4 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b - t * s).collect();
            let fc = f(&cand);
            if fc < fx {
                *beta = cand;
                moved = fx - fc > 1e-13 * (1.0 + fx.abs());
                fx = fc;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            return;
        }
    }
}

/// One row of the order-selection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AicRow {
    pub order: SarimaOrder,
    pub aic: Option<f64>,
    pub n_params: Option<usize>,
    pub error: Option<String>,
}

/// Fits every candidate on a common estimation sample and returns the
/// minimum-AIC order. AIC values within 1e-9 prefer fewer parameters.
pub fn select_order(series: &[f64], grid: &[SarimaOrder]) -> Result<(SarimaOrder, Vec<AicRow>)> {
    select_order_segments(&[series], grid)
}

/// [`select_order`] over several gap-free segments.
pub fn select_order_segments(segments: &[&[f64]], grid: &[SarimaOrder]) -> Result<(SarimaOrder, Vec<AicRow>)> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("order grid is empty".into()));
    }
    let start = grid.iter().map(|o| o.diff_len() + o.ar_len()).max().unwrap();
    let options = FitOptions {
        start: Some(start),
        ..FitOptions::default()
    };
    let rows: Vec<AicRow> = grid
        .iter()
        .map(|&order| match fit_with(segments, order, &options) {
            Ok(f) => AicRow {
                order,
                aic: Some(f.aic),
                n_params: Some(f.n_params()),
                error: None,
            },
            Err(e) => AicRow {
                order,
                aic: None,
                n_params: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let best = best_row(&rows);
    match best {
        Some(b) => Ok((b.order, rows.clone())),
        None => Err(Error::AllCandidatesFailed(
            rows.iter()
                .map(|r| (r.order.to_string(), r.error.clone().unwrap_or_default()))
                .collect(),
        )),
    }
}

/// Minimum-AIC row; AIC values within 1e-9 prefer fewer parameters.
fn best_row(rows: &[AicRow]) -> Option<&AicRow> {
    let mut best: Option<&AicRow> = None;
    for row in rows.iter().filter(|r| r.aic.is_some()) {
        best = match best {
            None => Some(row),
            Some(b) => {
                let (a, ab) = (row.aic.unwrap(), b.aic.unwrap());
                if a < ab - 1e-9 || ((a - ab).abs() <= 1e-9 && row.n_params < b.n_params) {
                    Some(row)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sarima::simulate;

    fn ar1(phi: f64, sigma: f64) -> SarimaModel {
        let mut p = SarimaParams::white_noise(sigma);
        p.phi = vec![phi];
        SarimaModel::new(SarimaOrder::arima(1, 0, 0), p).unwrap()
    }

    #[test]
    fn recovers_ar1() {
        let x = simulate(&ar1(0.8, 1.3), 5000, 42, 240).unwrap();
        let f = fit(&x, SarimaOrder::arima(1, 0, 0)).unwrap();
        assert!((f.params().phi[0] - 0.8).abs() < 0.05);
        assert!((f.sigma() / 1.3 - 1.0).abs() < 0.05);
        assert!(f.scaled_gradient < 1e-4, "{}", f.scaled_gradient);
        assert_eq!(f.names, vec!["ar.L1", "mean", "sigma"]);
        assert!((f.se_of("ar.L1").unwrap() - (1.0f64 - 0.64).sqrt() / 5000f64.sqrt()).abs() < 0.002);
    }

    #[test]
    fn white_noise_sigma_is_the_sample_std() {
        let x = simulate(
            &SarimaModel::new(SarimaOrder::arima(0, 0, 0), SarimaParams::white_noise(2.0)).unwrap(),
            3000,
            1,
            240,
        )
        .unwrap();
        let f = fit(&x, SarimaOrder::arima(0, 0, 0)).unwrap();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        assert!((f.sigma() - sd).abs() < 1e-6);
    }

    #[test]
    fn constant_differenced_series_is_degenerate() {
        let x: Vec<f64> = (0..500).map(|t| (t % 24) as f64).collect();
        let o = SarimaOrder::new(1, 0, 0, 0, 1, 0, 24).unwrap();
        assert!(matches!(fit(&x, o), Err(Error::Degenerate(_))));
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(matches!(
            fit(&[0.1, 0.2, -0.3, 0.5], SarimaOrder::arima(1, 0, 0)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn segments_pool_information() {
        let x = simulate(&ar1(0.6, 1.0), 4000, 3, 240).unwrap();
        let whole = fit(&x, SarimaOrder::arima(1, 0, 0)).unwrap();
        let split = fit_segments(&[&x[..2000], &x[2000..]], SarimaOrder::arima(1, 0, 0)).unwrap();
        assert_eq!(split.nobs, whole.nobs - 1);
        assert!((split.params().phi[0] - whole.params().phi[0]).abs() < 0.01);
    }

    #[test]
    fn single_candidate_grid() {
        let x = simulate(&ar1(0.5, 1.0), 1000, 5, 240).unwrap();
        let o = SarimaOrder::arima(1, 0, 0);
        let (best, table) = select_order(&x, &[o]).unwrap();
        assert_eq!(best, o);
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn aic_ties_prefer_fewer_parameters() {
        let row = |p: usize, aic: f64, k: usize| AicRow {
            order: SarimaOrder::arima(p, 0, 0),
            aic: Some(aic),
            n_params: Some(k),
            error: None,
        };
        let rows = [row(2, 100.0, 4), row(1, 100.0 + 5e-10, 3), row(0, 100.5, 2)];
        assert_eq!(best_row(&rows).unwrap().order.p, 1);
        let rows = [row(2, 99.0, 4), row(1, 100.0, 3)];
        assert_eq!(best_row(&rows).unwrap().order.p, 2);
    }

    #[test]
    fn failing_grid_reports_each_candidate() {
        let err = select_order(&[1.0; 20], &[SarimaOrder::arima(1, 0, 0), SarimaOrder::arima(0, 0, 1)]).unwrap_err();
        match err {
            Error::AllCandidatesFailed(rows) => assert_eq!(rows.len(), 2),
            other => panic!("unexpected {other}"),
        }
    }
}
