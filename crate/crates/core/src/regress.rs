//! Staged least squares: lagged and gated design matrices, sequential
//! regression on residuals with significance pruning, and fit metrics.

use std::collections::BTreeSet;
use std::fmt;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{collinear_columns, condition_number, from_columns, least_squares, MAX_CONDITION};
use crate::panel::{indicator_for, Column, IndicatorKind, SeasonMask, SeriesSource};
use crate::stats::special::t_two_sided;

/// Default significance threshold for pruning.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Values with smaller magnitude are left out of MAPE.
pub const MAPE_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    None,
    Day,
    Peak,
    Fourcp,
}

impl Gate {
    pub fn name(self) -> &'static str {
        match self {
            Gate::None => "none",
            Gate::Day => "day",
            Gate::Peak => "peak",
            Gate::Fourcp => "fourcp",
        }
    }

    pub fn indicator(self) -> Option<IndicatorKind> {
        match self {
            Gate::None => None,
            Gate::Day => Some(IndicatorKind::Day),
            Gate::Peak => Some(IndicatorKind::Peak),
            Gate::Fourcp => Some(IndicatorKind::Fourcp),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A source series at one or more hour lags, optionally multiplied by a
/// window indicator evaluated at the current hour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub source: Column,
    pub lags: Vec<usize>,
    pub gate: Gate,
}

impl LagSpec {
    pub fn new(source: Column, lags: Vec<usize>, gate: Gate) -> Result<LagSpec> {
        let spec = LagSpec { source, lags, gate };
        spec.validate()?;
        Ok(spec)
    }

    pub fn single(source: Column, lag: usize, gate: Gate) -> LagSpec {
        LagSpec {
            source,
            lags: vec![lag],
            gate,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lags.is_empty() {
            return Err(Error::InvalidInput(format!("{} spec has no lags", self.source)));
        }
        let distinct: BTreeSet<_> = self.lags.iter().collect();
        if distinct.len() != self.lags.len() {
            return Err(Error::InvalidInput(format!("{} spec repeats a lag: {:?}", self.source, self.lags)));
        }
        Ok(())
    }

    pub fn column_names(&self) -> Vec<String> {
        self.lags.iter().map(|&l| column_name(self.source, self.gate, l)).collect()
    }
}

/// `da_price:day:lag48`, or `temp_f:lag0` for ungated columns.
pub fn column_name(source: Column, gate: Gate, lag: usize) -> String {
    match gate {
        Gate::None => format!("{source}:lag{lag}"),
        g => format!("{source}:{g}:lag{lag}"),
    }
}

/// Full-length lagged and gated columns. Hours whose lag reaches before the
/// start, or whose lagged value is missing, are `NaN` unless the gate is
/// closed, in which case the entry is zero.
pub fn lagged_columns(
    source: &impl SeriesSource,
    specs: &[LagSpec],
    windows: &SeasonMask,
) -> Result<Vec<(String, Vec<f64>)>> {
    let ts = source.timestamps();
    let n = ts.len();
    let mut out = Vec::new();
    for spec in specs {
        spec.validate()?;
        let series = source
            .series(spec.source)
            .ok_or_else(|| Error::InvalidInput(format!("panel has no {} column", spec.source)))?;
        let gate = spec.gate.indicator().map(|k| indicator_for(ts, windows, k));
        for &lag in &spec.lags {
            let col: Vec<f64> = (0..n)
                .map(|t| {
                    if gate.as_ref().is_some_and(|g| g[t] == 0.0) {
                        return 0.0;
                    }
                    if t < lag {
                        f64::NAN
                    } else {
                        series[t - lag]
                    }
                })
                .collect();
            out.push((column_name(spec.source, spec.gate, lag), col));
        }
    }
    Ok(out)
}

/// Design matrix over the included rows that have no missing values.
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    /// Panel row of each matrix row.
    pub rows: Vec<usize>,
    /// Included rows dropped for missing values.
    pub dropped_rows: Vec<usize>,
    /// Gated columns that were zero on the whole sample.
    pub dropped_columns: Vec<String>,
}

impl Design {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }
}

pub fn design_matrix(
    source: &impl SeriesSource,
    specs: &[LagSpec],
    windows: &SeasonMask,
    include: &[bool],
) -> Result<Design> {
    let n = source.timestamps().len();
    if include.len() != n {
        return Err(Error::InvalidInput(format!(
            "row mask has {} entries for {n} rows",
            include.len()
        )));
    }
    let cols = lagged_columns(source, specs, windows)?;
    let mut seen = BTreeSet::new();
    let dups: Vec<String> = cols
        .iter()
        .filter(|(name, _)| !seen.insert(name.clone()))
        .map(|(name, _)| name.clone())
        .collect();
    if !dups.is_empty() {
        return Err(Error::Collinear(dups));
    }
    let mut rows = Vec::new();
    let mut dropped_rows = Vec::new();
    for t in (0..n).filter(|&t| include[t]) {
        if cols.iter().all(|(_, c)| c[t].is_finite()) {
            rows.push(t);
        } else {
            dropped_rows.push(t);
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("design has no complete rows".into()));
    }
    let (names, compact, dropped_columns) = compact_columns(cols, &rows);
    let x = from_columns(&compact);
    check_conditioning(&names, &x)?;
    Ok(Design {
        names,
        x,
        rows,
        dropped_rows,
        dropped_columns,
    })
}

type Compacted = (Vec<String>, Vec<Vec<f64>>, Vec<String>);

fn compact_columns(cols: Vec<(String, Vec<f64>)>, rows: &[usize]) -> Compacted {
    let mut names = Vec::new();
    let mut compact = Vec::new();
    let mut dropped = Vec::new();
    for (name, c) in cols {
        let v: Vec<f64> = rows.iter().map(|&t| c[t]).collect();
        if v.iter().all(|&x| x == 0.0) {
            warn!("column {name} is zero on the whole sample and was dropped");
            dropped.push(name);
        } else {
            names.push(name);
            compact.push(v);
        }
    }
    (names, compact, dropped)
}

fn check_conditioning(names: &[String], x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() == 0 {
        return Ok(());
    }
    let c = condition_number(x);
    if !(c <= MAX_CONDITION) {
        let idx = collinear_columns(x);
        let named: Vec<String> = if idx.is_empty() {
            names.to_vec()
        } else {
            idx.into_iter().map(|j| names[j].clone()).collect()
        };
        return Err(Error::Collinear(named));
    }
    Ok(())
}

/// One regression step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub name: String,
    pub regressors: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Candidates removed by pruning.
    pub pruned: Vec<String>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub nobs: usize,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

impl StepResult {
    pub fn is_empty(&self) -> bool {
        self.regressors.is_empty()
    }

    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.regressors.iter().position(|r| r == name)?;
        Some((self.coefficients[i], self.se[i]))
    }

    fn empty(name: &str, target: &[f64], pruned: Vec<String>) -> StepResult {
        StepResult {
            name: name.to_string(),
            regressors: vec![],
            coefficients: vec![],
            se: vec![],
            p_values: vec![],
            pruned,
            residuals: target.to_vec(),
            nobs: target.len(),
            train_mse: mse(target),
            test_mse: None,
        }
    }
}

fn mse(e: &[f64]) -> f64 {
    e.iter().map(|v| v * v).sum::<f64>() / e.len().max(1) as f64
}

/// OLS of `target` (aligned with `design.rows`) on the design.
pub fn ols(design: &Design, target: &[f64]) -> Result<StepResult> {
    fit_matrix("ols", &design.names, &design.x, target)
}

/// OLS on named compact columns of equal length.
pub fn ols_columns(name: &str, names: &[String], columns: &[Vec<f64>], target: &[f64]) -> Result<StepResult> {
    if columns.iter().any(|c| c.len() != target.len()) {
        return Err(Error::InvalidInput("columns and target differ in length".into()));
    }
    fit_matrix(name, names, &from_columns(columns), target)
}

fn fit_matrix(name: &str, names: &[String], x: &DMatrix<f64>, y: &[f64]) -> Result<StepResult> {
    let n = x.nrows();
    let k = x.ncols();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("target has {} rows, design has {n}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("target has missing values".into()));
    }
    if n < k + 10 {
        return Err(Error::InsufficientData(format!("{n} rows for {k} columns; need at least {}", k + 10)));
    }
    check_conditioning(names, x)?;
    let ls = least_squares(x, y)?;
    let df = (n - k) as f64;
    let sigma2 = ls.rss / df;
    let se: Vec<f64> = (0..k).map(|j| (sigma2 * ls.xtx_inv[(j, j)]).max(0.0).sqrt()).collect();
    let p_values = ls
        .coef
        .iter()
        .zip(&se)
        .map(|(&b, &s)| {
            if s > 0.0 {
                t_two_sided(b / s, df)
            } else if b == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(StepResult {
        name: name.to_string(),
        regressors: names.to_vec(),
        coefficients: ls.coef,
        se,
        p_values,
        pruned: vec![],
        train_mse: ls.rss / n as f64,
        residuals: ls.residuals,
        nobs: n,
        test_mse: None,
    })
}

/// Backward elimination: drop the least significant regressor and refit
/// until every remaining p-value is at most `alpha`.
pub fn ols_pruned(
    name: &str,
    names: &[String],
    columns: &[Vec<f64>],
    target: &[f64],
    alpha: f64,
) -> Result<StepResult> {
    let mut keep: Vec<usize> = (0..names.len()).collect();
    let mut pruned = Vec::new();
    loop {
        if keep.is_empty() {
            return Ok(StepResult::empty(name, target, pruned));
        }
        let kn: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
        let kc: Vec<Vec<f64>> = keep.iter().map(|&j| columns[j].clone()).collect();
        let mut step = ols_columns(name, &kn, &kc, target)?;
        let worst = step
            .p_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &p)| (i, p));
        match worst {
            Some((i, p)) if p > alpha => {
                pruned.push(names[keep[i]].clone());
                keep.remove(i);
            }
            _ => {
                step.pruned = pruned;
                return Ok(step);
            }
        }
    }
}

/// Regression stage: a named group of lag specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub specs: Vec<LagSpec>,
}

impl Stage {
    pub fn new(name: &str, specs: Vec<LagSpec>) -> Stage {
        Stage {
            name: name.to_string(),
            specs,
        }
    }
}

/// Candidate columns of one stage on a common sample.
#[derive(Debug, Clone)]
pub struct StageColumns {
    pub name: String,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagedConfig {
    pub significance: f64,
    /// Extra passes over the stages after the first, each regressing the
    /// target net of every other stage's current contribution. Zero gives the
    /// plain sequential procedure.
    pub backfit_sweeps: usize,
}

impl Default for StagedConfig {
    fn default() -> Self {
        StagedConfig {
            significance: DEFAULT_ALPHA,
            backfit_sweeps: 0,
        }
    }
}

/// Sequential regression on compact columns. Step `k` reports residuals
/// `y - sum_{j<=k} fitted_j`.
pub fn staged_ols(y: &[f64], stages: &[StageColumns], config: &StagedConfig) -> Result<Vec<StepResult>> {
    if stages.is_empty() {
        return Err(Error::InvalidInput("no regression stages".into()));
    }
    if !(config.significance > 0.0 && config.significance < 1.0) {
        return Err(Error::InvalidInput(format!("significance {} outside (0, 1)", config.significance)));
    }
    let n = y.len();
    let mut contrib = vec![vec![0.0; n]; stages.len()];
    let mut steps: Vec<Option<StepResult>> = vec![None; stages.len()];
    for _sweep in 0..=config.backfit_sweeps {
        for (k, stage) in stages.iter().enumerate() {
            let target: Vec<f64> = (0..n)
                .map(|t| y[t] - (0..stages.len()).filter(|&j| j != k).map(|j| contrib[j][t]).sum::<f64>())
                .collect();
            let step = ols_pruned(&stage.name, &stage.names, &stage.columns, &target, config.significance)
                .map_err(|e| e.in_stage(&stage.name))?;
            contrib[k] = (0..n).map(|t| target[t] - step.residuals[t]).collect();
            steps[k] = Some(step);
        }
    }
    let mut acc = y.to_vec();
    let mut out = Vec::with_capacity(stages.len());
    for (k, step) in steps.into_iter().enumerate() {
        let mut step = step.expect("every stage ran");
        for t in 0..n {
            acc[t] -= contrib[k][t];
        }
        step.residuals = acc.clone();
        step.train_mse = mse(&acc);
        out.push(step);
    }
    Ok(out)
}

/// Staged regression output on the common sample.
#[derive(Debug, Clone)]
pub struct StagedResult {
    pub steps: Vec<StepResult>,
    /// Panel rows of the common sample.
    pub rows: Vec<usize>,
    pub residuals: Vec<f64>,
    pub dropped_columns: Vec<String>,
}

/// Builds every stage's lagged columns on one common sample (included rows
/// where the target and all candidates are present) and runs [`staged_ols`].
pub fn staged_regression(
    source: &impl SeriesSource,
    target: &[f64],
    stages: &[Stage],
    windows: &SeasonMask,
    include: &[bool],
    config: &StagedConfig,
) -> Result<StagedResult> {
    let n = source.timestamps().len();
    if target.len() != n || include.len() != n {
        return Err(Error::InvalidInput("target and row mask must match the panel length".into()));
    }
    let (rows, stage_cols, dropped_columns) = stage_columns(source, target, stages, windows, include)?;
    let y: Vec<f64> = rows.iter().map(|&t| target[t]).collect();
    let steps = staged_ols(&y, &stage_cols, config)?;
    let residuals = steps.last().map(|s| s.residuals.clone()).unwrap_or(y);
    Ok(StagedResult {
        steps,
        rows,
        residuals,
        dropped_columns,
    })
}

/// Common sample and compact candidate columns for each stage.
pub fn stage_columns(
    source: &impl SeriesSource,
    target: &[f64],
    stages: &[Stage],
    windows: &SeasonMask,
    include: &[bool],
) -> Result<(Vec<usize>, Vec<StageColumns>, Vec<String>)> {
    let mut all = Vec::new();
    for stage in stages {
        let cols = lagged_columns(source, &stage.specs, windows).map_err(|e| e.in_stage(&stage.name))?;
        all.push(cols);
    }
    let mut seen = BTreeSet::new();
    let dups: Vec<String> = all
        .iter()
        .flatten()
        .filter(|(name, _)| !seen.insert(name.clone()))
        .map(|(name, _)| name.clone())
        .collect();
    if !dups.is_empty() {
        return Err(Error::Collinear(dups));
    }
    let rows: Vec<usize> = (0..target.len())
        .filter(|&t| include[t] && target[t].is_finite() && all.iter().flatten().all(|(_, c)| c[t].is_finite()))
        .collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData("staged regression has no complete rows".into()));
    }
    let mut out = Vec::new();
    let mut dropped = Vec::new();
    for (stage, cols) in stages.iter().zip(all) {
        let (names, columns, d) = compact_columns(cols, &rows);
        check_conditioning(&names, &from_columns(&columns)).map_err(|e| e.in_stage(&stage.name))?;
        dropped.extend(d);
        out.push(StageColumns {
            name: stage.name.clone(),
            names,
            columns,
        });
    }
    Ok((rows, out, dropped))
}

/// Accuracy of a prediction against the observed series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
    /// Percent.
    pub mape: f64,
    pub mape_excluded: usize,
    pub r_squared: f64,
    /// R² over the points whose error lies between the 12.5% and 87.5%
    /// error quantiles.
    pub r_squared_iqr75: f64,
}

pub fn metrics(truth: &[f64], predicted: &[f64]) -> Result<FitMetrics> {
    let n = truth.len();
    if predicted.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} observed values but {} predictions",
            predicted.len()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData("metrics need at least 2 points".into()));
    }
    if truth.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("metrics inputs have missing values".into()));
    }
    let err: Vec<f64> = truth.iter().zip(predicted).map(|(y, p)| y - p).collect();
    let mse = mse(&err);
    let mut ape = 0.0;
    let mut used = 0usize;
    for (y, e) in truth.iter().zip(&err) {
        if y.abs() >= MAPE_ZERO {
            ape += (e / y).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("MAPE is undefined: every observed value is zero".into()));
    }
    let r_squared = r2(truth, &err);
    let lo = quantile(&err, 0.125);
    let hi = quantile(&err, 0.875);
    let (kt, ke): (Vec<f64>, Vec<f64>) = truth
        .iter()
        .zip(&err)
        .filter(|(_, e)| **e >= lo && **e <= hi)
        .map(|(y, e)| (*y, *e))
        .unzip();
    Ok(FitMetrics {
        n,
        mse,
        rmse: mse.sqrt(),
        mape: 100.0 * ape / used as f64,
        mape_excluded: n - used,
        r_squared,
        r_squared_iqr75: r2(&kt, &ke),
    })
}

fn r2(truth: &[f64], err: &[f64]) -> f64 {
    let m = truth.iter().sum::<f64>() / truth.len() as f64;
    let sst: f64 = truth.iter().map(|y| (y - m).powi(2)).sum();
    let sse: f64 = err.iter().map(|e| e * e).sum();
    if sst > 0.0 {
        1.0 - sse / sst
    } else if sse == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Linear-interpolation quantile.
pub(crate) fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < s.len() {
        s[i] + frac * (s[i + 1] - s[i])
    } else {
        s[i]
    }
}
