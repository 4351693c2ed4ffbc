use std::collections::{BTreeMap, BTreeSet};

use chrono::{NaiveDate, NaiveDateTime};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{
    Coefficient, DemandModel, LoadSource, LoadTerm, Market, PresetCoefficients, PanelTransforms, PriceTerm,
    MODEL_VERSION,
};
use crate::error::{Error, Result};
use crate::panel::{Column, HourlyPanel, Season, SeasonMask, SeriesSource};
use crate::regress::{lagged_columns, metrics, staged_ols, FitMetrics, Gate, Stage, StageColumns, StagedConfig, StepResult};
use crate::sarima::{
    finite_runs, fit_segments, select_order_segments, whiten, AicRow, SarimaFit, SarimaModel, SarimaOrder,
    SarimaParams,
};
use crate::stats::{adf_test, breusch_pagan_hourly, durbin_watson, jarque_bera, ljung_box, AdfOptions, TestReport};
use crate::transform::remove_outlier_days;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Indicator windows; defaults to the standard windows of the season.
    pub windows: Option<SeasonMask>,
    /// Days whose average real-time price has |z| above this are removed.
    pub outlier_z: Option<f64>,
    pub significance: f64,
    /// Backfitting passes over the stages after the sequential pass.
    pub backfit_sweeps: usize,
    /// Feasible GLS passes: the regression is refit on data whitened by the
    /// current residual model this many times.
    pub gls_passes: usize,
    /// Fixed residual order; `None` selects by AIC over `candidates`.
    pub order: Option<SarimaOrder>,
    pub candidates: Vec<SarimaOrder>,
    /// Regression stages; `None` uses the preset layout of the season.
    pub stages: Option<Vec<Stage>>,
    pub load_source: LoadSource,
    pub min_days: usize,
    /// Chronological share of days used for fitting; the rest are scored.
    pub train_fraction: Option<f64>,
    pub ljung_box_lags: usize,
    /// Hours dropped from the start of each gap-free run before scoring and
    /// residual diagnostics, so the zero-start transient of the filter is
    /// not tested.
    pub burn_in_hours: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            windows: None,
            outlier_z: Some(3.0),
            significance: crate::regress::DEFAULT_ALPHA,
            backfit_sweeps: 2,
            gls_passes: 3,
            order: None,
            candidates: default_candidates(),
            stages: None,
            load_source: LoadSource::SystemLoad,
            min_days: 60,
            train_fraction: None,
            ljung_box_lags: 24,
            burn_in_hours: 240,
        }
    }
}

fn default_candidates() -> Vec<SarimaOrder> {
    ["(1,0,0)(1,1,0)[24]", "(1,0,0)(1,1,1)[24]", "(0,0,1)(1,1,0)[24]"]
        .iter()
        .map(|s| s.parse().expect("valid order"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub removed_days: Vec<NaiveDate>,
    pub dropped_columns: Vec<String>,
    pub train_days: usize,
    pub test_days: usize,
    pub sample_hours: usize,
    pub ljung_box: TestReport,
    pub adf: TestReport,
    pub jarque_bera: TestReport,
    pub breusch_pagan: TestReport,
    pub durbin_watson: TestReport,
    /// One-step-ahead fit in transformed space.
    pub metrics_transformed: FitMetrics,
    /// One-step-ahead fit in MW.
    pub metrics: FitMetrics,
    /// Deterministic part only, in MW.
    pub metrics_deterministic: FitMetrics,
    pub test_metrics: Option<FitMetrics>,
}

/// Scored training hours: observed load, one-step and deterministic
/// predictions in MW, and the residual-model innovations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub observed_mw: Vec<f64>,
    pub predicted_mw: Vec<f64>,
    pub deterministic_mw: Vec<f64>,
    pub innovations: Vec<f64>,
}

/// A fitted model with its stage results, residual-model fit and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandFit {
    pub model: DemandModel,
    pub stages: Vec<StepResult>,
    pub sarima: SarimaFit,
    pub aic_table: Vec<AicRow>,
    pub diagnostics: FitDiagnostics,
    #[serde(skip)]
    pub series: FitSeries,
}

enum Slot {
    Temperature,
    Price(Market, Gate, usize),
    Load(usize),
}

fn slot_of(source: Column, gate: Gate, lag: usize, load_source: LoadSource, season: Season) -> Result<Slot> {
    let name = crate::regress::column_name(source, gate, lag);
    match (source, gate) {
        (Column::TempF, Gate::None) if lag == 0 => Ok(Slot::Temperature),
        (Column::DaPrice | Column::RtPrice, _) => Ok(Slot::Price(Market::of_column(source).unwrap(), gate, lag)),
        (c, Gate::Fourcp) if c == load_source.column() && season == Season::Summer => Ok(Slot::Load(lag)),
        _ => Err(Error::InvalidInput(format!("regressor {name} has no place in a {} demand model", season.name()))),
    }
}

/// Fits the staged regression and residual SARIMA model for one season.
///
/// The panel is transformed with `transforms`, days with extreme average
/// real-time prices are removed, and the stages are regressed in order. The
/// regression is then refit by feasible GLS: each pass whitens the target and
/// every regressor with the residual model of the previous pass.
pub fn fit_demand_model(
    panel: &HourlyPanel,
    season: Season,
    transforms: &PanelTransforms,
    config: &FitConfig,
) -> Result<DemandFit> {
    let windows = config.windows.unwrap_or_else(|| SeasonMask::default_for(season));
    if windows.season != season {
        return Err(Error::InvalidInput("window season differs from the fitted season".into()));
    }
    let ts = panel.timestamps();
    let n = ts.len();
    let complete = panel.complete_rows();
    let season_days: BTreeSet<NaiveDate> = (0..n)
        .filter(|&t| complete[t] && season.contains(&ts[t]))
        .map(|t| ts[t].date())
        .collect();
    if season_days.len() < config.min_days {
        return Err(Error::Precondition(format!(
            "fit_demand_model needs at least {} days of {} data, got {}",
            config.min_days,
            season.name(),
            season_days.len()
        )));
    }
    let days: Vec<NaiveDate> = season_days.iter().copied().collect();
    let n_train = match config.train_fraction {
        None => days.len(),
        Some(f) if f > 0.0 && f <= 1.0 => ((days.len() as f64 * f).round() as usize).clamp(1, days.len()),
        Some(f) => return Err(Error::InvalidInput(format!("train fraction {f} outside (0, 1]"))),
    };
    let train_set: BTreeSet<NaiveDate> = days[..n_train].iter().copied().collect();
    let test_set: BTreeSet<NaiveDate> = days[n_train..].iter().copied().collect();

    let removed_days = match config.outlier_z {
        Some(z) => {
            let season_panel = panel.restrict_to_season(season)?;
            remove_outlier_days(&season_panel, z)?.1
        }
        None => Vec::new(),
    };
    if !removed_days.is_empty() {
        info!("removed {} outlier day(s)", removed_days.len());
    }
    let masked = panel.mask_days(&removed_days);
    let frame = transforms.apply(&masked)?;
    let y = frame.series(Column::MinerMw).expect("miner transformed").to_vec();

    let preset = PresetCoefficients::for_season(season);
    let stages = config.stages.clone().unwrap_or_else(|| preset.stages(config.load_source));
    if stages.is_empty() {
        return Err(Error::InvalidInput("no regression stages".into()));
    }
    let mut stage_full: Vec<Vec<(String, Vec<f64>)>> = Vec::new();
    let mut slots: BTreeMap<String, Slot> = BTreeMap::new();
    for stage in &stages {
        for spec in &stage.specs {
            for &lag in &spec.lags {
                let name = crate::regress::column_name(spec.source, spec.gate, lag);
                let slot = slot_of(spec.source, spec.gate, lag, config.load_source, season)?;
                if slots.insert(name.clone(), slot).is_some() {
                    return Err(Error::Collinear(vec![name]));
                }
            }
        }
        stage_full.push(lagged_columns(&frame, &stage.specs, &windows).map_err(|e| e.in_stage(&stage.name))?);
    }

    let in_season = |t: usize| season.contains(&ts[t]);
    let valid_in = |set: &BTreeSet<NaiveDate>| -> Vec<bool> {
        (0..n)
            .map(|t| {
                in_season(t)
                    && set.contains(&ts[t].date())
                    && y[t].is_finite()
                    && stage_full.iter().flatten().all(|(_, c)| c[t].is_finite())
            })
            .collect()
    };
    let train_valid = valid_in(&train_set);
    let test_valid = valid_in(&test_set);
    let sample_hours = train_valid.iter().filter(|&&v| v).count();
    if sample_hours == 0 {
        return Err(Error::InsufficientData("no complete in-season hours to fit".into()));
    }

    // columns that vanish on the sample are dropped up front
    let mut dropped_columns = Vec::new();
    for cols in stage_full.iter_mut() {
        cols.retain(|(name, c)| {
            let zero = (0..n).filter(|&t| train_valid[t]).all(|t| c[t] == 0.0);
            if zero {
                warn!("column {name} is zero on the whole sample and was dropped");
                dropped_columns.push(name.clone());
            }
            !zero
        });
    }
    let masked_series = |x: &[f64]| -> Vec<f64> {
        (0..n).map(|t| if train_valid[t] { x[t] } else { f64::NAN }).collect()
    };
    let y_train = masked_series(&y);
    let x_train: Vec<Vec<Vec<f64>>> = stage_full
        .iter()
        .map(|cols| cols.iter().map(|(_, c)| masked_series(c)).collect())
        .collect();

    let staged_cfg = StagedConfig {
        significance: config.significance,
        backfit_sweeps: config.backfit_sweeps,
    };
    let first_order = config
        .order
        .or_else(|| config.candidates.first().copied())
        .ok_or_else(|| Error::InvalidInput("no SARIMA candidate orders".into()))?;
    let mut filter = differencing_only(first_order)?;
    let mut result = None;
    for pass in 0..=config.gls_passes {
        let wy = whiten(&filter, &y_train);
        let wx: Vec<Vec<Vec<f64>>> = x_train
            .iter()
            .map(|cols| cols.iter().map(|c| whiten(&filter, c)).collect())
            .collect();
        let rows: Vec<usize> = (0..n)
            .filter(|&t| wy[t].is_finite() && wx.iter().flatten().all(|c| c[t].is_finite()))
            .collect();
        let k: usize = wx.iter().map(Vec::len).sum();
        if rows.len() < k + 10 {
            return Err(Error::InsufficientData(format!(
                "{} usable hours after whitening for {k} regressors",
                rows.len()
            )));
        }
        let target: Vec<f64> = rows.iter().map(|&t| wy[t]).collect();
        let stage_cols: Vec<StageColumns> = stages
            .iter()
            .zip(&stage_full)
            .zip(&wx)
            .map(|((stage, named), cols)| StageColumns {
                name: stage.name.clone(),
                names: named.iter().map(|(nm, _)| nm.clone()).collect(),
                columns: cols.iter().map(|c| rows.iter().map(|&t| c[t]).collect()).collect(),
            })
            .collect();
        let steps = staged_ols(&target, &stage_cols, &staged_cfg)?;
        let coef = coefficient_map(&steps);
        let resid = level_residuals(&y_train, &stage_full, &coef, &train_valid);
        let runs = finite_runs(&resid);
        let segments: Vec<&[f64]> = runs.iter().map(|r| &resid[r.clone()]).collect();
        let (order, table) = match config.order {
            Some(o) => (o, Vec::new()),
            None => select_order_segments(&segments, &config.candidates).map_err(|e| e.in_stage("sarima"))?,
        };
        let sfit = fit_segments(&segments, order).map_err(|e| e.in_stage("sarima"))?;
        info!("pass {pass}: {} aic {:.3}", order, sfit.aic);
        filter = sfit.model.clone();
        result = Some((steps, sfit, table));
    }
    let (mut steps, sarima_fit, aic_table) = result.expect("at least one pass");

    let model = build_model(season, windows, config.load_source, &steps, &slots, &sarima_fit, transforms)?;

    // stage residuals in level space
    let mut cumulative: BTreeMap<String, f64> = BTreeMap::new();
    for (k, step) in steps.iter_mut().enumerate() {
        for (name, c) in step.regressors.iter().zip(&step.coefficients) {
            cumulative.insert(name.clone(), *c);
        }
        let partial: Vec<Vec<(String, Vec<f64>)>> = stage_full[..=k].to_vec();
        let r = level_residuals(&y, &partial, &cumulative, &train_valid);
        step.residuals = r.iter().copied().filter(|v| v.is_finite()).collect();
        step.nobs = step.residuals.len();
        step.train_mse = mean_sq(&step.residuals);
        let rt = level_residuals(&y, &partial, &cumulative, &test_valid);
        let rt: Vec<f64> = rt.into_iter().filter(|v| v.is_finite()).collect();
        step.test_mse = (!rt.is_empty()).then(|| mean_sq(&rt));
    }

    let d = model.deterministic(&frame)?;
    let mu = model.residual_mean();
    let score = |valid: &[bool]| -> Result<Option<(FitMetrics, FitMetrics, FitMetrics, FitSeries)>> {
        let r: Vec<f64> = (0..n).map(|t| if valid[t] { y[t] - d[t] - mu } else { f64::NAN }).collect();
        let mut e = whiten(&model.sarima, &r);
        for run in finite_runs(&e) {
            let end = (run.start + config.burn_in_hours).min(run.end);
            e[run.start..end].fill(f64::NAN);
        }
        let rows: Vec<usize> = (0..n).filter(|&t| e[t].is_finite()).collect();
        if rows.len() < 2 {
            return Ok(None);
        }
        let sub_ts: Vec<_> = rows.iter().map(|&t| ts[t]).collect();
        let truth_z: Vec<f64> = rows.iter().map(|&t| y[t]).collect();
        let pred_z: Vec<f64> = rows.iter().map(|&t| y[t] - e[t]).collect();
        let det_z: Vec<f64> = rows.iter().map(|&t| d[t] + mu).collect();
        let miner = panel.series(Column::MinerMw).expect("required column");
        let truth_mw: Vec<f64> = rows.iter().map(|&t| miner[t]).collect();
        let inv = |z: &[f64]| -> Result<Vec<f64>> {
            Ok(transforms.miner_mw.invert(&sub_ts, z)?.into_iter().map(|v| v.max(0.0)).collect())
        };
        let pred_mw = inv(&pred_z)?;
        let det_mw = inv(&det_z)?;
        let mt = metrics(&truth_z, &pred_z)?;
        let mm = metrics(&truth_mw, &pred_mw)?;
        let md = metrics(&truth_mw, &det_mw)?;
        let series = FitSeries {
            timestamps: sub_ts,
            observed_mw: truth_mw,
            predicted_mw: pred_mw,
            deterministic_mw: det_mw,
            innovations: rows.iter().map(|&t| e[t]).collect(),
        };
        Ok(Some((mt, mm, md, series)))
    };
    let (metrics_transformed, metrics_mw, metrics_deterministic, series) =
        score(&train_valid)?.ok_or_else(|| Error::InsufficientData("no scored training hours".into()))?;
    let test_metrics = score(&test_valid)?.map(|s| s.1);

    let innovations = &series.innovations;
    let res_ts = &series.timestamps;
    let diag = |name: &str, r: Result<TestReport>| r.map_err(|e| e.in_stage(format!("diagnostics {name}")));
    let diagnostics = FitDiagnostics {
        removed_days,
        dropped_columns,
        train_days: train_set.len(),
        test_days: test_set.len(),
        sample_hours,
        ljung_box: diag(
            "ljung_box",
            ljung_box(innovations, config.ljung_box_lags, model.sarima.order.n_coefficients()),
        )?,
        adf: diag("adf", adf_test(innovations, &AdfOptions::default()))?,
        jarque_bera: diag("jarque_bera", jarque_bera(innovations))?,
        breusch_pagan: diag("breusch_pagan", breusch_pagan_hourly(innovations, res_ts))?,
        durbin_watson: diag("durbin_watson", durbin_watson(innovations))?,
        metrics_transformed,
        metrics: metrics_mw,
        metrics_deterministic,
        test_metrics,
    };
    Ok(DemandFit {
        model,
        stages: steps,
        sarima: sarima_fit,
        aic_table,
        diagnostics,
        series,
    })
}

fn mean_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// A model with the order's differencing and zero ARMA coefficients, used to
/// whiten before any residual model has been fitted.
fn differencing_only(order: SarimaOrder) -> Result<SarimaModel> {
    SarimaModel::new(
        order,
        SarimaParams {
            phi: vec![0.0; order.p],
            theta: vec![0.0; order.q],
            seasonal_phi: vec![0.0; order.sp],
            seasonal_theta: vec![0.0; order.sq],
            ..SarimaParams::white_noise(1.0)
        },
    )
}

fn coefficient_map(steps: &[StepResult]) -> BTreeMap<String, f64> {
    steps
        .iter()
        .flat_map(|s| s.regressors.iter().cloned().zip(s.coefficients.iter().copied()))
        .collect()
}

/// `y - X b` on valid rows, `NaN` elsewhere. Columns without a coefficient
/// contribute nothing.
fn level_residuals(
    y: &[f64],
    stages: &[Vec<(String, Vec<f64>)>],
    coef: &BTreeMap<String, f64>,
    valid: &[bool],
) -> Vec<f64> {
    let mut r: Vec<f64> = (0..y.len()).map(|t| if valid[t] { y[t] } else { f64::NAN }).collect();
    for (name, col) in stages.iter().flatten() {
        if let Some(b) = coef.get(name) {
            for t in 0..y.len() {
                r[t] -= b * col[t];
            }
        }
    }
    r
}

fn build_model(
    season: Season,
    windows: SeasonMask,
    load_source: LoadSource,
    steps: &[StepResult],
    slots: &BTreeMap<String, Slot>,
    sarima: &SarimaFit,
    transforms: &PanelTransforms,
) -> Result<DemandModel> {
    let mut temperature = None;
    let mut price_terms = Vec::new();
    let mut load_terms = Vec::new();
    for step in steps {
        for ((name, &b), &se) in step.regressors.iter().zip(&step.coefficients).zip(&step.se) {
            match slots.get(name) {
                Some(Slot::Temperature) => temperature = Some(Coefficient { value: b, se }),
                Some(&Slot::Price(market, gate, lag)) => price_terms.push(PriceTerm::new(market, gate, lag, b, se)),
                Some(&Slot::Load(lag)) => load_terms.push(LoadTerm {
                    lag,
                    coefficient: b,
                    se,
                }),
                None => unreachable!("every regressor has a slot"),
            }
        }
    }
    let sarima_se = sarima.names.iter().cloned().zip(sarima.se.iter().copied()).collect();
    let model = DemandModel {
        version: MODEL_VERSION,
        season,
        windows,
        temperature,
        price_terms,
        load_terms,
        load_source,
        sarima: sarima.model.clone(),
        sarima_se,
        transforms: transforms.clone(),
    };
    model.validate()?;
    Ok(model)
}
