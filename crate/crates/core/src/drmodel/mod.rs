//! Demand-response models of a flexible load: coefficient presets, fitting,
//! point prediction, synthetic generation, 4CP charges and facility profit.

mod fit;
mod generate;
mod profit;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{indicator_for, Column, HourlyPanel, IndicatorKind, Season, SeasonMask, SeriesFrame, SeriesSource};
use crate::regress::{column_name, Gate, LagSpec, Stage};
use crate::sarima::{SarimaModel, SarimaOrder, SarimaParams};
use crate::transform::{FittedTransform, TransformConfig};

pub use fit::{fit_demand_model, DemandFit, FitConfig, FitDiagnostics, FitSeries};
pub use generate::{generate_synthetic, synthetic_btc, warmup_days, ExogScenario};
pub use profit::{
    fourcp_charge, profit, AvoidedCost, Cooling, FourCpAvoidedCost, Interval, IntervalProfit, LinearCooling,
    ProfitBreakdown, ProfitInputs,
};

/// Version stamp of the model JSON document.
pub const MODEL_VERSION: u32 = 1;

/// Name of each regression stage, in fitting order.
pub const STAGE_TEMPERATURE: &str = "temperature";
pub const STAGE_DAY_PRICES: &str = "day_prices";
pub const STAGE_PEAK_PRICES: &str = "peak_prices";
pub const STAGE_FOURCP_LOAD: &str = "fourcp_load";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Market {
    Da,
    Rt,
}

impl Market {
    pub fn column(self) -> Column {
        match self {
            Market::Da => Column::DaPrice,
            Market::Rt => Column::RtPrice,
        }
    }

    pub fn of_column(c: Column) -> Option<Market> {
        match c {
            Column::DaPrice => Some(Market::Da),
            Column::RtPrice => Some(Market::Rt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTerm {
    pub market: Market,
    pub gate: Gate,
    pub lag: usize,
    pub coefficient: f64,
    pub se: f64,
}

impl PriceTerm {
    pub fn new(market: Market, gate: Gate, lag: usize, coefficient: f64, se: f64) -> PriceTerm {
        PriceTerm {
            market,
            gate,
            lag,
            coefficient,
            se,
        }
    }

    pub fn name(&self) -> String {
        column_name(self.market.column(), self.gate, self.lag)
    }
}

/// Lagged load regressor, active in the 4CP window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadTerm {
    pub lag: usize,
    pub coefficient: f64,
    pub se: f64,
}

/// Which load the 4CP terms lag: system demand, or the facility's own
/// consumption.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadSource {
    #[default]
    SystemLoad,
    OwnConsumption,
}

impl LoadSource {
    pub fn column(self) -> Column {
        match self {
            LoadSource::SystemLoad => Column::SystemMw,
            LoadSource::OwnConsumption => Column::MinerMw,
        }
    }
}

/// One fitted transform per panel series. The exogenous series are
/// Gaussianized and standardized without trend removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelTransforms {
    pub miner_mw: FittedTransform,
    pub temp_f: FittedTransform,
    pub da_price: FittedTransform,
    pub rt_price: FittedTransform,
    pub system_mw: FittedTransform,
}

impl PanelTransforms {
    /// Fits all five transforms on the complete values of each column.
    pub fn fit(panel: &HourlyPanel, miner: &TransformConfig) -> Result<PanelTransforms> {
        let ts = panel.timestamps();
        let one = |c: Column, cfg: &TransformConfig| -> Result<FittedTransform> {
            let x = panel.series(c).expect("required column");
            FittedTransform::fit(ts, x, cfg)
                .map(|(t, _)| t)
                .map_err(|e| e.in_stage(format!("transform {c}")))
        };
        let exog = TransformConfig::without_trend();
        Ok(PanelTransforms {
            miner_mw: one(Column::MinerMw, miner)?,
            temp_f: one(Column::TempF, &exog)?,
            da_price: one(Column::DaPrice, &exog)?,
            rt_price: one(Column::RtPrice, &exog)?,
            system_mw: one(Column::SystemMw, &exog)?,
        })
    }

    /// Exogenous transforms fitted on `source`, with the given miner transform.
    pub fn fit_exogenous(source: &impl SeriesSource, miner: FittedTransform) -> Result<PanelTransforms> {
        let ts = source.timestamps();
        let exog = TransformConfig::without_trend();
        let one = |c: Column| -> Result<FittedTransform> {
            let x = source
                .series(c)
                .ok_or_else(|| Error::InvalidInput(format!("source has no {c} column")))?;
            FittedTransform::fit(ts, x, &exog)
                .map(|(t, _)| t)
                .map_err(|e| e.in_stage(format!("transform {c}")))
        };
        Ok(PanelTransforms {
            miner_mw: miner,
            temp_f: one(Column::TempF)?,
            da_price: one(Column::DaPrice)?,
            rt_price: one(Column::RtPrice)?,
            system_mw: one(Column::SystemMw)?,
        })
    }

    pub fn get(&self, column: Column) -> Option<&FittedTransform> {
        match column {
            Column::MinerMw => Some(&self.miner_mw),
            Column::TempF => Some(&self.temp_f),
            Column::DaPrice => Some(&self.da_price),
            Column::RtPrice => Some(&self.rt_price),
            Column::SystemMw => Some(&self.system_mw),
            Column::BtcUsd => None,
        }
    }

    /// Transformed copy of every transformable column present in `source`.
    pub fn apply(&self, source: &impl SeriesSource) -> Result<SeriesFrame> {
        let ts = source.timestamps();
        let mut frame = SeriesFrame::new(ts.to_vec());
        for c in Column::REQUIRED {
            if let (Some(x), Some(t)) = (source.series(c), self.get(c)) {
                frame.insert(c, t.apply(ts, x).map_err(|e| e.in_stage(format!("transform {c}")))?)?;
            }
        }
        Ok(frame)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<PanelTransforms> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A fitted or preset demand model in transformed space:
/// `y_t = psi T_t + sum price terms + sum load terms + u_t`, with `u_t`
/// following the SARIMA model and `y` the transformed miner load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub version: u32,
    pub season: Season,
    pub windows: SeasonMask,
    /// Temperature coefficient psi; `None` when pruned.
    pub temperature: Option<Coefficient>,
    pub price_terms: Vec<PriceTerm>,
    pub load_terms: Vec<LoadTerm>,
    #[serde(default)]
    pub load_source: LoadSource,
    pub sarima: SarimaModel,
    /// Standard errors keyed by SARIMA parameter name.
    pub sarima_se: BTreeMap<String, f64>,
    pub transforms: PanelTransforms,
}

impl DemandModel {
    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!("model version {} is not supported", self.version)));
        }
        if self.windows.season != self.season {
            return Err(Error::InvalidInput("window season differs from the model season".into()));
        }
        if self.season == Season::NonSummer && !self.load_terms.is_empty() {
            return Err(Error::InvalidInput("non-summer models carry no 4CP load terms".into()));
        }
        if self.sarima.order.s != 24 {
            return Err(Error::InvalidInput(format!(
                "SARIMA season must be 24 hours, got {}",
                self.sarima.order.s
            )));
        }
        let ses = self
            .temperature
            .iter()
            .map(|c| c.se)
            .chain(self.price_terms.iter().map(|t| t.se))
            .chain(self.load_terms.iter().map(|t| t.se));
        let coefs = self
            .temperature
            .iter()
            .map(|c| c.value)
            .chain(self.price_terms.iter().map(|t| t.coefficient))
            .chain(self.load_terms.iter().map(|t| t.coefficient));
        if ses.chain(coefs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("every coefficient needs a finite value and standard error".into()));
        }
        SarimaModel::new(self.sarima.order, self.sarima.params.clone())?;
        Ok(())
    }

    /// Longest lag used by any term.
    pub fn max_lag(&self) -> usize {
        self.price_terms
            .iter()
            .map(|t| t.lag)
            .chain(self.load_terms.iter().map(|t| t.lag))
            .max()
            .unwrap_or(0)
    }

    /// Regressors as lag specs, one per term, in stage order.
    pub fn lag_specs(&self) -> Vec<(LagSpec, f64)> {
        let mut out = Vec::new();
        if let Some(c) = self.temperature {
            out.push((LagSpec::single(Column::TempF, 0, Gate::None), c.value));
        }
        for t in &self.price_terms {
            out.push((LagSpec::single(t.market.column(), t.lag, t.gate), t.coefficient));
        }
        for t in &self.load_terms {
            out.push((LagSpec::single(self.load_source.column(), t.lag, Gate::Fourcp), t.coefficient));
        }
        out
    }

    /// Deterministic part in transformed space for every hour of a
    /// transformed source. Hours outside the model season, or whose open-gate
    /// inputs are missing, are `NaN`.
    pub fn deterministic(&self, transformed: &impl SeriesSource) -> Result<Vec<f64>> {
        let ts = transformed.timestamps();
        let n = ts.len();
        let mut d: Vec<f64> = ts.iter().map(|t| if self.season.contains(t) { 0.0 } else { f64::NAN }).collect();
        let specs = self.lag_specs();
        let only: Vec<LagSpec> = specs.iter().map(|(s, _)| s.clone()).collect();
        let cols = crate::regress::lagged_columns(transformed, &only, &self.windows)?;
        for ((_, col), (_, coef)) in cols.iter().zip(&specs) {
            for t in 0..n {
                d[t] += coef * col[t];
            }
        }
        Ok(d)
    }

    /// Mean of the residual process used for point forecasts.
    pub fn residual_mean(&self) -> f64 {
        if self.sarima.has_mean() {
            self.sarima.params.mean
        } else {
            0.0
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<DemandModel> {
        let m: DemandModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }
}

/// Point prediction of the miner load in MW: the deterministic part plus the
/// residual-process mean, mapped back through the miner transform and
/// floored at zero. Hours without the needed inputs are `NaN`.
pub fn predict(model: &DemandModel, exog: &impl SeriesSource) -> Result<Vec<f64>> {
    let z = predict_transformed(model, exog)?;
    let ts = exog.timestamps();
    let mw = model.transforms.miner_mw.invert(ts, &z)?;
    Ok(mw.into_iter().map(|v| if v.is_nan() { v } else { v.max(0.0) }).collect())
}

/// [`predict`] before the inverse transform.
pub fn predict_transformed(model: &DemandModel, exog: &impl SeriesSource) -> Result<Vec<f64>> {
    let n = exog.timestamps().len();
    let need = model.max_lag();
    if n <= need {
        return Err(Error::InsufficientData(format!(
            "prediction needs more than {need} hours of lag history, got {n}"
        )));
    }
    if model.load_source == LoadSource::OwnConsumption
        && !model.load_terms.is_empty()
        && exog.series(Column::MinerMw).is_none()
    {
        return Err(Error::InvalidInput("own-consumption load terms need observed miner load".into()));
    }
    let frame = model.transforms.apply(exog)?;
    let mut d = model.deterministic(&frame)?;
    let mu = model.residual_mean();
    for v in &mut d {
        *v += mu;
    }
    if d.iter().all(|v| v.is_nan()) {
        return Err(Error::InsufficientData("no hour has the inputs needed for a prediction".into()));
    }
    Ok(d)
}

/// Published coefficient sets for each season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetCoefficients {
    pub season: Season,
    pub temperature: Coefficient,
    pub price_terms: Vec<PriceTerm>,
    pub load_terms: Vec<LoadTerm>,
    pub sarima: SarimaModel,
    pub sarima_se: BTreeMap<String, f64>,
}

fn se_map(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl PresetCoefficients {
    /// Whole days of history the preset's lags reach back; the same as
    /// [`warmup_days`] of any model built from it.
    pub fn warmup_days(&self) -> usize {
        self.price_terms
            .iter()
            .map(|t| t.lag)
            .chain(self.load_terms.iter().map(|t| t.lag))
            .max()
            .unwrap_or(0)
            .div_ceil(24)
    }

    pub fn non_summer() -> PresetCoefficients {
        let order = SarimaOrder::new(1, 0, 0, 1, 1, 0, 24).expect("valid order");
        let params = SarimaParams {
            phi: vec![0.83],
            seasonal_phi: vec![-0.43],
            ..SarimaParams::white_noise(0.58)
        };
        PresetCoefficients {
            season: Season::NonSummer,
            temperature: Coefficient { value: 0.14, se: 0.04 },
            price_terms: vec![
                PriceTerm::new(Market::Da, Gate::Day, 48, -0.08, 0.03),
                PriceTerm::new(Market::Rt, Gate::Day, 1, -0.19, 0.03),
                PriceTerm::new(Market::Rt, Gate::Day, 24, -0.11, 0.03),
                PriceTerm::new(Market::Da, Gate::Peak, 1, -0.16, 0.05),
                PriceTerm::new(Market::Rt, Gate::Peak, 3, -0.29, 0.05),
            ],
            load_terms: vec![],
            sarima: SarimaModel::new(order, params).expect("stationary preset"),
            sarima_se: se_map(&[("ar.L1", 0.02), ("ar.S.L24", 0.02), ("sigma", 0.02)]),
        }
    }

    /// The summer lag-72 real-time term is stored with the printed positive
    /// sign.
    pub fn summer() -> PresetCoefficients {
        let order = SarimaOrder::new(1, 0, 0, 1, 1, 1, 24).expect("valid order");
        let params = SarimaParams {
            phi: vec![0.84],
            seasonal_phi: vec![-0.09],
            seasonal_theta: vec![-0.93],
            ..SarimaParams::white_noise(0.7)
        };
        PresetCoefficients {
            season: Season::Summer,
            temperature: Coefficient { value: 0.12, se: 0.04 },
            price_terms: vec![
                PriceTerm::new(Market::Da, Gate::Day, 0, -0.40, 0.04),
                PriceTerm::new(Market::Rt, Gate::Day, 72, 0.09, 0.04),
                PriceTerm::new(Market::Rt, Gate::Peak, 1, -0.13, 0.06),
            ],
            load_terms: vec![
                LoadTerm {
                    lag: 24,
                    coefficient: -0.89,
                    se: 0.11,
                },
                LoadTerm {
                    lag: 48,
                    coefficient: 0.39,
                    se: 0.114,
                },
            ],
            sarima: SarimaModel::new(order, params).expect("stationary preset"),
            sarima_se: se_map(&[("ar.L1", 0.01), ("ar.S.L24", 0.03), ("ma.S.L24", 0.02), ("sigma", 0.01)]),
        }
    }

    pub fn for_season(season: Season) -> PresetCoefficients {
        match season {
            Season::NonSummer => PresetCoefficients::non_summer(),
            Season::Summer => PresetCoefficients::summer(),
        }
    }

    /// The preset as a model over the given transforms.
    pub fn model(&self, transforms: PanelTransforms) -> DemandModel {
        DemandModel {
            version: MODEL_VERSION,
            season: self.season,
            windows: SeasonMask::default_for(self.season),
            temperature: Some(self.temperature),
            price_terms: self.price_terms.clone(),
            load_terms: self.load_terms.clone(),
            load_source: LoadSource::SystemLoad,
            sarima: self.sarima.clone(),
            sarima_se: self.sarima_se.clone(),
            transforms,
        }
    }

    /// Regression stages holding exactly the preset regressors.
    pub fn stages(&self, load_source: LoadSource) -> Vec<Stage> {
        let mut stages = vec![Stage::new(
            STAGE_TEMPERATURE,
            vec![LagSpec::single(Column::TempF, 0, Gate::None)],
        )];
        for (name, gate) in [(STAGE_DAY_PRICES, Gate::Day), (STAGE_PEAK_PRICES, Gate::Peak)] {
            let specs: Vec<LagSpec> = self
                .price_terms
                .iter()
                .filter(|t| t.gate == gate)
                .map(|t| LagSpec::single(t.market.column(), t.lag, gate))
                .collect();
            if !specs.is_empty() {
                stages.push(Stage::new(name, specs));
            }
        }
        if !self.load_terms.is_empty() {
            let lags = self.load_terms.iter().map(|t| t.lag).collect();
            stages.push(Stage::new(
                STAGE_FOURCP_LOAD,
                vec![LagSpec {
                    source: load_source.column(),
                    lags,
                    gate: Gate::Fourcp,
                }],
            ));
        }
        stages
    }
}

/// Indicator series of a model's 4CP window over a timestamp grid.
pub fn fourcp_indicator(model: &DemandModel, source: &impl SeriesSource) -> Vec<f64> {
    indicator_for(source.timestamps(), &model.windows, IndicatorKind::Fourcp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate, Timelike};

    fn flat_frame(start: NaiveDate, days: usize) -> SeriesFrame {
        let t0 = start.and_hms_opt(0, 0, 0).unwrap();
        let ts: Vec<_> = (0..days * 24).map(|i| t0 + Duration::hours(i as i64)).collect();
        let n = ts.len();
        let mut f = SeriesFrame::new(ts);
        for c in [Column::TempF, Column::DaPrice, Column::RtPrice, Column::SystemMw] {
            f.insert(c, vec![0.0; n]).unwrap();
        }
        f
    }

    fn identity_transforms() -> PanelTransforms {
        let id = FittedTransform::affine(0.0, 1.0).unwrap();
        PanelTransforms {
            miner_mw: FittedTransform::affine(500.0, 50.0).unwrap(),
            temp_f: id.clone(),
            da_price: id.clone(),
            rt_price: id.clone(),
            system_mw: id,
        }
    }

    #[test]
    fn presets_satisfy_model_invariants() {
        for s in [Season::NonSummer, Season::Summer] {
            let m = PresetCoefficients::for_season(s).model(identity_transforms());
            m.validate().unwrap();
            assert_eq!(m.max_lag(), if s == Season::Summer { 72 } else { 48 });
            assert_eq!(PresetCoefficients::for_season(s).warmup_days(), warmup_days(&m));
        }
        let mut bad = PresetCoefficients::non_summer().model(identity_transforms());
        bad.load_terms.push(LoadTerm {
            lag: 24,
            coefficient: 0.1,
            se: 0.1,
        });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = PresetCoefficients::summer().model(identity_transforms());
        let back = DemandModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn zero_inputs_predict_the_inverse_of_zero() {
        let m = PresetCoefficients::non_summer().model(identity_transforms());
        let f = flat_frame(NaiveDate::from_ymd_opt(2021, 11, 1).unwrap(), 4);
        let p = predict(&m, &f).unwrap();
        assert!(p[..m.max_lag()].iter().any(|v| v.is_nan()));
        assert!(p[m.max_lag()..].iter().all(|&v| v == 500.0), "{:?}", &p[m.max_lag()..m.max_lag() + 3]);
    }

    #[test]
    fn derivative_equals_the_stored_coefficient() {
        for s in [Season::NonSummer, Season::Summer] {
            let m = PresetCoefficients::for_season(s).model(identity_transforms());
            let start = if s == Season::Summer {
                NaiveDate::from_ymd_opt(2021, 6, 1).unwrap()
            } else {
                NaiveDate::from_ymd_opt(2021, 11, 1).unwrap()
            };
            let base = flat_frame(start, 5);
            // 16:00 on day 4 is inside every window
            let t = 24 * 4 + 16;
            for (spec, coef) in m.lag_specs() {
                let mut bumped = base.clone();
                let mut col = base.series(spec.source).unwrap().to_vec();
                col[t - spec.lags[0]] += 1.0;
                bumped.insert(spec.source, col).unwrap();
                let d0 = m.deterministic(&base).unwrap();
                let d1 = m.deterministic(&bumped).unwrap();
                assert!(((d1[t] - d0[t]) - coef).abs() < 1e-12, "{spec:?}");
            }
        }
    }

    #[test]
    fn hours_outside_the_windows_ignore_prices() {
        let m = PresetCoefficients::non_summer().model(identity_transforms());
        let mut f = flat_frame(NaiveDate::from_ymd_opt(2021, 11, 1).unwrap(), 5);
        let n = f.len();
        let noisy: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        f.insert(Column::DaPrice, noisy.clone()).unwrap();
        f.insert(Column::RtPrice, noisy).unwrap();
        let d = m.deterministic(&f).unwrap();
        for (i, ts) in f.timestamps().iter().enumerate() {
            if i >= 48 && !(10..20).contains(&ts.hour()) {
                assert_eq!(d[i], 0.0);
            }
        }
    }

    #[test]
    fn short_history_is_an_error() {
        let m = PresetCoefficients::summer().model(identity_transforms());
        let f = flat_frame(NaiveDate::from_ymd_opt(2021, 6, 1).unwrap(), 3);
        assert!(matches!(predict(&m, &f), Err(Error::InsufficientData(_))));
    }
}
