//! Run configuration: a TOML file plus `--set key=value` overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use minerload_core::drmodel::{FitConfig, LoadSource};
use minerload_core::panel::{Column, HourWindow, SchemaMap, Season, SeasonMask};
use minerload_core::regress::{Gate, LagSpec, Stage};
use minerload_core::sarima::SarimaOrder;
use minerload_core::stats::CorrelationFilter;
use minerload_core::transform::TransformConfig;
use minerload_core::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub season: Option<Season>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub input: InputConfig,
    pub windows: WindowOverrides,
    pub transform: TransformOptions,
    pub fit: FitOptions,
    pub test: TestOptions,
    pub simulate: SimulateOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub paths: Vec<PathBuf>,
    /// Schema mapping file (`canonical = "source column"` lines).
    pub schema: Option<PathBuf>,
    /// Inline mapping entries, applied after the file.
    pub columns: BTreeMap<String, String>,
}

impl InputConfig {
    pub fn schema_map(&self) -> Result<SchemaMap> {
        let mut schema = match &self.schema {
            Some(p) => SchemaMap::read(p)?,
            None => SchemaMap::canonical(),
        };
        for (key, value) in &self.columns {
            match key.as_str() {
                "timestamp" => schema.timestamp = value.clone(),
                "dst_flag" => schema.dst_flag = Some(value.clone()),
                other => {
                    let c = Column::from_name(other)
                        .ok_or_else(|| config_error(format!("input.columns: unknown column {other:?}")))?;
                    schema.columns.insert(c, value.clone());
                }
            }
        }
        Ok(schema)
    }
}

/// Hour windows as `[start, end)` pairs; unset windows keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowOverrides {
    pub day: Option<[u32; 2]>,
    pub peak: Option<[u32; 2]>,
    pub fourcp: Option<[u32; 2]>,
}

impl WindowOverrides {
    pub fn is_empty(&self) -> bool {
        self.day.is_none() && self.peak.is_none() && self.fourcp.is_none()
    }

    pub fn mask(&self, season: Season) -> Result<SeasonMask> {
        let base = SeasonMask::default_for(season);
        let pick = |o: Option<[u32; 2]>, d: HourWindow| match o {
            Some([a, b]) => HourWindow::new(a, b),
            None => Ok(d),
        };
        SeasonMask::new(
            season,
            pick(self.day, base.day_window)?,
            pick(self.peak, base.peak_window)?,
            pick(self.fourcp, base.fourcp_window)?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformOptions {
    /// Trend window in days for the miner load; 0 turns trend removal off.
    pub trend_window_days: usize,
    pub gaussianize: bool,
    pub standardize: bool,
    /// Outlier-day threshold on the daily mean real-time price; 0 disables.
    pub outlier_z: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            trend_window_days: minerload_core::transform::DEFAULT_TREND_WINDOW,
            gaussianize: true,
            standardize: true,
            outlier_z: 3.0,
        }
    }
}

impl TransformOptions {
    pub fn miner_config(&self) -> TransformConfig {
        TransformConfig {
            trend_window_days: (self.trend_window_days > 0).then_some(self.trend_window_days),
            gaussianize: self.gaussianize,
            standardize: self.standardize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagEntry {
    pub source: Column,
    pub lags: Vec<usize>,
    #[serde(default)]
    pub gate: Option<Gate>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageEntry {
    pub name: String,
    pub specs: Vec<LagEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Stage lag grids; empty uses the season's preset layout.
    pub stages: Vec<StageEntry>,
    /// Residual orders such as `"(1,0,0)(1,1,0)[24]"`, compared by AIC.
    pub candidates: Vec<String>,
    /// Fixed residual order; skips the AIC comparison.
    pub order: Option<String>,
    pub significance: f64,
    pub backfit_sweeps: usize,
    pub gls_passes: usize,
    pub load_source: LoadSource,
    pub min_days: usize,
    pub train_fraction: Option<f64>,
    pub ljung_box_lags: usize,
    pub burn_in_hours: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        let d = FitConfig::default();
        FitOptions {
            stages: Vec::new(),
            candidates: d.candidates.iter().map(|o| o.to_string()).collect(),
            order: None,
            significance: d.significance,
            backfit_sweeps: d.backfit_sweeps,
            gls_passes: d.gls_passes,
            load_source: d.load_source,
            min_days: d.min_days,
            train_fraction: d.train_fraction,
            ljung_box_lags: d.ljung_box_lags,
            burn_in_hours: d.burn_in_hours,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationEntry {
    pub x: Column,
    pub y: Column,
    #[serde(default)]
    pub hours: BTreeSet<u32>,
    #[serde(default)]
    pub months: BTreeSet<u32>,
    #[serde(default)]
    pub lag: usize,
}

impl CorrelationEntry {
    pub fn filter(&self) -> CorrelationFilter {
        CorrelationFilter {
            hours: self.hours.clone(),
            months: self.months.clone(),
            lag: self.lag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestOptions {
    pub rsi_windows: Vec<usize>,
    pub acf_lags: usize,
    pub correlations: Vec<CorrelationEntry>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            rsi_windows: vec![7, 14, 21],
            acf_lags: 48,
            correlations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub days: usize,
    /// First emitted day; defaults to June 1 (summer) or October 1.
    pub start: Option<NaiveDate>,
    /// Model JSON to simulate from instead of the season preset.
    pub model: Option<PathBuf>,
    /// Exogenous input CSV instead of the synthetic scenario.
    pub scenario: Option<PathBuf>,
    /// Affine miner transform used with the preset: MW = offset + scale * z.
    pub miner_offset: f64,
    pub miner_scale: f64,
    pub btc_start: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            days: 120,
            start: None,
            model: None,
            scenario: None,
            miner_offset: 1000.0,
            miner_scale: 10.0,
            btc_start: 40_000.0,
        }
    }
}

impl SimulateOptions {
    pub fn start_for(&self, season: Season) -> NaiveDate {
        self.start.unwrap_or_else(|| match season {
            Season::Summer => NaiveDate::from_ymd_opt(2021, 6, 1).expect("date"),
            Season::NonSummer => NaiveDate::from_ymd_opt(2021, 10, 1).expect("date"),
        })
    }
}

fn config_error(msg: String) -> Error {
    Error::InvalidInput(format!("config: {msg}"))
}

fn parse_order(s: &str) -> Result<SarimaOrder> {
    s.parse().map_err(|e| config_error(format!("order {s:?}: {e}")))
}

impl RunConfig {
    /// Reads an optional TOML file, applies `key=value` overrides (dotted
    /// keys, TOML values with bare strings allowed) and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_error(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| config_error(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_error(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(season) = self.season {
            self.windows.mask(season).map_err(|e| config_error(format!("windows: {e}")))?;
        } else if !self.windows.is_empty() {
            self.windows.mask(Season::Summer).map_err(|e| config_error(format!("windows: {e}")))?;
        }
        let t = &self.transform;
        if !(t.outlier_z >= 0.0 && t.outlier_z.is_finite()) {
            return Err(config_error("transform.outlier_z must be finite and nonnegative".into()));
        }
        let f = &self.fit;
        if !(f.significance > 0.0 && f.significance < 1.0) {
            return Err(config_error("fit.significance must lie in (0, 1)".into()));
        }
        if let Some(fr) = f.train_fraction {
            if !(fr > 0.0 && fr <= 1.0) {
                return Err(config_error("fit.train_fraction must lie in (0, 1]".into()));
            }
        }
        if f.order.is_none() && f.candidates.is_empty() {
            return Err(config_error("fit.candidates is empty and no fit.order is set".into()));
        }
        for s in f.candidates.iter().chain(f.order.iter()) {
            parse_order(s)?;
        }
        self.stages()?;
        if self.test.rsi_windows.iter().any(|&w| w == 0) {
            return Err(config_error("test.rsi_windows must be positive".into()));
        }
        for c in &self.test.correlations {
            if c.hours.iter().any(|&h| h > 23) || c.months.iter().any(|&m| !(1..=12).contains(&m)) {
                return Err(config_error("test.correlations: hours must be 0-23 and months 1-12".into()));
            }
        }
        let s = &self.simulate;
        if s.days == 0 {
            return Err(config_error("simulate.days must be positive".into()));
        }
        if !(s.miner_scale > 0.0 && s.miner_scale.is_finite() && s.miner_offset.is_finite()) {
            return Err(config_error("simulate.miner_scale must be positive and finite".into()));
        }
        if !(s.btc_start > 0.0 && s.btc_start.is_finite()) {
            return Err(config_error("simulate.btc_start must be positive".into()));
        }
        Ok(())
    }

    fn stages(&self) -> Result<Option<Vec<Stage>>> {
        if self.fit.stages.is_empty() {
            return Ok(None);
        }
        let mut out = Vec::new();
        for st in &self.fit.stages {
            let specs = st
                .specs
                .iter()
                .map(|e| LagSpec::new(e.source, e.lags.clone(), e.gate.unwrap_or(Gate::None)))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| config_error(format!("fit.stages {:?}: {e}", st.name)))?;
            out.push(Stage::new(&st.name, specs));
        }
        Ok(Some(out))
    }

    pub fn fit_config(&self, season: Season) -> Result<FitConfig> {
        let f = &self.fit;
        Ok(FitConfig {
            windows: Some(self.windows.mask(season)?),
            outlier_z: (self.transform.outlier_z > 0.0).then_some(self.transform.outlier_z),
            significance: f.significance,
            backfit_sweeps: f.backfit_sweeps,
            gls_passes: f.gls_passes,
            order: f.order.as_deref().map(parse_order).transpose()?,
            candidates: f.candidates.iter().map(|s| parse_order(s)).collect::<Result<_>>()?,
            stages: self.stages()?,
            load_source: f.load_source,
            min_days: f.min_days,
            train_fraction: f.train_fraction.filter(|&x| x < 1.0),
            ljung_box_lags: f.ljung_box_lags,
            burn_in_hours: f.burn_in_hours,
        })
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_error(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(config_error(format!("override {spec:?} has an empty key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = RunConfig::load(
            None,
            &["fit.gls_passes=1".into(), "season=summer".into(), "windows.peak=[16, 19]".into()],
        )
        .unwrap();
        assert_eq!(cfg.fit.gls_passes, 1);
        assert_eq!(cfg.season, Some(Season::Summer));
        assert_eq!(cfg.windows.peak, Some([16, 19]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::load(None, &["fit.gls_pases=1".into()]).unwrap_err();
        assert!(err.to_string().contains("gls_pases"), "{err}");
        assert!(RunConfig::load(None, &["nonsense".into()]).is_err());
    }

    #[test]
    fn bad_orders_and_windows_fail_validation() {
        assert!(RunConfig::load(None, &["fit.order=\"(1,0)[24]\"".into()]).is_err());
        assert!(RunConfig::load(None, &["season=summer".into(), "windows.peak=[8, 22]".into()]).is_err());
    }
}
