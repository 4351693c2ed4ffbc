//! The six subcommands. Each reads its inputs, stages its outputs and
//! returns without touching the output directory on error.

use std::path::Path;

use chrono::Duration;
use serde_json::{json, Value};

use minerload_core::drmodel::{
    fit_demand_model, generate_synthetic, synthetic_btc, warmup_days, DemandModel, ExogScenario, FitSeries,
    PresetCoefficients, PanelTransforms,
};
use minerload_core::indicators::rsi_correlation_study;
use minerload_core::panel::{load_panel, Column, HourlyPanel, Season, SeriesSource};
use minerload_core::stats::{
    acf, adf_test, breusch_pagan_hourly, durbin_watson, jarque_bera, moments, pacf, windowed_correlation, AdfOptions,
};
use minerload_core::transform::FittedTransform;
use minerload_core::{Error, Result};

use crate::artifacts::{self as art, Staging};
use crate::config::RunConfig;
use crate::report::fmt_num;

/// Series tested by the `test` battery, in table order.
pub const ROLES: [Column; 5] = [
    Column::MinerMw,
    Column::TempF,
    Column::DaPrice,
    Column::RtPrice,
    Column::SystemMw,
];

fn require(out: &Path, name: &str, producer: &str) -> Result<std::path::PathBuf> {
    let p = art::path(out, name);
    if !p.exists() {
        return Err(Error::Precondition(format!(
            "{} not found in {}; run `{producer}` first",
            name,
            out.display()
        )));
    }
    Ok(p)
}

fn require_season(cfg: &RunConfig, cmd: &str) -> Result<Season> {
    cfg.season
        .ok_or_else(|| Error::Precondition(format!("{cmd} needs a season (--season or `season` in the config)")))
}

fn read_panel(out: &Path) -> Result<HourlyPanel> {
    HourlyPanel::read_csv_path(require(out, art::PANEL, "ingest")?)
}

fn read_transforms(out: &Path) -> Result<PanelTransforms> {
    PanelTransforms::from_json(&std::fs::read_to_string(require(out, art::TRANSFORM, "transform")?)?)
}

fn panel_csv(panel: &HourlyPanel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    panel.write_csv(&mut buf)?;
    Ok(buf)
}

pub fn ingest(cfg: &RunConfig, st: &mut Staging) -> Result<()> {
    if cfg.input.paths.is_empty() {
        return Err(Error::Precondition("ingest needs input.paths in the config".into()));
    }
    let schema = cfg.input.schema_map()?;
    let panel = load_panel(&cfg.input.paths, &schema)?;
    let ts = panel.timestamps();
    let gaps = panel.gap_report();
    st.write(art::PANEL, &panel_csv(&panel)?)?;
    st.write_json(
        art::GAPS,
        &json!({
            "hours": panel.len(),
            "days": panel.days().len(),
            "start": ts[0].format(minerload_core::panel::TIMESTAMP_FORMAT).to_string(),
            "end": ts[ts.len() - 1].format(minerload_core::panel::TIMESTAMP_FORMAT).to_string(),
            "has_btc": panel.has_btc(),
            "gaps": gaps,
        }),
    )
}

pub fn transform(cfg: &RunConfig, out: &Path, st: &mut Staging) -> Result<()> {
    let panel = read_panel(out)?;
    let transforms = PanelTransforms::fit(&panel, &cfg.transform.miner_config())?;
    let frame = transforms.apply(&panel)?;
    st.write(art::TRANSFORM, transforms.to_json()?.as_bytes())?;
    let mut buf = Vec::new();
    frame.write_csv(&mut buf)?;
    st.write(art::TRANSFORMED, &buf)
}

fn battery(panel: &HourlyPanel, column: Column) -> Result<Value> {
    let raw = panel.series(column).expect("required column");
    let (ts, x): (Vec<_>, Vec<f64>) = panel
        .timestamps()
        .iter()
        .zip(raw)
        .filter(|(_, v)| v.is_finite())
        .map(|(t, v)| (*t, *v))
        .unzip();
    let m = moments(&x)?;
    let centered: Vec<f64> = x.iter().map(|v| v - m.mean).collect();
    Ok(json!({
        "n": x.len(),
        "mean": m.mean,
        "std": m.std,
        "skewness": m.skewness,
        "jarque_bera": jarque_bera(&x)?,
        "adf": adf_test(&x, &AdfOptions::default())?,
        "breusch_pagan": breusch_pagan_hourly(&centered, &ts)?,
        "durbin_watson": durbin_watson(&centered)?,
    }))
}

pub fn test(cfg: &RunConfig, out: &Path, st: &mut Staging) -> Result<()> {
    let mut panel = read_panel(out)?;
    if let Some(season) = cfg.season {
        panel = panel.restrict_to_season(season)?;
    }
    let mut series = serde_json::Map::new();
    for c in ROLES {
        series.insert(c.name().into(), battery(&panel, c).map_err(|e| e.in_stage(format!("test {c}")))?);
    }
    let mut correlations = Vec::new();
    for c in &cfg.test.correlations {
        let r = windowed_correlation(&panel, c.x, c.y, &c.filter())?;
        correlations.push(json!({ "x": c.x, "y": c.y, "result": r }));
    }
    let rsi = if !panel.has_btc() {
        json!({ "skipped": "panel has no btc_usd column" })
    } else {
        match rsi_correlation_study(&panel, &cfg.test.rsi_windows) {
            Ok(rows) => {
                let rows: Vec<Value> = cfg
                    .test
                    .rsi_windows
                    .iter()
                    .zip(rows)
                    .map(|(w, r)| json!({ "window": w, "result": r }))
                    .collect();
                json!({ "windows": rows })
            }
            Err(e @ Error::InsufficientData(_)) => json!({ "skipped": e.to_string() }),
            Err(e) => return Err(e.in_stage("test rsi")),
        }
    };
    let miner: Vec<f64> = panel
        .series(Column::MinerMw)
        .expect("required column")
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let lags = cfg.test.acf_lags.min(miner.len().saturating_sub(2));
    st.write_json(
        art::TESTS,
        &json!({
            "season": cfg.season,
            "series": series,
            "correlations": correlations,
            "rsi": rsi,
            "miner_mw_acf": acf(&miner, lags)?,
            "miner_mw_pacf": pacf(&miner, lags)?,
        }),
    )
}

fn series_csv(s: &FitSeries) -> Vec<u8> {
    let mut text = String::from("timestamp,observed_mw,predicted_mw,deterministic_mw,innovation\n");
    for i in 0..s.timestamps.len() {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            s.timestamps[i].format(minerload_core::panel::TIMESTAMP_FORMAT),
            fmt_num(s.observed_mw[i]),
            fmt_num(s.predicted_mw[i]),
            fmt_num(s.deterministic_mw[i]),
            fmt_num(s.innovations[i]),
        ));
    }
    text.into_bytes()
}

pub fn fit(cfg: &RunConfig, out: &Path, st: &mut Staging) -> Result<()> {
    let season = require_season(cfg, "fit")?;
    let panel = read_panel(out)?;
    let transforms = read_transforms(out)?;
    let fc = cfg.fit_config(season)?;
    let fit = fit_demand_model(&panel, season, &transforms, &fc)?;
    st.write(art::MODEL, fit.model.to_json()?.as_bytes())?;
    st.write_json(
        art::FIT,
        &json!({
            "season": season,
            "stages": fit.stages,
            "sarima": fit.sarima,
            "aic_table": fit.aic_table,
            "diagnostics": fit.diagnostics,
            "model": fit.model,
        }),
    )?;
    st.write(art::FIT_SERIES, &series_csv(&fit.series))
}

/// Seeds for the scenario, the residual path and the Bitcoin price path.
fn sub_seeds(seed: u64) -> (u64, u64, u64) {
    (seed, seed.wrapping_add(1), seed.wrapping_add(2))
}

pub fn simulate(cfg: &RunConfig, st: &mut Staging) -> Result<()> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::Precondition("simulate needs --seed (or `seed` in the config)".into()))?;
    let sim = &cfg.simulate;
    let (scenario_seed, noise_seed, btc_seed) = sub_seeds(seed);
    let loaded = match &sim.model {
        Some(p) => Some(DemandModel::from_json(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let season = match (&loaded, cfg.season) {
        (Some(m), Some(s)) if m.season != s => {
            return Err(Error::InvalidInput(format!(
                "model is for {} but --season is {}",
                m.season.name(),
                s.name()
            )))
        }
        (Some(m), _) => m.season,
        (None, s) => s.ok_or_else(|| Error::Precondition("simulate needs a season or a model".into()))?,
    };
    let preset = PresetCoefficients::for_season(season);
    let warm = match &loaded {
        Some(m) => warmup_days(m),
        None => preset.warmup_days(),
    };
    let scenario = match &sim.scenario {
        Some(p) => ExogScenario::read_csv_path(p)?,
        None => {
            let start = sim.start_for(season) - Duration::days(warm as i64);
            ExogScenario::synthetic(start, sim.days + warm, scenario_seed)?
        }
    };
    let model = match loaded {
        Some(m) => m,
        None => {
            let miner = FittedTransform::affine(sim.miner_offset, sim.miner_scale)?;
            let transforms = PanelTransforms::fit_exogenous(&scenario, miner)?;
            let mut m = preset.model(transforms);
            if !cfg.windows.is_empty() {
                m.windows = cfg.windows.mask(season)?;
            }
            m
        }
    };
    model.validate()?;
    let panel = generate_synthetic(&model, &scenario, sim.days, noise_seed)?;
    let btc = synthetic_btc(panel.len(), sim.btc_start, btc_seed)?;
    let panel = panel.with_column(Column::BtcUsd, btc)?;
    st.write(art::SYNTHETIC, &panel_csv(&panel)?)?;
    st.write(art::GENERATOR, model.to_json()?.as_bytes())
}

pub fn report(cfg: &RunConfig, out: &Path, st: &mut Staging) -> Result<()> {
    let artifacts = crate::report::Artifacts::read(out)?;
    let (value, plots) = crate::report::emit_report(&artifacts, cfg.season)?;
    for (name, bytes) in plots {
        st.write(&format!("{}/{name}", art::PLOTS), &bytes)?;
    }
    st.write_json(art::REPORT, &value)
}
