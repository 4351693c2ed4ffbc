//! Merged report and plot-ready series.

use std::path::Path;

use serde_json::{json, Map, Number, Value};

use minerload_core::drmodel::FitSeries;
use minerload_core::panel::{parse_timestamp, Column, HourlyPanel, Season, SeriesSource};
use minerload_core::stats::special::norm_ppf;
use minerload_core::stats::{acf, pacf};
use minerload_core::{Error, Result};

use crate::artifacts as art;
use crate::commands::ROLES;

pub const REPORT_VERSION: &str = "report.v1";

/// JSON schema of `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.v1.json");

const SIG_DIGITS: usize = 12;
const HIST_BINS: usize = 30;
const ACF_LAGS: usize = 72;

pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap_or(v)
}

/// Number text for CSV cells: 12 significant digits, empty when missing.
pub fn fmt_num(v: f64) -> String {
    match Number::from_f64(round_sig(v)) {
        Some(n) => n.to_string(),
        None => String::new(),
    }
}

/// Sorted keys and floats rounded to 12 significant digits.
pub fn canonical(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let mut out = Map::new();
            for k in keys {
                out.insert(k.clone(), canonical(&m[k]));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(canonical).collect()),
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            Number::from_f64(round_sig(x)).map(Value::Number).unwrap_or(Value::Null)
        }
        other => other.clone(),
    }
}

/// Everything a previous subcommand left in the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub gaps: Option<Value>,
    pub transform: Option<Value>,
    pub tests: Option<Value>,
    pub fit: Option<Value>,
    pub fit_series: Option<FitSeries>,
    pub generator: Option<Value>,
    pub panel: Option<HourlyPanel>,
}

fn read_json(path: &Path) -> Result<Option<Value>> {
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&std::fs::read_to_string(path)?)?))
}

impl Artifacts {
    pub fn read(out: &Path) -> Result<Artifacts> {
        let panel_path = [art::PANEL, art::SYNTHETIC]
            .iter()
            .map(|n| art::path(out, n))
            .find(|p| p.exists());
        let series_path = art::path(out, art::FIT_SERIES);
        Ok(Artifacts {
            gaps: read_json(&art::path(out, art::GAPS))?,
            transform: read_json(&art::path(out, art::TRANSFORM))?,
            tests: read_json(&art::path(out, art::TESTS))?,
            fit: read_json(&art::path(out, art::FIT))?,
            fit_series: if series_path.exists() {
                Some(parse_fit_series(&std::fs::read_to_string(series_path)?)?)
            } else {
                None
            },
            generator: read_json(&art::path(out, art::GENERATOR))?,
            panel: panel_path.map(HourlyPanel::read_csv_path).transpose()?,
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.gaps.is_some() {
            v.push("ingest");
        }
        if self.transform.is_some() {
            v.push("transform");
        }
        if self.tests.is_some() {
            v.push("test");
        }
        if self.fit.is_some() {
            v.push("fit");
        }
        if self.generator.is_some() {
            v.push("simulate");
        }
        v
    }
}

fn parse_fit_series(text: &str) -> Result<FitSeries> {
    let mut s = FitSeries::default();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || Error::Parse {
            row: i + 1,
            msg: format!("{}: malformed row", art::FIT_SERIES),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |x: &str| -> Result<f64> {
            if x.is_empty() {
                Ok(f64::NAN)
            } else {
                x.parse().map_err(|_| bad())
            }
        };
        s.timestamps.push(parse_timestamp(f[0]).ok_or_else(bad)?);
        s.observed_mw.push(num(f[1])?);
        s.predicted_mw.push(num(f[2])?);
        s.deterministic_mw.push(num(f[3])?);
        s.innovations.push(num(f[4])?);
    }
    Ok(s)
}

struct Plot {
    name: String,
    kind: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Plot {
    fn csv(&self) -> Vec<u8> {
        let mut text = self.header.join(",");
        text.push('\n');
        for r in &self.rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        text.into_bytes()
    }
}

fn histogram(name: String, x: &[f64]) -> Option<Plot> {
    let x: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    if x.is_empty() {
        return None;
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = if hi > lo { HIST_BINS } else { 1 };
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in &x {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let rows = counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let left = lo + i as f64 * width;
            vec![fmt_num(left), fmt_num(left + width), c.to_string()]
        })
        .collect();
    Some(Plot {
        name,
        kind: "histogram",
        header: vec!["bin_left", "bin_right", "count"],
        rows,
    })
}

fn panel_plots(panel: &HourlyPanel) -> Vec<Plot> {
    let mut plots = Vec::new();
    for c in ROLES {
        plots.extend(histogram(format!("hist_{c}.csv"), panel.series(c).expect("required column")));
    }
    let miner = panel.series(Column::MinerMw).expect("required column");
    for c in [Column::TempF, Column::DaPrice, Column::RtPrice, Column::SystemMw] {
        let x = panel.series(c).expect("required column");
        let rows = x
            .iter()
            .zip(miner)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| vec![fmt_num(*a), fmt_num(*b)])
            .collect();
        plots.push(Plot {
            name: format!("scatter_{c}_miner_mw.csv"),
            kind: "scatter",
            header: vec!["x", "miner_mw"],
            rows,
        });
    }
    plots
}

fn fit_plots(s: &FitSeries) -> Result<Vec<Plot>> {
    let mut plots = Vec::new();
    let e: Vec<f64> = s.innovations.iter().copied().filter(|v| v.is_finite()).collect();
    let mut sorted = e.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    plots.push(Plot {
        name: "qq_innovations.csv".into(),
        kind: "qq",
        header: vec!["theoretical", "sample"],
        rows: sorted
            .iter()
            .enumerate()
            .map(|(i, v)| vec![fmt_num(norm_ppf((i as f64 + 0.5) / n)), fmt_num(*v)])
            .collect(),
    });
    let lags = ACF_LAGS.min(e.len().saturating_sub(2));
    if lags > 0 {
        let a = acf(&e, lags)?;
        let p = pacf(&e, lags)?;
        plots.push(Plot {
            name: "acf_innovations.csv".into(),
            kind: "acf",
            header: vec!["lag", "acf", "pacf"],
            rows: (0..a.len().min(p.len()))
                .map(|k| vec![(k + 1).to_string(), fmt_num(a[k]), fmt_num(p[k])])
                .collect(),
        });
    }
    plots.extend(histogram("hist_innovations.csv".into(), &e));
    plots.push(Plot {
        name: "timeseries_fit.csv".into(),
        kind: "timeseries",
        header: vec!["timestamp", "observed_mw", "predicted_mw", "deterministic_mw"],
        rows: (0..s.timestamps.len())
            .map(|i| {
                vec![
                    s.timestamps[i].format(minerload_core::panel::TIMESTAMP_FORMAT).to_string(),
                    fmt_num(s.observed_mw[i]),
                    fmt_num(s.predicted_mw[i]),
                    fmt_num(s.deterministic_mw[i]),
                ]
            })
            .collect(),
    });
    Ok(plots)
}

fn fit_sections(fit: &Value, out: &mut Map<String, Value>) {
    let d = &fit["diagnostics"];
    out.insert("stages".into(), fit["stages"].clone());
    let mut sarima = fit["sarima"].clone();
    if let Value::Object(m) = &mut sarima {
        m.insert("aic_table".into(), fit["aic_table"].clone());
    }
    out.insert("sarima".into(), sarima);
    out.insert(
        "metrics".into(),
        json!({
            "train": d["metrics"],
            "transformed": d["metrics_transformed"],
            "deterministic": d["metrics_deterministic"],
            "test": d["test_metrics"],
        }),
    );
    let mut diag = Map::new();
    for k in [
        "ljung_box",
        "adf",
        "jarque_bera",
        "breusch_pagan",
        "durbin_watson",
        "removed_days",
        "dropped_columns",
        "train_days",
        "test_days",
        "sample_hours",
    ] {
        diag.insert(k.into(), d[k].clone());
    }
    out.insert("diagnostics".into(), Value::Object(diag));
    out.insert("model".into(), fit["model"].clone());
}

/// Merges the artifacts into one report and builds the plot series.
/// Returns the report and `(file name, csv bytes)` pairs.
pub fn emit_report(a: &Artifacts, season: Option<Season>) -> Result<(Value, Vec<(String, Vec<u8>)>)> {
    let names = a.names();
    if names.is_empty() {
        return Err(Error::Precondition(
            "report needs at least one artifact; run ingest, transform, test, fit or simulate first".into(),
        ));
    }
    let mut out = Map::new();
    out.insert("schema_version".into(), json!(REPORT_VERSION));
    out.insert(
        "generator".into(),
        json!({ "name": "minerload", "version": env!("CARGO_PKG_VERSION") }),
    );
    out.insert("artifacts".into(), json!(names));
    let season = a
        .fit
        .as_ref()
        .and_then(|f| f.get("season").cloned())
        .or_else(|| season.map(|s| json!(s)))
        .unwrap_or(Value::Null);
    out.insert("season".into(), season);
    if let Some(g) = &a.gaps {
        out.insert("panel".into(), g.clone());
    }
    if let Some(t) = &a.transform {
        let mut steps = Map::new();
        if let Value::Object(m) = t {
            for (col, ft) in m {
                let names: Vec<Value> = ft["steps"]
                    .as_array()
                    .map(|s| s.iter().map(|st| st["kind"].clone()).collect())
                    .unwrap_or_default();
                steps.insert(col.clone(), Value::Array(names));
            }
        }
        out.insert("transform".into(), json!({ "steps": steps }));
    }
    if let Some(t) = &a.tests {
        out.insert("tests".into(), t.clone());
    }
    if let Some(f) = &a.fit {
        fit_sections(f, &mut out);
    }
    if let Some(g) = &a.generator {
        out.insert("generator_model".into(), g.clone());
    }
    let mut plots = Vec::new();
    if let Some(p) = &a.panel {
        plots.extend(panel_plots(p));
    }
    if let Some(s) = &a.fit_series {
        plots.extend(fit_plots(s)?);
    }
    out.insert(
        "plots".into(),
        Value::Array(
            plots
                .iter()
                .map(|p| {
                    json!({
                        "name": p.name.trim_end_matches(".csv"),
                        "kind": p.kind,
                        "file": format!("{}/{}", art::PLOTS, p.name),
                        "columns": p.header,
                        "rows": p.rows.len(),
                    })
                })
                .collect(),
        ),
    );
    let files = plots.iter().map(|p| (p.name.clone(), p.csv())).collect();
    Ok((canonical(&Value::Object(out)), files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(123456789.0123456789), 123456789.012);
        assert_eq!(fmt_num(f64::NAN), "");
        assert_eq!(fmt_num(2.0), "2.0");
    }

    #[test]
    fn canonical_sorts_keys() {
        let v = canonical(&json!({"b": 1, "a": {"d": 0.30000000000000004, "c": 2}}));
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":{"c":2,"d":0.3},"b":1}"#);
    }

    #[test]
    fn empty_artifact_set_is_an_error() {
        assert!(emit_report(&Artifacts::default(), None).is_err());
    }
}
