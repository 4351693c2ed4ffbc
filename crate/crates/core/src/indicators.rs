//! Momentum index, daily energy aggregation and coincident-peak intervals.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Column, HourlyPanel, SeriesSource};
use crate::stats::{pearson, CorrelationResult};
use crate::transform::{extract_trend, DEFAULT_TREND_WINDOW};

/// One value per calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl DailySeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<DailySeries> {
        if dates.len() != values.len() {
            return Err(Error::InvalidInput("daily series: dates and values differ in length".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("daily series dates must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("daily series values must be finite".into()));
        }
        Ok(DailySeries { dates, values })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Values of both series on their common dates.
    pub fn align(&self, other: &DailySeries) -> (Vec<NaiveDate>, Vec<f64>, Vec<f64>) {
        let lookup: BTreeMap<NaiveDate, f64> = other.dates.iter().copied().zip(other.values.iter().copied()).collect();
        let mut dates = Vec::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (d, v) in self.dates.iter().zip(&self.values) {
            if let Some(w) = lookup.get(d) {
                dates.push(*d);
                a.push(*v);
                b.push(*w);
            }
        }
        (dates, a, b)
    }
}

/// Wilder's relative strength index. The first value uses simple averages of
/// the first `window` price changes; later values smooth recursively. A flat
/// market (no gains and no losses) scores 50.
pub fn rsi(prices: &DailySeries, window: usize) -> Result<DailySeries> {
    if window < 2 {
        return Err(Error::InvalidInput(format!("RSI window must be at least 2, got {window}")));
    }
    if prices.len() <= window {
        return Err(Error::InsufficientData(format!(
            "RSI with window {window} needs more than {window} prices, got {}",
            prices.len()
        )));
    }
    let w = window as f64;
    let changes: Vec<f64> = prices.values.windows(2).map(|p| p[1] - p[0]).collect();
    let score = |gain: f64, loss: f64| {
        if loss == 0.0 && gain == 0.0 {
            50.0
        } else if loss == 0.0 {
            100.0
        } else {
            100.0 - 100.0 / (1.0 + gain / loss)
        }
    };
    let mut gain = changes[..window].iter().map(|c| c.max(0.0)).sum::<f64>() / w;
    let mut loss = changes[..window].iter().map(|c| (-c).max(0.0)).sum::<f64>() / w;
    let mut values = vec![score(gain, loss)];
    for c in &changes[window..] {
        gain = (gain * (w - 1.0) + c.max(0.0)) / w;
        loss = (loss * (w - 1.0) + (-c).max(0.0)) / w;
        values.push(score(gain, loss));
    }
    DailySeries::new(prices.dates[window..].to_vec(), values)
}

/// Daily sums of hourly values over days with all 24 hours observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyEnergy {
    pub series: DailySeries,
    /// Days dropped for incomplete coverage.
    pub excluded: Vec<NaiveDate>,
}

pub fn daily_energy(timestamps: &[NaiveDateTime], hourly: &[f64]) -> Result<DailyEnergy> {
    if timestamps.len() != hourly.len() {
        return Err(Error::InvalidInput("daily energy: timestamps and values differ in length".into()));
    }
    let mut days: BTreeMap<NaiveDate, (f64, usize, bool)> = BTreeMap::new();
    for (ts, &v) in timestamps.iter().zip(hourly) {
        let e = days.entry(ts.date()).or_insert((0.0, 0, true));
        if v.is_finite() {
            e.0 += v;
            e.1 += 1;
        } else {
            e.2 = false;
        }
    }
    let (mut dates, mut values, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for (d, (sum, count, clean)) in days {
        if clean && count == 24 {
            dates.push(d);
            values.push(sum);
        } else {
            excluded.push(d);
        }
    }
    if dates.is_empty() {
        return Err(Error::InsufficientData("no day has complete 24-hour coverage".into()));
    }
    Ok(DailyEnergy {
        series: DailySeries::new(dates, values)?,
        excluded,
    })
}

/// Daily closing Bitcoin price: the last observed value of each day.
pub fn daily_close(panel: &HourlyPanel) -> Result<DailySeries> {
    let btc = panel
        .series(Column::BtcUsd)
        .ok_or_else(|| Error::InvalidInput("panel has no btc_usd series".into()))?;
    let mut last: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for (ts, &v) in panel.timestamps().iter().zip(btc) {
        if v.is_finite() {
            last.insert(ts.date(), v);
        }
    }
    DailySeries::new(last.keys().copied().collect(), last.values().copied().collect())
}

/// Minimum number of overlapping days for the RSI study.
pub const MIN_RSI_DAYS: usize = 60;

/// Correlation of the Bitcoin RSI with the daily energy of the detrended
/// miner load, one result per window.
pub fn rsi_correlation_study(panel: &HourlyPanel, windows: &[usize]) -> Result<Vec<CorrelationResult>> {
    let prices = daily_close(panel)?;
    let miner = panel.series(Column::MinerMw).expect("required column");
    let (_, detrended) = extract_trend(panel.timestamps(), miner, DEFAULT_TREND_WINDOW)?;
    let energy = daily_energy(panel.timestamps(), &detrended)?;
    windows
        .iter()
        .map(|&w| {
            let index = rsi(&prices, w)?;
            let (dates, r, e) = index.align(&energy.series);
            if dates.len() < MIN_RSI_DAYS {
                return Err(Error::InsufficientData(format!(
                    "RSI({w}) and daily energy overlap on {} days, need {MIN_RSI_DAYS}",
                    dates.len()
                )));
            }
            let mut out = pearson(&r, &e)?;
            out.window_note = format!("rsi window {w} days vs daily detrended energy, {} days", dates.len());
            Ok(out)
        })
        .collect()
}

/// A coincident-peak interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpInterval {
    pub month: u32,
    pub start: NaiveDateTime,
    pub duration_minutes: u32,
    pub load_mw: f64,
}

/// How many peak intervals to report per summer month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourCpMode {
    /// The monthly maximum, four intervals in total.
    #[default]
    OnePerMonth,
    /// The four highest intervals of each month.
    FourPerMonth,
}

pub const FOURCP_MONTHS: [u32; 4] = [6, 7, 8, 9];

/// Ex-post monthly peak-demand intervals for June through September of
/// `year`. Ties go to the earliest instant.
pub fn find_4cp_intervals(
    timestamps: &[NaiveDateTime],
    load: &[f64],
    duration_minutes: u32,
    year: i32,
    mode: FourCpMode,
) -> Result<Vec<CpInterval>> {
    if timestamps.len() != load.len() {
        return Err(Error::InvalidInput("4CP: timestamps and load differ in length".into()));
    }
    if duration_minutes != 15 && duration_minutes != 60 {
        return Err(Error::InvalidInput(format!(
            "4CP interval resolution must be 15 or 60 minutes, got {duration_minutes}"
        )));
    }
    let per_month = match mode {
        FourCpMode::OnePerMonth => 1,
        FourCpMode::FourPerMonth => 4,
    };
    let mut out = Vec::new();
    for month in FOURCP_MONTHS {
        let mut obs: Vec<(NaiveDateTime, f64)> = timestamps
            .iter()
            .zip(load)
            .filter(|(ts, v)| ts.year() == year && ts.month() == month && v.is_finite())
            .map(|(ts, v)| (*ts, *v))
            .collect();
        if obs.len() < per_month {
            return Err(Error::InsufficientData(format!("no load data for {year}-{month:02}")));
        }
        // descending load, earliest first among equals
        obs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.extend(obs[..per_month].iter().map(|&(start, load_mw)| CpInterval {
            month,
            start,
            duration_minutes,
            load_mw,
        }));
    }
    Ok(out)
}
