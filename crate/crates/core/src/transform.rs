//! The normalizing transform N(.) and its inverse: multiplicative trend
//! removal, rank-based Gaussianization and per-bin standardization.

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Column, HourlyPanel, Season, SeriesSource};
use crate::stats::special::norm_ppf;

/// Current version of the serialized transform document.
pub const TRANSFORM_VERSION: u32 = 1;

/// Default trailing window for the trend, in days.
pub const DEFAULT_TREND_WINDOW: usize = 7;

/// Per-day multiplicative trend: rolling maximum of daily peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub window_days: usize,
    pub start_day: NaiveDate,
    pub values: Vec<f64>,
}

impl Trend {
    /// Trend value for a day. Days outside the fitted range use the nearest
    /// end value.
    pub fn at(&self, day: NaiveDate) -> f64 {
        let offset = (day - self.start_day).num_days();
        let idx = offset.clamp(0, self.values.len() as i64 - 1) as usize;
        self.values[idx]
    }
}

/// Trailing rolling maximum of daily peaks and the series divided by it.
pub fn extract_trend(
    timestamps: &[NaiveDateTime],
    series: &[f64],
    window_days: usize,
) -> Result<(Trend, Vec<f64>)> {
    if window_days == 0 {
        return Err(Error::InvalidInput("trend window must be at least one day".into()));
    }
    if timestamps.len() != series.len() || timestamps.is_empty() {
        return Err(Error::InvalidInput("trend: timestamps and series must be nonempty and aligned".into()));
    }
    let start_day = timestamps[0].date();
    let n_days = (timestamps[timestamps.len() - 1].date() - start_day).num_days() as usize + 1;
    let mut peaks = vec![f64::NAN; n_days];
    for (ts, &x) in timestamps.iter().zip(series) {
        if x.is_finite() {
            let d = (ts.date() - start_day).num_days() as usize;
            if peaks[d].is_nan() || x > peaks[d] {
                peaks[d] = x;
            }
        }
    }
    let mut values: Vec<f64> = (0..n_days)
        .map(|d| {
            peaks[d.saturating_sub(window_days - 1)..=d]
                .iter()
                .copied()
                .filter(|p| !p.is_nan())
                .fold(f64::NAN, f64::max)
        })
        .collect();
    // days whose whole window is missing borrow the nearest fitted value
    for d in 1..n_days {
        if values[d].is_nan() {
            values[d] = values[d - 1];
        }
    }
    for d in (0..n_days.saturating_sub(1)).rev() {
        if values[d].is_nan() {
            values[d] = values[d + 1];
        }
    }
    if let Some(d) = values.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Degenerate(format!(
            "trend value {} on {} is not positive",
            values[d],
            start_day + chrono::Duration::days(d as i64)
        )));
    }
    let trend = Trend {
        window_days,
        start_day,
        values,
    };
    let detrended = timestamps
        .iter()
        .zip(series)
        .map(|(ts, x)| x / trend.at(ts.date()))
        .collect();
    Ok((trend, detrended))
}

/// Monotone map between sample values and standard-normal scores.
/// `values` is strictly increasing; tied sample values share the mean score
/// of their plotting positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    pub values: Vec<f64>,
    pub z: Vec<f64>,
}

impl QuantileMap {
    pub fn fit(series: &[f64]) -> Result<QuantileMap> {
        Ok(gaussianize(series)?.1)
    }

    /// Forward map; linear between knots, clamped beyond the sample range.
    pub fn forward(&self, x: f64) -> f64 {
        interpolate(&self.values, &self.z, x)
    }

    /// Inverse map; linear between knots, clamped to the sample min/max.
    pub fn inverse(&self, z: f64) -> f64 {
        interpolate(&self.z, &self.values, z)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x);
    // xs[i-1] <= x < xs[i]
    if xs[i - 1] == x {
        return ys[i - 1];
    }
    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

/// Rank-based Gaussianization: the observation of rank k among n maps to
/// the normal quantile of (k - 0.5)/n, ties ranked in input order. Missing
/// values stay missing.
pub fn gaussianize(series: &[f64]) -> Result<(Vec<f64>, QuantileMap)> {
    let idx: Vec<usize> = (0..series.len()).filter(|&i| series[i].is_finite()).collect();
    let n = idx.len();
    if n < 30 {
        return Err(Error::InsufficientData(format!(
            "gaussianize needs at least 30 finite values, got {n}"
        )));
    }
    let mut order = idx;
    // stable sort keeps input order among ties
    order.sort_by(|&a, &b| series[a].total_cmp(&series[b]));
    let nf = n as f64;
    let mut z = vec![f64::NAN; series.len()];
    let mut values = Vec::new();
    let mut scores = Vec::new();
    let mut k = 0;
    while k < n {
        let v = series[order[k]];
        let mut sum = 0.0;
        let mut j = k;
        while j < n && series[order[j]] == v {
            let q = norm_ppf((j as f64 + 0.5) / nf);
            z[order[j]] = q;
            sum += q;
            j += 1;
        }
        values.push(v);
        scores.push(sum / (j - k) as f64);
        k = j;
    }
    if values.len() < 2 {
        return Err(Error::Degenerate("gaussianize: all values are identical".into()));
    }
    Ok((z, QuantileMap { values, z: scores }))
}

/// Mean and sample standard deviation of one hour-of-day x season bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub season: Season,
    pub hour: u32,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub bins: Vec<BinStat>,
}

impl BinStats {
    fn lookup(&self) -> BTreeMap<(Season, u32), (f64, f64)> {
        self.bins.iter().map(|b| ((b.season, b.hour), (b.mean, b.std))).collect()
    }

    pub fn get(&self, season: Season, hour: u32) -> Option<&BinStat> {
        self.bins.iter().find(|b| b.season == season && b.hour == hour)
    }
}

fn bin_of(ts: &NaiveDateTime) -> (Season, u32) {
    (Season::of(ts), ts.hour())
}

/// Standardizes each hour-of-day x season bin to mean 0 and sample
/// standard deviation 1.
pub fn standardize(timestamps: &[NaiveDateTime], z: &[f64]) -> Result<(Vec<f64>, BinStats)> {
    if timestamps.len() != z.len() {
        return Err(Error::InvalidInput("standardize: timestamps and values differ in length".into()));
    }
    let mut groups: BTreeMap<(Season, u32), Vec<f64>> = BTreeMap::new();
    for (ts, &v) in timestamps.iter().zip(z) {
        if v.is_finite() {
            groups.entry(bin_of(ts)).or_default().push(v);
        }
    }
    let mut bins = Vec::with_capacity(groups.len());
    for ((season, hour), vals) in groups {
        let n = vals.len();
        let name = format!("{} hour {hour}", season.name());
        if n < 2 {
            return Err(Error::InsufficientData(format!("bin {name} has {n} observation(s)")));
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        if !(std > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::Degenerate(format!("bin {name} has zero variance")));
        }
        bins.push(BinStat {
            season,
            hour,
            mean,
            std,
            n,
        });
    }
    let stats = BinStats { bins };
    let out = apply_bins(&stats, timestamps, z)?;
    Ok((out, stats))
}

fn apply_bins(stats: &BinStats, timestamps: &[NaiveDateTime], z: &[f64]) -> Result<Vec<f64>> {
    let table = stats.lookup();
    timestamps
        .iter()
        .zip(z)
        .map(|(ts, &v)| {
            if v.is_nan() {
                return Ok(f64::NAN);
            }
            let (m, s) = bin(&table, ts)?;
            Ok((v - m) / s)
        })
        .collect()
}

fn bin(table: &BTreeMap<(Season, u32), (f64, f64)>, ts: &NaiveDateTime) -> Result<(f64, f64)> {
    table.get(&bin_of(ts)).copied().ok_or_else(|| {
        Error::InvalidInput(format!(
            "no fitted standardization bin for {} hour {}",
            Season::of(ts).name(),
            ts.hour()
        ))
    })
}

/// One fitted step of N(.).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    Trend(Trend),
    Gaussianize(QuantileMap),
    Standardize(BinStats),
    /// `z = (x - offset) / scale`.
    Affine { offset: f64, scale: f64 },
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Trend(_) => "trend",
            Step::Gaussianize(_) => "gaussianize",
            Step::Standardize(_) => "standardize",
            Step::Affine { .. } => "affine",
        }
    }

    fn forward(&self, timestamps: &[NaiveDateTime], x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Step::Trend(t) => Ok(timestamps.iter().zip(x).map(|(ts, v)| v / t.at(ts.date())).collect()),
            Step::Gaussianize(q) => Ok(x.iter().map(|&v| q.forward(v)).collect()),
            Step::Standardize(b) => apply_bins(b, timestamps, x),
            Step::Affine { offset, scale } => Ok(x.iter().map(|v| (v - offset) / scale).collect()),
        }
    }

    fn inverse(&self, timestamps: &[NaiveDateTime], z: &[f64]) -> Result<Vec<f64>> {
        match self {
            Step::Trend(t) => Ok(timestamps.iter().zip(z).map(|(ts, v)| v * t.at(ts.date())).collect()),
            Step::Gaussianize(q) => Ok(z.iter().map(|&v| q.inverse(v)).collect()),
            Step::Standardize(b) => {
                let table = b.lookup();
                timestamps
                    .iter()
                    .zip(z)
                    .map(|(ts, &v)| {
                        if v.is_nan() {
                            return Ok(f64::NAN);
                        }
                        let (m, s) = bin(&table, ts)?;
                        Ok(v * s + m)
                    })
                    .collect()
            }
            Step::Affine { offset, scale } => Ok(z.iter().map(|v| v * scale + offset).collect()),
        }
    }
}

/// Which steps to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    /// Trend window in days; `None` skips trend removal.
    pub trend_window_days: Option<usize>,
    pub gaussianize: bool,
    pub standardize: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            trend_window_days: Some(DEFAULT_TREND_WINDOW),
            gaussianize: true,
            standardize: true,
        }
    }
}

impl TransformConfig {
    /// Gaussianize and standardize only (used for the exogenous series).
    pub fn without_trend() -> TransformConfig {
        TransformConfig {
            trend_window_days: None,
            ..TransformConfig::default()
        }
    }
}

/// A fitted N(.): steps applied in order, inverted in reverse order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTransform {
    pub version: u32,
    pub steps: Vec<Step>,
}

impl FittedTransform {
    /// Fits the configured steps (trend, then Gaussianize, then standardize)
    /// and returns the transform with the transformed sample.
    pub fn fit(
        timestamps: &[NaiveDateTime],
        series: &[f64],
        config: &TransformConfig,
    ) -> Result<(FittedTransform, Vec<f64>)> {
        if timestamps.len() != series.len() {
            return Err(Error::InvalidInput("transform: timestamps and series differ in length".into()));
        }
        let mut steps = Vec::new();
        let mut x = series.to_vec();
        if let Some(w) = config.trend_window_days {
            let (trend, detrended) = extract_trend(timestamps, &x, w)?;
            steps.push(Step::Trend(trend));
            x = detrended;
        }
        if config.gaussianize {
            let map = QuantileMap::fit(&x)?;
            // the stored map (ties share a score) defines the fitted transform
            x = x.iter().map(|&v| map.forward(v)).collect();
            steps.push(Step::Gaussianize(map));
        }
        if config.standardize {
            let (z, stats) = standardize(timestamps, &x)?;
            steps.push(Step::Standardize(stats));
            x = z;
        }
        Ok((
            FittedTransform {
                version: TRANSFORM_VERSION,
                steps,
            },
            x,
        ))
    }

    /// `z = (x - offset) / scale`, a transform without any fitted state.
    pub fn affine(offset: f64, scale: f64) -> Result<FittedTransform> {
        if !(scale > 0.0) || !offset.is_finite() || !scale.is_finite() {
            return Err(Error::InvalidInput("affine transform needs a finite positive scale".into()));
        }
        Ok(FittedTransform {
            version: TRANSFORM_VERSION,
            steps: vec![Step::Affine { offset, scale }],
        })
    }

    pub fn step_order(&self) -> Vec<&'static str> {
        self.steps.iter().map(Step::name).collect()
    }

    pub fn trend(&self) -> Option<&Trend> {
        self.steps.iter().find_map(|s| match s {
            Step::Trend(t) => Some(t),
            _ => None,
        })
    }

    pub fn quantile_map(&self) -> Option<&QuantileMap> {
        self.steps.iter().find_map(|s| match s {
            Step::Gaussianize(q) => Some(q),
            _ => None,
        })
    }

    pub fn bin_stats(&self) -> Option<&BinStats> {
        self.steps.iter().find_map(|s| match s {
            Step::Standardize(b) => Some(b),
            _ => None,
        })
    }

    fn check(&self) -> Result<()> {
        if self.version != TRANSFORM_VERSION {
            return Err(Error::InvalidInput(format!(
                "transform document version {} is not supported",
                self.version
            )));
        }
        if self.steps.is_empty() {
            return Err(Error::NotFitted("transform has no fitted steps".into()));
        }
        Ok(())
    }

    pub fn apply(&self, timestamps: &[NaiveDateTime], series: &[f64]) -> Result<Vec<f64>> {
        self.check()?;
        if timestamps.len() != series.len() {
            return Err(Error::InvalidInput("apply: timestamps and series differ in length".into()));
        }
        let mut x = series.to_vec();
        for step in &self.steps {
            x = step.forward(timestamps, &x)?;
        }
        Ok(x)
    }

    pub fn invert(&self, timestamps: &[NaiveDateTime], z: &[f64]) -> Result<Vec<f64>> {
        self.check()?;
        if timestamps.len() != z.len() {
            return Err(Error::InvalidInput("invert: timestamps and values differ in length".into()));
        }
        let mut x = z.to_vec();
        for step in self.steps.iter().rev() {
            x = step.inverse(timestamps, &x)?;
        }
        Ok(x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<FittedTransform> {
        let t: FittedTransform = serde_json::from_str(text)?;
        t.check()?;
        Ok(t)
    }
}

/// Masks whole days whose daily-average real-time price has |z| above the
/// threshold (z over the days of the panel). Returns the masked panel and the
/// removed days.
pub fn remove_outlier_days(panel: &HourlyPanel, z_threshold: f64) -> Result<(HourlyPanel, Vec<NaiveDate>)> {
    if !(z_threshold > 0.0) {
        return Err(Error::InvalidInput("outlier threshold must be positive".into()));
    }
    let rt = panel.series(Column::RtPrice).expect("required column");
    let mut sums: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for (ts, &v) in panel.timestamps().iter().zip(rt) {
        if v.is_finite() {
            let e = sums.entry(ts.date()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let days: Vec<(NaiveDate, f64)> = sums.into_iter().map(|(d, (s, c))| (d, s / c as f64)).collect();
    if days.len() < 2 {
        return Ok((panel.clone(), Vec::new()));
    }
    let n = days.len() as f64;
    let mean = days.iter().map(|d| d.1).sum::<f64>() / n;
    let std = (days.iter().map(|d| (d.1 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(std > 1e-12 * mean.abs().max(1.0)) {
        return Ok((panel.clone(), Vec::new()));
    }
    let removed: Vec<NaiveDate> = days
        .iter()
        .filter(|(_, avg)| ((avg - mean) / std).abs() > z_threshold)
        .map(|(d, _)| *d)
        .collect();
    if removed.len() == days.len() {
        return Err(Error::InvalidInput(format!(
            "threshold {z_threshold} would remove every day"
        )));
    }
    Ok((panel.mask_days(&removed), removed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelColumns;
    use crate::stats::{adf_test, breusch_pagan_hourly, jarque_bera, AdfOptions};
    use chrono::{Datelike, Duration};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    fn hours(start: &str, n: usize) -> Vec<NaiveDateTime> {
        let t0 = NaiveDateTime::parse_from_str(start, "%Y-%m-%dT%H:%M").unwrap();
        (0..n).map(|i| t0 + Duration::hours(i as i64)).collect()
    }

    fn panel_with_rt(rt: Vec<f64>) -> HourlyPanel {
        let n = rt.len();
        HourlyPanel::new(
            hours("2022-01-01T00:00", n),
            PanelColumns {
                rt_price: rt,
                da_price: vec![30.0; n],
                system_mw: vec![40_000.0; n],
                temp_f: vec![60.0; n],
                miner_mw: vec![500.0; n],
                btc_usd: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_series_has_flat_trend() {
        let ts = hours("2022-01-01T00:00", 24 * 10);
        let (trend, d) = extract_trend(&ts, &vec![7.5; ts.len()], 3).unwrap();
        assert!(trend.values.iter().all(|&v| v == 7.5));
        assert!(d.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn growing_peaks_detrend_to_one() {
        let ts = hours("2022-01-01T00:00", 72);
        let peaks = [100.0, 110.0, 121.0];
        let x: Vec<f64> = (0..72)
            .map(|i| if i % 24 == 15 { peaks[i / 24] } else { 0.5 * peaks[i / 24] })
            .collect();
        let (_, d) = extract_trend(&ts, &x, 1).unwrap();
        for day in 0..3 {
            let max = d[day * 24..(day + 1) * 24].iter().cloned().fold(0.0, f64::max);
            assert!((max - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_hour_is_allowed() {
        let ts = hours("2022-01-01T00:00", 24 * 8);
        let mut x = vec![50.0; ts.len()];
        x[30] = 0.0;
        let (_, d) = extract_trend(&ts, &x, 7).unwrap();
        assert_eq!(d[30], 0.0);
    }

    #[test]
    fn nonpositive_trend_is_an_error() {
        let ts = hours("2022-01-01T00:00", 48);
        assert!(extract_trend(&ts, &vec![0.0; 48], 1).is_err());
    }

    #[test]
    fn median_maps_to_zero() {
        let x: Vec<f64> = (0..101).map(|i| (i as f64).powi(3)).collect();
        let (z, _) = gaussianize(&x).unwrap();
        assert!(z[50].abs() < 1e-12);
    }

    #[test]
    fn gaussianized_exponential_passes_jarque_bera() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x: Vec<f64> = (0..5000).map(|_| Exp1.sample(&mut rng)).collect();
        let (z, _) = gaussianize(&x).unwrap();
        assert!(jarque_bera(&z).unwrap().p_value.unwrap() > 0.05);
    }

    #[test]
    fn normal_order_statistics_are_nearly_fixed() {
        let n = 10_000;
        let x: Vec<f64> = (1..=n).map(|k| norm_ppf((k as f64 - 0.5) / n as f64) * 1.0001).collect();
        let (z, _) = gaussianize(&x).unwrap();
        let dev = x.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 0.1);
    }

    #[test]
    fn identical_values_are_degenerate() {
        assert!(matches!(gaussianize(&[2.0; 50]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ties_are_ranked_in_input_order() {
        let mut x: Vec<f64> = (0..40).map(f64::from).collect();
        x[5] = 10.0;
        let (z, map) = gaussianize(&x).unwrap();
        assert!(z[5] < z[10]);
        assert_eq!(map.values.len(), 39);
        assert!(map.values.windows(2).all(|w| w[0] < w[1]));
        assert!((map.forward(10.0) - 0.5 * (z[5] + z[10])).abs() < 1e-15);
    }

    #[test]
    fn standardized_bins_have_unit_moments() {
        let ts = hours("2022-05-20T00:00", 24 * 30);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = ts
            .iter()
            .map(|t| {
                let e: f64 = StandardNormal.sample(&mut rng);
                3.0 * t.hour() as f64 + (1.0 + t.hour() as f64) * e
            })
            .collect();
        let (z, stats) = standardize(&ts, &x).unwrap();
        assert_eq!(stats.bins.len(), 48);
        let mut groups: BTreeMap<(Season, u32), Vec<f64>> = BTreeMap::new();
        for (t, v) in ts.iter().zip(&z) {
            groups.entry(bin_of(t)).or_default().push(*v);
        }
        for vals in groups.values() {
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let s = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(m.abs() < 1e-12);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diurnal_sinusoid_is_removed_exactly() {
        // a per-hour constant pattern contributes nothing after standardizing
        let ts = hours("2022-01-01T00:00", 24 * 40);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise: Vec<f64> = ts.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        let with_wave: Vec<f64> = ts
            .iter()
            .zip(&noise)
            .map(|(t, e)| 5.0 * (2.0 * std::f64::consts::PI * t.hour() as f64 / 24.0).sin() + e)
            .collect();
        let (a, _) = standardize(&ts, &noise).unwrap();
        let (b, _) = standardize(&ts, &with_wave).unwrap();
        let dev = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-9);
    }

    #[test]
    fn constant_bin_is_an_error_naming_the_bin() {
        let ts = hours("2022-01-01T00:00", 24 * 5);
        let x: Vec<f64> = ts.iter().enumerate().map(|(i, t)| if t.hour() == 3 { 1.0 } else { i as f64 }).collect();
        let err = standardize(&ts, &x).unwrap_err().to_string();
        assert!(err.contains("non_summer hour 3"), "{err}");
    }

    fn skewed_load(n_days: usize, seed: u64) -> (Vec<NaiveDateTime>, Vec<f64>) {
        let ts = hours("2022-01-03T00:00", 24 * n_days);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = ts
            .iter()
            .map(|t| {
                let e: f64 = Exp1.sample(&mut rng);
                (300.0 + 100.0 * e) * (1.0 + 0.002 * (t.date().ordinal() as f64))
            })
            .collect();
        (ts, x)
    }

    #[test]
    fn round_trip_is_exact_in_sample() {
        let (ts, x) = skewed_load(214, 9);
        assert_eq!(ts.len(), 5136);
        let (tr, z) = FittedTransform::fit(&ts, &x, &TransformConfig::default()).unwrap();
        assert_eq!(tr.step_order(), vec!["trend", "gaussianize", "standardize"]);
        assert_eq!(tr.apply(&ts, &x).unwrap(), z);
        let back = tr.invert(&ts, &z).unwrap();
        let rel = x.iter().zip(&back).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max);
        assert!(rel < 1e-9, "{rel}");
    }

    #[test]
    fn zero_inverts_to_the_median() {
        let x: Vec<f64> = (0..51).map(|i| 2.0f64.powf(i as f64 / 10.0)).collect();
        let map = QuantileMap::fit(&x).unwrap();
        assert!((map.inverse(0.0) - x[25]).abs() < 1e-12);
    }

    #[test]
    fn inversion_clamps_and_is_monotone() {
        let (ts, x) = skewed_load(30, 2);
        let (_, mapped) = detrended(&ts, &x);
        let map = QuantileMap::fit(&mapped).unwrap();
        let lo = mapped.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = mapped.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(map.inverse(-50.0), lo);
        assert_eq!(map.inverse(50.0), hi);
        let grid: Vec<f64> = (-400..=400).map(|i| i as f64 / 100.0).collect();
        let inv: Vec<f64> = grid.iter().map(|&z| map.inverse(z)).collect();
        assert!(inv.windows(2).all(|w| w[0] <= w[1]));
    }

    fn detrended(ts: &[NaiveDateTime], x: &[f64]) -> (Trend, Vec<f64>) {
        extract_trend(ts, x, 7).unwrap()
    }

    #[test]
    fn out_of_sample_forward_interpolates() {
        let x: Vec<f64> = (0..40).map(f64::from).collect();
        let map = QuantileMap::fit(&x).unwrap();
        let mid = map.forward(10.5);
        assert!((mid - 0.5 * (map.forward(10.0) + map.forward(11.0))).abs() < 1e-15);
        assert_eq!(map.forward(-5.0), map.z[0]);
    }

    #[test]
    fn json_round_trip() {
        let (ts, x) = skewed_load(20, 3);
        let (tr, _) = FittedTransform::fit(&ts, &x, &TransformConfig::default()).unwrap();
        let back = FittedTransform::from_json(&tr.to_json().unwrap()).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn empty_transform_cannot_invert() {
        let t = FittedTransform {
            version: TRANSFORM_VERSION,
            steps: vec![],
        };
        assert!(matches!(t.invert(&[], &[]), Err(Error::NotFitted(_))));
    }

    #[test]
    fn transformed_iid_bins_pass_the_battery() {
        let (ts, x) = skewed_load(120, 6);
        let (_, z) = FittedTransform::fit(&ts, &x, &TransformConfig::default()).unwrap();
        assert!(adf_test(&z, &AdfOptions::default()).unwrap().p_value.unwrap() < 0.05);
        assert!(breusch_pagan_hourly(&z, &ts).unwrap().p_value.unwrap() > 0.05);
    }

    #[test]
    fn outlier_day_examples() {
        let flat = panel_with_rt(vec![25.0; 24 * 30]);
        let (_, removed) = remove_outlier_days(&flat, 3.0).unwrap();
        assert!(removed.is_empty());

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rt: Vec<f64> = (0..24 * 30)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                30.0 + e
            })
            .collect();
        // daily averages have sd 1/sqrt(24); lift day 12 by ten of those
        for v in &mut rt[12 * 24..13 * 24] {
            *v += 10.0 / 24f64.sqrt();
        }
        let panel = panel_with_rt(rt);
        let (masked, removed) = remove_outlier_days(&panel, 3.0).unwrap();
        assert_eq!(removed, vec![NaiveDate::from_ymd_opt(2022, 1, 13).unwrap()]);
        assert_eq!(masked.gaps().len(), 24);
        assert!(remove_outlier_days(&panel, 0.0001).is_err());
    }
}
