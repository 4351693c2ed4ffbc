//! Hourly panel data model, calendar indicators and CSV ingestion.
//!
//! A panel is a gap-aware hourly grid: timestamps always advance by exactly
//! one hour and hours with missing observations are carried as `NaN` and
//! listed in the gap report rather than being dropped.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamp layout of the canonical CSV.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:00";

/// Canonical series of the hourly panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    RtPrice,
    DaPrice,
    SystemMw,
    TempF,
    MinerMw,
    BtcUsd,
}

impl Column {
    pub const ALL: [Column; 6] = [
        Column::RtPrice,
        Column::DaPrice,
        Column::SystemMw,
        Column::TempF,
        Column::MinerMw,
        Column::BtcUsd,
    ];

    /// The five columns every panel must carry.
    pub const REQUIRED: [Column; 5] = [
        Column::RtPrice,
        Column::DaPrice,
        Column::SystemMw,
        Column::TempF,
        Column::MinerMw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::RtPrice => "rt_price",
            Column::DaPrice => "da_price",
            Column::SystemMw => "system_mw",
            Column::TempF => "temp_f",
            Column::MinerMw => "miner_mw",
            Column::BtcUsd => "btc_usd",
        }
    }

    pub fn from_name(name: &str) -> Option<Column> {
        Column::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Read access to timestamped hourly series.
pub trait SeriesSource {
    fn timestamps(&self) -> &[NaiveDateTime];
    fn series(&self, column: Column) -> Option<&[f64]>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Summer,
    NonSummer,
}

impl Season {
    /// Summer covers the 4CP months, June through September.
    pub fn of_month(month: u32) -> Season {
        if (6..=9).contains(&month) {
            Season::Summer
        } else {
            Season::NonSummer
        }
    }

    pub fn of(ts: &NaiveDateTime) -> Season {
        Season::of_month(ts.month())
    }

    pub fn contains(self, ts: &NaiveDateTime) -> bool {
        Season::of(ts) == self
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Summer => "summer",
            Season::NonSummer => "non_summer",
        }
    }
}

impl std::str::FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Season> {
        match s {
            "summer" => Ok(Season::Summer),
            "non_summer" | "nonsummer" | "non-summer" => Ok(Season::NonSummer),
            other => Err(Error::InvalidInput(format!("unknown season {other:?}"))),
        }
    }
}

/// Half-open hour-of-day range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourWindow {
    pub start: u32,
    pub end: u32,
}

impl HourWindow {
    pub fn new(start: u32, end: u32) -> Result<HourWindow> {
        if start >= end || end > 24 {
            return Err(Error::InvalidInput(format!(
                "hour window [{start}, {end}) must satisfy start < end <= 24"
            )));
        }
        Ok(HourWindow { start, end })
    }

    pub fn contains(&self, hour: u32) -> bool {
        hour >= self.start && hour < self.end
    }

    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    pub fn is_subset_of(&self, other: &HourWindow) -> bool {
        self.start >= other.start && self.end <= other.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    Day,
    Peak,
    Fourcp,
}

/// Season plus the hour windows behind the day, peak and 4CP indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonMask {
    pub season: Season,
    pub day_window: HourWindow,
    pub peak_window: HourWindow,
    pub fourcp_window: HourWindow,
}

impl SeasonMask {
    pub fn new(
        season: Season,
        day_window: HourWindow,
        peak_window: HourWindow,
        fourcp_window: HourWindow,
    ) -> Result<SeasonMask> {
        if !peak_window.is_subset_of(&day_window) {
            return Err(Error::InvalidInput(format!(
                "peak window {peak_window:?} must lie inside day window {day_window:?}"
            )));
        }
        Ok(SeasonMask {
            season,
            day_window,
            peak_window,
            fourcp_window,
        })
    }

    /// 10:00-20:00 day window, 15:00-19:00 peak window, 16:00-18:00 4CP window.
    pub fn default_for(season: Season) -> SeasonMask {
        SeasonMask {
            season,
            day_window: HourWindow { start: 10, end: 20 },
            peak_window: HourWindow { start: 15, end: 19 },
            fourcp_window: HourWindow { start: 16, end: 18 },
        }
    }

    pub fn window(&self, kind: IndicatorKind) -> HourWindow {
        match kind {
            IndicatorKind::Day => self.day_window,
            IndicatorKind::Peak => self.peak_window,
            IndicatorKind::Fourcp => self.fourcp_window,
        }
    }

    pub fn is_active(&self, ts: &NaiveDateTime, kind: IndicatorKind) -> bool {
        self.season.contains(ts) && self.window(kind).contains(ts.hour())
    }
}

/// Binary indicator series (0.0 / 1.0) for the selected window.
pub fn indicator(source: &impl SeriesSource, mask: &SeasonMask, which: IndicatorKind) -> Vec<f64> {
    indicator_for(source.timestamps(), mask, which)
}

pub fn indicator_for(timestamps: &[NaiveDateTime], mask: &SeasonMask, which: IndicatorKind) -> Vec<f64> {
    timestamps
        .iter()
        .map(|ts| if mask.is_active(ts, which) { 1.0 } else { 0.0 })
        .collect()
}

/// Series values for a panel under construction.
#[derive(Debug, Clone, Default)]
pub struct PanelColumns {
    pub rt_price: Vec<f64>,
    pub da_price: Vec<f64>,
    pub system_mw: Vec<f64>,
    pub temp_f: Vec<f64>,
    pub miner_mw: Vec<f64>,
    pub btc_usd: Option<Vec<f64>>,
}

/// Aligned hourly panel. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyPanel {
    timestamps: Vec<NaiveDateTime>,
    rt_price: Vec<f64>,
    da_price: Vec<f64>,
    system_mw: Vec<f64>,
    temp_f: Vec<f64>,
    miner_mw: Vec<f64>,
    btc_usd: Option<Vec<f64>>,
    gaps: Vec<NaiveDateTime>,
}

/// Count and location of hours with at least one missing required value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub count: usize,
    pub locations: Vec<String>,
}

impl HourlyPanel {
    pub fn new(timestamps: Vec<NaiveDateTime>, cols: PanelColumns) -> Result<HourlyPanel> {
        if timestamps.is_empty() {
            return Err(Error::InsufficientData("panel has no hours".into()));
        }
        for w in timestamps.windows(2) {
            if w[1] - w[0] != Duration::hours(1) {
                return Err(Error::InvalidInput(format!(
                    "timestamps must advance by one hour: {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(ts) = timestamps.iter().find(|t| t.minute() != 0 || t.second() != 0) {
            return Err(Error::InvalidInput(format!("timestamp {ts} is not on the hour")));
        }
        let n = timestamps.len();
        let named = [
            (Column::RtPrice, &cols.rt_price),
            (Column::DaPrice, &cols.da_price),
            (Column::SystemMw, &cols.system_mw),
            (Column::TempF, &cols.temp_f),
            (Column::MinerMw, &cols.miner_mw),
        ];
        for (c, v) in named {
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "column {c} has {} values for {n} hours",
                    v.len()
                )));
            }
            if let Some(i) = v.iter().position(|x| x.is_infinite()) {
                return Err(Error::InvalidInput(format!(
                    "column {c} is not finite at {}",
                    timestamps[i]
                )));
            }
        }
        if let Some(b) = &cols.btc_usd {
            if b.len() != n {
                return Err(Error::InvalidInput(format!("column btc_usd has {} values for {n} hours", b.len())));
            }
        }
        if let Some(i) = cols.miner_mw.iter().position(|&x| x < 0.0) {
            return Err(Error::InvalidInput(format!(
                "miner_mw is negative at {}",
                timestamps[i]
            )));
        }
        let gaps = (0..n)
            .filter(|&i| named.iter().any(|(_, v)| v[i].is_nan()))
            .map(|i| timestamps[i])
            .collect();
        Ok(HourlyPanel {
            timestamps,
            rt_price: cols.rt_price,
            da_price: cols.da_price,
            system_mw: cols.system_mw,
            temp_f: cols.temp_f,
            miner_mw: cols.miner_mw,
            btc_usd: cols.btc_usd,
            gaps,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn gaps(&self) -> &[NaiveDateTime] {
        &self.gaps
    }

    pub fn gap_report(&self) -> GapReport {
        GapReport {
            count: self.gaps.len(),
            locations: self.gaps.iter().map(|t| t.format(TIMESTAMP_FORMAT).to_string()).collect(),
        }
    }

    pub fn has_btc(&self) -> bool {
        self.btc_usd.is_some()
    }

    /// Distinct calendar days in order of appearance.
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut days: Vec<NaiveDate> = Vec::new();
        for ts in &self.timestamps {
            let d = ts.date();
            if days.last() != Some(&d) {
                days.push(d);
            }
        }
        days
    }

    /// True where every required column is observed.
    pub fn complete_rows(&self) -> Vec<bool> {
        (0..self.len())
            .map(|i| {
                Column::REQUIRED
                    .iter()
                    .all(|&c| self.series(c).map_or(false, |v| v[i].is_finite()))
            })
            .collect()
    }

    pub fn columns(&self) -> PanelColumns {
        PanelColumns {
            rt_price: self.rt_price.clone(),
            da_price: self.da_price.clone(),
            system_mw: self.system_mw.clone(),
            temp_f: self.temp_f.clone(),
            miner_mw: self.miner_mw.clone(),
            btc_usd: self.btc_usd.clone(),
        }
    }

    /// Copy of the panel with one column replaced.
    pub fn with_column(&self, column: Column, values: Vec<f64>) -> Result<HourlyPanel> {
        let mut cols = self.columns();
        match column {
            Column::RtPrice => cols.rt_price = values,
            Column::DaPrice => cols.da_price = values,
            Column::SystemMw => cols.system_mw = values,
            Column::TempF => cols.temp_f = values,
            Column::MinerMw => cols.miner_mw = values,
            Column::BtcUsd => cols.btc_usd = Some(values),
        }
        HourlyPanel::new(self.timestamps.clone(), cols)
    }

    /// Copy of the panel with every hour of the given days marked missing.
    pub fn mask_days(&self, days: &[NaiveDate]) -> HourlyPanel {
        let set: std::collections::HashSet<NaiveDate> = days.iter().copied().collect();
        self.mask_where(|ts| set.contains(&ts.date()))
    }

    /// Copy of the panel with hours outside `season` marked missing, trimmed
    /// to the first and last in-season hour.
    pub fn restrict_to_season(&self, season: Season) -> Result<HourlyPanel> {
        let first = self.timestamps.iter().position(|t| season.contains(t));
        let last = self.timestamps.iter().rposition(|t| season.contains(t));
        let (Some(first), Some(last)) = (first, last) else {
            return Err(Error::InsufficientData(format!(
                "panel has no {} hours",
                season.name()
            )));
        };
        self.slice(first, last + 1)
            .map(|p| p.mask_where(|ts| !season.contains(ts)))
    }

    fn mask_where(&self, pred: impl Fn(&NaiveDateTime) -> bool) -> HourlyPanel {
        let mut cols = self.columns();
        for (i, ts) in self.timestamps.iter().enumerate() {
            if pred(ts) {
                cols.rt_price[i] = f64::NAN;
                cols.da_price[i] = f64::NAN;
                cols.system_mw[i] = f64::NAN;
                cols.temp_f[i] = f64::NAN;
                cols.miner_mw[i] = f64::NAN;
                if let Some(b) = cols.btc_usd.as_mut() {
                    b[i] = f64::NAN;
                }
            }
        }
        HourlyPanel::new(self.timestamps.clone(), cols).expect("masking preserves invariants")
    }

    /// Contiguous sub-panel over rows `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Result<HourlyPanel> {
        if from >= to || to > self.len() {
            return Err(Error::InvalidInput(format!("bad slice [{from}, {to}) of {}", self.len())));
        }
        let cut = |v: &Vec<f64>| v[from..to].to_vec();
        HourlyPanel::new(
            self.timestamps[from..to].to_vec(),
            PanelColumns {
                rt_price: cut(&self.rt_price),
                da_price: cut(&self.da_price),
                system_mw: cut(&self.system_mw),
                temp_f: cut(&self.temp_f),
                miner_mw: cut(&self.miner_mw),
                btc_usd: self.btc_usd.as_ref().map(cut),
            },
        )
    }

    /// Writes the canonical CSV. Floats use the shortest representation that
    /// parses back to the same bits; missing values are empty fields.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = vec!["timestamp"];
        header.extend(Column::REQUIRED.iter().map(|c| c.name()));
        if self.btc_usd.is_some() {
            header.push(Column::BtcUsd.name());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.timestamps[i].format(TIMESTAMP_FORMAT).to_string()];
            for c in Column::REQUIRED {
                rec.push(format_value(self.series(c).expect("required")[i]));
            }
            if let Some(b) = &self.btc_usd {
                rec.push(format_value(b[i]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a canonical CSV.
    pub fn read_csv<R: Read>(reader: R) -> Result<HourlyPanel> {
        let table = read_table(reader, &SchemaMap::canonical())?;
        assemble(vec![table])
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<HourlyPanel> {
        load_panel(&[path.as_ref()], &SchemaMap::canonical())
    }
}

impl SeriesSource for HourlyPanel {
    fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    fn series(&self, column: Column) -> Option<&[f64]> {
        match column {
            Column::RtPrice => Some(&self.rt_price),
            Column::DaPrice => Some(&self.da_price),
            Column::SystemMw => Some(&self.system_mw),
            Column::TempF => Some(&self.temp_f),
            Column::MinerMw => Some(&self.miner_mw),
            Column::BtcUsd => self.btc_usd.as_deref(),
        }
    }
}

/// Timestamped columns without the physical-unit invariants of
/// [`HourlyPanel`]; used for transformed (standardized) series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesFrame {
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: BTreeMap<Column, Vec<f64>>,
}

impl SeriesFrame {
    pub fn new(timestamps: Vec<NaiveDateTime>) -> SeriesFrame {
        SeriesFrame {
            timestamps,
            columns: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, column: Column, values: Vec<f64>) -> Result<()> {
        if values.len() != self.timestamps.len() {
            return Err(Error::InvalidInput(format!(
                "column {column} has {} values for {} timestamps",
                values.len(),
                self.timestamps.len()
            )));
        }
        self.columns.insert(column, values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.keys().map(|c| c.name().to_string()));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.timestamps[i].format(TIMESTAMP_FORMAT).to_string()];
            rec.extend(self.columns.values().map(|v| format_value(v[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl SeriesSource for SeriesFrame {
    fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    fn series(&self, column: Column) -> Option<&[f64]> {
        self.columns.get(&column).map(Vec::as_slice)
    }
}

pub(crate) fn format_value(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// Parses the timestamp layouts accepted on input. Only whole hours are
/// accepted.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%d %H:%M:%S"];
    let s = s.trim();
    let ts = FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())?;
    (ts.minute() == 0 && ts.second() == 0).then_some(ts)
}

/// Mapping from canonical column names to the source file's column names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaMap {
    pub timestamp: String,
    pub columns: BTreeMap<Column, String>,
    /// Optional column flagging the repeated hour of a DST fall-back.
    pub dst_flag: Option<String>,
}

impl SchemaMap {
    pub fn canonical() -> SchemaMap {
        SchemaMap {
            timestamp: "timestamp".into(),
            columns: Column::ALL.iter().map(|&c| (c, c.name().to_string())).collect(),
            dst_flag: None,
        }
    }

    /// Parses a key-value mapping file (`canonical_name = "source column"`).
    /// Unmapped canonical columns keep their canonical name.
    pub fn parse(text: &str) -> Result<SchemaMap> {
        let table: BTreeMap<String, String> = toml::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("schema mapping: {e}")))?;
        let mut schema = SchemaMap::canonical();
        for (key, value) in table {
            match key.as_str() {
                "timestamp" => schema.timestamp = value,
                "dst_flag" => schema.dst_flag = Some(value),
                other => {
                    let c = Column::from_name(other)
                        .ok_or_else(|| Error::InvalidInput(format!("unknown schema key {other:?}")))?;
                    schema.columns.insert(c, value);
                }
            }
        }
        Ok(schema)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<SchemaMap> {
        SchemaMap::parse(&std::fs::read_to_string(path)?)
    }
}

struct Table {
    columns: Vec<Column>,
    rows: HashMap<NaiveDateTime, Vec<f64>>,
    first: NaiveDateTime,
    last: NaiveDateTime,
}

fn read_table<R: Read>(reader: R, schema: &SchemaMap) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let ts_idx = find(&schema.timestamp).ok_or_else(|| {
        Error::InvalidInput(format!("missing timestamp column {:?}", schema.timestamp))
    })?;
    let dst_idx = schema.dst_flag.as_deref().and_then(find);
    let mut columns = Vec::new();
    let mut idx = Vec::new();
    for (&c, source) in &schema.columns {
        if let Some(i) = find(source) {
            columns.push(c);
            idx.push(i);
        }
    }
    let mut rows: HashMap<NaiveDateTime, Vec<f64>> = HashMap::new();
    let mut first: Option<NaiveDateTime> = None;
    let mut last: Option<NaiveDateTime> = None;
    for (row, record) in rdr.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        let raw_ts = record.get(ts_idx).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| Error::Parse {
            row,
            msg: format!("unparseable timestamp {raw_ts:?}"),
        })?;
        let repeated_hour = dst_idx
            .and_then(|i| record.get(i))
            .map(|f| matches!(f.to_ascii_lowercase().as_str(), "y" | "yes" | "true" | "1"))
            .unwrap_or(false);
        if repeated_hour {
            continue;
        }
        let mut values = Vec::with_capacity(idx.len());
        for (&i, &c) in idx.iter().zip(&columns) {
            let field = record.get(i).unwrap_or("");
            let v = if field.is_empty() {
                f64::NAN
            } else {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    msg: format!("column {c}: cannot parse {field:?} as a number"),
                })?
            };
            values.push(v);
        }
        if rows.insert(ts, values).is_some() {
            return Err(Error::DuplicateTimestamp(ts.format(TIMESTAMP_FORMAT).to_string()));
        }
        first = Some(first.map_or(ts, |f| f.min(ts)));
        last = Some(last.map_or(ts, |l| l.max(ts)));
    }
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::InsufficientData("input file has no rows".into()));
    };
    Ok(Table {
        columns,
        rows,
        first,
        last,
    })
}

fn assemble(tables: Vec<Table>) -> Result<HourlyPanel> {
    let mut owner: BTreeMap<Column, usize> = BTreeMap::new();
    for (t, table) in tables.iter().enumerate() {
        for &c in &table.columns {
            if let Some(prev) = owner.insert(c, t) {
                return Err(Error::InvalidInput(format!(
                    "column {c} is provided by input files {prev} and {t}"
                )));
            }
        }
    }
    for c in Column::REQUIRED {
        if !owner.contains_key(&c) {
            return Err(Error::InvalidInput(format!("no input file provides column {c}")));
        }
    }
    let start = tables.iter().map(|t| t.first).max().expect("nonempty");
    let end = tables.iter().map(|t| t.last).min().expect("nonempty");
    if start > end {
        return Err(Error::EmptyIntersection);
    }
    let n = ((end - start).num_hours() + 1) as usize;
    let timestamps: Vec<NaiveDateTime> = (0..n).map(|i| start + Duration::hours(i as i64)).collect();
    let mut values: BTreeMap<Column, Vec<f64>> = BTreeMap::new();
    for (&c, &t) in &owner {
        let table = &tables[t];
        let k = table.columns.iter().position(|&x| x == c).expect("owned column");
        let series = timestamps
            .iter()
            .map(|ts| table.rows.get(ts).map_or(f64::NAN, |r| r[k]))
            .collect();
        values.insert(c, series);
    }
    let mut take = |c: Column| values.remove(&c).expect("required column present");
    let cols = PanelColumns {
        rt_price: take(Column::RtPrice),
        da_price: take(Column::DaPrice),
        system_mw: take(Column::SystemMw),
        temp_f: take(Column::TempF),
        miner_mw: take(Column::MinerMw),
        btc_usd: values.remove(&Column::BtcUsd),
    };
    HourlyPanel::new(timestamps, cols)
}

/// Loads and aligns one or more CSV files into a panel covering the
/// intersection of their hour ranges. Hours absent from a file inside that
/// range become gaps.
pub fn load_panel<P: AsRef<Path>>(paths: &[P], schema: &SchemaMap) -> Result<HourlyPanel> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("no input files".into()));
    }
    let mut tables = Vec::with_capacity(paths.len());
    for p in paths {
        let file = std::fs::File::open(p.as_ref())?;
        tables.push(read_table(std::io::BufReader::new(file), schema)?);
    }
    assemble(tables)
}

/// Same as [`load_panel`] over in-memory readers.
pub fn load_panel_from_readers<R: Read>(readers: Vec<R>, schema: &SchemaMap) -> Result<HourlyPanel> {
    let tables = readers
        .into_iter()
        .map(|r| read_table(r, schema))
        .collect::<Result<Vec<_>>>()?;
    if tables.is_empty() {
        return Err(Error::InvalidInput("no input files".into()));
    }
    assemble(tables)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SplitMode {
    /// The first share of days trains, the rest tests.
    Chronological,
    /// Days are assigned by a seeded shuffle; each part keeps the full hour
    /// grid with the other part's days marked missing.
    Shuffled { seed: u64 },
}

/// Splits a panel at whole-day boundaries.
pub fn split_train_test(
    panel: &HourlyPanel,
    fraction: f64,
    mode: SplitMode,
) -> Result<(HourlyPanel, HourlyPanel)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {fraction} must lie strictly between 0 and 1"
        )));
    }
    let days = panel.days();
    let n_train = (fraction * days.len() as f64).round() as usize;
    if n_train == 0 || n_train >= days.len() {
        return Err(Error::InvalidInput(format!(
            "fraction {fraction} of {} days leaves an empty part",
            days.len()
        )));
    }
    match mode {
        SplitMode::Chronological => {
            let boundary = days[n_train];
            let cut = panel
                .timestamps
                .iter()
                .position(|t| t.date() >= boundary)
                .expect("boundary day present");
            Ok((panel.slice(0, cut)?, panel.slice(cut, panel.len())?))
        }
        SplitMode::Shuffled { seed } => {
            let mut order = days.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (train_days, test_days) = order.split_at(n_train);
            Ok((panel.mask_days(test_days), panel.mask_days(train_days)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn flat_panel(start: &str, hours: usize) -> HourlyPanel {
        let t0 = ts(start);
        let timestamps: Vec<_> = (0..hours).map(|i| t0 + Duration::hours(i as i64)).collect();
        let v = |base: f64| (0..hours).map(|i| base + (i % 24) as f64).collect::<Vec<_>>();
        HourlyPanel::new(
            timestamps,
            PanelColumns {
                rt_price: v(30.0),
                da_price: v(35.0),
                system_mw: v(40000.0),
                temp_f: v(70.0),
                miner_mw: v(300.0),
                btc_usd: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn indicator_examples() {
        let mask = SeasonMask::default_for(Season::Summer);
        assert!(mask.is_active(&ts("2022-07-15T16:00"), IndicatorKind::Peak));
        assert!(!mask.is_active(&ts("2022-07-15T02:00"), IndicatorKind::Day));
        assert!(!mask.is_active(&ts("2022-03-15T16:00"), IndicatorKind::Fourcp));
    }

    #[test]
    fn day_window_covers_ten_hours_of_a_day() {
        let panel = flat_panel("2022-03-01T00:00", 24);
        let mask = SeasonMask::default_for(Season::NonSummer);
        let ind = indicator(&panel, &mask, IndicatorKind::Day);
        assert_eq!(ind.iter().sum::<f64>(), 10.0);
        let twice: Vec<f64> = ind
            .iter()
            .zip(indicator(&panel, &mask, IndicatorKind::Day))
            .map(|(a, b)| a * b)
            .collect();
        assert_eq!(twice, ind);
    }

    #[test]
    fn peak_window_must_sit_inside_day_window() {
        let err = SeasonMask::new(
            Season::Summer,
            HourWindow::new(10, 20).unwrap(),
            HourWindow::new(9, 12).unwrap(),
            HourWindow::new(16, 18).unwrap(),
        );
        assert!(err.is_err());
        assert!(HourWindow::new(5, 5).is_err());
    }

    #[test]
    fn seasons_partition_the_year() {
        let summer: Vec<u32> = (1..=12).filter(|&m| Season::of_month(m) == Season::Summer).collect();
        assert_eq!(summer, vec![6, 7, 8, 9]);
    }

    #[test]
    fn split_examples() {
        let panel = flat_panel("2022-01-01T00:00", 100 * 24);
        let (a, b) = split_train_test(&panel, 0.5, SplitMode::Chronological).unwrap();
        assert_eq!((a.days().len(), b.days().len()), (50, 50));
        let (a, b) = split_train_test(&panel, 0.35, SplitMode::Chronological).unwrap();
        assert_eq!((a.days().len(), b.days().len()), (35, 65));
        assert!(split_train_test(&panel, 1.0, SplitMode::Chronological).is_err());
        assert!(split_train_test(&panel, 0.001, SplitMode::Chronological).is_err());
    }

    #[test]
    fn shuffled_split_is_disjoint_exhaustive_and_seeded() {
        let panel = flat_panel("2022-01-01T00:00", 30 * 24);
        let (a, b) = split_train_test(&panel, 0.4, SplitMode::Shuffled { seed: 7 }).unwrap();
        let (a2, _) = split_train_test(&panel, 0.4, SplitMode::Shuffled { seed: 7 }).unwrap();
        let same = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
        assert!(same(a.series(Column::MinerMw).unwrap(), a2.series(Column::MinerMw).unwrap()));
        let miner = panel.series(Column::MinerMw).unwrap();
        let (ma, mb) = (a.series(Column::MinerMw).unwrap(), b.series(Column::MinerMw).unwrap());
        let mut train_hours = 0;
        for i in 0..panel.len() {
            assert!(ma[i].is_nan() ^ mb[i].is_nan());
            let v = if ma[i].is_nan() { mb[i] } else { train_hours += 1; ma[i] };
            assert_eq!(v, miner[i]);
        }
        assert_eq!(train_hours, 12 * 24);
    }

    #[test]
    fn rejects_irregular_grid_and_negative_load() {
        let t0 = ts("2022-01-01T00:00");
        let cols = |n: usize| PanelColumns {
            rt_price: vec![1.0; n],
            da_price: vec![1.0; n],
            system_mw: vec![1.0; n],
            temp_f: vec![1.0; n],
            miner_mw: vec![1.0; n],
            btc_usd: None,
        };
        assert!(HourlyPanel::new(vec![t0, t0 + Duration::hours(2)], cols(2)).is_err());
        let mut c = cols(1);
        c.miner_mw[0] = -1.0;
        assert!(HourlyPanel::new(vec![t0], c).is_err());
        let mut c = cols(1);
        c.temp_f[0] = f64::INFINITY;
        assert!(HourlyPanel::new(vec![t0], c).is_err());
    }

    #[test]
    fn schema_mapping_parses_and_rejects_unknown_keys() {
        let s = SchemaMap::parse("timestamp = \"Hour Ending\"\nrt_price = \"RTM\"\n").unwrap();
        assert_eq!(s.timestamp, "Hour Ending");
        assert_eq!(s.columns[&Column::RtPrice], "RTM");
        assert_eq!(s.columns[&Column::DaPrice], "da_price");
        assert!(SchemaMap::parse("bogus = \"x\"").is_err());
    }
}
