use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DemandModel, LoadSource};
use crate::error::{Error, Result};
use crate::panel::{format_value, parse_timestamp, Column, HourlyPanel, PanelColumns, SeriesSource, TIMESTAMP_FORMAT};
use crate::sarima::simulate;

const EXOG: [Column; 4] = [Column::TempF, Column::DaPrice, Column::RtPrice, Column::SystemMw];

/// Hourly exogenous inputs in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogScenario {
    pub timestamps: Vec<NaiveDateTime>,
    pub temp_f: Vec<f64>,
    pub da_price: Vec<f64>,
    pub rt_price: Vec<f64>,
    pub system_mw: Vec<f64>,
}

impl SeriesSource for ExogScenario {
    fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    fn series(&self, column: Column) -> Option<&[f64]> {
        match column {
            Column::TempF => Some(&self.temp_f),
            Column::DaPrice => Some(&self.da_price),
            Column::RtPrice => Some(&self.rt_price),
            Column::SystemMw => Some(&self.system_mw),
            _ => None,
        }
    }
}

fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64) -> Vec<f64> {
    let scale = (1.0 - phi * phi).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut prev: f64 = StandardNormal.sample(rng);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        prev = phi * prev + scale * z;
        x.push(prev);
    }
    x
}

/// Smooth bump centred on `peak` hour with unit height.
fn diurnal(hour: u32, peak: f64, width: f64) -> f64 {
    let d = (hour as f64 - peak).abs().min(24.0 - (hour as f64 - peak).abs());
    (-0.5 * (d / width).powi(2)).exp()
}

impl ExogScenario {
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        temp_f: Vec<f64>,
        da_price: Vec<f64>,
        rt_price: Vec<f64>,
        system_mw: Vec<f64>,
    ) -> Result<ExogScenario> {
        let n = timestamps.len();
        if n == 0 {
            return Err(Error::InsufficientData("scenario has no hours".into()));
        }
        for w in timestamps.windows(2) {
            if w[1] - w[0] != Duration::hours(1) {
                return Err(Error::InvalidInput(format!(
                    "scenario timestamps must advance by one hour: {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let s = ExogScenario {
            timestamps,
            temp_f,
            da_price,
            rt_price,
            system_mw,
        };
        for c in EXOG {
            let v = s.series(c).expect("exogenous column");
            if v.len() != n {
                return Err(Error::InvalidInput(format!("column {c} has {} values for {n} hours", v.len())));
            }
            if v.iter().any(|x| x.is_infinite()) {
                return Err(Error::InvalidInput(format!("column {c} has infinite values")));
            }
        }
        Ok(s)
    }

    pub fn from_source(source: &impl SeriesSource) -> Result<ExogScenario> {
        let get = |c: Column| {
            source
                .series(c)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::InvalidInput(format!("source has no {c} column")))
        };
        ExogScenario::new(
            source.timestamps().to_vec(),
            get(Column::TempF)?,
            get(Column::DaPrice)?,
            get(Column::RtPrice)?,
            get(Column::SystemMw)?,
        )
    }

    /// Seeded synthetic inputs: seasonal and diurnal baselines plus
    /// independent AR(1) anomalies for temperature, both prices and system
    /// load. Prices are log-normal around their diurnal profile.
    pub fn synthetic(start: NaiveDate, n_days: usize, seed: u64) -> Result<ExogScenario> {
        if n_days == 0 {
            return Err(Error::InvalidInput("scenario needs at least one day".into()));
        }
        let n = n_days * 24;
        let t0 = start.and_hms_opt(0, 0, 0).expect("midnight");
        let timestamps: Vec<NaiveDateTime> = (0..n).map(|i| t0 + Duration::hours(i as i64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_temp = ar1(&mut rng, n, 0.6);
        let a_da = ar1(&mut rng, n, 0.6);
        let a_rt = ar1(&mut rng, n, 0.6);
        let a_sys = ar1(&mut rng, n, 0.6);
        let mut temp_f = Vec::with_capacity(n);
        let mut da_price = Vec::with_capacity(n);
        let mut rt_price = Vec::with_capacity(n);
        let mut system_mw = Vec::with_capacity(n);
        for (i, ts) in timestamps.iter().enumerate() {
            let doy = ts.ordinal() as f64;
            let h = ts.hour();
            let seasonal = 65.0 + 20.0 * (2.0 * PI * (doy - 105.0) / 365.0).sin();
            temp_f.push(seasonal + 8.0 * (diurnal(h, 15.0, 4.0) - 0.4) + 4.0 * a_temp[i]);
            let shape = diurnal(h, 17.0, 3.0);
            da_price.push(30.0 * (0.5 * shape + 0.3 * a_da[i]).exp());
            rt_price.push(28.0 * (0.6 * shape + 0.45 * a_rt[i]).exp());
            system_mw.push(42_000.0 + 9_000.0 * diurnal(h, 17.0, 4.0) + 2_500.0 * a_sys[i]);
        }
        ExogScenario::new(timestamps, temp_f, da_price, rt_price, system_mw)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Rows `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Result<ExogScenario> {
        if from >= to || to > self.len() {
            return Err(Error::InvalidInput(format!("bad slice [{from}, {to}) of {}", self.len())));
        }
        ExogScenario::new(
            self.timestamps[from..to].to_vec(),
            self.temp_f[from..to].to_vec(),
            self.da_price[from..to].to_vec(),
            self.rt_price[from..to].to_vec(),
            self.system_mw[from..to].to_vec(),
        )
    }

    /// CSV with a `timestamp` column and the four exogenous columns; other
    /// columns are ignored and empty fields are missing values.
    pub fn read_csv<R: Read>(reader: R) -> Result<ExogScenario> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::InvalidInput(format!("scenario CSV has no {name} column")))
        };
        let it = find("timestamp")?;
        let idx: Vec<usize> = EXOG.iter().map(|c| find(c.name())).collect::<Result<_>>()?;
        let mut ts = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 4];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let t = parse_timestamp(rec.get(it).unwrap_or(""))
                .ok_or_else(|| Error::Parse { row: line, msg: "bad timestamp".into() })?;
            ts.push(t);
            for (k, &j) in idx.iter().enumerate() {
                let field = rec.get(j).unwrap_or("").trim();
                let v = if field.is_empty() {
                    f64::NAN
                } else {
                    field.parse().map_err(|_| Error::Parse {
                        row: line,
                        msg: format!("bad number {field:?} in {}", EXOG[k]),
                    })?
                };
                cols[k].push(v);
            }
        }
        let mut it = cols.into_iter();
        let mut next = || it.next().expect("four columns");
        ExogScenario::new(ts, next(), next(), next(), next())
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<ExogScenario> {
        ExogScenario::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp"];
        header.extend(EXOG.iter().map(|c| c.name()));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.timestamps[i].format(TIMESTAMP_FORMAT).to_string()];
            for c in EXOG {
                rec.push(format_value(self.series(c).expect("exogenous column")[i]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seeded hourly Bitcoin price path: a driftless geometric random walk with
/// 4% daily volatility, independent of every other synthetic series.
pub fn synthetic_btc(n_hours: usize, start_price: f64, seed: u64) -> Result<Vec<f64>> {
    if !(start_price > 0.0) || !start_price.is_finite() {
        return Err(Error::InvalidInput("start price must be finite and positive".into()));
    }
    let vol = 0.04 / 24f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_p = start_price.ln();
    Ok((0..n_hours)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            log_p += vol * z - 0.5 * vol * vol;
            log_p.exp()
        })
        .collect())
}

/// Whole days of scenario consumed before the first synthetic hour.
pub fn warmup_days(model: &DemandModel) -> usize {
    model.max_lag().div_ceil(24)
}

/// Synthetic miner load: the deterministic part of `model` on the scenario
/// plus a simulated residual path, mapped back to MW and floored at zero.
///
/// The first `ceil(max_lag / 24)` scenario days are warmup and are not
/// emitted. Hours outside the model season get missing miner load. With
/// own-consumption load terms the warmup load is taken as the transformed
/// bin mean (zero).
pub fn generate_synthetic(model: &DemandModel, scenario: &ExogScenario, n_days: usize, seed: u64) -> Result<HourlyPanel> {
    model.validate()?;
    if n_days == 0 {
        return Err(Error::InvalidInput("n_days must be positive".into()));
    }
    let warm = warmup_days(model) * 24;
    let out_n = n_days * 24;
    if scenario.len() < warm + out_n {
        return Err(Error::InsufficientData(format!(
            "scenario covers {} hours; {n_days} days plus {} warmup hours need {}",
            scenario.len(),
            warm,
            warm + out_n
        )));
    }
    let scenario = scenario.slice(0, warm + out_n)?;
    let ts = scenario.timestamps();
    let mut frame = model.transforms.apply(&scenario)?;
    let s = model.sarima.order.s;
    let u = simulate(&model.sarima, out_n, seed, (10 * s).max(240))?;

    let own = model.load_source == LoadSource::OwnConsumption && !model.load_terms.is_empty();
    let y: Vec<f64> = if own {
        // the load terms see earlier synthetic values, so evaluate hour by hour
        let mut y = vec![0.0; warm + out_n];
        let mut without_load = model.clone();
        without_load.load_terms.clear();
        let base = without_load.deterministic(&frame)?;
        let gate = super::fourcp_indicator(model, &scenario);
        for t in warm..warm + out_n {
            let mut v = base[t] + u[t - warm];
            if gate[t] == 1.0 {
                for term in &model.load_terms {
                    v += term.coefficient * y[t - term.lag];
                }
            }
            y[t] = v;
        }
        y
    } else {
        frame.insert(Column::MinerMw, vec![0.0; warm + out_n])?;
        let d = model.deterministic(&frame)?;
        let mut y = d;
        for t in 0..warm + out_n {
            y[t] = if t < warm { f64::NAN } else { y[t] + u[t - warm] };
        }
        y
    };
    let mw = model.transforms.miner_mw.invert(ts, &y)?;
    let out = warm..warm + out_n;
    let miner: Vec<f64> = mw[out.clone()]
        .iter()
        .map(|&v| if v.is_nan() { v } else { v.max(0.0) })
        .collect();
    let cut = |v: &[f64]| v[out.clone()].to_vec();
    HourlyPanel::new(
        ts[out.clone()].to_vec(),
        PanelColumns {
            rt_price: cut(&scenario.rt_price),
            da_price: cut(&scenario.da_price),
            system_mw: cut(&scenario.system_mw),
            temp_f: cut(&scenario.temp_f),
            miner_mw: miner,
            btc_usd: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drmodel::{PresetCoefficients, PanelTransforms};
    use crate::panel::Season;
    use crate::sarima::SarimaParams;
    use crate::transform::FittedTransform;

    fn start(season: Season) -> NaiveDate {
        match season {
            Season::Summer => NaiveDate::from_ymd_opt(2021, 5, 29).unwrap(),
            Season::NonSummer => NaiveDate::from_ymd_opt(2021, 10, 29).unwrap(),
        }
    }

    fn preset(season: Season, scenario: &ExogScenario) -> DemandModel {
        let miner = FittedTransform::affine(800.0, 20.0).unwrap();
        let t = PanelTransforms::fit_exogenous(scenario, miner).unwrap();
        PresetCoefficients::for_season(season).model(t)
    }

    #[test]
    fn deterministic_given_seed() {
        let sc = ExogScenario::synthetic(start(Season::Summer), 40, 1).unwrap();
        let m = preset(Season::Summer, &sc);
        let a = generate_synthetic(&m, &sc, 30, 9).unwrap();
        let b = generate_synthetic(&m, &sc, 30, 9).unwrap();
        let bits = |p: &HourlyPanel| p.series(Column::MinerMw).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&generate_synthetic(&m, &sc, 30, 10).unwrap()));
        assert_eq!(a.len(), 30 * 24);
        assert_eq!(a.timestamps()[0].date(), NaiveDate::from_ymd_opt(2021, 6, 1).unwrap());
    }

    #[test]
    fn zero_coefficients_give_the_sarima_path() {
        let sc = ExogScenario::synthetic(start(Season::NonSummer), 20, 2).unwrap();
        let mut m = preset(Season::NonSummer, &sc);
        m.temperature.as_mut().unwrap().value = 0.0;
        for t in &mut m.price_terms {
            t.coefficient = 0.0;
        }
        let p = generate_synthetic(&m, &sc, 18, 4).unwrap();
        let u = simulate(&m.sarima, 18 * 24, 4, 240).unwrap();
        for (v, u) in p.series(Column::MinerMw).unwrap().iter().zip(&u) {
            assert!((v - (800.0 + 20.0 * u).max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn scenario_shorter_than_warmup_is_an_error() {
        let sc = ExogScenario::synthetic(start(Season::Summer), 5, 1).unwrap();
        let m = preset(Season::Summer, &sc);
        assert!(matches!(generate_synthetic(&m, &sc, 3, 1), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn planted_system_peak_lowers_the_fourcp_load() {
        let sc = ExogScenario::synthetic(start(Season::Summer), 40, 3).unwrap();
        let m = preset(Season::Summer, &sc);
        let mut peaked = sc.clone();
        // three days of extreme system demand in the 4CP window
        let first = 3 * 24 + 10 * 24;
        for day in 0..3 {
            for h in 16..18 {
                peaked.system_mw[first + day * 24 + h] += 20_000.0;
            }
        }
        let a = generate_synthetic(&m, &sc, 30, 5).unwrap();
        let b = generate_synthetic(&m, &peaked, 30, 5).unwrap();
        let window_mean = |p: &HourlyPanel| {
            let x = p.series(Column::MinerMw).unwrap();
            let idx: Vec<usize> = (0..p.len())
                .filter(|&i| (16..18).contains(&p.timestamps()[i].hour()))
                .filter(|&i| (10 * 24..16 * 24).contains(&i))
                .collect();
            idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64
        };
        assert!(window_mean(&b) < window_mean(&a));
    }

    #[test]
    fn csv_round_trip() {
        let sc = ExogScenario::synthetic(start(Season::NonSummer), 2, 1).unwrap();
        let mut buf = Vec::new();
        sc.write_csv(&mut buf).unwrap();
        let back = ExogScenario::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn own_consumption_generation_runs() {
        let sc = ExogScenario::synthetic(start(Season::Summer), 20, 1).unwrap();
        let mut m = preset(Season::Summer, &sc);
        m.load_source = LoadSource::OwnConsumption;
        m.sarima.params = SarimaParams {
            seasonal_theta: vec![-0.5],
            ..m.sarima.params.clone()
        };
        let p = generate_synthetic(&m, &sc, 15, 2).unwrap();
        assert!(p.series(Column::MinerMw).unwrap().iter().all(|v| v.is_finite()));
    }
}
