use std::collections::BTreeSet;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use super::special::t_two_sided;
use super::CorrelationResult;
use crate::error::{Error, Result};
use crate::panel::{Column, SeriesSource};

/// Minimum filtered sample for a windowed correlation.
pub const MIN_WINDOW_SAMPLE: usize = 30;

/// Pearson correlation with a two-sided t-test p-value (n - 2 df).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("pearson: series differ in length".into()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("pearson needs n >= 3, got {n}")));
    }
    let mx = super::mean(x);
    let my = super::mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Degenerate("pearson: zero variance".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    let p_value = if denom <= 0.0 {
        0.0
    } else {
        t_two_sided(r * (df / denom).sqrt(), df)
    };
    Ok(CorrelationResult {
        r,
        p_value,
        n,
        window_note: String::new(),
    })
}

/// Hour/month filter and lag for [`windowed_correlation`]. Empty sets mean
/// no restriction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationFilter {
    #[serde(default)]
    pub hours: BTreeSet<u32>,
    #[serde(default)]
    pub months: BTreeSet<u32>,
    /// `y` enters as `y[t - lag]`.
    #[serde(default)]
    pub lag: usize,
}

impl CorrelationFilter {
    fn note(&self) -> String {
        let fmt = |s: &BTreeSet<u32>| {
            if s.is_empty() {
                "all".to_string()
            } else {
                s.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            }
        };
        format!("hours={} months={} lag={}", fmt(&self.hours), fmt(&self.months), self.lag)
    }
}

/// Pearson correlation of `x[t]` with `y[t - lag]` over the hours `t`
/// passing the filter. Pairs with a missing value are skipped.
pub fn windowed_correlation(
    source: &impl SeriesSource,
    x: Column,
    y: Column,
    filter: &CorrelationFilter,
) -> Result<CorrelationResult> {
    let missing = |c: Column| Error::InvalidInput(format!("series {c} not present"));
    let xs = source.series(x).ok_or_else(|| missing(x))?;
    let ys = source.series(y).ok_or_else(|| missing(y))?;
    let ts = source.timestamps();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for t in filter.lag..ts.len() {
        if !filter.hours.is_empty() && !filter.hours.contains(&ts[t].hour()) {
            continue;
        }
        if !filter.months.is_empty() && !filter.months.contains(&ts[t].month()) {
            continue;
        }
        let (xv, yv) = (xs[t], ys[t - filter.lag]);
        if xv.is_finite() && yv.is_finite() {
            a.push(xv);
            b.push(yv);
        }
    }
    if a.len() < MIN_WINDOW_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "windowed correlation has {} pairs, needs {MIN_WINDOW_SAMPLE}",
            a.len()
        )));
    }
    let mut out = pearson(&a, &b)?;
    out.window_note = format!("{x} vs {y}: {}", filter.note());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::SeriesFrame;
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn frame(x: Vec<f64>, y: Vec<f64>) -> SeriesFrame {
        let start = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let ts = (0..x.len()).map(|i| start + chrono::Duration::hours(i as i64)).collect();
        let mut f = SeriesFrame::new(ts);
        f.insert(Column::RtPrice, x).unwrap();
        f.insert(Column::MinerMw, y).unwrap();
        f
    }

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn self_and_negated_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = normals(&mut rng, 500);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let f = frame(x.clone(), x.clone());
        let filter = CorrelationFilter {
            hours: (10..20).collect(),
            ..Default::default()
        };
        let r = windowed_correlation(&f, Column::RtPrice, Column::MinerMw, &filter).unwrap();
        assert!((r.r - 1.0).abs() < 1e-12);
        assert!(r.p_value < 1e-12);
        let f = frame(x, neg);
        let r = windowed_correlation(&f, Column::RtPrice, Column::MinerMw, &filter).unwrap();
        assert!((r.r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn lag_aligns_y_behind_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = normals(&mut rng, 400);
        let mut x = vec![0.0; 400];
        x[3..].copy_from_slice(&y[..397]);
        let f = frame(x, y);
        let filter = CorrelationFilter {
            lag: 3,
            ..Default::default()
        };
        let r = windowed_correlation(&f, Column::RtPrice, Column::MinerMw, &filter).unwrap();
        assert!((r.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_gaussians_rarely_correlate() {
        let mut ok = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = pearson(&normals(&mut rng, 1000), &normals(&mut rng, 1000)).unwrap();
            if r.r.abs() < 0.08 && r.p_value > 0.05 {
                ok += 1;
            }
        }
        assert!(ok >= 90, "{ok} of 100");
    }

    #[test]
    fn small_window_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = frame(normals(&mut rng, 48), normals(&mut rng, 48));
        let filter = CorrelationFilter {
            hours: [12].into(),
            ..Default::default()
        };
        assert!(windowed_correlation(&f, Column::RtPrice, Column::MinerMw, &filter).is_err());
    }

    #[test]
    fn p_value_matches_t_distribution() {
        // scipy.stats.pearsonr([1,2,3,4,5],[2,1,4,3,5]) -> r=0.8, p=0.10408803866182788
        let r = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r.r - 0.8).abs() < 1e-12);
        assert!((r.p_value - 0.10408803866182788).abs() < 1e-9);
    }
}
