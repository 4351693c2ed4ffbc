//! Inputs shared by the benchmarks.

use chrono::{Duration, NaiveDate};

use minerload_core::drmodel::{generate_synthetic, ExogScenario, PresetCoefficients, PanelTransforms};
use minerload_core::panel::{HourlyPanel, Season};
use minerload_core::sarima;
use minerload_core::transform::FittedTransform;

pub fn miner_transform() -> FittedTransform {
    FittedTransform::affine(1000.0, 10.0).expect("valid affine map")
}

/// Synthetic panel of `days` in-season days generated from the preset.
pub fn planted_panel(season: Season, days: usize, seed: u64) -> HourlyPanel {
    let first = match season {
        Season::Summer => NaiveDate::from_ymd_opt(2021, 6, 1),
        Season::NonSummer => NaiveDate::from_ymd_opt(2021, 10, 1),
    }
    .expect("date");
    let preset = PresetCoefficients::for_season(season);
    let warm = preset.warmup_days();
    let scenario =
        ExogScenario::synthetic(first - Duration::days(warm as i64), days + warm, seed).expect("scenario");
    let model = preset.model(PanelTransforms::fit_exogenous(&scenario, miner_transform()).expect("fit"));
    generate_synthetic(&model, &scenario, days, seed).expect("generate")
}

/// `n` values from the season's preset residual process.
pub fn sarima_series(season: Season, n: usize, seed: u64) -> Vec<f64> {
    sarima::simulate(&PresetCoefficients::for_season(season).sarima, n, seed, 480).expect("simulate")
}
