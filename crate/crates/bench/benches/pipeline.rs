use criterion::{black_box, criterion_group, criterion_main, Criterion};

use minerload_bench::{miner_transform, planted_panel, sarima_series};
use minerload_core::drmodel::{fit_demand_model, FitConfig, PresetCoefficients, PanelTransforms};
use minerload_core::panel::{Season, SeriesSource};
use minerload_core::sarima;
use minerload_core::stats::{adf_test, ljung_box, AdfOptions};
use minerload_core::transform::{FittedTransform, TransformConfig};

fn residual_model(c: &mut Criterion) {
    let x = sarima_series(Season::NonSummer, 5000, 1);
    let order = PresetCoefficients::non_summer().sarima.order;
    c.bench_function("sarima_fit_5000", |b| b.iter(|| sarima::fit(black_box(&x), order).unwrap()));
    let model = PresetCoefficients::summer().sarima;
    c.bench_function("whiten_5000", |b| b.iter(|| sarima::whiten(&model, black_box(&x))));
}

fn tests(c: &mut Criterion) {
    let x = sarima_series(Season::NonSummer, 2000, 2);
    c.bench_function("adf_2000", |b| b.iter(|| adf_test(black_box(&x), &AdfOptions::default()).unwrap()));
    c.bench_function("ljung_box_2000", |b| b.iter(|| ljung_box(black_box(&x), 24, 0).unwrap()));
}

fn transforms(c: &mut Criterion) {
    let panel = planted_panel(Season::NonSummer, 120, 3);
    let ts = panel.timestamps().to_vec();
    let load = panel.series(minerload_core::panel::Column::MinerMw).unwrap().to_vec();
    c.bench_function("transform_fit_2880", |b| {
        b.iter(|| FittedTransform::fit(&ts, black_box(&load), &TransformConfig::default()).unwrap())
    });
}

fn demand_model(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_demand_model");
    g.sample_size(10);
    for (season, days) in [(Season::NonSummer, 180), (Season::Summer, 120)] {
        let panel = planted_panel(season, days, 4);
        let tr = PanelTransforms::fit_exogenous(&panel, miner_transform()).unwrap();
        g.bench_function(season.name(), |b| {
            b.iter(|| fit_demand_model(black_box(&panel), season, &tr, &FitConfig::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, residual_model, tests, transforms, demand_model);
criterion_main!(benches);
