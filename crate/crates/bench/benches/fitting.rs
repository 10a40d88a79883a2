use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tlsecho::echo::{presets, ModelVariant};
use tlsecho::fit::{
    bootstrap_fit, fit_global, fit_simple_exponential, BootstrapOptions, DecayDataset, DecayKind, GlobalFitOptions,
};
use tlsecho::io::{generate_decay_dataset, SynthDecaySpec};

fn dataset(n_temps: usize, n_delays: usize) -> DecayDataset {
    let temperatures: Vec<f64> = (0..n_temps).map(|k| 0.008 + 0.1 * k as f64 / (n_temps - 1) as f64).collect();
    generate_decay_dataset(&SynthDecaySpec {
        kind: DecayKind::Hahn,
        device_label: "bench".into(),
        params: presets::d2_base(),
        variant: ModelVariant::BaseIntrinsic,
        amplitudes: vec![3e-3; n_temps],
        temperatures,
        delays: (1..=n_delays).map(|k| k as f64 * 0.2e-6).collect(),
        tau: None,
        noise_std: 0.28e-3,
        seed: 5,
    })
    .unwrap()
}

fn fitting(c: &mut Criterion) {
    let data = dataset(24, 52);
    let init = presets::d2_base();
    let opts = GlobalFitOptions {
        seed: 5,
        ..Default::default()
    };
    c.bench_function("exponential_single_series", |b| {
        b.iter(|| fit_simple_exponential(black_box(&data.series[3])))
    });
    let mut g = c.benchmark_group("global");
    g.sample_size(10);
    g.bench_function("multistart_24x52", |b| {
        b.iter(|| fit_global(black_box(&data), ModelVariant::BaseIntrinsic, &init, &opts))
    });
    g.bench_function("bootstrap_40_of_18", |b| {
        let boot = BootstrapOptions {
            n_resamples: 40,
            subset_size: 18,
            seed: 5,
        };
        b.iter(|| bootstrap_fit(black_box(&data), ModelVariant::BaseIntrinsic, &init, &opts, &boot))
    });
    g.finish();
}

criterion_group!(benches, fitting);
criterion_main!(benches);
