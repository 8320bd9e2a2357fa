use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use dotsim_core::data::{linspace, time_grid};
use dotsim_core::device::{constant_j_contour, synth_stability_map, ContourOptions};
use dotsim_core::experiment::{fft_spectrum, fit_rabi, rabi_trace, FitOptions, Mode};
use dotsim_core::hubbard::{exchange_exact, DotPairParams};
use dotsim_core::noise::sigma_v_effective;
use dotsim_core::{ControlFrame, DeviceModel, GateCorrelation, NoiseModel, RabiOptions};

fn sop(d: &DeviceModel) -> Vec<f64> {
    let f = ControlFrame::ground_truth(d);
    constant_j_contour(d, &f, 0.16, &[0.0], ContourOptions::default()).unwrap().remove(0).unwrap().bias
}

fn exchange(c: &mut Criterion) {
    let p = DotPairParams::new(20.0, 1.0, 5.0).unwrap();
    c.bench_function("exchange_exact", |b| b.iter(|| exchange_exact(black_box(&p))));
    let d = DeviceModel::reference();
    let v = sop(&d);
    c.bench_function("exchange_of_voltages", |b| b.iter(|| d.exchange_of_voltages(black_box(&v)).unwrap()));
}

fn noise(c: &mut Criterion) {
    let n = NoiseModel::one_over_f(0.3, 1.0).unwrap();
    c.bench_function("sigma_v_effective_1_over_f", |b| b.iter(|| sigma_v_effective(&n, black_box(500.0)).unwrap()));
}

fn traces(c: &mut Criterion) {
    let d = DeviceModel::reference();
    let v = sop(&d);
    let n = NoiseModel::one_over_f(0.3, 1.0).unwrap();
    let times = time_grid(500.0, 1001);
    let mc = RabiOptions { mode: Mode::MonteCarlo { samples: 2000, seed: 1, sigma_time: None }, ..Default::default() };
    let mut g = c.benchmark_group("rabi");
    g.sample_size(20);
    g.bench_function("analytic_1001", |b| {
        b.iter(|| rabi_trace(&d, &v, &times, Some(&n), &GateCorrelation::Identity, &RabiOptions::default()).unwrap())
    });
    g.bench_function("monte_carlo_2000x1001", |b| {
        b.iter(|| rabi_trace(&d, &v, &times, Some(&n), &GateCorrelation::Identity, &mc).unwrap())
    });
    let tr = rabi_trace(&d, &v, &times, Some(&n), &GateCorrelation::Identity, &RabiOptions::default()).unwrap();
    g.bench_function("fit_rabi_1001", |b| b.iter(|| fit_rabi(black_box(&tr), &FitOptions::default()).unwrap()));
    g.bench_function("fft_spectrum_1001", |b| b.iter(|| fft_spectrum(black_box(&tr)).unwrap()));
    g.finish();
}

fn maps(c: &mut Criterion) {
    let d = DeviceModel::reference();
    let ax = linspace(-230.0, 230.0, 241);
    let mut g = c.benchmark_group("stability");
    g.sample_size(10);
    g.bench_function("map_241x241", |b| b.iter(|| synth_stability_map(&d, &ax, &ax, 0.0, 1000.0).unwrap()));
    g.finish();
}

criterion_group!(benches, exchange, noise, traces, maps);
criterion_main!(benches);
