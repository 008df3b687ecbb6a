use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ttforecast::neural::{init_params, loss_and_gradients, predict, train, CellKind, NetworkConfig, TrainConfig};
use ttforecast::series::{gen_arma_process, make_windows};
use ttforecast::{fit_ar, fit_arma, gen_sine_plus_noise, one_step_eval, rolling_multi_step_eval, ArmaSpec, FitOptions};

fn linear(c: &mut Criterion) {
    let s = gen_arma_process(&[0.5, -0.2], &[0.4], 0.0, 1.0, 15_512, 200, 7).unwrap();
    c.bench_function("fit_ar_p10_n15512", |b| b.iter(|| fit_ar(black_box(&s), 10, FitOptions::default()).unwrap()));
    let spec = ArmaSpec::new(10, 5, 0);
    c.bench_function("fit_arma_10_0_5_n15512", |b| {
        b.iter(|| fit_arma(black_box(&s), spec, FitOptions::default()).unwrap())
    });
    let m = fit_ar(&s, 10, FitOptions::default()).unwrap();
    c.bench_function("rolling_eval_ar_h5", |b| b.iter(|| rolling_multi_step_eval(&m, black_box(&s), 10, 5).unwrap()));
}

fn networks(c: &mut Criterion) {
    let s = gen_sine_plus_noise(1.0, 20.0, 0.1, 500, 0).unwrap();
    let ds = make_windows(&s, 10).unwrap();
    for kind in CellKind::ALL {
        let cfg = NetworkConfig::standard(kind);
        let p = init_params(cfg, 0).unwrap();
        c.bench_function(&format!("predict_{kind}_window"), |b| b.iter(|| predict(&p, black_box(ds.row(0))).unwrap()));
        c.bench_function(&format!("loss_and_gradients_{kind}_n490"), |b| {
            b.iter(|| loss_and_gradients(&p, black_box(&ds)).unwrap())
        });
        let tc = TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        };
        let (tr, va) = (ds.slice(0, 392), ds.slice(392, ds.len()));
        c.bench_function(&format!("train_{kind}_10_epochs"), |b| {
            b.iter_batched(|| p.clone(), |p| train(p, &tr, &va, &tc).unwrap(), BatchSize::SmallInput)
        });
        let model = ttforecast::neural::NeuralModel { params: p.clone(), window: 10 };
        c.bench_function(&format!("one_step_eval_{kind}"), |b| b.iter(|| one_step_eval(&model, black_box(&s), 10).unwrap()));
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = linear, networks
}
criterion_main!(benches);
