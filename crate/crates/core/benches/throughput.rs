//! Benchmarks: parallel vs sequential certification, and the backprop-based
//! stochastic estimator vs the forward-only one-point estimator.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fedsmooth::attack::{smoothadv_attack, AttackConfig, Estimator, NoisePack};
use fedsmooth::data::synth_blobs;
use fedsmooth::nn::{init_params, Classifier, NetworkSpec};
use fedsmooth::parallel::{par_map, seq_map};
use fedsmooth::rng::StreamFactory;
use fedsmooth::smoothing::{certify, SmoothingConfig};

fn bench_certification(c: &mut Criterion) {
    let dataset = synth_blobs(3, 40, 32, 0.25, 7).unwrap();
    let net = NetworkSpec::new(vec![32, 256, 128, 3]).unwrap();
    let params = init_params(&net, 1);
    let classifier = Classifier::new(&params);
    let cfg = SmoothingConfig {
        sigma: 0.25,
        n0: 20,
        n: 100,
        ..SmoothingConfig::default()
    };
    let factory = StreamFactory::new(3);
    let points: Vec<usize> = (0..16).collect();

    let mut group = c.benchmark_group("certify_16_points");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", "rayon"), |b| {
        b.iter(|| {
            par_map(&points, |&i| {
                let mut rng = factory.certify_stream(i);
                certify(&classifier, dataset.features().row(i), &cfg, &mut rng).unwrap()
            })
        })
    });
    group.bench_function(BenchmarkId::new("sequential", "single"), |b| {
        b.iter(|| {
            seq_map(&points, |&i| {
                let mut rng = factory.certify_stream(i);
                certify(&classifier, dataset.features().row(i), &cfg, &mut rng).unwrap()
            })
        })
    });
    group.finish();
}

fn bench_estimators(c: &mut Criterion) {
    let net = NetworkSpec::new(vec![32, 256, 128, 3]).unwrap();
    let params = init_params(&net, 2);
    let sigma = 0.25;
    let factory = StreamFactory::new(9);
    let mut rng = factory.stream(&[1]);
    let noise = NoisePack::draw(2, 32, sigma, &mut rng);
    let x: Vec<f64> = (0..32).map(|i| (i as f64) / 32.0).collect();

    let mut group = c.benchmark_group("attack_estimators");
    for estimator in [Estimator::Stochastic, Estimator::OnePoint] {
        let acfg = AttackConfig {
            epsilon: 0.5,
            steps: 2,
            inner_lr: 0.01,
            estimator,
            m: 2,
        };
        group.bench_function(BenchmarkId::new("attack", estimator.name()), |b| {
            b.iter(|| smoothadv_attack(&params, &x, 0, &acfg, sigma, &noise).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_certification, bench_estimators);
criterion_main!(benches);
