use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ruin_spg::baselines::{mc_ruin_probability, RuinKind};
use ruin_spg::malliavin::{estimate_gradient, WeightFunction};
use ruin_spg::{
    AssetModel, ClaimDistribution, Executor, ModelParams, Purpose, Strategy, StreamKey,
};

const N: usize = 20_000;

fn model() -> ModelParams {
    let claim = ClaimDistribution::gamma(5.0, 3.0).unwrap();
    let assets = vec![AssetModel::Cash, AssetModel::gbm(0.05, 0.1).unwrap()];
    ModelParams::new(40.0, 0.03, 200.0, 5.0, 0.08, 0.15, claim, assets).unwrap()
}

fn executors() -> Vec<(String, Executor)> {
    let mut out = Vec::new();
    out.push(("sequential".to_string(), Executor::sequential()));
    // a real pool even on one core, so the scheduling overhead shows up
    #[cfg(feature = "parallel")]
    {
        let workers = Executor::available().workers().max(2);
        out.push((
            format!("parallel_{workers}"),
            Executor::with_workers(workers).unwrap(),
        ));
    }
    out
}

fn bench(c: &mut Criterion) {
    let params = model();
    let strategy = Strategy::new(vec![0.5, 0.5], 0.5, 0.07).unwrap();
    let wf = WeightFunction::new(0.125, 5.0).unwrap();
    let key = StreamKey::new(1, Purpose::MonteCarlo);

    let mut group = c.benchmark_group("ruin_probability");
    group.sample_size(10);
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &exec, |bench, exec| {
            bench.iter(|| {
                mc_ruin_probability(&params, &strategy, N, key, RuinKind::Terminal, exec).unwrap()
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("malliavin_gradient");
    group.sample_size(10);
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &exec, |bench, exec| {
            bench.iter(|| estimate_gradient(&params, &strategy, &wf, N, key, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
