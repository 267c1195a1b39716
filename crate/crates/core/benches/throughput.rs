use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relay_outage::analytic::Protocol;
use relay_outage::exec::Execution;
use relay_outage::interference::QuadratureSpec;
use relay_outage::model::{LinkGeometry, NetworkModel, ProtocolParams};
use relay_outage::montecarlo::{simulate, SimulationSpec};
use relay_outage::search::{region_map, sweep_lambda, RelayGrid};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn monte_carlo(c: &mut Criterion) {
    let net = NetworkModel::new(1e-4, 4.0).unwrap();
    let geom = LinkGeometry::new(10.0, 0.5, 0.0, 4.0).unwrap();
    let params = ProtocolParams::new(3.0).unwrap();
    let spec = SimulationSpec::new(50_000, 1);
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate(&net, &geom, &params, &spec, exec).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let geom = LinkGeometry::new(10.0, 0.2, 0.0, 4.0).unwrap();
    let params = ProtocolParams::new(3.0).unwrap().with_partitions(16);
    let lambdas = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3];
    let mut g = c.benchmark_group("sweep_lambda");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            // fresh cache per run so both modes do the same quadrature work
            b.iter(|| {
                sweep_lambda(
                    &Protocol::ALL,
                    &lambdas,
                    4.0,
                    &geom,
                    &params,
                    &QuadratureSpec::default(),
                    exec,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn region(c: &mut Criterion) {
    let net = NetworkModel::new(1e-4, 4.0).unwrap();
    let params = ProtocolParams::new(3.0).unwrap().with_partitions(8);
    let grid = RelayGrid::Cartesian {
        xs: (0..6).map(|i| -5.0 + 4.0 * i as f64).collect(),
        ys: (0..3).map(|i| 1.0 + 3.0 * i as f64).collect(),
    };
    let mut g = c.benchmark_group("region_map");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| region_map(&net, &grid, 10.0, &params, &QuadratureSpec::default(), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, sweep, region);
criterion_main!(benches);
