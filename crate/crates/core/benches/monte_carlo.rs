//! Sequential versus pooled Monte Carlo trials. Without the `parallel`
//! feature both variants take the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sudas::channel::{effective_cnrs, generate};
use sudas::harness::{run, ExperimentSpec, Preset};
use sudas::solver::{dinkelbach_solve, SolverOptions, Variant};

fn small_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(Preset::EeVsPt).desk_scale();
    spec.system.shrink_subcarriers(16);
    spec.values = vec![37.0];
    spec.trials = 8;
    spec
}

fn trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("ee_vs_pt_8_trials");
    g.sample_size(10);
    // 0 means one worker per core
    for (name, workers) in [("sequential", 1), ("parallel", 0)] {
        let mut spec = small_spec();
        spec.workers = workers;
        g.bench_with_input(BenchmarkId::from_parameter(name), &spec, |b, spec| b.iter(|| run(spec).unwrap()));
    }
    g.finish();
}

fn single_solve(c: &mut Criterion) {
    let spec = small_spec();
    let cfg = spec.config_at(37.0);
    let eff = effective_cnrs(&generate(&cfg, 1), &cfg);
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("dinkelbach_n_f_16");
    g.sample_size(20);
    for v in [Variant::Optimal, Variant::Suboptimal] {
        g.bench_function(format!("{v:?}"), |b| b.iter(|| dinkelbach_solve(&eff, &cfg, &opts, v).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, trials, single_solve);
criterion_main!(benches);
