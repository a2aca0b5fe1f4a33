use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ldmp_bench::{fixture, segment};
use ldmp_core::dmp::ClassicalDmp;
use ldmp_core::executor::{run_method, Method, RunConfig, STEP_DT};
use ldmp_core::planner::{logic_dmp_plan, plan_full};
use ldmp_core::scenario::Benchmark;
use ldmp_core::sim::WorldFeasibility;

fn motion(c: &mut Criterion) {
    let f = fixture(Benchmark::B2, 0);
    let pull = segment(&f, "pull");
    let mut group = c.benchmark_group("motion");
    group.bench_function("lqt_generate_pull", |b| b.iter(|| f.ctx.generator.generate(black_box(&pull)).unwrap()));
    let positions = pull.positions();
    let goal = pull.goal.clone();
    group.bench_function("dmp_train_rollout_pull", |b| {
        b.iter(|| {
            let dmp = ClassicalDmp::train(black_box(&positions), STEP_DT).unwrap();
            dmp.rollout(&positions[0], &goal, STEP_DT).unwrap()
        })
    });
    group.finish();
}

fn planning(c: &mut Criterion) {
    let mut group = c.benchmark_group("planning");
    for benchmark in Benchmark::ALL {
        let f = fixture(benchmark, 8);
        let ctx = &f.ctx;
        let cases: Vec<_> = f.starts.iter().map(|w| (ctx.scene(w), WorldFeasibility::new(w))).collect();
        group.bench_function(BenchmarkId::new("full", benchmark), |b| {
            b.iter(|| {
                for (scene, feas) in &cases {
                    black_box(plan_full(scene, &ctx.goal, &ctx.domain, feas, ctx.limits).ok());
                }
            })
        });
        group.bench_function(BenchmarkId::new("logic_dmp", benchmark), |b| {
            b.iter(|| {
                for (scene, feas) in &cases {
                    black_box(logic_dmp_plan(scene, &ctx.demo, &ctx.spec, &ctx.domain, feas, ctx.limits).ok());
                }
            })
        });
    }
    group.finish();
}

fn execution(c: &mut Criterion) {
    let mut group = c.benchmark_group("execution");
    group.sample_size(20);
    for benchmark in Benchmark::ALL {
        let f = fixture(benchmark, 0);
        group.bench_function(BenchmarkId::new("logic_dmp_nominal", benchmark), |b| {
            b.iter(|| run_method(&f.ctx, Method::LogicDmp, black_box(&f.scenario.world), &[], RunConfig::default()))
        });
    }
    group.finish();
}

criterion_group!(benches, motion, planning, execution);
criterion_main!(benches);
