//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use ldmp_core::executor::TaskContext;
use ldmp_core::lqt::ReferenceTrajectory;
use ldmp_core::scenario::{random_starts, Benchmark, Scenario};
use ldmp_core::sim::WorldState;

pub struct Fixture {
    pub scenario: Scenario,
    pub ctx: Arc<TaskContext>,
    /// Random starts of the benchmark, fixed seed.
    pub starts: Vec<WorldState>,
}

pub fn fixture(benchmark: Benchmark, starts: usize) -> Fixture {
    let scenario = Scenario::bundled(benchmark).expect("bundled scenario");
    let (ctx, _) = scenario.context().expect("demonstration records");
    let starts = random_starts(&scenario, starts, 7).expect("suite generates").into_iter().map(|c| c.world).collect();
    Fixture { scenario, ctx, starts }
}

/// The demonstrated segment of `schema`.
pub fn segment(fixture: &Fixture, schema: &str) -> ReferenceTrajectory {
    fixture.ctx.demo.segment(schema).expect("segment recorded").clone()
}
