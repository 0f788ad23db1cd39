//! Shared inputs for the criterion benchmarks.

use std::sync::Arc;

use cforge_core::coupled::ConstraintData;
use cforge_core::fixtures::{self, bumpy_metric};
use cforge_core::lichnerowicz::LichnerowiczProblem;
use cforge_core::{GridSpec, Metric, ScalarField};

pub const SIZES: [usize; 2] = [16, 32];

pub fn grid(n: usize) -> GridSpec {
    GridSpec::unit(n).expect("benchmark grid sizes are valid")
}

pub fn bumpy(n: usize) -> Arc<Metric> {
    Arc::new(bumpy_metric(grid(n), 0.05))
}

/// Smooth positive test field 1 + 0.3 sin(kx) cos(ky) + 0.2 sin(kz).
pub fn smooth(g: GridSpec) -> ScalarField {
    let k = g.fundamental_wavenumber();
    ScalarField::from_fn(g, |p| {
        1.0 + 0.3 * (k * p[0]).sin() * (k * p[1]).cos() + 0.2 * (k * p[2]).sin()
    })
}

pub fn lich_problem(n: usize) -> LichnerowiczProblem {
    let m = bumpy(n);
    let g = grid(n);
    let k = g.fundamental_wavenumber();
    let tau = ScalarField::from_fn(g, |p| 1.0 + 0.1 * (k * p[0]).sin());
    let p = LichnerowiczProblem::new(m, tau, smooth(g)).expect("valid problem");
    let y = p.yamabe().expect("yamabe estimate");
    p.with_yamabe(y)
}

pub fn benchmark_data(n: usize) -> ConstraintData {
    let fx = fixtures::lookup("benchmark").expect("benchmark fixture is registered");
    ConstraintData::from_fixture(&fx, grid(n)).expect("benchmark data build")
}
