mod support;

use std::sync::Arc;

use cforge_core::conformal::{conformal_transform, transform_w};
use cforge_core::fixtures::bumpy_metric;
use cforge_core::lichnerowicz::{
    classify, constant_w_sweep, residual, solve, CaseId, LichConfig, LichnerowiczProblem,
};
use cforge_core::{integrate, laplace_beltrami, GridSpec, LichError, Metric, ScalarField};
use proptest::prelude::*;
use support::*;

fn tau_bumpy(grid: GridSpec) -> ScalarField {
    let k = k0(&grid);
    scalar_of(grid, |p| 1.0 + 0.1 * (k * p[0]).sin())
}

/// 8Δu + Ru + (2/3)τ²u⁵ − w²u⁻⁷ assembled from the public geometric operators.
fn independent_residual(
    m: &Metric,
    tau: &ScalarField,
    w: &ScalarField,
    u: &ScalarField,
) -> (f64, f64) {
    let lap = laplace_beltrami(m, u).unwrap();
    let r = m.scalar_curvature().values();
    let (t, wv, uv) = (tau.values(), w.values(), u.values());
    let mut sup = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 0..uv.len() {
        let a = (2.0 / 3.0) * t[i] * t[i] * uv[i].powi(5);
        let b = wv[i] * wv[i] * uv[i].powi(-7);
        sup = sup.max((8.0 * lap.values()[i] + r[i] * uv[i] + a - b).abs());
        scale = scale.max(a).max(b);
    }
    (sup, scale)
}

#[test]
fn cmc_flat_closed_form() {
    let grid = GridSpec::unit(16).unwrap();
    let p = LichnerowiczProblem::new(
        Arc::new(Metric::flat(grid)),
        ScalarField::constant(grid, 1.0),
        ScalarField::constant(grid, 1.0),
    )
    .unwrap();
    let rep = solve(&p, &LichConfig::default()).unwrap();
    let exact = 1.5_f64.powf(1.0 / 12.0);
    assert!((exact - 1.034366).abs() < 1e-6);
    assert!(max_diff(rep.u.values(), &vec![exact; grid.node_count()]) <= 1e-8);
}

#[test]
fn solver_residual_survives_independent_evaluation() {
    let grid = GridSpec::unit(16).unwrap();
    let m = Arc::new(bumpy_metric(grid, 0.05));
    let tau = tau_bumpy(grid);
    let w = random_smooth(grid, 11, 0.5);
    let p = LichnerowiczProblem::new(m.clone(), tau.clone(), w.clone()).unwrap();
    assert_eq!(classify(&p).unwrap().case_id, CaseId::Three);
    let rep = solve(&p, &LichConfig::default()).unwrap();
    let (sup, scale) = independent_residual(&m, &tau, &w, &rep.u);
    assert!(
        sup / scale <= 1e-9,
        "independent residual {:e}",
        sup / scale
    );
    let lib = residual(&p, &rep.u).unwrap().max_abs();
    assert!((lib - sup).abs() <= 1e-10 * scale);
}

#[test]
fn constant_rescaling_is_exactly_covariant() {
    let grid = GridSpec::unit(16).unwrap();
    let m = bumpy_metric(grid, 0.05);
    let tau = tau_bumpy(grid);
    let w = random_smooth(grid, 3, 0.4);
    let c = 1.7;
    let psi = ScalarField::constant(grid, c);
    let base = solve(
        &LichnerowiczProblem::new(Arc::new(m.clone()), tau.clone(), w.clone()).unwrap(),
        &LichConfig::default(),
    )
    .unwrap();
    let mh = conformal_transform(&m, &psi).unwrap();
    let wh = transform_w(&psi, &w).unwrap();
    let hat = solve(
        &LichnerowiczProblem::new(Arc::new(mh), tau, wh).unwrap(),
        &LichConfig::default(),
    )
    .unwrap();
    let expect = base.u.scaled(1.0 / c);
    assert!(max_diff(hat.u.values(), expect.values()) <= 1e-8);
}

#[test]
fn integral_identity_under_conformal_change() {
    let grid = GridSpec::unit(16).unwrap();
    let m = bumpy_metric(grid, 0.05);
    for seed in 0..5 {
        let psi = random_smooth(grid, 100 + seed, 0.1);
        let u = random_smooth(grid, 200 + seed, 0.3);
        let mh = conformal_transform(&m, &psi).unwrap();
        let u_hat = u.zip_map(&psi, |u, p| u / p).unwrap();
        let lhs = integrate(&mh, &u_hat.map(|v| v.powi(12))).unwrap();
        let rhs = integrate(
            &m,
            &u.zip_map(&psi, |u, p| p.powi(-6) * u.powi(12)).unwrap(),
        )
        .unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-8 * rhs.abs(),
            "seed {seed}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn cmc_sweep_ratio_is_flat() {
    let grid = GridSpec::unit(16).unwrap();
    let table = constant_w_sweep(
        Arc::new(Metric::flat(grid)),
        &ScalarField::constant(grid, 1.0),
        &[10.0, 100.0, 1000.0, 10000.0],
        &[0.5, 2.0],
        &LichConfig::default(),
    )
    .unwrap();
    // u = (3k²/2)^{1/12} so ‖u‖⁶/k = (3/2)^{1/2} for every k.
    let exact = 1.5_f64.sqrt();
    for row in &table.rows {
        assert!((row.ratio_sup / exact - 1.0).abs() < 1e-8);
    }
    assert!(table.column_spread(None) <= 1.01);
    assert!(table.column_spread(Some(0)) <= 1.01);
}

#[test]
fn sweep_rejects_bad_grids() {
    let grid = GridSpec::unit(8).unwrap();
    let m = Arc::new(Metric::flat(grid));
    let tau = ScalarField::constant(grid, 1.0);
    let cfg = LichConfig::default();
    assert!(matches!(
        constant_w_sweep(m.clone(), &tau, &[], &[1.0], &cfg),
        Err(LichError::InvalidSweep(_))
    ));
    assert!(matches!(
        constant_w_sweep(m.clone(), &tau, &[10.0, 5.0], &[1.0], &cfg),
        Err(LichError::InvalidSweep(_))
    ));
    assert!(matches!(
        constant_w_sweep(m, &tau, &[10.0], &[0.1], &cfg),
        Err(LichError::InvalidSweep(_))
    ));
}

fn comparison_setup() -> (Arc<Metric>, ScalarField) {
    let grid = GridSpec::unit(12).unwrap();
    (Arc::new(bumpy_metric(grid, 0.05)), tau_bumpy(grid))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn larger_source_gives_larger_solution(seed in 0u64..1000, gap in 0.0f64..0.5) {
        let (m, tau) = comparison_setup();
        let grid = *m.grid();
        let w0 = random_smooth(grid, seed, 0.5);
        let bump = random_smooth(grid, seed + 7919, 1.0).map(|v| gap * v);
        let w1 = w0.add_scaled(1.0, &bump).unwrap();
        let cfg = LichConfig::default();
        let u0 = solve(&LichnerowiczProblem::new(m.clone(), tau.clone(), w0).unwrap(), &cfg).unwrap().u;
        let u1 = solve(&LichnerowiczProblem::new(m, tau, w1).unwrap(), &cfg).unwrap().u;
        let worst = u0.values().iter().zip(u1.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(worst <= 1e-8, "u0 exceeds u1 by {worst:e}");
    }

    #[test]
    fn solutions_are_positive_and_certified(seed in 0u64..1000) {
        let (m, tau) = comparison_setup();
        let w = random_smooth(*m.grid(), seed, 0.9);
        let rep = solve(&LichnerowiczProblem::new(m.clone(), tau.clone(), w.clone()).unwrap(), &LichConfig::default()).unwrap();
        prop_assert!(rep.u.min() > 0.0);
        let (sup, scale) = independent_residual(&m, &tau, &w, &rep.u);
        prop_assert!(sup / scale <= 1e-9);
    }
}
