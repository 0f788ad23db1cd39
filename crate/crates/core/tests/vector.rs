mod support;

use std::sync::Arc;

use cforge_core::fixtures::{bumpy_metric, x_only_metric};
use cforge_core::ops::one_form_l2;
use cforge_core::vector::{assemble_rhs, project_out, solve_vector, VectorConfig, VectorProblem};
use cforge_core::{
    ckv_kernel, half_lstar_l, GridSpec, Metric, OneFormField, ScalarField, VectorError,
};
use support::*;

fn manufactured(grid: GridSpec) -> OneFormField {
    let k = k0(&grid);
    one_form_of(grid, |p| {
        [
            (k * p[0] + 0.2).sin() * (k * p[1]).cos() + 0.3,
            0.5 * (k * (p[1] - p[2])).cos() - 0.1,
            (2.0 * k * p[2] + 0.7).sin() + 0.4 * (k * p[0]).cos(),
        ]
    })
}

fn tight() -> VectorConfig {
    VectorConfig {
        tol: 1e-11,
        ..VectorConfig::default()
    }
}

/// Solve ½L*LW = b for b = ½L*LW* and return (relative L² error mod kernel, sup error mod kernel).
fn round_trip(m: Arc<Metric>) -> (f64, f64, usize) {
    let grid = *m.grid();
    let kernel: Arc<[OneFormField]> = ckv_kernel(&m, 1e-6).unwrap().into();
    let dim = kernel.len();
    let w_star = manufactured(grid);
    let b = half_lstar_l(&m, &w_star).unwrap();
    let p = VectorProblem::new(m.clone(), b.scaled(-1.0), kernel.clone()).unwrap();
    let rep = solve_vector(&p, &tight()).unwrap();
    let target = project_out(&m, &w_star, &kernel).unwrap();
    let diff = rep.w_field.add_scaled(-1.0, &target).unwrap();
    (
        one_form_l2(&m, &diff).unwrap() / one_form_l2(&m, &target).unwrap(),
        diff.max_abs(),
        dim,
    )
}

#[test]
fn manufactured_round_trip_on_flat_metric() {
    let (rel, _, dim) = round_trip(Arc::new(Metric::flat(GridSpec::unit(16).unwrap())));
    assert_eq!(dim, 3);
    assert!(rel <= 1e-6, "relative error {rel:e}");
}

#[test]
fn manufactured_round_trip_on_bumpy_metric() {
    let (_, sup, dim) = round_trip(Arc::new(bumpy_metric(GridSpec::unit(16).unwrap(), 0.05)));
    assert_eq!(dim, 0);
    assert!(sup <= 1e-6, "absolute error {sup:e}");
}

#[test]
fn x_only_metric_projects_translations_in_y_and_z() {
    let (rel, _, dim) = round_trip(Arc::new(x_only_metric(GridSpec::unit(16).unwrap(), 0.05)));
    assert_eq!(dim, 2);
    assert!(rel <= 1e-6, "relative error {rel:e}");
}

#[test]
fn constant_rhs_on_flat_metric_is_pure_kernel() {
    let grid = GridSpec::unit(12).unwrap();
    let m = Arc::new(Metric::flat(grid));
    let kernel: Arc<[OneFormField]> = ckv_kernel(&m, 1e-6).unwrap().into();
    let rhs = OneFormField::from_fn(grid, |_| [1.0, -2.0, 0.5]);
    let rep = solve_vector(
        &VectorProblem::new(m, rhs, kernel).unwrap(),
        &VectorConfig::default(),
    )
    .unwrap();
    assert_eq!(rep.w_field.max_abs(), 0.0);
    assert!((rep.projected_rhs_fraction - 1.0).abs() < 1e-12);
}

#[test]
fn rhs_assembly_rejects_negative_phi() {
    let grid = GridSpec::unit(8).unwrap();
    let m = Metric::flat(grid);
    let xi = OneFormField::from_fn(grid, |_| [1.0, 0.0, 0.0]);
    let phi = ScalarField::from_fn(grid, |p| p[0] - 0.5);
    assert!(matches!(
        assemble_rhs(&m, &phi, &xi),
        Err(VectorError::NegativePhi(_))
    ));
}

#[test]
fn unreachable_tolerance_is_reported() {
    let grid = GridSpec::unit(12).unwrap();
    let m = Arc::new(bumpy_metric(grid, 0.05));
    let b = half_lstar_l(&m, &manufactured(grid)).unwrap();
    let p = VectorProblem::new(m, b, Arc::from(Vec::new())).unwrap();
    let cfg = VectorConfig {
        tol: 1e-30,
        max_iter: 3,
        initial_guess: None,
    };
    assert!(matches!(
        solve_vector(&p, &cfg),
        Err(VectorError::Tolerance { .. } | VectorError::Krylov(_))
    ));
}
