mod support;

use cforge_core::fixtures::{bumpy_metric, conformally_flat_metric, x_only_metric};
use cforge_core::{
    ckv_kernel, conformal_killing, half_lstar_l, integrate, laplace_beltrami, lw_pairing,
    yamabe_sign, GridSpec, Metric, OneFormField, ScalarField, YamabeSign,
};
use nalgebra::DMatrix;
use support::*;

#[test]
fn conformally_flat_operators_converge_at_second_order() {
    let coarse = operator_errors(16);
    let fine = operator_errors(32);
    for (name, (c, f)) in ["R", "laplace", "L", "half_LstarL"]
        .iter()
        .zip(coarse.iter().zip(&fine))
    {
        let p = order(*c, *f);
        assert!(
            (p - 2.0).abs() <= 0.3,
            "{name}: errors {c:e} -> {f:e}, order {p:.3}"
        );
    }
}

#[test]
fn conformally_flat_errors_match_frozen_values() {
    // Regression pins for the 16³ oracle errors; any change in the stencils shows up here.
    let e = operator_errors(16);
    let frozen = [FROZEN_R, FROZEN_LAP, FROZEN_L, FROZEN_LL];
    for (got, want) in e.iter().zip(frozen) {
        assert!(
            (got / want - 1.0).abs() < 1e-6,
            "got {got:e}, frozen {want:e}"
        );
    }
}

const FROZEN_R: f64 = 1.9263671904270012;
const FROZEN_LAP: f64 = 1.8273892065083146;
const FROZEN_L: f64 = 0.6219961098143241;
const FROZEN_LL: f64 = 2.627776545898726;

/// Dense 8Δ + R, symmetrized with the quadrature weights √g h³.
fn dense_operator(m: &Metric) -> DMatrix<f64> {
    let grid = *m.grid();
    let n = grid.node_count();
    let r = m.scalar_curvature().values();
    let wts = m.volume_weights();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = laplace_beltrami(m, &ScalarField::new(grid, e).unwrap()).unwrap();
        for i in 0..n {
            a[(i, j)] = 8.0 * col.values()[i] + if i == j { r[i] } else { 0.0 };
        }
    }
    let weighted = DMatrix::from_fn(n, n, |i, j| wts[i] * a[(i, j)]);
    let asym = (&weighted - weighted.transpose()).amax();
    assert!(
        asym <= 1e-10 * weighted.amax(),
        "operator is not self-adjoint: {asym:e}"
    );
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] * (wts[i] / wts[j]).sqrt())
}

#[test]
fn yamabe_eigenvalue_matches_dense_eigensolve() {
    let grid = GridSpec::unit(8).unwrap();
    for m in [
        bumpy_metric(grid, 0.05),
        conformally_flat_metric(grid, 0.1),
        bumpy_metric(grid, 0.05).with_curvature_shift(4.0),
    ] {
        let b = dense_operator(&m);
        let sym = (&b + b.transpose()) * 0.5;
        let dense = sym.symmetric_eigen().eigenvalues.min();
        let est = yamabe_sign(&m).unwrap();
        assert!(
            (est.lambda1 - dense).abs() <= 1e-8 * dense.abs().max(1.0),
            "{} vs {dense}",
            est.lambda1
        );
    }
}

#[test]
fn conformally_flat_yamabe_sign_is_zero() {
    // ψ⁴δ is conformal to the flat torus, so λ₁ vanishes up to discretization error.
    let m = conformally_flat_metric(GridSpec::unit(16).unwrap(), 0.1);
    let est = yamabe_sign(&m).unwrap();
    assert!(est.lambda1.abs() < 0.05, "{}", est.lambda1);
}

#[test]
fn bumpy_metric_has_negative_yamabe_sign_and_no_killing_fields() {
    let m = bumpy_metric(GridSpec::unit(16).unwrap(), 0.05);
    assert_eq!(yamabe_sign(&m).unwrap().sign, YamabeSign::Negative);
    assert!(ckv_kernel(&m, 1e-6).unwrap().is_empty());
}

#[test]
fn x_only_metric_kernel_is_two_translations() {
    let m = x_only_metric(GridSpec::unit(16).unwrap(), 0.05);
    let kernel = ckv_kernel(&m, 1e-6).unwrap();
    assert_eq!(kernel.len(), 2);
    for k in &kernel {
        let lk = conformal_killing(&m, k).unwrap();
        assert!(lk.max_abs() <= 1e-8 * k.max_abs());
    }
}

#[test]
fn half_lstar_l_is_the_adjoint_of_the_pairing() {
    let grid = GridSpec::unit(16).unwrap();
    let k = k0(&grid);
    let m = bumpy_metric(grid, 0.05);
    let w = one_form_of(grid, |p| w_form(p, k, 0.2));
    let v = one_form_of(grid, |p| {
        [
            (k * p[2]).cos(),
            (k * (p[0] - p[1])).sin(),
            0.3 * (k * p[1]).cos(),
        ]
    });
    let lhs = cforge_core::ops::one_form_inner(&m, &half_lstar_l(&m, &w).unwrap(), &v).unwrap();
    let rhs = 0.5 * lw_pairing(&m, &w, &v).unwrap();
    assert!(
        (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
        "{lhs} vs {rhs}"
    );
}

#[test]
fn laplacian_integrates_to_zero_on_curved_metric() {
    let grid = GridSpec::unit(16).unwrap();
    let k = k0(&grid);
    let m = bumpy_metric(grid, 0.05);
    let lap = laplace_beltrami(&m, &scalar_of(grid, |p| u(p, k))).unwrap();
    assert!(integrate(&m, &lap).unwrap().abs() < 1e-12);
    let zero = OneFormField::zeros(grid);
    assert_eq!(half_lstar_l(&m, &zero).unwrap().max_abs(), 0.0);
}
