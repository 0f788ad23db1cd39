//! Closed-form oracles on the conformally flat metric g = ψ⁴δ with
//! ψ = 1 + a sin(kx), plus small helpers shared by the integration tests.
//!
//! Everything here is written from the continuum formulas, independent of
//! the discrete operators under test.

#![allow(dead_code)]

use std::sync::Arc;

use cforge_core::coupled::{ConstraintData, TailEntry};
use cforge_core::{GridSpec, Metric, OneFormField, ScalarField, SymTensorField};

pub const AMPLITUDE: f64 = 0.1;

pub fn k0(grid: &GridSpec) -> f64 {
    grid.fundamental_wavenumber()
}

/// ψ, ∂ₓψ, ∂ₓ²ψ.
pub fn psi(p: [f64; 3], k: f64, a: f64) -> (f64, f64, f64) {
    let s = (k * p[0]).sin();
    let c = (k * p[0]).cos();
    (1.0 + a * s, a * k * c, -a * k * k * s)
}

/// R of ψ⁴δ: −8ψ⁻⁵∂²ψ.
pub fn scalar_curvature(p: [f64; 3], k: f64, a: f64) -> f64 {
    let (ps, _, d2) = psi(p, k, a);
    -8.0 * d2 / ps.powi(5)
}

/// Test function u = sin(kx + 0.4) + cos(ky − 0.2) + 0.5 sin(k(y + z)).
pub fn u(p: [f64; 3], k: f64) -> f64 {
    (k * p[0] + 0.4).sin() + (k * p[1] - 0.2).cos() + 0.5 * (k * (p[1] + p[2])).sin()
}

/// Δ_g u = −ψ⁻⁶ ∂ᵢ(ψ² ∂ᵢu), nonnegative convention.
pub fn laplace_u(p: [f64; 3], k: f64, a: f64) -> f64 {
    let (ps, d1, _) = psi(p, k, a);
    let ux = k * (k * p[0] + 0.4).cos();
    let uxx = -k * k * (k * p[0] + 0.4).sin();
    let uyy = -k * k * (k * p[1] - 0.2).cos() - 0.5 * k * k * (k * (p[1] + p[2])).sin();
    let uzz = -0.5 * k * k * (k * (p[1] + p[2])).sin();
    let div = 2.0 * ps * d1 * ux + ps * ps * (uxx + uyy + uzz);
    -div / ps.powi(6)
}

/// Plane-wave one-form Yⱼ = Aⱼ sin(k nⱼ·x + pⱼ).
const MODES: [([f64; 3], f64, f64); 3] = [
    ([1.0, 0.0, 1.0], 0.7, 0.3),
    ([1.0, 1.0, 0.0], -0.4, 1.1),
    ([0.0, 1.0, 1.0], 0.9, -0.5),
];

fn y_parts(p: [f64; 3], k: f64) -> ([f64; 3], [[f64; 3]; 3], [[[f64; 3]; 3]; 3]) {
    let mut y = [0.0; 3];
    let mut dy = [[0.0; 3]; 3]; // dy[i][j] = ∂ᵢYⱼ
    let mut d2y = [[[0.0; 3]; 3]; 3]; // d2y[i][l][j] = ∂ᵢ∂ₗYⱼ
    for (j, (n, amp, ph)) in MODES.iter().enumerate() {
        let arg = k * (n[0] * p[0] + n[1] * p[1] + n[2] * p[2]) + ph;
        y[j] = amp * arg.sin();
        for i in 0..3 {
            dy[i][j] = amp * k * n[i] * arg.cos();
            for l in 0..3 {
                d2y[i][l][j] = -amp * k * k * n[i] * n[l] * arg.sin();
            }
        }
    }
    (y, dy, d2y)
}

/// Flat conformal Killing operator of Y.
fn flat_l(dy: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let div = dy[0][0] + dy[1][1] + dy[2][2];
    std::array::from_fn(|i| {
        std::array::from_fn(|j| dy[i][j] + dy[j][i] - if i == j { 2.0 / 3.0 * div } else { 0.0 })
    })
}

/// W = ψ⁴Y.
pub fn w_form(p: [f64; 3], k: f64, a: f64) -> [f64; 3] {
    let (ps, _, _) = psi(p, k, a);
    let (y, _, _) = y_parts(p, k);
    y.map(|v| ps.powi(4) * v)
}

/// L_g W = ψ⁴ L_δ Y (conformal covariance of the conformal Killing operator).
pub fn lw(p: [f64; 3], k: f64, a: f64) -> [f64; 6] {
    let (ps, _, _) = psi(p, k, a);
    let (_, dy, _) = y_parts(p, k);
    let l = flat_l(&dy);
    let s = ps.powi(4);
    [
        s * l[0][0],
        s * l[0][1],
        s * l[0][2],
        s * l[1][1],
        s * l[1][2],
        s * l[2][2],
    ]
}

/// ½L*LW = −6(∂ₓψ/ψ)(L_δY)₀ⱼ − ∂²Yⱼ − ⅓∂ⱼ(∂·Y).
pub fn half_lstar_lw(p: [f64; 3], k: f64, a: f64) -> [f64; 3] {
    let (ps, d1, _) = psi(p, k, a);
    let (_, dy, d2y) = y_parts(p, k);
    let l = flat_l(&dy);
    std::array::from_fn(|j| {
        let lap = d2y[0][0][j] + d2y[1][1][j] + d2y[2][2][j];
        let grad_div = d2y[j][0][0] + d2y[j][1][1] + d2y[j][2][2];
        -6.0 * d1 / ps * l[0][j] - lap - grad_div / 3.0
    })
}

pub fn scalar_of(grid: GridSpec, f: impl Fn([f64; 3]) -> f64 + Sync) -> ScalarField {
    ScalarField::from_fn(grid, f)
}

pub fn one_form_of(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> OneFormField {
    OneFormField::from_fn(grid, f)
}

pub fn tensor_of(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 6] + Sync) -> SymTensorField {
    SymTensorField::from_fn(grid, f)
}

/// max |a − b| over all entries.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn order(coarse_err: f64, fine_err: f64) -> f64 {
    (coarse_err / fine_err).log2()
}

/// Sup-norm errors of Δ_g, L and ½L*L against the oracles on an n³ grid.
pub fn operator_errors(n: usize) -> [f64; 4] {
    use cforge_core::fixtures::conformally_flat_metric;
    use cforge_core::{conformal_killing, half_lstar_l, laplace_beltrami};
    let grid = GridSpec::unit(n).unwrap();
    let k = k0(&grid);
    let m = conformally_flat_metric(grid, AMPLITUDE);
    let r_exact = scalar_of(grid, |p| scalar_curvature(p, k, AMPLITUDE));
    let r_err = max_diff(m.scalar_curvature().values(), r_exact.values());
    let lap = laplace_beltrami(&m, &scalar_of(grid, |p| u(p, k))).unwrap();
    let lap_err = max_diff(
        lap.values(),
        scalar_of(grid, |p| laplace_u(p, k, AMPLITUDE)).values(),
    );
    let w = one_form_of(grid, |p| w_form(p, k, AMPLITUDE));
    let l = conformal_killing(&m, &w).unwrap();
    let l_err = max_diff(
        l.as_slice(),
        tensor_of(grid, |p| lw(p, k, AMPLITUDE)).as_slice(),
    );
    let ll = half_lstar_l(&m, &w).unwrap();
    let ll_err = max_diff(
        ll.as_slice(),
        one_form_of(grid, |p| half_lstar_lw(p, k, AMPLITUDE)).as_slice(),
    );
    [r_err, lap_err, l_err, ll_err]
}

/// 1 + amplitude·(a sum of four random low Fourier modes normalized to sup ≤ 1).
pub fn random_smooth(grid: GridSpec, seed: u64, amplitude: f64) -> ScalarField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = k0(&grid);
    let modes: Vec<([f64; 3], f64)> = (0..4)
        .map(|_| {
            let n = [0, 1, 2].map(|_| rng.gen_range(-2..=2) as f64);
            (n, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let weights: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm: f64 = weights.iter().map(|w| w.abs()).sum::<f64>().max(1e-12);
    ScalarField::from_fn(grid, |p| {
        let s: f64 = modes
            .iter()
            .zip(&weights)
            .map(|((n, ph), w)| w * (k * (n[0] * p[0] + n[1] * p[1] + n[2] * p[2]) + ph).sin())
            .sum();
        1.0 + amplitude * s / norm
    })
}

/// Low-mode one-form on the flat torus whose |LW| stays within a factor of
/// two of its maximum (found by a random search over unit wavevectors).
const PLANTED: [(usize, [f64; 3], f64, f64); 6] = [
    (0, [0.0, 1.0, 0.0], -0.5, 5.4),
    (0, [-1.0, 0.0, 1.0], -0.84, 1.28),
    (1, [-1.0, 0.0, 0.0], 0.67, 5.49),
    (1, [0.0, 0.0, 1.0], -0.65, 0.25),
    (2, [0.0, 0.0, 1.0], 0.02, 2.07),
    (2, [-1.0, 0.0, 1.0], -0.86, 2.41),
];

pub fn planted_w(p: [f64; 3], k: f64) -> [f64; 3] {
    let mut w = [0.0; 3];
    for (j, n, a, ph) in PLANTED {
        w[j] += a * (k * (n[0] * p[0] + n[1] * p[1] + n[2] * p[2]) + ph).sin();
    }
    w
}

/// |LW| of [`planted_w`] under the flat metric.
pub fn planted_lw_abs(p: [f64; 3], k: f64) -> f64 {
    let mut d = [[0.0; 3]; 3];
    for (j, n, a, ph) in PLANTED {
        let c = (k * (n[0] * p[0] + n[1] * p[1] + n[2] * p[2]) + ph).cos();
        for (i, di) in d.iter_mut().enumerate() {
            di[j] += a * k * n[i] * c;
        }
    }
    let l = flat_l(&d);
    l.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Flat-torus data with a synthetic blow-up tail whose rescaled limit is the
/// planted profile (√1.5|LW̃|/τ)^{1/6}, normalized so its sup is 1.
pub fn planted_case(n: usize) -> (ConstraintData, Vec<TailEntry>) {
    let g = GridSpec::unit(n).unwrap();
    let k = k0(&g);
    let tau = scalar_of(g, |p| 1.0 + 0.1 * (k * p[0]).sin());
    let raw = scalar_of(g, |p| 1.5f64.sqrt() * planted_lw_abs(p, k))
        .zip_map(&tau, |l, t| l / t)
        .unwrap();
    let c = 1.0 / raw.max();
    let profile = raw.map(|v| (c * v).powf(1.0 / 6.0));
    let w_tilde = one_form_of(g, |p| planted_w(p, k).map(|v| c * v));
    let sigma = cforge_core::fixtures::lookup("flat-cmc")
        .unwrap()
        .build(g)
        .unwrap()
        .sigma;
    let d = ConstraintData::new(Arc::new(Metric::flat(g)), tau, sigma, None).unwrap();
    let tail = [(0.5, 1.0), (0.7, 10.0), (0.9, 100.0)]
        .iter()
        .map(|&(t, gamma): &(f64, f64)| TailEntry {
            t,
            phi: profile.scaled(t * gamma),
            w_field: w_tilde.scaled(gamma.powi(6)),
        })
        .collect();
    (d, tail)
}
