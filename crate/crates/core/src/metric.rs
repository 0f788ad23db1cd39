//! Riemannian metrics sampled on the grid and their derived fields.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::GeometryError;
use crate::field::{sym_index, ScalarField, SymTensorField, SYM_PAIRS};
use crate::grid::{unit_offset, GridSpec};
use crate::ops::{ScalarOperator, VectorOperator};
use crate::spectral::Spectral;

/// Determinant of a symmetric 3×3 matrix given by its six stored components.
#[inline]
pub(crate) fn sym_det(s: &[f64; 6]) -> f64 {
    let [xx, xy, xz, yy, yz, zz] = *s;
    xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz)
}

/// Inverse of a symmetric 3×3 matrix via the adjugate.
#[inline]
pub(crate) fn sym_inverse(s: &[f64; 6]) -> [f64; 6] {
    let [xx, xy, xz, yy, yz, zz] = *s;
    let det = sym_det(s);
    let inv = 1.0 / det;
    [
        (yy * zz - yz * yz) * inv,
        (xz * yz - xy * zz) * inv,
        (xy * yz - xz * yy) * inv,
        (xx * zz - xz * xz) * inv,
        (xy * xz - xx * yz) * inv,
        (xx * yy - xy * xy) * inv,
    ]
}

fn leading_minors_positive(s: &[f64; 6]) -> bool {
    let [xx, xy, _, yy, _, _] = *s;
    xx > 0.0 && xx * yy - xy * xy > 0.0 && sym_det(s) > 0.0
}

/// A metric together with its inverse, volume element, Christoffel symbols and
/// scalar curvature. Discrete operators are assembled lazily and cached.
#[derive(Clone, Debug)]
pub struct Metric {
    grid: GridSpec,
    g: SymTensorField,
    g_inv: SymTensorField,
    sqrt_det: ScalarField,
    /// Γ^k_ij stored as `christoffel[(k * 6 + sym_index(i, j)) * N + node]`.
    christoffel: Vec<f64>,
    scalar_curvature: ScalarField,
    curvature_shift: f64,
    scalar_op: OnceLock<ScalarOperator>,
    vector_op: OnceLock<VectorOperator>,
    spectral: OnceLock<Spectral>,
}

/// Build a metric from its components, computing derived fields with
/// second-order centered periodic differences.
pub fn build_metric(spec: GridSpec, g_components: SymTensorField) -> Result<Metric, GeometryError> {
    if *g_components.grid() != spec {
        return Err(GeometryError::GridMismatch);
    }
    if !g_components.all_finite() {
        return Err(GeometryError::NonFinite(
            g_components
                .as_slice()
                .iter()
                .position(|v| !v.is_finite())
                .unwrap_or(0),
        ));
    }
    let n = spec.node_count();
    let nodes: Vec<[f64; 6]> = (0..n).into_par_iter().map(|i| g_components.at(i)).collect();
    if let Some(bad) = nodes.iter().position(|s| !leading_minors_positive(s)) {
        return Err(GeometryError::NonPositiveDefinite(bad));
    }
    let inv_nodes: Vec<[f64; 6]> = nodes.par_iter().map(sym_inverse).collect();
    let sqrt_det: Vec<f64> = nodes.par_iter().map(|s| sym_det(s).sqrt()).collect();

    let h = spec.spacing();
    let centered = |field: &dyn Fn(usize) -> f64, idx: usize, axis: usize| -> f64 {
        let p = spec.shifted(idx, unit_offset(axis, 1));
        let m = spec.shifted(idx, unit_offset(axis, -1));
        (field(p) - field(m)) / (2.0 * h)
    };

    // Γ^k_ij = g^{kd} · ½(∂_i g_jd + ∂_j g_id − ∂_d g_ij)
    let gamma_nodes: Vec<[f64; 18]> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let mut dg = [[0.0; 6]; 3];
            for (c, row) in dg.iter_mut().enumerate() {
                let p = spec.shifted(idx, unit_offset(c, 1));
                let m = spec.shifted(idx, unit_offset(c, -1));
                for s in 0..6 {
                    row[s] = (nodes[p][s] - nodes[m][s]) / (2.0 * h);
                }
            }
            let d = |c: usize, a: usize, b: usize| dg[c][sym_index(a, b)];
            let gi = &inv_nodes[idx];
            let mut out = [0.0; 18];
            for k in 0..3 {
                for (s, &(i, j)) in SYM_PAIRS.iter().enumerate() {
                    let mut v = 0.0;
                    for dd in 0..3 {
                        let lowered = 0.5 * (d(i, j, dd) + d(j, i, dd) - d(dd, i, j));
                        v += gi[sym_index(k, dd)] * lowered;
                    }
                    out[k * 6 + s] = v;
                }
            }
            out
        })
        .collect();

    // Contracted symbols v_a = Γ^k_ak.
    let trace_nodes: Vec<[f64; 3]> = gamma_nodes
        .par_iter()
        .map(|gm| std::array::from_fn(|a| (0..3).map(|k| gm[k * 6 + sym_index(a, k)]).sum()))
        .collect();

    // R_ab = ∂_k Γ^k_ab − ∂_b Γ^k_ak + Γ^k_kl Γ^l_ab − Γ^k_bl Γ^l_ak
    let curvature: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let gm = &gamma_nodes[idx];
            let gam = |k: usize, i: usize, j: usize| gm[k * 6 + sym_index(i, j)];
            let gi = &inv_nodes[idx];
            let mut r = 0.0;
            for (s, &(a, b)) in SYM_PAIRS.iter().enumerate() {
                let mut ric = 0.0;
                for k in 0..3 {
                    ric += centered(&|m| gamma_nodes[m][k * 6 + s], idx, k);
                }
                ric -= centered(&|m| trace_nodes[m][a], idx, b);
                for k in 0..3 {
                    for l in 0..3 {
                        ric += gam(k, k, l) * gam(l, a, b) - gam(k, b, l) * gam(l, a, k);
                    }
                }
                let weight = if a == b { 1.0 } else { 2.0 };
                r += weight * gi[s] * ric;
            }
            r
        })
        .collect();

    let mut christoffel = vec![0.0; 18 * n];
    for (idx, gm) in gamma_nodes.iter().enumerate() {
        for c in 0..18 {
            christoffel[c * n + idx] = gm[c];
        }
    }

    Ok(Metric {
        grid: spec,
        g: g_components,
        g_inv: SymTensorField::from_nodes(spec, &inv_nodes),
        sqrt_det: ScalarField::new(spec, sqrt_det)?,
        christoffel,
        scalar_curvature: ScalarField::new(spec, curvature)?,
        curvature_shift: 0.0,
        scalar_op: OnceLock::new(),
        vector_op: OnceLock::new(),
        spectral: OnceLock::new(),
    })
}

impl Metric {
    /// The flat metric δ_ab.
    pub fn flat(grid: GridSpec) -> Metric {
        build_metric(grid, SymTensorField::identity(grid)).expect("identity is positive definite")
    }

    /// Copy of this metric whose scalar curvature field is `R + c`.
    ///
    /// The shift is synthetic: it changes `R` wherever it is read (the
    /// Lichnerowicz potential, the conformal operator, curvature bounds) but
    /// not the Christoffel symbols or any operator built from them.
    pub fn with_curvature_shift(&self, c: f64) -> Metric {
        let mut m = self.clone();
        let base = self.scalar_curvature.map(|r| r - self.curvature_shift);
        m.curvature_shift = c;
        m.scalar_curvature = base.map(|r| r + c);
        m
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn g(&self) -> &SymTensorField {
        &self.g
    }

    pub fn g_inv(&self) -> &SymTensorField {
        &self.g_inv
    }

    pub fn sqrt_det(&self) -> &ScalarField {
        &self.sqrt_det
    }

    pub fn scalar_curvature(&self) -> &ScalarField {
        &self.scalar_curvature
    }

    pub fn curvature_shift(&self) -> f64 {
        self.curvature_shift
    }

    /// Γ^k_ij at a node.
    #[inline]
    pub fn christoffel(&self, k: usize, i: usize, j: usize, idx: usize) -> f64 {
        let n = self.grid.node_count();
        self.christoffel[(k * 6 + sym_index(i, j)) * n + idx]
    }

    /// Nodal quadrature weights √g h³.
    pub fn volume_weights(&self) -> Vec<f64> {
        let h3 = self.grid.cell_volume();
        self.sqrt_det.values().iter().map(|s| s * h3).collect()
    }

    pub fn volume(&self) -> f64 {
        crate::par::det_sum(self.grid.node_count(), |i| self.sqrt_det.values()[i])
            * self.grid.cell_volume()
    }

    pub(crate) fn scalar_operator(&self) -> &ScalarOperator {
        self.scalar_op
            .get_or_init(|| ScalarOperator::assemble(self))
    }

    pub(crate) fn vector_operator(&self) -> &VectorOperator {
        self.vector_op
            .get_or_init(|| VectorOperator::assemble(self))
    }

    pub(crate) fn spectral(&self) -> &Spectral {
        self.spectral.get_or_init(|| Spectral::new(self.grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_determinant_of_random_spd() {
        let s = [2.0, 0.3, -0.1, 1.5, 0.2, 1.1];
        let inv = sym_inverse(&s);
        let a = crate::field::sym_to_full(&s);
        let b = crate::field::sym_to_full(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn flat_metric_has_trivial_derived_fields() {
        let grid = GridSpec::unit(8).unwrap();
        let m = Metric::flat(grid);
        assert!(m.scalar_curvature().max_abs() == 0.0);
        assert!(m.christoffel.iter().all(|&c| c == 0.0));
        assert!(m.sqrt_det().values().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn constant_rescale_is_flat_with_scaled_volume() {
        let grid = GridSpec::unit(8).unwrap();
        let c = 1.7_f64;
        let g = SymTensorField::from_fn(grid, |_| [c * c, 0.0, 0.0, c * c, 0.0, c * c]);
        let m = build_metric(grid, g).unwrap();
        assert!(m.scalar_curvature().max_abs() < 1e-12);
        for &s in m.sqrt_det().values() {
            assert!((s - c.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_metric_reports_node() {
        let grid = GridSpec::unit(8).unwrap();
        let bad = grid.index(2, 3, 4);
        let g = SymTensorField::from_fn(grid, |p| {
            let hit = (p[0] - 0.25).abs() < 1e-12
                && (p[1] - 0.375).abs() < 1e-12
                && (p[2] - 0.5).abs() < 1e-12;
            if hit {
                [1.0, 2.0, 0.0, 1.0, 0.0, 1.0]
            } else {
                [1.0, 0.0, 0.0, 1.0, 0.0, 1.0]
            }
        });
        assert_eq!(
            build_metric(grid, g).unwrap_err(),
            GeometryError::NonPositiveDefinite(bad)
        );
    }

    #[test]
    fn curvature_shift_replaces_previous_shift() {
        let grid = GridSpec::unit(8).unwrap();
        let m = Metric::flat(grid)
            .with_curvature_shift(1.0)
            .with_curvature_shift(2.5);
        assert!(m.scalar_curvature().values().iter().all(|&r| r == 2.5));
    }
}
