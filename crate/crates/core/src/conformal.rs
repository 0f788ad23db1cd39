//! Conformal changes of the data: ĝ = ψ⁴g, ŵ = ψ⁻⁶w.

use crate::error::GeometryError;
use crate::field::{ScalarField, SymTensorField};
use crate::metric::{build_metric, Metric};

fn check_positive(psi: &ScalarField) -> Result<(), GeometryError> {
    let min = psi.min();
    if min > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::NonPositive(min))
    }
}

/// ψ⁴g rebuilt through [`build_metric`], so every derived field is recomputed
/// by finite differences. A synthetic curvature shift on `m` is not carried
/// over, since it has no conformally covariant counterpart.
pub fn conformal_transform(m: &Metric, psi: &ScalarField) -> Result<Metric, GeometryError> {
    if m.grid() != psi.grid() {
        return Err(GeometryError::GridMismatch);
    }
    check_positive(psi)?;
    let grid = *m.grid();
    let mut comps = m.g().as_slice().to_vec();
    let n = grid.node_count();
    let p = psi.values();
    for c in 0..SymTensorField::COMPONENTS {
        for i in 0..n {
            comps[c * n + i] *= p[i].powi(4);
        }
    }
    build_metric(grid, SymTensorField::new(grid, comps)?)
}

/// ŵ = ψ⁻⁶w.
pub fn transform_w(psi: &ScalarField, w: &ScalarField) -> Result<ScalarField, GeometryError> {
    check_positive(psi)?;
    psi.zip_map(w, |p, w| w * p.powi(-6))
}
