//! The vector equation −½L*LW = (2/3)φ⁶ξ.

use std::sync::Arc;

use rayon::prelude::*;

use crate::eigen::{apply_vector_mass, vector_preconditioner};
use crate::error::{GeometryError, VectorError};
use crate::field::{OneFormField, ScalarField, SymTensorField};
use crate::krylov::{pcg, CgSettings};
use crate::metric::Metric;
use crate::ops::{
    conformal_killing, half_lstar_l, integrate, one_form_inner, one_form_l2, tensor_norm2,
};

/// Overlap with the kernel above which a solution is rejected.
pub const KERNEL_CONTAMINATION: f64 = 1e-6;

/// Projected right-hand sides below this fraction of the full one count as zero.
pub const PROJECTION_ROUNDOFF: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct VectorProblem {
    metric: Arc<Metric>,
    rhs: OneFormField,
    kernel: Arc<[OneFormField]>,
}

impl VectorProblem {
    /// `kernel` must be L²-orthonormal, e.g. the output of [`crate::ckv_kernel`].
    pub fn new(
        metric: Arc<Metric>,
        rhs: OneFormField,
        kernel: Arc<[OneFormField]>,
    ) -> Result<Self, VectorError> {
        if rhs.grid() != metric.grid() || kernel.iter().any(|k| k.grid() != metric.grid()) {
            return Err(GeometryError::GridMismatch.into());
        }
        Ok(Self {
            metric,
            rhs,
            kernel,
        })
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn rhs(&self) -> &OneFormField {
        &self.rhs
    }

    pub fn kernel(&self) -> &[OneFormField] {
        &self.kernel
    }
}

#[derive(Clone, Debug)]
pub struct VectorConfig {
    /// Relative L² residual target.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_guess: Option<OneFormField>,
}

impl Default for VectorConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            initial_guess: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VectorSolveReport {
    pub w_field: OneFormField,
    /// ‖½L*LW + rhs_⊥‖ / ‖rhs_⊥‖ in L², zero when rhs_⊥ vanishes.
    pub rel_residual: f64,
    /// ‖rhs − rhs_⊥‖ / ‖rhs‖ in L².
    pub projected_rhs_fraction: f64,
    pub iterations: usize,
}

/// (2/3)φ⁶ξ.
pub fn assemble_rhs(
    metric: &Metric,
    phi: &ScalarField,
    xi: &OneFormField,
) -> Result<OneFormField, VectorError> {
    if phi.grid() != metric.grid() || xi.grid() != metric.grid() {
        return Err(GeometryError::GridMismatch.into());
    }
    let min = phi.min();
    if min < 0.0 {
        return Err(VectorError::NegativePhi(min));
    }
    let n = metric.grid().node_count();
    let p = phi.values();
    let data: Vec<f64> = xi
        .as_slice()
        .par_iter()
        .enumerate()
        .map(|(k, x)| (2.0 / 3.0) * p[k % n].powi(6) * x)
        .collect();
    Ok(OneFormField::new(*metric.grid(), data)?)
}

/// Remove the L² projection onto an orthonormal family.
pub fn project_out(
    metric: &Metric,
    v: &OneFormField,
    family: &[OneFormField],
) -> Result<OneFormField, GeometryError> {
    let mut out = v.clone();
    for k in family {
        let c = one_form_inner(metric, &out, k)?;
        out = out.add_scaled(-c, k)?;
    }
    Ok(out)
}

fn kernel_overlap(
    metric: &Metric,
    v: &OneFormField,
    family: &[OneFormField],
) -> Result<f64, GeometryError> {
    let norm = one_form_l2(metric, v)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for k in family {
        let c = one_form_inner(metric, v, k)?;
        s += c * c;
    }
    Ok(s.sqrt() / norm)
}

/// Solve ½L*LW = −rhs_⊥ with W orthogonal to the kernel.
pub fn solve_vector(
    p: &VectorProblem,
    cfg: &VectorConfig,
) -> Result<VectorSolveReport, VectorError> {
    let m = &*p.metric;
    let grid = *m.grid();
    let rhs_norm = one_form_l2(m, &p.rhs)?;
    let rhs_p = project_out(m, &p.rhs, &p.kernel)?;
    let rhs_p_norm = one_form_l2(m, &rhs_p)?;
    let projected_rhs_fraction = if rhs_norm > 0.0 {
        one_form_l2(m, &p.rhs.add_scaled(-1.0, &rhs_p)?)? / rhs_norm
    } else {
        0.0
    };
    // A right-hand side inside the kernel leaves only roundoff after projection.
    if rhs_p_norm <= PROJECTION_ROUNDOFF * rhs_norm {
        return Ok(VectorSolveReport {
            w_field: OneFormField::zeros(grid),
            rel_residual: 0.0,
            projected_rhs_fraction,
            iterations: 0,
        });
    }
    // K W = −M rhs_⊥
    let len = rhs_p.as_slice().len();
    let mut b = vec![0.0; len];
    apply_vector_mass(m, rhs_p.as_slice(), &mut b);
    b.iter_mut().for_each(|v| *v = -*v);
    let mut x = match &cfg.initial_guess {
        Some(g) if g.grid() == &grid => project_out(m, g, &p.kernel)?.into_vec(),
        _ => vec![0.0; len],
    };
    let op = m.vector_operator();
    let precond = vector_preconditioner(m, 0.0);
    let mut rel_tol = 0.3 * cfg.tol;
    let mut iterations = 0;
    let mut rel_residual = f64::INFINITY;
    let mut w_field = OneFormField::zeros(grid);
    for _ in 0..4 {
        let stats = pcg(
            |v, out| op.stencil.apply(v, out),
            &precond,
            &b,
            &mut x,
            CgSettings {
                rel_tol,
                max_iter: cfg.max_iter,
            },
        )?;
        iterations += stats.iterations;
        w_field = project_out(m, &OneFormField::new(grid, x.clone())?, &p.kernel)?;
        let res = half_lstar_l(m, &w_field)?.add_scaled(1.0, &rhs_p)?;
        rel_residual = one_form_l2(m, &res)? / rhs_p_norm;
        if rel_residual <= cfg.tol {
            break;
        }
        rel_tol *= 0.1;
        x = w_field.as_slice().to_vec();
    }
    if rel_residual > cfg.tol {
        return Err(VectorError::Tolerance {
            residual: rel_residual,
            tolerance: cfg.tol,
        });
    }
    let overlap = kernel_overlap(m, &w_field, &p.kernel)?;
    if overlap > KERNEL_CONTAMINATION {
        return Err(VectorError::KernelContamination(overlap));
    }
    Ok(VectorSolveReport {
        w_field,
        rel_residual,
        projected_rhs_fraction,
        iterations,
    })
}

#[derive(Clone, Debug)]
pub struct LwNorms {
    pub l2: f64,
    pub sup: f64,
    pub lw: SymTensorField,
}

/// LW with its L² and sup norms under g.
pub fn lw_norms(metric: &Metric, w_field: &OneFormField) -> Result<LwNorms, GeometryError> {
    let lw = conformal_killing(metric, w_field)?;
    let n2 = tensor_norm2(metric, &lw)?;
    let l2 = integrate(metric, &n2)?.max(0.0).sqrt();
    let sup = n2.max().max(0.0).sqrt();
    Ok(LwNorms { l2, sup, lw })
}
