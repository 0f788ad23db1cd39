use serde::{Deserialize, Serialize};

use super::{
    blend, certify, map_t_with, relative_change, Certificate, ConstraintData, SolverSettings,
    TOutput, WarmStart,
};
use crate::error::CoupledError;
use crate::field::{OneFormField, ScalarField};

#[derive(Clone, Debug)]
pub struct PicardConfig {
    pub relax: f64,
    /// Stop when ‖φ_{n+1} − φ_n‖_∞ ≤ tol·‖φ_n‖_∞.
    pub tol: f64,
    pub max_iter: usize,
    /// sup φ above this is reported as blow-up.
    pub ceiling: f64,
    pub certify_tol: f64,
    pub solvers: SolverSettings,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            relax: 0.5,
            tol: 1e-10,
            max_iter: 200,
            ceiling: 1e6,
            certify_tol: super::CERTIFY_TOLERANCE,
            solvers: SolverSettings::default(),
        }
    }
}

impl PicardConfig {
    pub(crate) fn validate(&self) -> Result<(), CoupledError> {
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return Err(CoupledError::InvalidData(format!(
                "relax must lie in (0, 1], got {}",
                self.relax
            )));
        }
        if !(self.tol > 0.0)
            || !(self.certify_tol > 0.0)
            || !(self.ceiling > 0.0)
            || self.max_iter == 0
        {
            return Err(CoupledError::InvalidData(
                "tolerances, ceiling and max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardRecord {
    pub iteration: usize,
    pub sup_phi: f64,
    pub change: f64,
    pub lw_l2: f64,
    pub lich_iterations: usize,
    pub vector_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub phi: ScalarField,
    pub w_field: OneFormField,
    pub certificate: Certificate,
    pub records: Vec<PicardRecord>,
    /// Number of applications of T.
    pub iterations: usize,
    pub lw_l2: f64,
}

/// Relaxed iteration of φ ↦ scale·T_{τ_factor}(φ). Returns the last image of T, its
/// W and the number of applications.
pub(crate) fn iterate_scaled(
    data: &ConstraintData,
    phi0: &ScalarField,
    scale: f64,
    tau_factor: f64,
    warm: &mut WarmStart,
    cfg: &PicardConfig,
    records: &mut Vec<PicardRecord>,
) -> Result<(ScalarField, TOutput), CoupledError> {
    cfg.validate()?;
    let min = phi0.min();
    if min < 0.0 {
        return Err(crate::error::VectorError::NegativePhi(min).into());
    }
    let mut phi = phi0.clone();
    let mut last_change = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let out = map_t_with(data, &phi, tau_factor, warm, &cfg.solvers)?;
        *warm = WarmStart::from_output(&out);
        let image = if scale == 1.0 {
            out.psi.clone()
        } else {
            out.psi.scaled(scale)
        };
        let next = blend(&phi, &image, cfg.relax);
        let change = relative_change(&next, &phi);
        let sup_phi = next.max();
        records.push(PicardRecord {
            iteration: it,
            sup_phi,
            change,
            lw_l2: out.lw_l2,
            lich_iterations: out.lich.iterations,
            vector_iterations: out.vector.iterations,
        });
        if !(sup_phi <= cfg.ceiling) {
            return Err(CoupledError::BlowUp { sup: sup_phi });
        }
        if change <= cfg.tol {
            return Ok((image, out));
        }
        last_change = change;
        phi = next;
    }
    Err(CoupledError::NoConvergence {
        iterations: cfg.max_iter,
        last_change,
    })
}

/// Solve φ = T(φ) by relaxed Picard iteration from `phi0` and certify the result.
pub fn picard_solve(
    data: &ConstraintData,
    phi0: &ScalarField,
    cfg: &PicardConfig,
) -> Result<PicardSolution, CoupledError> {
    let mut records = Vec::new();
    let mut warm = WarmStart::default();
    let (phi, out) = iterate_scaled(data, phi0, 1.0, 1.0, &mut warm, cfg, &mut records)?;
    let certificate = certify(data, &phi, &out.w_field, cfg.certify_tol)?;
    if !certificate.certified {
        return Err(CoupledError::NotASolution {
            lich: certificate.lich_residual,
            vector: certificate.vector_residual,
        });
    }
    Ok(PicardSolution {
        phi,
        w_field: out.w_field,
        certificate,
        iterations: records.len(),
        records,
        lw_l2: out.lw_l2,
    })
}
