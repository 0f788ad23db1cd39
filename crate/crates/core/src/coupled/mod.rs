//! Fixed-point machinery for the coupled system: the map T, Picard iteration,
//! continuation in t, defect maps and blow-up diagnostics.

mod apriori;
mod continuation;
mod defect;
mod picard;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eigen::{ckv_kernel, yamabe_sign, YamabeEstimate, YamabeSign};
use crate::error::{CoupledError, GeometryError};
use crate::field::{OneFormField, ScalarField, SymTensorField};
use crate::fixtures::Fixture;
use crate::grid::GridSpec;
use crate::lichnerowicz::{self, LichConfig, LichSolveReport, LichnerowiczProblem, ZERO_THRESHOLD};
use crate::metric::Metric;
use crate::ops::{centered_gradient, conformal_killing, half_lstar_l, one_form_l2, tensor_norm2};
use crate::vector::{self, project_out, VectorConfig, VectorProblem, VectorSolveReport};

pub use apriori::{apriori_monitor, ibp_identity, AprioriReport, IbpReport};
pub use continuation::{
    limit_diagnostic, modified_continuation_t12, schaefer_continuation, ContinuationConfig,
    ContinuationOutcome, ContinuationRecord, ContinuationTrace, LimitDiagnostic,
    ModifiedContinuation, TailEntry,
};
pub use defect::{
    far_cmc_defect_iterate, kappa_bounds, local_supersolution_check, local_supersolution_solve,
    near_cmc_defect_iterate, truncation_bound, DefectConfig, DefectExtras, DefectKind,
    DefectOutcome, DefectRecord, DefectReport, ProbeResult, SupersolutionCheck,
};
pub use picard::{picard_solve, PicardConfig, PicardRecord, PicardSolution};

/// Eigenvalues of ½L*L below this count as conformal Killing fields.
pub const CKV_TOLERANCE: f64 = 1e-6;

/// Standing assumptions of the existence theory, evaluated on the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    pub ckv_kernel_dim: usize,
    pub yamabe_sign: YamabeSign,
    pub yamabe_lambda1: f64,
    pub sigma_nontrivial: bool,
    pub tau_zero_fraction: f64,
}

/// (g, τ, σ, ξ) with the kernel of L and the Yamabe estimate precomputed.
#[derive(Clone, Debug)]
pub struct ConstraintData {
    metric: Arc<Metric>,
    tau: ScalarField,
    sigma: SymTensorField,
    xi: OneFormField,
    kernel: Arc<[OneFormField]>,
    yamabe: YamabeEstimate,
    flags: AssumptionFlags,
}

impl ConstraintData {
    /// `xi` defaults to the centered-difference dτ.
    pub fn new(
        metric: Arc<Metric>,
        tau: ScalarField,
        sigma: SymTensorField,
        xi: Option<OneFormField>,
    ) -> Result<Self, CoupledError> {
        let kernel: Arc<[OneFormField]> = Arc::from(ckv_kernel(&metric, CKV_TOLERANCE)?);
        let yamabe = yamabe_sign(&metric)?;
        Self::with_precomputed(metric, tau, sigma, xi, kernel, yamabe)
    }

    /// Skips the eigen solves; `kernel` must be an L²-orthonormal basis of ker L
    /// for `metric` and `yamabe` its estimate.
    pub fn with_precomputed(
        metric: Arc<Metric>,
        tau: ScalarField,
        sigma: SymTensorField,
        xi: Option<OneFormField>,
        kernel: Arc<[OneFormField]>,
        yamabe: YamabeEstimate,
    ) -> Result<Self, CoupledError> {
        let grid = *metric.grid();
        if tau.grid() != &grid
            || sigma.grid() != &grid
            || xi.as_ref().is_some_and(|x| x.grid() != &grid)
        {
            return Err(GeometryError::GridMismatch.into());
        }
        if !tau.all_finite() || !sigma.all_finite() || xi.as_ref().is_some_and(|x| !x.all_finite())
        {
            return Err(CoupledError::InvalidData("non-finite field values".into()));
        }
        let xi = xi.unwrap_or_else(|| centered_gradient(&tau));
        let sigma_nontrivial = sigma.max_abs() > ZERO_THRESHOLD;
        if !sigma_nontrivial && yamabe.sign != YamabeSign::Negative {
            return Err(CoupledError::InvalidData(format!(
                "sigma must not vanish identically when the Yamabe invariant is nonnegative (sign {:?})",
                yamabe.sign
            )));
        }
        let zeros = tau
            .values()
            .iter()
            .filter(|t| t.abs() <= ZERO_THRESHOLD)
            .count();
        let flags = AssumptionFlags {
            ckv_kernel_dim: kernel.len(),
            yamabe_sign: yamabe.sign,
            yamabe_lambda1: yamabe.lambda1,
            sigma_nontrivial,
            tau_zero_fraction: zeros as f64 / grid.node_count() as f64,
        };
        Ok(Self {
            metric,
            tau,
            sigma,
            xi,
            kernel,
            yamabe,
            flags,
        })
    }

    pub fn from_fixture(fixture: &Fixture, grid: GridSpec) -> Result<Self, CoupledError> {
        let f = fixture.build(grid)?;
        Self::new(Arc::new(f.metric), f.tau, f.sigma, f.xi)
    }

    /// Same metric and precomputed spectra with new (τ, σ, ξ).
    pub fn with_fields(
        &self,
        tau: ScalarField,
        sigma: SymTensorField,
        xi: OneFormField,
    ) -> Result<Self, CoupledError> {
        Self::with_precomputed(
            self.metric.clone(),
            tau,
            sigma,
            Some(xi),
            self.kernel.clone(),
            self.yamabe,
        )
    }

    /// (g, C²τ, σ/C⁴) with ξ scaled like τ.
    pub fn rescaled(&self, c: f64) -> Result<Self, CoupledError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(CoupledError::InvalidData(format!(
                "scaling constant must be positive, got {c}"
            )));
        }
        self.with_fields(
            self.tau.scaled(c * c),
            self.sigma.scaled(c.powi(-4)),
            self.xi.scaled(c * c),
        )
    }

    /// (g, ατ, σ) with ξ scaled like τ.
    pub fn with_tau_scaled(&self, alpha: f64) -> Result<Self, CoupledError> {
        self.with_fields(
            self.tau.scaled(alpha),
            self.sigma.clone(),
            self.xi.scaled(alpha),
        )
    }

    pub fn with_sigma_scaled(&self, s: f64) -> Result<Self, CoupledError> {
        self.with_fields(self.tau.clone(), self.sigma.scaled(s), self.xi.clone())
    }

    pub fn with_xi(&self, xi: OneFormField) -> Result<Self, CoupledError> {
        self.with_fields(self.tau.clone(), self.sigma.clone(), xi)
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn metric_arc(&self) -> &Arc<Metric> {
        &self.metric
    }

    pub fn grid(&self) -> &GridSpec {
        self.metric.grid()
    }

    pub fn tau(&self) -> &ScalarField {
        &self.tau
    }

    pub fn sigma(&self) -> &SymTensorField {
        &self.sigma
    }

    pub fn xi(&self) -> &OneFormField {
        &self.xi
    }

    pub fn kernel(&self) -> &[OneFormField] {
        &self.kernel
    }

    pub fn kernel_arc(&self) -> &Arc<[OneFormField]> {
        &self.kernel
    }

    pub fn yamabe(&self) -> YamabeEstimate {
        self.yamabe
    }

    pub fn flags(&self) -> AssumptionFlags {
        self.flags
    }
}

/// Inner solver settings shared by every driver.
#[derive(Clone, Debug, Default)]
pub struct SolverSettings {
    pub lich: LichConfig,
    pub vector: VectorConfig,
}

/// One application of T.
#[derive(Clone, Debug)]
pub struct TOutput {
    pub psi: ScalarField,
    pub w_field: OneFormField,
    /// ‖LW‖_{L²}
    pub lw_l2: f64,
    /// ‖LW‖_∞
    pub lw_sup: f64,
    pub lich: LichSolveReport,
    pub vector: VectorSolveReport,
}

/// Warm starts carried between successive applications of T.
#[derive(Clone, Debug, Default)]
pub struct WarmStart {
    pub psi: Option<ScalarField>,
    pub w_field: Option<OneFormField>,
}

impl WarmStart {
    pub fn from_output(out: &TOutput) -> Self {
        Self {
            psi: Some(out.psi.clone()),
            w_field: Some(out.w_field.clone()),
        }
    }
}

/// w = |σ + LW|_g.
pub fn source_magnitude(
    data: &ConstraintData,
    w_field: &OneFormField,
) -> Result<ScalarField, GeometryError> {
    let lw = conformal_killing(&data.metric, w_field)?;
    let s = data.sigma.add_scaled(1.0, &lw)?;
    Ok(tensor_norm2(&data.metric, &s)?.map(|v| v.max(0.0).sqrt()))
}

/// T(φ): vector solve with source (2/3)φ⁶ξ, then the Lichnerowicz solve with
/// w = |σ + LW| and τ replaced by `tau_factor`·τ.
pub fn map_t_with(
    data: &ConstraintData,
    phi: &ScalarField,
    tau_factor: f64,
    warm: &WarmStart,
    settings: &SolverSettings,
) -> Result<TOutput, CoupledError> {
    let rhs = vector::assemble_rhs(&data.metric, phi, &data.xi)?;
    let vp = VectorProblem::new(data.metric.clone(), rhs, data.kernel.clone())?;
    let mut vcfg = settings.vector.clone();
    if vcfg.initial_guess.is_none() {
        vcfg.initial_guess = warm.w_field.clone();
    }
    let vrep = vector::solve_vector(&vp, &vcfg)?;
    let norms = vector::lw_norms(&data.metric, &vrep.w_field)?;
    let s = data.sigma.add_scaled(1.0, &norms.lw)?;
    let w = tensor_norm2(&data.metric, &s)?.map(|v| v.max(0.0).sqrt());
    let tau = if tau_factor == 1.0 {
        data.tau.clone()
    } else {
        data.tau.scaled(tau_factor)
    };
    let lp = LichnerowiczProblem::new(data.metric.clone(), tau, w)?.with_yamabe(data.yamabe);
    let mut lcfg = settings.lich.clone();
    if lcfg.initial_guess.is_none() {
        lcfg.initial_guess = warm.psi.clone();
    }
    let lrep = lichnerowicz::solve(&lp, &lcfg)?;
    Ok(TOutput {
        psi: lrep.u.clone(),
        w_field: vrep.w_field.clone(),
        lw_l2: norms.l2,
        lw_sup: norms.sup,
        lich: lrep,
        vector: vrep,
    })
}

pub fn map_t(
    data: &ConstraintData,
    phi: &ScalarField,
    settings: &SolverSettings,
) -> Result<TOutput, CoupledError> {
    map_t_with(data, phi, 1.0, &WarmStart::default(), settings)
}

/// Residuals of both equations evaluated from scratch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// sup |Lichnerowicz residual| over max(‖w²φ⁻⁷‖_∞, ‖(2/3)τ²φ⁵‖_∞).
    pub lich_residual: f64,
    /// ‖½L*LW + (2/3)φ⁶ξ_⊥‖_{L²} / ‖(2/3)φ⁶ξ_⊥‖_{L²}; absolute when the source vanishes.
    pub vector_residual: f64,
    /// Fraction of the vector source lying in the kernel of L.
    pub projected_rhs_fraction: f64,
    pub tolerance: f64,
    pub certified: bool,
}

/// Default certification threshold.
pub const CERTIFY_TOLERANCE: f64 = 1e-8;

pub fn certify(
    data: &ConstraintData,
    phi: &ScalarField,
    w_field: &OneFormField,
    tol: f64,
) -> Result<Certificate, CoupledError> {
    let m = &*data.metric;
    let w = source_magnitude(data, w_field)?;
    let lp = LichnerowiczProblem::new(data.metric.clone(), data.tau.clone(), w.clone())?;
    let res = lichnerowicz::residual(&lp, phi)?;
    let scale = phi
        .values()
        .iter()
        .zip(w.values())
        .zip(data.tau.values())
        .map(|((&u, &w), &t)| (w * w * u.powi(-7)).max((2.0 / 3.0) * t * t * u.powi(5)))
        .fold(f64::MIN_POSITIVE, f64::max);
    let lich_residual = res.max_abs() / scale;

    let rhs = vector::assemble_rhs(m, phi, &data.xi)?;
    let rhs_norm = one_form_l2(m, &rhs)?;
    let rhs_p = project_out(m, &rhs, &data.kernel)?;
    let rhs_p_norm = one_form_l2(m, &rhs_p)?;
    let projected_rhs_fraction = if rhs_norm > 0.0 {
        one_form_l2(m, &rhs.add_scaled(-1.0, &rhs_p)?)? / rhs_norm
    } else {
        0.0
    };
    let vres = one_form_l2(m, &half_lstar_l(m, w_field)?.add_scaled(1.0, &rhs_p)?)?;
    let denom = rhs_p_norm.max(vector::PROJECTION_ROUNDOFF * rhs_norm);
    let vector_residual = if denom > 0.0 { vres / denom } else { vres };
    let certified = lich_residual <= tol && vector_residual <= tol && lich_residual.is_finite();
    Ok(Certificate {
        lich_residual,
        vector_residual,
        projected_rhs_fraction,
        tolerance: tol,
        certified,
    })
}

pub(crate) fn relative_change(new: &ScalarField, old: &ScalarField) -> f64 {
    let diff = new
        .values()
        .iter()
        .zip(old.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let base = old.max_abs();
    if base > 0.0 {
        diff / base
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub(crate) fn blend(old: &ScalarField, new: &ScalarField, relax: f64) -> ScalarField {
    if relax == 1.0 {
        return new.clone();
    }
    old.zip_map(new, |a, b| (1.0 - relax) * a + relax * b)
        .expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::bumpy_metric;

    #[test]
    fn sigma_required_for_nonnegative_yamabe() {
        let grid = GridSpec::unit(8).unwrap();
        let m = Arc::new(Metric::flat(grid));
        let err = ConstraintData::new(
            m,
            ScalarField::constant(grid, 1.0),
            SymTensorField::zeros(grid),
            None,
        );
        assert!(matches!(err, Err(CoupledError::InvalidData(_))));
    }

    #[test]
    fn t_of_zero_ignores_the_vector_equation() {
        let grid = GridSpec::unit(8).unwrap();
        let data =
            ConstraintData::from_fixture(&crate::fixtures::lookup("benchmark").unwrap(), grid)
                .unwrap();
        let out = map_t(&data, &ScalarField::zeros(grid), &SolverSettings::default()).unwrap();
        assert_eq!(out.w_field.max_abs(), 0.0);
        assert!(out.psi.min() > 0.0);
        let _ = bumpy_metric;
    }
}
