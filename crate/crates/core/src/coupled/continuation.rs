use serde::{Deserialize, Serialize};

use super::picard::{iterate_scaled, PicardConfig, PicardRecord};
use super::{certify, Certificate, ConstraintData, WarmStart};
use crate::eigen::YamabeSign;
use crate::error::CoupledError;
use crate::field::{OneFormField, ScalarField};
use crate::ops::{conformal_killing, half_lstar_l, integrate, one_form_l2, tensor_norm2};

#[derive(Clone, Debug)]
pub struct ContinuationConfig {
    pub picard: PicardConfig,
    /// Largest admissible ratio of sup φ between consecutive t.
    pub growth_limit: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            picard: PicardConfig::default(),
            growth_limit: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationOutcome {
    ConvergedFull,
    BlowUp,
    Stagnated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRecord {
    pub t: f64,
    pub sup_phi: f64,
    /// sup of the last image of T before scaling by t.
    pub sup_psi: f64,
    pub picard_iters: usize,
    pub lich_residual: f64,
    pub vector_residual: f64,
    pub lw_l2: f64,
    pub converged: bool,
}

/// A converged point on the continuation path, φ = tψ.
#[derive(Clone, Debug)]
pub struct TailEntry {
    pub t: f64,
    pub phi: ScalarField,
    pub w_field: OneFormField,
}

#[derive(Clone, Debug)]
pub struct ContinuationTrace {
    pub records: Vec<ContinuationRecord>,
    pub outcome: ContinuationOutcome,
    /// Converged states with t > 0, in order.
    pub tail: Vec<TailEntry>,
    /// Certificate of the t = 1 state when it was reached.
    pub certificate: Option<Certificate>,
    pub failure: Option<String>,
}

impl ContinuationTrace {
    pub fn final_state(&self) -> Option<&TailEntry> {
        match self.outcome {
            ContinuationOutcome::ConvergedFull => self.tail.last(),
            _ => None,
        }
    }
}

fn check_t_grid(t_grid: &[f64], must_end_at_one: bool) -> Result<(), CoupledError> {
    if t_grid.is_empty() {
        return Err(CoupledError::InvalidData("t grid is empty".into()));
    }
    if t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoupledError::InvalidData(
            "t grid must be strictly increasing inside [0, 1]".into(),
        ));
    }
    if must_end_at_one && *t_grid.last().unwrap() != 1.0 {
        return Err(CoupledError::InvalidData("t grid must end at 1".into()));
    }
    Ok(())
}

struct Step {
    phi: ScalarField,
    record: ContinuationRecord,
    w_field: OneFormField,
}

fn run_step(
    data: &ConstraintData,
    t: f64,
    tau_factor: f64,
    phi0: &ScalarField,
    warm: &mut WarmStart,
    cfg: &PicardConfig,
) -> Result<Step, (CoupledError, usize)> {
    let mut records: Vec<PicardRecord> = Vec::new();
    match iterate_scaled(data, phi0, t, tau_factor, warm, cfg, &mut records) {
        Ok((phi, out)) => Ok(Step {
            record: ContinuationRecord {
                t,
                sup_phi: phi.max(),
                sup_psi: out.psi.max(),
                picard_iters: records.len(),
                lich_residual: out.lich.relative_residual(),
                vector_residual: out.vector.rel_residual,
                lw_l2: out.lw_l2,
                converged: true,
            },
            phi,
            w_field: out.w_field,
        }),
        Err(e) => Err((e, records.len())),
    }
}

fn failed_record(t: f64, iters: usize) -> ContinuationRecord {
    ContinuationRecord {
        t,
        sup_phi: f64::NAN,
        sup_psi: f64::NAN,
        picard_iters: iters,
        lich_residual: f64::NAN,
        vector_residual: f64::NAN,
        lw_l2: f64::NAN,
        converged: false,
    }
}

fn initial_guess(
    prev: Option<&(f64, ScalarField)>,
    t: f64,
    grid: crate::grid::GridSpec,
) -> ScalarField {
    match prev {
        Some((tp, phi)) if *tp > 0.0 => phi.scaled(t / tp),
        _ => ScalarField::zeros(grid),
    }
}

/// Follow the fixed points of φ = tT(φ) along `t_grid`, warm-starting each t
/// from the previous one.
pub fn schaefer_continuation(
    data: &ConstraintData,
    t_grid: &[f64],
    cfg: &ContinuationConfig,
) -> Result<ContinuationTrace, CoupledError> {
    check_t_grid(t_grid, true)?;
    cfg.picard.validate()?;
    let grid = *data.grid();
    let mut records = Vec::new();
    let mut tail = Vec::new();
    let mut warm = WarmStart::default();
    let mut prev: Option<(f64, ScalarField)> = None;
    for &t in t_grid {
        if t == 0.0 {
            records.push(ContinuationRecord {
                t,
                sup_phi: 0.0,
                sup_psi: 0.0,
                picard_iters: 0,
                lich_residual: 0.0,
                vector_residual: 0.0,
                lw_l2: 0.0,
                converged: true,
            });
            prev = Some((0.0, ScalarField::zeros(grid)));
            continue;
        }
        let phi0 = initial_guess(prev.as_ref(), t, grid);
        let step = match run_step(data, t, 1.0, &phi0, &mut warm, &cfg.picard) {
            Ok(s) => s,
            Err((e, iters)) => {
                records.push(failed_record(t, iters));
                let outcome = match e {
                    CoupledError::BlowUp { .. } => ContinuationOutcome::BlowUp,
                    _ => ContinuationOutcome::Stagnated,
                };
                return Ok(ContinuationTrace {
                    records,
                    outcome,
                    tail,
                    certificate: None,
                    failure: Some(e.to_string()),
                });
            }
        };
        let sup = step.record.sup_phi;
        records.push(step.record);
        tail.push(TailEntry {
            t,
            phi: step.phi.clone(),
            w_field: step.w_field,
        });
        if let Some((_, p)) = &prev {
            let before = p.max();
            if before > 0.0 && sup / before > cfg.growth_limit {
                return Ok(ContinuationTrace {
                    records,
                    outcome: ContinuationOutcome::BlowUp,
                    tail,
                    certificate: None,
                    failure: Some(format!(
                        "sup phi grew by {:.3e} between consecutive t",
                        sup / before
                    )),
                });
            }
        }
        prev = Some((t, step.phi));
    }
    let last = tail.last().expect("t grid ends at 1");
    let certificate = certify(data, &last.phi, &last.w_field, cfg.picard.certify_tol)?;
    let (outcome, failure) = if certificate.certified {
        (ContinuationOutcome::ConvergedFull, None)
    } else {
        (
            ContinuationOutcome::Stagnated,
            Some("final state failed certification".to_string()),
        )
    };
    Ok(ContinuationTrace {
        records,
        outcome,
        tail,
        certificate: Some(certificate),
        failure,
    })
}

#[derive(Clone, Debug)]
pub struct ModifiedContinuation {
    /// α = t₀⁶
    pub alpha: f64,
    pub t0: f64,
    /// ψ₀ = φ₀/t₀, a solution for the data (g, ατ, σ).
    pub psi: ScalarField,
    pub w_field: OneFormField,
    pub certificate: Certificate,
    pub records: Vec<ContinuationRecord>,
    /// First t at which the sweep stopped, with the reason.
    pub stopped: Option<(f64, String)>,
}

/// Sweep t upward over the family φ = tψ, where ψ solves the Lichnerowicz
/// equation with τ² replaced by t¹²τ² and W is driven by φ. The largest t₀
/// reached yields a solution for (g, t₀⁶τ, σ).
pub fn modified_continuation_t12(
    data: &ConstraintData,
    t_grid: &[f64],
    cfg: &ContinuationConfig,
) -> Result<ModifiedContinuation, CoupledError> {
    check_t_grid(t_grid, false)?;
    cfg.picard.validate()?;
    let flags = data.flags();
    if flags.yamabe_sign != YamabeSign::Positive {
        return Err(CoupledError::Precondition(format!(
            "the Yamabe invariant must be positive (estimate {:?}, lambda1 = {:.6e})",
            flags.yamabe_sign, flags.yamabe_lambda1
        )));
    }
    if flags.ckv_kernel_dim > 0 {
        return Err(CoupledError::Precondition(format!(
            "the metric has {} conformal Killing fields",
            flags.ckv_kernel_dim
        )));
    }
    let grid = *data.grid();
    let mut records = Vec::new();
    let mut warm = WarmStart::default();
    let mut prev: Option<(f64, ScalarField)> = None;
    let mut best: Option<(f64, ScalarField, OneFormField)> = None;
    let mut stopped = None;
    for &t in t_grid.iter().filter(|t| **t > 0.0) {
        let phi0 = initial_guess(prev.as_ref(), t, grid);
        match run_step(data, t, t.powi(6), &phi0, &mut warm, &cfg.picard) {
            Ok(step) => {
                records.push(step.record);
                prev = Some((t, step.phi.clone()));
                best = Some((t, step.phi, step.w_field));
            }
            Err((e, iters)) => {
                records.push(failed_record(t, iters));
                stopped = Some((t, e.to_string()));
                break;
            }
        }
    }
    let (t0, phi, w_field) = best.ok_or(CoupledError::NotFound)?;
    let alpha = t0.powi(6);
    let psi = phi.scaled(1.0 / t0);
    let target = data.with_tau_scaled(alpha)?;
    let certificate = certify(&target, &psi, &w_field, cfg.picard.certify_tol)?;
    Ok(ModifiedContinuation {
        alpha,
        t0,
        psi,
        w_field,
        certificate,
        records,
        stopped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitDiagnostic {
    /// t⁶ of the last tail entry.
    pub alpha0: f64,
    /// ‖ψ‖_∞ of the last tail entry.
    pub gamma: f64,
    /// γ_last / γ_first across the tail.
    pub gamma_growth: f64,
    /// ‖ψ̃ − (√(3/2)|LW̃|/τ)^{1/6}‖_∞
    pub profile_error: f64,
    /// ‖½L*LW̃ + α₀√(2/3)|LW̃|ξ/τ‖_{L²} / ‖LW̃‖_{L²}; infinite when LW̃ vanishes.
    pub limit_residual: f64,
    /// ‖σ̃‖_∞ = ‖σ‖_∞/γ⁶
    pub sigma_tilde_sup: f64,
}

/// Rescale the last entry of a blowing-up tail and compare it with the limit
/// equation and its predicted profile.
pub fn limit_diagnostic(
    data: &ConstraintData,
    tail: &[TailEntry],
) -> Result<LimitDiagnostic, CoupledError> {
    let tau_min = data.tau().min();
    if !(tau_min > 0.0) {
        return Err(CoupledError::TauNotPositive(tau_min));
    }
    if tail.len() < 2 {
        return Err(CoupledError::InsufficientBlowUp(1.0));
    }
    if let Some(e) = tail.iter().find(|e| !(e.t > 0.0 && e.t <= 1.0)) {
        return Err(CoupledError::InvalidData(format!(
            "tail entry with t = {} outside (0, 1]",
            e.t
        )));
    }
    let gammas: Vec<f64> = tail.iter().map(|e| e.phi.max() / e.t).collect();
    let growth = gammas.last().unwrap() / gammas[0];
    if !(growth >= 10.0) {
        return Err(CoupledError::InsufficientBlowUp(growth));
    }
    let last = tail.last().unwrap();
    let m = data.metric();
    let gamma = *gammas.last().unwrap();
    let alpha0 = last.t.powi(6);
    let psi_t = last.phi.scaled(1.0 / (last.t * gamma));
    let w_t = last.w_field.scaled(gamma.powi(-6));
    let lw = conformal_killing(m, &w_t)?;
    let lw_abs = tensor_norm2(m, &lw)?.map(|v| v.max(0.0).sqrt());
    let profile = lw_abs.zip_map(data.tau(), |l, t| ((1.5f64).sqrt() * l / t).powf(1.0 / 6.0))?;
    let profile_error = psi_t
        .values()
        .iter()
        .zip(profile.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let lw_l2 = integrate(m, &lw_abs.map(|v| v * v))?.max(0.0).sqrt();
    let limit_residual = if lw_l2 > 0.0 {
        let n = data.grid().node_count();
        let coef: Vec<f64> = (0..n)
            .map(|i| alpha0 * (2.0f64 / 3.0).sqrt() * lw_abs.values()[i] / data.tau().values()[i])
            .collect();
        let mut src = data.xi().clone();
        for c in 0..3 {
            for (v, k) in src.component_mut(c).iter_mut().zip(&coef) {
                *v *= k;
            }
        }
        let res = half_lstar_l(m, &w_t)?.add_scaled(1.0, &src)?;
        one_form_l2(m, &res)? / lw_l2
    } else {
        f64::INFINITY
    };
    Ok(LimitDiagnostic {
        alpha0,
        gamma,
        gamma_growth: growth,
        profile_error,
        limit_residual,
        sigma_tilde_sup: data.sigma().max_abs() * gamma.powi(-6),
    })
}
