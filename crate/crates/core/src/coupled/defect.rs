use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    blend, certify, map_t_with, relative_change, source_magnitude, Certificate, ConstraintData,
    SolverSettings, TOutput, WarmStart, CERTIFY_TOLERANCE,
};
use crate::eigen::YamabeSign;
use crate::error::CoupledError;
use crate::field::{OneFormField, ScalarField};
use crate::lichnerowicz::{self, LichnerowiczProblem, ZERO_THRESHOLD};
use crate::ops::{integrate, lp_norm, one_form_norm2, tensor_inner};

#[derive(Clone, Debug)]
pub struct DefectConfig {
    pub relax: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub certify_tol: f64,
    pub solvers: SolverSettings,
}

impl Default for DefectConfig {
    fn default() -> Self {
        Self {
            relax: 1.0,
            tol: 1e-10,
            max_iter: 200,
            certify_tol: CERTIFY_TOLERANCE,
            solvers: SolverSettings::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    NearCmc,
    FarCmc,
    LocalSupersolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectOutcome {
    /// Nonzero, untruncated fixed point that passed certification.
    Certified,
    /// The branch condition failed and S returned 0.
    ZeroBranch,
    /// Converged, but the truncation at `a` was active.
    Truncated,
    NotConverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub iteration: usize,
    /// Left side of the branch condition at the current iterate.
    pub gate_value: f64,
    /// Right side of the branch condition.
    pub gate_threshold: f64,
    pub gate_passed: bool,
    pub truncated_nodes: usize,
    pub sup_phi: f64,
    pub change: f64,
    pub lw_l2: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectExtras {
    pub xi_over_tau_l3: Option<f64>,
    pub kappa1: Option<f64>,
    pub kappa: Option<f64>,
    pub yamabe_lambda1: Option<f64>,
    pub sigma_l2_squared: f64,
    /// ∫|LW|² / (‖ξ‖²_{L⁶}(∫φ²⁴)^{1/2}) at the fixed point.
    pub chain_constant: Option<f64>,
    /// chain_constant·‖ξ‖²_{L⁶}(32/(7𝒴))^{3/2}‖σ‖_{L²}
    pub chain_value: Option<f64>,
    /// Smallest threshold/value ratio of the far-CMC condition over nonzero iterates.
    pub min_margin: Option<f64>,
    /// The far-CMC margin fell below 2.
    pub conservative: bool,
}

#[derive(Clone, Debug)]
pub struct DefectReport {
    pub kind: DefectKind,
    pub outcome: DefectOutcome,
    pub phi: ScalarField,
    pub w_field: OneFormField,
    pub records: Vec<DefectRecord>,
    pub certificate: Option<Certificate>,
    /// Truncation level a, or the cap b for the local supersolution map.
    pub bound: f64,
    /// The branch condition held at every recorded iterate.
    pub branch_held: bool,
    pub extras: DefectExtras,
    pub message: Option<String>,
}

/// (κ₁, κ): κ₁ is the smallest pointwise value of Ru⁸ + (1/3)τ²u¹² over u > 0,
/// κ = max(|κ₁|, ∫|σ|²).
pub fn kappa_bounds(data: &ConstraintData) -> Result<(f64, f64), CoupledError> {
    let r = data.metric().scalar_curvature().values();
    let tau = data.tau().values();
    let mut kappa1 = 0.0f64;
    for (i, (&r, &t)) in r.iter().zip(tau).enumerate() {
        if r >= 0.0 {
            continue;
        }
        if t.abs() < ZERO_THRESHOLD {
            return Err(CoupledError::Unbounded(i));
        }
        kappa1 = kappa1.min((4.0 / 3.0) * r.powi(3) / t.powi(4));
    }
    let s2 = tensor_inner(data.metric(), data.sigma(), data.sigma())?;
    Ok((kappa1, kappa1.abs().max(s2)))
}

/// a = 10·sup u, where u solves the Lichnerowicz equation with w = |σ| + ‖LW‖_∞
/// and W is driven by T(0).
pub fn truncation_bound(
    data: &ConstraintData,
    settings: &SolverSettings,
) -> Result<f64, CoupledError> {
    let grid = *data.grid();
    let first = map_t_with(
        data,
        &ScalarField::zeros(grid),
        1.0,
        &WarmStart::default(),
        settings,
    )?;
    let second = map_t_with(
        data,
        &first.psi,
        1.0,
        &WarmStart::from_output(&first),
        settings,
    )?;
    let w = source_magnitude(data, &OneFormField::zeros(grid))?.map(|s| s + second.lw_sup);
    let lp = LichnerowiczProblem::new(data.metric_arc().clone(), data.tau().clone(), w)?
        .with_yamabe(data.yamabe());
    let rep = lichnerowicz::solve(&lp, &settings.lich)?;
    Ok(10.0 * rep.u.max())
}

fn xi_over_tau_l3(data: &ConstraintData) -> Result<f64, CoupledError> {
    let tau_min_abs = data
        .tau()
        .values()
        .iter()
        .fold(f64::INFINITY, |a, t| a.min(t.abs()));
    if tau_min_abs < ZERO_THRESHOLD {
        return Err(CoupledError::Precondition(
            "tau vanishes, so ||xi/tau||_L3 is infinite".into(),
        ));
    }
    let n2 = one_form_norm2(data.metric(), data.xi())?;
    let q = n2.zip_map(data.tau(), |v, t| v.max(0.0).sqrt() / t.abs())?;
    Ok(lp_norm(data.metric(), &q, 3.0)?)
}

struct Gate {
    value: f64,
    threshold: f64,
    passed: bool,
}

enum Cap {
    Truncate(f64),
    None,
}

struct Iteration {
    outcome: DefectOutcome,
    phi: ScalarField,
    w_field: OneFormField,
    records: Vec<DefectRecord>,
    certificate: Option<Certificate>,
    message: Option<String>,
}

fn run_defect<G>(
    data: &ConstraintData,
    cap: Cap,
    gate: G,
    cfg: &DefectConfig,
) -> Result<Iteration, CoupledError>
where
    G: Fn(&ScalarField, &TOutput) -> Result<Gate, CoupledError>,
{
    if !(cfg.relax > 0.0 && cfg.relax <= 1.0) || !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(CoupledError::InvalidData(
            "relax must lie in (0, 1]; tol and max_iter positive".into(),
        ));
    }
    let grid = *data.grid();
    let mut phi = ScalarField::zeros(grid);
    let mut warm = WarmStart::default();
    let mut records = Vec::new();
    for it in 1..=cfg.max_iter {
        let out = map_t_with(data, &phi, 1.0, &warm, &cfg.solvers)?;
        warm = WarmStart::from_output(&out);
        let g = gate(&phi, &out)?;
        let (image, truncated_nodes) = if !g.passed {
            (ScalarField::zeros(grid), 0)
        } else {
            match cap {
                Cap::Truncate(a) => {
                    let count = out.psi.values().iter().filter(|v| **v > a).count();
                    (out.psi.map(|v| v.min(a)), count)
                }
                Cap::None => (out.psi.clone(), 0),
            }
        };
        let next = blend(&phi, &image, cfg.relax);
        let change = relative_change(&next, &phi);
        records.push(DefectRecord {
            iteration: it,
            gate_value: g.value,
            gate_threshold: g.threshold,
            gate_passed: g.passed,
            truncated_nodes,
            sup_phi: next.max(),
            change,
            lw_l2: out.lw_l2,
        });
        if !g.passed {
            return Ok(Iteration {
                outcome: DefectOutcome::ZeroBranch,
                phi: next,
                w_field: out.w_field,
                records,
                certificate: None,
                message: Some(format!(
                    "branch condition failed at iteration {it} ({:.6e} > {:.6e}); S returned 0",
                    g.value, g.threshold
                )),
            });
        }
        if change <= cfg.tol {
            if truncated_nodes > 0 {
                return Ok(Iteration {
                    outcome: DefectOutcome::Truncated,
                    phi: image,
                    w_field: out.w_field,
                    records,
                    certificate: None,
                    message: Some(format!("truncation active at {truncated_nodes} nodes")),
                });
            }
            let cert = certify(data, &image, &out.w_field, cfg.certify_tol)?;
            let (outcome, message) = if cert.certified {
                (DefectOutcome::Certified, None)
            } else {
                (
                    DefectOutcome::NotConverged,
                    Some("fixed point failed certification".to_string()),
                )
            };
            return Ok(Iteration {
                outcome,
                phi: image,
                w_field: out.w_field,
                records,
                certificate: Some(cert),
                message,
            });
        }
        phi = next;
    }
    let last = records.last().map(|r| r.change).unwrap_or(f64::INFINITY);
    Ok(Iteration {
        outcome: DefectOutcome::NotConverged,
        phi,
        w_field: warm.w_field.unwrap_or_else(|| OneFormField::zeros(grid)),
        records,
        certificate: None,
        message: Some(format!(
            "no convergence in {} iterations (last change {last:.3e})",
            cfg.max_iter
        )),
    })
}

fn finish(kind: DefectKind, it: Iteration, bound: f64, extras: DefectExtras) -> DefectReport {
    let branch_held = it.records.iter().all(|r| r.gate_passed);
    DefectReport {
        kind,
        outcome: it.outcome,
        phi: it.phi,
        w_field: it.w_field,
        records: it.records,
        certificate: it.certificate,
        bound,
        branch_held,
        extras,
        message: it.message,
    }
}

/// Iterate S(φ) = min{T(φ), a} when ‖LW_φ‖_{L²} ≤ √κ and 0 otherwise, from φ = 0.
/// `a` defaults to [`truncation_bound`].
pub fn near_cmc_defect_iterate(
    data: &ConstraintData,
    a: Option<f64>,
    cfg: &DefectConfig,
) -> Result<DefectReport, CoupledError> {
    let ratio = xi_over_tau_l3(data)?;
    let (kappa1, kappa) = kappa_bounds(data)?;
    let a = match a {
        Some(a) if a > 0.0 => a,
        Some(a) => {
            return Err(CoupledError::InvalidData(format!(
                "truncation level must be positive, got {a}"
            )))
        }
        None => truncation_bound(data, &cfg.solvers)?,
    };
    let root = kappa.sqrt();
    let it = run_defect(
        data,
        Cap::Truncate(a),
        |_, out| {
            Ok(Gate {
                value: out.lw_l2,
                threshold: root,
                passed: out.lw_l2 <= root,
            })
        },
        cfg,
    )?;
    let extras = DefectExtras {
        xi_over_tau_l3: Some(ratio),
        kappa1: Some(kappa1),
        kappa: Some(kappa),
        sigma_l2_squared: sigma_l2_squared(data)?,
        ..DefectExtras::default()
    };
    Ok(finish(DefectKind::NearCmc, it, a, extras))
}

fn sigma_l2_squared(data: &ConstraintData) -> Result<f64, CoupledError> {
    Ok(tensor_inner(data.metric(), data.sigma(), data.sigma())?)
}

/// Iterate S(φ) = min{T(φ), a} when (7/16)𝒴(∫φ²⁴)^{1/3} ≤ 2∫|σ|² and 0
/// otherwise, from φ = 0. 𝒴 is the first eigenvalue of 8Δ + R.
pub fn far_cmc_defect_iterate(
    data: &ConstraintData,
    a: Option<f64>,
    cfg: &DefectConfig,
) -> Result<DefectReport, CoupledError> {
    let flags = data.flags();
    if flags.yamabe_sign != YamabeSign::Positive {
        return Err(CoupledError::Precondition(format!(
            "the Yamabe invariant must be positive (estimate {:?}, lambda1 = {:.6e})",
            flags.yamabe_sign, flags.yamabe_lambda1
        )));
    }
    if !flags.sigma_nontrivial {
        return Err(CoupledError::Precondition(
            "sigma vanishes identically".into(),
        ));
    }
    let lambda = flags.yamabe_lambda1;
    let s2 = sigma_l2_squared(data)?;
    let a = match a {
        Some(a) if a > 0.0 => a,
        Some(a) => {
            return Err(CoupledError::InvalidData(format!(
                "truncation level must be positive, got {a}"
            )))
        }
        None => truncation_bound(data, &cfg.solvers)?,
    };
    let m = data.metric();
    let it = run_defect(
        data,
        Cap::Truncate(a),
        |phi, _| {
            let p24 = integrate(m, &phi.map(|v| v.powi(24)))?;
            let value = (7.0 / 16.0) * lambda * p24.cbrt();
            let threshold = 2.0 * s2;
            Ok(Gate {
                value,
                threshold,
                passed: value <= threshold,
            })
        },
        cfg,
    )?;
    let min_margin = it
        .records
        .iter()
        .filter(|r| r.gate_value > 0.0)
        .map(|r| r.gate_threshold / r.gate_value)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.min(v)))
        });
    let mut extras = DefectExtras {
        yamabe_lambda1: Some(lambda),
        sigma_l2_squared: s2,
        min_margin,
        conservative: min_margin.is_some_and(|v| v < 2.0),
        ..DefectExtras::default()
    };
    if it.outcome == DefectOutcome::Certified {
        let xi_l6 = lp_norm(
            m,
            &one_form_norm2(m, data.xi())?.map(|v| v.max(0.0).sqrt()),
            6.0,
        )?;
        let p24 = integrate(m, &it.phi.map(|v| v.powi(24)))?;
        let lw2 = it.records.last().map(|r| r.lw_l2 * r.lw_l2).unwrap_or(0.0);
        if xi_l6 > 0.0 && p24 > 0.0 {
            let c = lw2 / (xi_l6 * xi_l6 * p24.sqrt());
            extras.chain_constant = Some(c);
            extras.chain_value =
                Some(c * xi_l6 * xi_l6 * (32.0 / (7.0 * lambda)).powf(1.5) * s2.sqrt());
        }
    }
    Ok(finish(DefectKind::FarCmc, it, a, extras))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub touch_node: usize,
    pub beta: f64,
    /// min over nodes of T(φ) − φ.
    pub min_gap: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionCheck {
    pub probes: Vec<ProbeResult>,
    /// No probe falsified the candidate. This is not a proof.
    pub not_falsified: bool,
}

/// Probe fields φ = ψ(1 − β·bump) with the bump vanishing at a random node;
/// each probe passes when T(φ) ≤ φ somewhere, up to `tol`·‖φ‖_∞. Probe 0 is
/// φ = ψ itself.
pub fn local_supersolution_check(
    data: &ConstraintData,
    psi: &ScalarField,
    probe_count: usize,
    seed: u64,
    tol: f64,
    settings: &SolverSettings,
) -> Result<SupersolutionCheck, CoupledError> {
    let min = psi.min();
    if !(min > 0.0) {
        return Err(CoupledError::InvalidData(format!(
            "candidate must be positive, found minimum {min}"
        )));
    }
    let grid = *data.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<(usize, f64)> = (0..probe_count)
        .map(|i| {
            if i == 0 {
                (0, 0.0)
            } else {
                (
                    rng.gen_range(0..grid.node_count()),
                    rng.gen_range(0.05..0.95),
                )
            }
        })
        .collect();
    let l = grid.box_length();
    let probes = specs
        .par_iter()
        .map(|&(node, beta)| {
            let c = grid.position(node);
            let phi = ScalarField::from_fn(grid, |p| {
                let prod: f64 = (0..3)
                    .map(|a| (std::f64::consts::PI * (p[a] - c[a]) / l).cos().powi(2))
                    .product();
                1.0 - beta * (1.0 - prod)
            })
            .zip_map(psi, |b, s| b * s)?;
            let out = map_t_with(data, &phi, 1.0, &WarmStart::default(), settings)?;
            let min_gap = out
                .psi
                .values()
                .iter()
                .zip(phi.values())
                .map(|(t, f)| t - f)
                .fold(f64::INFINITY, f64::min);
            Ok(ProbeResult {
                touch_node: node,
                beta,
                min_gap,
                passed: min_gap <= tol * phi.max_abs(),
            })
        })
        .collect::<Result<Vec<_>, CoupledError>>()?;
    let not_falsified = probes.iter().all(|p| p.passed);
    Ok(SupersolutionCheck {
        probes,
        not_falsified,
    })
}

/// Iterate S(φ) = T(φ) when φ ≤ ψ and 0 otherwise, from φ = 0. The cap b is
/// twice the larger of sup T(0) and sup T(ψ).
pub fn local_supersolution_solve(
    data: &ConstraintData,
    psi: &ScalarField,
    cfg: &DefectConfig,
) -> Result<DefectReport, CoupledError> {
    let min = psi.min();
    if !(min > 0.0) {
        return Err(CoupledError::InvalidData(format!(
            "candidate must be positive, found minimum {min}"
        )));
    }
    let grid = *data.grid();
    let t0 = map_t_with(
        data,
        &ScalarField::zeros(grid),
        1.0,
        &WarmStart::default(),
        &cfg.solvers,
    )?;
    let tpsi = map_t_with(data, psi, 1.0, &WarmStart::default(), &cfg.solvers)?;
    let b = 2.0 * t0.psi.max().max(tpsi.psi.max());
    let it = run_defect(
        data,
        Cap::None,
        |phi, _| {
            let excess = phi
                .values()
                .iter()
                .zip(psi.values())
                .map(|(f, s)| f - s)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(Gate {
                value: excess,
                threshold: 0.0,
                passed: excess <= 0.0,
            })
        },
        cfg,
    )?;
    let mut report = finish(
        DefectKind::LocalSupersolution,
        it,
        b,
        DefectExtras {
            sigma_l2_squared: sigma_l2_squared(data)?,
            ..DefectExtras::default()
        },
    );
    if report.records.iter().any(|r| r.sup_phi > b) {
        report.message = Some(format!("an iterate exceeded the sampled cap b = {b:.6e}"));
    }
    Ok(report)
}
