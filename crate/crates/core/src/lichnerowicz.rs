//! The Lichnerowicz equation 8Δu + Ru + (2/3)τ²u⁵ = w²u⁻⁷.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_transform, transform_w};
use crate::eigen::{mean_diffusion, yamabe_sign, YamabeEstimate, YamabeSign};
use crate::error::{GeometryError, LichError};
use crate::field::ScalarField;
use crate::krylov::{pcg, CgSettings};
use crate::metric::Metric;
use crate::ops::lp_norm;
use crate::par::{det_max, det_sum};

/// Values with magnitude at or below this count as zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Sweeps stop once min u exceeds this value.
pub const SWEEP_CAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseId {
    One,
    Two,
    Three,
    Four,
    NoSolution,
}

impl CaseId {
    pub fn is_solvable(self) -> bool {
        !matches!(self, CaseId::NoSolution)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceCase {
    pub yamabe: YamabeEstimate,
    pub w_nontrivial: bool,
    pub tau_nontrivial: bool,
    /// Fraction of nodes with |τ| ≤ [`ZERO_THRESHOLD`].
    pub tau_zero_fraction: f64,
    pub case_id: CaseId,
}

/// The data (g, τ, w) of one Lichnerowicz equation.
#[derive(Clone, Debug)]
pub struct LichnerowiczProblem {
    metric: Arc<Metric>,
    tau: ScalarField,
    w: ScalarField,
    yamabe: OnceLock<YamabeEstimate>,
}

impl LichnerowiczProblem {
    pub fn new(metric: Arc<Metric>, tau: ScalarField, w: ScalarField) -> Result<Self, LichError> {
        if tau.grid() != metric.grid() || w.grid() != metric.grid() {
            return Err(GeometryError::GridMismatch.into());
        }
        if !tau.all_finite() {
            return Err(GeometryError::NonFinite(
                tau.values()
                    .iter()
                    .position(|v| !v.is_finite())
                    .unwrap_or(0),
            )
            .into());
        }
        let wmin = w.min();
        if wmin < 0.0 {
            return Err(LichError::NegativeSource(wmin));
        }
        Ok(Self {
            metric,
            tau,
            w,
            yamabe: OnceLock::new(),
        })
    }

    /// Reuse a Yamabe estimate computed elsewhere for the same conformal class.
    pub fn with_yamabe(self, est: YamabeEstimate) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(est);
        Self {
            yamabe: cell,
            ..self
        }
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn metric_arc(&self) -> &Arc<Metric> {
        &self.metric
    }

    pub fn tau(&self) -> &ScalarField {
        &self.tau
    }

    pub fn w(&self) -> &ScalarField {
        &self.w
    }

    pub fn yamabe(&self) -> Result<YamabeEstimate, GeometryError> {
        if let Some(y) = self.yamabe.get() {
            return Ok(*y);
        }
        let est = yamabe_sign(&self.metric)?;
        Ok(*self.yamabe.get_or_init(|| est))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Newton,
    Monotone,
    Hybrid,
}

#[derive(Clone, Debug)]
pub struct LichConfig {
    /// Residual tolerance relative to the problem scale (see [`LichSolveReport::scale`]).
    pub tol: f64,
    pub max_newton: usize,
    pub max_monotone: usize,
    /// Start Newton here instead of the default guess.
    pub initial_guess: Option<ScalarField>,
}

impl Default for LichConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_newton: 200,
            max_monotone: 400,
            initial_guess: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LichSolveReport {
    pub u: ScalarField,
    /// sup |8Δu + Ru + (2/3)τ²u⁵ − w²u⁻⁷|.
    pub residual_sup: f64,
    /// max(‖w²u⁻⁷‖_∞, ‖(2/3)τ²u⁵‖_∞) at the returned u.
    pub scale: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

impl LichSolveReport {
    pub fn relative_residual(&self) -> f64 {
        self.residual_sup / self.scale
    }
}

fn check_u(p: &LichnerowiczProblem, u: &ScalarField) -> Result<(), LichError> {
    if u.grid() != p.metric.grid() {
        return Err(GeometryError::GridMismatch.into());
    }
    let min = u.min();
    if min > 0.0 && u.all_finite() {
        Ok(())
    } else {
        Err(LichError::NonPositive(min))
    }
}

/// Raw residual values and the problem scale at `u`.
fn residual_raw(p: &LichnerowiczProblem, u: &[f64], out: &mut [f64]) -> f64 {
    let op = p.metric.scalar_operator();
    op.stencil.apply(u, out);
    let r = p.metric.scalar_curvature().values();
    let tau = p.tau.values();
    let w = p.w.values();
    let mass = &op.mass;
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let ui = u[i];
        *o = 8.0 * *o / mass[i] + r[i] * ui + (2.0 / 3.0) * tau[i] * tau[i] * ui.powi(5)
            - w[i] * w[i] * ui.powi(-7);
    });
    det_max(u.len(), |i| {
        let a = w[i] * w[i] * u[i].powi(-7);
        let b = (2.0 / 3.0) * tau[i] * tau[i] * u[i].powi(5);
        a.max(b)
    })
    .max(f64::MIN_POSITIVE)
}

/// 8Δu + Ru + (2/3)τ²u⁵ − w²u⁻⁷ pointwise.
pub fn residual(p: &LichnerowiczProblem, u: &ScalarField) -> Result<ScalarField, LichError> {
    check_u(p, u)?;
    let mut out = vec![0.0; u.values().len()];
    residual_raw(p, u.values(), &mut out);
    Ok(ScalarField::new(*u.grid(), out)?)
}

/// Linearization at `u` applied to `v`: (8Δ + R + (10/3)τ²u⁴ + 7w²u⁻⁸) v.
pub fn linearized(
    p: &LichnerowiczProblem,
    u: &ScalarField,
    v: &ScalarField,
) -> Result<ScalarField, LichError> {
    check_u(p, u)?;
    if v.grid() != u.grid() {
        return Err(GeometryError::GridMismatch.into());
    }
    let pot = newton_potential(p, u.values());
    let op = p.metric.scalar_operator();
    let mut out = vec![0.0; pot.len()];
    op.stencil.apply(v.values(), &mut out);
    let vv = v.values();
    out.par_iter_mut()
        .enumerate()
        .for_each(|(i, o)| *o = 8.0 * *o / op.mass[i] + pot[i] * vv[i]);
    Ok(ScalarField::new(*u.grid(), out)?)
}

fn newton_potential(p: &LichnerowiczProblem, u: &[f64]) -> Vec<f64> {
    let r = p.metric.scalar_curvature().values();
    let tau = p.tau.values();
    let w = p.w.values();
    u.par_iter()
        .enumerate()
        .map(|(i, &ui)| {
            r[i] + (10.0 / 3.0) * tau[i] * tau[i] * ui.powi(4) + 7.0 * w[i] * w[i] * ui.powi(-8)
        })
        .collect()
}

/// Existence classification from the Yamabe sign and the data.
pub fn classify(p: &LichnerowiczProblem) -> Result<ExistenceCase, LichError> {
    let yamabe = p.yamabe()?;
    let w_nontrivial = p.w.max_abs() > ZERO_THRESHOLD;
    let tau_nontrivial = p.tau.max_abs() > ZERO_THRESHOLD;
    let n = p.tau.values().len();
    let zeros = p
        .tau
        .values()
        .iter()
        .filter(|t| t.abs() <= ZERO_THRESHOLD)
        .count();
    let tau_zero_fraction = zeros as f64 / n as f64;
    let case_id = match yamabe.sign {
        YamabeSign::Positive if w_nontrivial => CaseId::One,
        YamabeSign::Zero if w_nontrivial && tau_nontrivial => CaseId::Two,
        YamabeSign::Negative if tau_zero_fraction < 0.5 => CaseId::Three,
        YamabeSign::Zero if !w_nontrivial && !tau_nontrivial => CaseId::Four,
        _ => CaseId::NoSolution,
    };
    Ok(ExistenceCase {
        yamabe,
        w_nontrivial,
        tau_nontrivial,
        tau_zero_fraction,
        case_id,
    })
}

/// Constant sub- and supersolutions `(u_minus, u_plus)`.
///
/// Returns `None` when τ or w vanishes somewhere or R is negative somewhere.
pub fn constant_bracket(p: &LichnerowiczProblem) -> Option<(f64, f64)> {
    let tau2_min = p
        .tau
        .values()
        .iter()
        .map(|t| t * t)
        .fold(f64::INFINITY, f64::min);
    let tau2_max = p.tau.values().iter().map(|t| t * t).fold(0.0, f64::max);
    let w2_min =
        p.w.values()
            .iter()
            .map(|w| w * w)
            .fold(f64::INFINITY, f64::min);
    let w2_max = p.w.values().iter().map(|w| w * w).fold(0.0, f64::max);
    if tau2_min <= ZERO_THRESHOLD * ZERO_THRESHOLD || w2_min <= ZERO_THRESHOLD * ZERO_THRESHOLD {
        return None;
    }
    if p.metric.scalar_curvature().min() < 0.0 {
        return None;
    }
    let u_plus = (1.5 * w2_max / tau2_min).powf(1.0 / 12.0);
    let mut u_minus = (1.5 * w2_min / tau2_max).powf(1.0 / 12.0);
    let grid = *p.metric.grid();
    let mut out = vec![0.0; grid.node_count()];
    for _ in 0..200 {
        let u = vec![u_minus; grid.node_count()];
        let scale = residual_raw(p, &u, &mut out);
        // constants are annihilated up to rounding in the stencil sums
        if out.iter().all(|r| *r <= 1e-12 * scale) {
            return Some((u_minus, u_plus));
        }
        u_minus *= 0.9;
    }
    None
}

struct Workspace<'a> {
    p: &'a LichnerowiczProblem,
    diff: f64,
    h3: f64,
}

impl<'a> Workspace<'a> {
    fn new(p: &'a LichnerowiczProblem) -> Self {
        Self {
            p,
            diff: 8.0 * mean_diffusion(&p.metric),
            h3: p.metric.grid().cell_volume(),
        }
    }

    fn merit(&self, r: &[f64]) -> f64 {
        let mass = &self.p.metric.scalar_operator().mass;
        det_sum(r.len(), |i| mass[i] * r[i] * r[i]).sqrt()
    }

    /// Solve (8K + M·diag(pot)) x = rhs, where rhs is already mass-weighted.
    ///
    /// The FFT preconditioner only sees the mean potential; when the potential
    /// varies by orders of magnitude it stalls and Jacobi takes over.
    fn solve_linear(&self, pot: &[f64], rhs: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
        let op = self.p.metric.scalar_operator();
        let mass = &op.mass;
        let n = pot.len();
        let stencil_diag = op.stencil.diagonal();
        let apply = |shift: f64| {
            move |v: &[f64], out: &mut [f64]| {
                op.stencil.apply(v, out);
                out.par_iter_mut()
                    .enumerate()
                    .for_each(|(i, o)| *o = 8.0 * *o + mass[i] * (pot[i] + shift) * v[i]);
            }
        };
        let spectral_attempt = |shift: f64| {
            let mean_pot =
                det_sum(n, |i| mass[i] * (pot[i] + shift).max(0.0)) / (n as f64 * self.h3);
            let spectral = self.p.metric.spectral();
            let mut x = vec![0.0; n];
            pcg(
                apply(shift),
                |r, z| spectral.solve_shifted(r, z, self.diff, mean_pot),
                rhs,
                &mut x,
                CgSettings {
                    rel_tol,
                    max_iter: 600,
                },
            )
            .ok()
            .map(|_| x)
        };
        let jacobi_attempt = |shift: f64| {
            let d: Vec<f64> = (0..n)
                .map(|i| 8.0 * stencil_diag[i] + mass[i] * (pot[i] + shift))
                .collect();
            if d.iter().any(|v| !(*v > 0.0)) {
                return None;
            }
            let mut x = vec![0.0; n];
            pcg(
                apply(shift),
                |r, z| {
                    z.par_iter_mut()
                        .enumerate()
                        .for_each(|(i, z)| *z = r[i] / d[i])
                },
                rhs,
                &mut x,
                CgSettings {
                    rel_tol,
                    max_iter: 20_000,
                },
            )
            .ok()
            .map(|_| x)
        };
        let min = pot.iter().cloned().fold(f64::INFINITY, f64::min);
        let shift = (-min).max(0.0) + 1e-3 * self.diff;
        spectral_attempt(0.0)
            .or_else(|| jacobi_attempt(0.0))
            .or_else(|| spectral_attempt(shift))
            .or_else(|| jacobi_attempt(shift))
    }
}

enum NewtonOutcome {
    Converged { iterations: usize },
    Stalled { iterations: usize },
}

/// Damped Newton from `u`, which is updated in place.
fn newton(
    ws: &Workspace,
    u: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
    best: &mut f64,
) -> NewtonOutcome {
    let p = ws.p;
    let n = u.len();
    let mass = &p.metric.scalar_operator().mass;
    let mut r = vec![0.0; n];
    let mut scale = residual_raw(p, u, &mut r);
    let sup = |r: &[f64]| r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut trial_r = vec![0.0; n];
    for it in 0..max_iter {
        let rel = sup(&r) / scale;
        *best = best.min(rel);
        if rel <= tol {
            return NewtonOutcome::Converged { iterations: it };
        }
        let pot = newton_potential(p, u);
        let rhs: Vec<f64> = (0..n).map(|i| -mass[i] * r[i]).collect();
        let forcing = (0.01 * rel).clamp(1e-13, 1e-2);
        let Some(delta) = ws.solve_linear(&pot, &rhs, forcing) else {
            return NewtonOutcome::Stalled { iterations: it };
        };
        let merit0 = ws.merit(&r);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..n).map(|i| u[i] + alpha * delta[i]).collect();
            if trial.iter().all(|&v| v > 0.0 && v.is_finite()) {
                let s = residual_raw(p, &trial, &mut trial_r);
                let m = ws.merit(&trial_r);
                if m.is_finite() && m <= (1.0 - 1e-4 * alpha) * merit0 {
                    *u = trial;
                    std::mem::swap(&mut r, &mut trial_r);
                    scale = s;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            let rel = sup(&r) / scale;
            if rel <= tol {
                return NewtonOutcome::Converged { iterations: it };
            }
            return NewtonOutcome::Stalled { iterations: it };
        }
    }
    let rel = sup(&r) / scale;
    *best = best.min(rel);
    if rel <= tol {
        NewtonOutcome::Converged {
            iterations: max_iter,
        }
    } else {
        NewtonOutcome::Stalled {
            iterations: max_iter,
        }
    }
}

/// Linearized monotone steps (8Δ + Λ)u⁺ = Λu − N(u) with Λ bounding N'.
/// Stops once the relative residual drops below `target`.
fn monotone(
    ws: &Workspace,
    u: &mut Vec<f64>,
    target: f64,
    max_iter: usize,
    best: &mut f64,
) -> usize {
    let p = ws.p;
    let n = u.len();
    let op = p.metric.scalar_operator();
    let mass = &op.mass;
    let r_curv = p.metric.scalar_curvature().values();
    let tau = p.tau.values();
    let w = p.w.values();
    let mut r = vec![0.0; n];
    for it in 0..max_iter {
        let scale = residual_raw(p, u, &mut r);
        let rel = r.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / scale;
        *best = best.min(rel);
        if rel <= target {
            return it;
        }
        let pot = newton_potential(p, u);
        let lambda = pot.iter().cloned().fold(0.0_f64, f64::max).max(1e-6);
        let lam = vec![lambda; n];
        // (8K + ΛM) u⁺ = M(Λu − N(u))
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let ui = u[i];
                let nl = r_curv[i] * ui + (2.0 / 3.0) * tau[i] * tau[i] * ui.powi(5)
                    - w[i] * w[i] * ui.powi(-7);
                mass[i] * (lambda * ui - nl)
            })
            .collect();
        match ws.solve_linear(&lam, &rhs, 1e-12) {
            Some(next) if next.iter().all(|v| *v > 0.0) => *u = next,
            _ => return it,
        }
    }
    max_iter
}

fn default_guess(p: &LichnerowiczProblem) -> f64 {
    match constant_bracket(p) {
        Some((lo, hi)) => 0.5 * (lo + hi),
        None => p.w.max_abs().powf(1.0 / 6.0).max(1.0),
    }
}

/// Solve the equation for a positive u.
///
/// Damped Newton on the residual; if it stalls, monotone steps from the
/// constant supersolution (or from the best Newton iterate when no bracket is
/// available) bring the iterate back into Newton's basin.
pub fn solve(p: &LichnerowiczProblem, cfg: &LichConfig) -> Result<LichSolveReport, LichError> {
    let case = classify(p)?;
    let grid = *p.metric.grid();
    match case.case_id {
        CaseId::NoSolution => return Err(LichError::CaseUnsolvable(CaseId::NoSolution)),
        CaseId::Four => {
            let u = ScalarField::constant(grid, 1.0);
            let res = residual(p, &u)?;
            return Ok(LichSolveReport {
                residual_sup: res.max_abs(),
                scale: 1.0,
                u,
                iterations: 0,
                method: SolveMethod::Newton,
            });
        }
        _ => {}
    }
    let ws = Workspace::new(p);
    let mut u = match &cfg.initial_guess {
        Some(g) => {
            check_u(p, g)?;
            g.values().to_vec()
        }
        None => vec![default_guess(p); grid.node_count()],
    };
    let mut best = f64::INFINITY;
    let mut iterations = 0;
    let mut used_monotone = false;
    for round in 0..4 {
        match newton(&ws, &mut u, cfg.tol, cfg.max_newton, &mut best) {
            NewtonOutcome::Converged { iterations: it } => {
                iterations += it;
                let method = if used_monotone {
                    SolveMethod::Hybrid
                } else {
                    SolveMethod::Newton
                };
                return finish(p, u, iterations, method);
            }
            NewtonOutcome::Stalled { iterations: it } => iterations += it,
        }
        if round == 0 {
            if let Some((_, hi)) = constant_bracket(p) {
                u = vec![hi; grid.node_count()];
            }
        }
        used_monotone = true;
        let target = (1e-3_f64).powi(round + 1).max(cfg.tol);
        iterations += monotone(&ws, &mut u, target, cfg.max_monotone, &mut best);
    }
    Err(LichError::NoConvergence {
        best_residual: best,
        tolerance: cfg.tol,
    })
}

fn finish(
    p: &LichnerowiczProblem,
    u: Vec<f64>,
    iterations: usize,
    method: SolveMethod,
) -> Result<LichSolveReport, LichError> {
    let mut r = vec![0.0; u.len()];
    let scale = residual_raw(p, &u, &mut r);
    let residual_sup = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(LichSolveReport {
        u: ScalarField::new(*p.metric.grid(), u)?,
        residual_sup,
        scale,
        iterations,
        method,
    })
}

/// Solve the problem and its conformal transform (ψ⁴g, ψ⁻⁶w, τ) separately.
pub fn solve_transformed_pair(
    p: &LichnerowiczProblem,
    psi: &ScalarField,
    cfg: &LichConfig,
) -> Result<(LichSolveReport, LichSolveReport), LichError> {
    let base = solve(p, cfg)?;
    let metric_hat = conformal_transform(&p.metric, psi)?;
    let w_hat = transform_w(psi, &p.w)?;
    let hat = LichnerowiczProblem::new(Arc::new(metric_hat), p.tau.clone(), w_hat)?
        .with_yamabe(p.yamabe()?);
    let transformed = solve(&hat, cfg)?;
    Ok((base, transformed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub sup_u: f64,
    /// ‖u_k‖⁶_∞ / k.
    pub ratio_sup: f64,
    /// ‖u_k‖⁶_{L^{6α}} / k, one entry per α.
    pub ratio_alpha: Vec<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub alphas: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// ∫|τ|^{−α} dv per α; `None` when τ vanishes at some node.
    pub integral_tau_minus_alpha: Vec<Option<f64>>,
    /// Set when the sweep stopped early because min u exceeded [`SWEEP_CAP`].
    pub truncated: bool,
}

impl SweepTable {
    /// max/min of a ratio column over the rows (`None` for the sup column).
    pub fn column_spread(&self, alpha_index: Option<usize>) -> f64 {
        let col: Vec<f64> = self
            .rows
            .iter()
            .map(|r| match alpha_index {
                None => r.ratio_sup,
                Some(a) => r.ratio_alpha[a],
            })
            .collect();
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// last/first of a ratio column.
    pub fn column_growth(&self, alpha_index: Option<usize>) -> f64 {
        let pick = |r: &SweepRow| match alpha_index {
            None => r.ratio_sup,
            Some(a) => r.ratio_alpha[a],
        };
        match (self.rows.first(), self.rows.last()) {
            (Some(f), Some(l)) => pick(l) / pick(f),
            _ => f64::NAN,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(out);
        let mut header = vec![
            "k".to_string(),
            "sup_u".to_string(),
            "ratio_sup".to_string(),
        ];
        header.extend(self.alphas.iter().map(|a| format!("ratio_alpha_{a}")));
        header.extend(
            self.alphas
                .iter()
                .map(|a| format!("integral_tau_minus_alpha_{a}")),
        );
        header.push("residual".into());
        header.push("truncated".into());
        wr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                format!("{:e}", row.k),
                format!("{:.17e}", row.sup_u),
                format!("{:.17e}", row.ratio_sup),
            ];
            rec.extend(row.ratio_alpha.iter().map(|v| format!("{v:.17e}")));
            rec.extend(self.integral_tau_minus_alpha.iter().map(|v| match v {
                Some(v) => format!("{v:.17e}"),
                None => "inf".to_string(),
            }));
            rec.push(format!("{:.3e}", row.residual));
            rec.push(self.truncated.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// ∫|τ|^{−α} dv, or `None` if τ vanishes at a node.
pub fn integral_tau_minus_alpha(m: &Metric, tau: &ScalarField, alpha: f64) -> Option<f64> {
    let t = tau.values();
    if t.iter().any(|v| v.abs() < ZERO_THRESHOLD) {
        return None;
    }
    let sg = m.sqrt_det().values();
    Some(det_sum(t.len(), |i| t[i].abs().powf(-alpha) * sg[i]) * m.grid().cell_volume())
}

/// Solve with w ≡ k for each k and tabulate the blow-up ratios.
pub fn constant_w_sweep(
    metric: Arc<Metric>,
    tau: &ScalarField,
    k_list: &[f64],
    alpha_list: &[f64],
    cfg: &LichConfig,
) -> Result<SweepTable, LichError> {
    if k_list.is_empty() || k_list.windows(2).any(|w| w[1] <= w[0]) || k_list[0] <= 1.0 {
        return Err(LichError::InvalidSweep(
            "k values must be increasing and greater than 1".into(),
        ));
    }
    if alpha_list.iter().any(|a| *a < 1.0 / 6.0) {
        return Err(LichError::InvalidSweep("alpha must be at least 1/6".into()));
    }
    let grid = *metric.grid();
    let yamabe = yamabe_sign(&metric)?;
    let solved: Vec<Result<(f64, LichSolveReport), LichError>> = k_list
        .par_iter()
        .map(|&k| {
            let p = LichnerowiczProblem::new(
                metric.clone(),
                tau.clone(),
                ScalarField::constant(grid, k),
            )?
            .with_yamabe(yamabe);
            Ok((k, solve(&p, cfg)?))
        })
        .collect();
    let mut rows = Vec::new();
    let mut truncated = false;
    for item in solved {
        let (k, rep) = item?;
        if rep.u.min() > SWEEP_CAP {
            truncated = true;
            break;
        }
        let sup_u = rep.u.max_abs();
        let ratio_alpha = alpha_list
            .iter()
            .map(|&a| Ok(lp_norm(&metric, &rep.u, 6.0 * a)?.powi(6) / k))
            .collect::<Result<Vec<f64>, GeometryError>>()?;
        rows.push(SweepRow {
            k,
            sup_u,
            ratio_sup: sup_u.powi(6) / k,
            ratio_alpha,
            residual: rep.relative_residual(),
        });
    }
    let integral = alpha_list
        .iter()
        .map(|&a| integral_tau_minus_alpha(&metric, tau, a))
        .collect();
    Ok(SweepTable {
        alphas: alpha_list.to_vec(),
        rows,
        integral_tau_minus_alpha: integral,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn flat_problem(n: usize, tau: f64, w: f64) -> LichnerowiczProblem {
        let grid = GridSpec::unit(n).unwrap();
        LichnerowiczProblem::new(
            Arc::new(Metric::flat(grid)),
            ScalarField::constant(grid, tau),
            ScalarField::constant(grid, w),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_constant_solution() {
        let p = flat_problem(8, 2.0, 3.0);
        let rep = solve(&p, &LichConfig::default()).unwrap();
        let exact = (3.0 * 9.0 / (2.0 * 4.0_f64)).powf(1.0 / 12.0);
        assert!((rep.u.max() - exact).abs() < 1e-10);
        assert!((rep.u.min() - exact).abs() < 1e-10);
    }

    #[test]
    fn classification_table() {
        assert_eq!(
            classify(&flat_problem(8, 1.0, 1.0)).unwrap().case_id,
            CaseId::Two
        );
        assert_eq!(
            classify(&flat_problem(8, 0.0, 0.0)).unwrap().case_id,
            CaseId::Four
        );
        assert_eq!(
            classify(&flat_problem(8, 1.0, 0.0)).unwrap().case_id,
            CaseId::NoSolution
        );
        assert!(matches!(
            solve(&flat_problem(8, 1.0, 0.0), &LichConfig::default()),
            Err(LichError::CaseUnsolvable(_))
        ));
        let rep = solve(&flat_problem(8, 0.0, 0.0), &LichConfig::default()).unwrap();
        assert_eq!(rep.u.min(), 1.0);
    }

    #[test]
    fn bracket_unavailable_when_source_vanishes() {
        let grid = GridSpec::unit(8).unwrap();
        let w = ScalarField::from_fn(grid, |p| (std::f64::consts::TAU * p[0]).sin().abs());
        let p = LichnerowiczProblem::new(
            Arc::new(Metric::flat(grid)),
            ScalarField::constant(grid, 1.0),
            w,
        )
        .unwrap();
        assert!(constant_bracket(&p).is_none());
    }

    #[test]
    fn rejects_negative_source() {
        let grid = GridSpec::unit(8).unwrap();
        let err = LichnerowiczProblem::new(
            Arc::new(Metric::flat(grid)),
            ScalarField::constant(grid, 1.0),
            ScalarField::constant(grid, -1.0),
        )
        .unwrap_err();
        assert_eq!(err, LichError::NegativeSource(-1.0));
    }
}
