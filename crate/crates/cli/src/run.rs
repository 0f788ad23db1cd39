//! Subcommand orchestration: build the data, run one solver, fill the summary.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use cforge_core::coupled::{
    far_cmc_defect_iterate, limit_diagnostic, local_supersolution_check, local_supersolution_solve,
    modified_continuation_t12, near_cmc_defect_iterate, picard_solve, schaefer_continuation,
    ConstraintData, ContinuationConfig, ContinuationOutcome, ContinuationTrace, DefectConfig,
    DefectOutcome, DefectReport, PicardConfig, SolverSettings, TailEntry,
};
use cforge_core::io::{dump, load, GridField};
use cforge_core::lichnerowicz::{self, classify, CaseId, LichConfig, LichnerowiczProblem};
use cforge_core::ops::centered_gradient;
use cforge_core::studies::{run_study_to_files, StudyTable};
use cforge_core::vector::{assemble_rhs, lw_norms, solve_vector, VectorConfig, VectorProblem};
use cforge_core::{
    build_metric, ckv_kernel, CoupledError, GridSpec, LichError, Metric, OneFormField, ScalarField,
    SymTensorField, VectorError,
};

use crate::config::{invalid, DataSource, PsiChoice, RunConfig};
use crate::summary::Summary;

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNCERTIFIED: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    SolveLich,
    SolveVector,
    SolveCoupled,
    Continuation,
    ModifiedContinuation,
    LimitDiagnostic,
    DefectNear,
    DefectFar,
    DefectLocal,
    Study,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::SolveLich => "solve-lich",
            Self::SolveVector => "solve-vector",
            Self::SolveCoupled => "solve-coupled",
            Self::Continuation => "continuation",
            Self::ModifiedContinuation => "modified-continuation",
            Self::LimitDiagnostic => "limit-diagnostic",
            Self::DefectNear => "defect-near",
            Self::DefectFar => "defect-far",
            Self::DefectLocal => "defect-local",
            Self::Study => "study",
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub status: String,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

/// Raw fields before they are combined into solver inputs.
struct Inputs {
    grid: GridSpec,
    metric: Metric,
    tau: Option<ScalarField>,
    sigma: Option<SymTensorField>,
    xi: Option<OneFormField>,
    w: Option<ScalarField>,
    phi: Option<ScalarField>,
    label: String,
}

fn load_checked<F: GridField>(path: &Path, grid: &mut Option<GridSpec>) -> Result<F> {
    let f: F = load(path).with_context(|| format!("loading {}", path.display()))?;
    match grid {
        Some(g) if g != f.grid() => bail!(
            "{} is on a different grid than the other fields",
            path.display()
        ),
        Some(_) => {}
        None => *grid = Some(*f.grid()),
    }
    Ok(f)
}

fn inputs(cfg: &RunConfig) -> Result<Inputs> {
    match &cfg.source {
        DataSource::Fixture(fx) => {
            let grid = GridSpec::unit(cfg.n_axis)?;
            let f = fx.build(grid)?;
            Ok(Inputs {
                grid,
                metric: f.metric,
                tau: Some(f.tau),
                sigma: Some(f.sigma),
                xi: f.xi,
                w: f.w,
                phi: None,
                label: fx.id.clone(),
            })
        }
        DataSource::Fields(paths) => {
            let mut grid = None;
            let g: Option<SymTensorField> = paths
                .metric
                .as_deref()
                .map(|p| load_checked(p, &mut grid))
                .transpose()?;
            let tau = paths
                .tau
                .as_deref()
                .map(|p| load_checked(p, &mut grid))
                .transpose()?;
            let sigma = paths
                .sigma
                .as_deref()
                .map(|p| load_checked(p, &mut grid))
                .transpose()?;
            let xi = paths
                .xi
                .as_deref()
                .map(|p| load_checked(p, &mut grid))
                .transpose()?;
            let w = paths
                .w
                .as_deref()
                .map(|p| load_checked(p, &mut grid))
                .transpose()?;
            let phi = paths
                .phi
                .as_deref()
                .map(|p| load_checked(p, &mut grid))
                .transpose()?;
            let grid = grid.ok_or_else(|| anyhow!("no field files given"))?;
            let metric = match g {
                Some(g) => build_metric(grid, g)?,
                None => Metric::flat(grid),
            };
            Ok(Inputs {
                grid,
                metric,
                tau,
                sigma,
                xi,
                w,
                phi,
                label: "fields".into(),
            })
        }
    }
}

/// Build (g, τ, σ, ξ), enforcing the standing assumptions.
fn constraint_data(
    cfg: &RunConfig,
    inp: Inputs,
    warnings: &mut Vec<String>,
) -> Result<ConstraintData> {
    let tau = inp
        .tau
        .ok_or_else(|| invalid("fields.tau", "τ is required for the coupled system"))?;
    let sigma = inp
        .sigma
        .unwrap_or_else(|| SymTensorField::zeros(inp.grid))
        .scaled(cfg.sigma_scale);
    let xi = inp
        .xi
        .unwrap_or_else(|| centered_gradient(&tau))
        .scaled(cfg.xi_scale);
    let metric = Arc::new(inp.metric);
    let data = match ConstraintData::new(metric, tau, sigma, Some(xi)) {
        Err(CoupledError::InvalidData(msg)) if msg.contains("sigma") => {
            return Err(invalid("sigma", format!("standing assumption violated: {msg}")).into());
        }
        other => other?,
    };
    let dim = data.flags().ckv_kernel_dim;
    if dim > 0 {
        warnings.push(format!(
            "conformal Killing kernel dim {dim}; projection enabled"
        ));
    }
    Ok(data)
}

fn settings(cfg: &RunConfig) -> SolverSettings {
    SolverSettings {
        lich: LichConfig {
            tol: cfg.solver.lich_tol,
            ..LichConfig::default()
        },
        vector: VectorConfig {
            tol: cfg.solver.vector_tol,
            ..VectorConfig::default()
        },
    }
}

fn picard_cfg(cfg: &RunConfig) -> PicardConfig {
    PicardConfig {
        relax: cfg.solver.relax,
        tol: cfg.solver.picard_tol,
        max_iter: cfg.solver.max_iter,
        ceiling: cfg.solver.ceiling,
        certify_tol: cfg.solver.certify_tol,
        solvers: settings(cfg),
    }
}

fn continuation_cfg(cfg: &RunConfig) -> ContinuationConfig {
    ContinuationConfig {
        picard: picard_cfg(cfg),
        growth_limit: cfg.continuation.growth_limit,
    }
}

fn defect_cfg(cfg: &RunConfig) -> DefectConfig {
    DefectConfig {
        relax: 1.0,
        tol: cfg.solver.picard_tol,
        max_iter: cfg.solver.max_iter,
        certify_tol: cfg.solver.certify_tol,
        solvers: settings(cfg),
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    summary: Summary,
    warnings: Vec<String>,
}

impl Ctx<'_> {
    fn done(mut self, exit_code: i32, status: impl Into<String>) -> RunOutcome {
        let status = status.into();
        self.summary.set("run", "exit_code", exit_code as i64);
        self.summary.set("run", "verdict", status.clone());
        if !self.warnings.is_empty() {
            self.summary.set("run", "warnings", self.warnings.clone());
        }
        RunOutcome {
            exit_code,
            status,
            summary: self.summary,
            warnings: self.warnings,
        }
    }

    fn dump<F: GridField>(&mut self, name: &str, field: &F) -> Result<()> {
        if let Some(dir) = &self.cfg.dump_dir {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(format!("{name}.field"));
            dump(field, &path).with_context(|| format!("writing {}", path.display()))?;
            self.summary
                .set("outputs", name, path.display().to_string());
        }
        Ok(())
    }

    fn flags(&mut self, data: &ConstraintData) {
        let f = data.flags();
        self.summary.section("assumption_flags", &f);
    }
}

/// Run one subcommand. `Err` means exit code 1.
pub fn execute(cmd: Subcommand, cfg: &RunConfig) -> Result<RunOutcome> {
    let mut ctx = Ctx {
        cfg,
        summary: Summary::new(cmd.name()),
        warnings: Vec::new(),
    };
    ctx.summary.set("run", "n_axis", cfg.n_axis as i64);
    if cmd == Subcommand::Study {
        return study(ctx);
    }
    let inp = inputs(cfg)?;
    ctx.summary.set("run", "data", inp.label.clone());
    match cmd {
        Subcommand::SolveLich => solve_lich(ctx, inp),
        Subcommand::SolveVector => solve_vec(ctx, inp),
        Subcommand::Study => unreachable!(),
        _ => {
            let data = constraint_data(cfg, inp, &mut ctx.warnings)?;
            ctx.flags(&data);
            match cmd {
                Subcommand::SolveCoupled => solve_coupled(ctx, &data),
                Subcommand::Continuation => continuation(ctx, &data, false),
                Subcommand::LimitDiagnostic => continuation(ctx, &data, true),
                Subcommand::ModifiedContinuation => modified(ctx, &data),
                Subcommand::DefectNear => defect(
                    ctx,
                    &data,
                    near_cmc_defect_iterate(&data, cfg.defect.truncation, &defect_cfg(cfg)),
                ),
                Subcommand::DefectFar => defect(
                    ctx,
                    &data,
                    far_cmc_defect_iterate(&data, cfg.defect.truncation, &defect_cfg(cfg)),
                ),
                Subcommand::DefectLocal => defect_local(ctx, &data),
                _ => unreachable!(),
            }
        }
    }
}

fn solve_lich(mut ctx: Ctx, inp: Inputs) -> Result<RunOutcome> {
    let tau = inp
        .tau
        .ok_or_else(|| invalid("fields.tau", "τ is required"))?;
    let w = inp.w.ok_or_else(|| {
        invalid(
            "fields.w",
            "solve-lich needs a source w (fixture with `w` or [fields] w)",
        )
    })?;
    let p = LichnerowiczProblem::new(Arc::new(inp.metric), tau, w)?;
    let case = classify(&p)?;
    ctx.summary.section("case", &case);
    let cfg = LichConfig {
        tol: ctx.cfg.solver.lich_tol,
        ..LichConfig::default()
    };
    match lichnerowicz::solve(&p, &cfg) {
        Ok(rep) => {
            let res = rep.relative_residual();
            ctx.summary.set("final", "sup_u", rep.u.max());
            ctx.summary.set("final", "min_u", rep.u.min());
            ctx.summary.set("final", "relative_residual", res);
            ctx.summary
                .set("final", "iterations", rep.iterations as i64);
            ctx.summary.set(
                "final",
                "method",
                format!("{:?}", rep.method).to_lowercase(),
            );
            ctx.dump("u", &rep.u)?;
            let ok = res <= cfg.tol;
            let status = format!(
                "{}: sup u = {:.9}",
                if ok { "certified" } else { "uncertified" },
                rep.u.max()
            );
            Ok(ctx.done(if ok { EXIT_CERTIFIED } else { EXIT_UNCERTIFIED }, status))
        }
        Err(LichError::CaseUnsolvable(id)) => {
            debug_assert_eq!(id, CaseId::NoSolution);
            Ok(ctx.done(
                EXIT_UNCERTIFIED,
                "no positive solution exists for this data",
            ))
        }
        Err(e @ LichError::NoConvergence { .. }) => {
            Ok(ctx.done(EXIT_UNCERTIFIED, format!("uncertified: {e}")))
        }
        Err(e) => Err(e.into()),
    }
}

fn solve_vec(mut ctx: Ctx, inp: Inputs) -> Result<RunOutcome> {
    let grid = inp.grid;
    let phi = inp.phi.unwrap_or_else(|| ScalarField::constant(grid, 1.0));
    let xi = match (inp.xi, &inp.tau) {
        (Some(xi), _) => xi,
        (None, Some(tau)) => centered_gradient(tau),
        (None, None) => return Err(invalid("fields.xi", "give ξ or τ").into()),
    }
    .scaled(ctx.cfg.xi_scale);
    let metric = Arc::new(inp.metric);
    let kernel: Arc<[OneFormField]> =
        ckv_kernel(&metric, cforge_core::coupled::CKV_TOLERANCE)?.into();
    if !kernel.is_empty() {
        ctx.warnings.push(format!(
            "conformal Killing kernel dim {}; projection enabled",
            kernel.len()
        ));
    }
    ctx.summary
        .set("assumption_flags", "ckv_kernel_dim", kernel.len() as i64);
    let rhs = assemble_rhs(&metric, &phi, &xi)?;
    let p = VectorProblem::new(metric.clone(), rhs, kernel)?;
    let cfg = VectorConfig {
        tol: ctx.cfg.solver.vector_tol,
        ..VectorConfig::default()
    };
    match solve_vector(&p, &cfg) {
        Ok(rep) => {
            let lw = lw_norms(&metric, &rep.w_field)?;
            ctx.summary
                .set("final", "relative_residual", rep.rel_residual);
            ctx.summary.set(
                "final",
                "projected_rhs_fraction",
                rep.projected_rhs_fraction,
            );
            ctx.summary
                .set("final", "iterations", rep.iterations as i64);
            ctx.summary.set("final", "lw_l2", lw.l2);
            ctx.summary.set("final", "lw_sup", lw.sup);
            ctx.summary.set("final", "w_sup", rep.w_field.max_abs());
            ctx.dump("w", &rep.w_field)?;
            Ok(ctx.done(
                EXIT_CERTIFIED,
                format!("certified: relative residual {:.3e}", rep.rel_residual),
            ))
        }
        Err(e @ (VectorError::Tolerance { .. } | VectorError::KernelContamination(_))) => {
            Ok(ctx.done(EXIT_UNCERTIFIED, format!("uncertified: {e}")))
        }
        Err(e) => Err(e.into()),
    }
}

/// Iteration failures that are scientific outcomes rather than errors.
fn is_outcome(e: &CoupledError) -> bool {
    matches!(
        e,
        CoupledError::BlowUp { .. }
            | CoupledError::NoConvergence { .. }
            | CoupledError::NotASolution { .. }
            | CoupledError::NotFound
            | CoupledError::InsufficientBlowUp(_)
    )
}

fn solve_coupled(mut ctx: Ctx, data: &ConstraintData) -> Result<RunOutcome> {
    match picard_solve(
        data,
        &ScalarField::zeros(*data.grid()),
        &picard_cfg(ctx.cfg),
    ) {
        Ok(sol) => {
            for r in &sol.records {
                ctx.summary.push("trace", r);
            }
            ctx.summary
                .set("final", "iterations", sol.iterations as i64);
            ctx.summary.set("final", "sup_phi", sol.phi.max());
            ctx.summary.set("final", "min_phi", sol.phi.min());
            ctx.summary.set("final", "lw_l2", sol.lw_l2);
            ctx.summary.section("certificate", &sol.certificate);
            ctx.dump("phi", &sol.phi)?;
            ctx.dump("w", &sol.w_field)?;
            Ok(ctx.done(
                EXIT_CERTIFIED,
                format!("certified: sup phi = {:.9}", sol.phi.max()),
            ))
        }
        Err(e) if is_outcome(&e) => Ok(ctx.done(EXIT_UNCERTIFIED, format!("uncertified: {e}"))),
        Err(e) => Err(e.into()),
    }
}

fn diagnose(ctx: &mut Ctx, data: &ConstraintData, tail: &[TailEntry]) -> Result<bool> {
    match limit_diagnostic(data, tail) {
        Ok(d) => {
            ctx.summary.set("limit_diagnostic", "status", "computed");
            ctx.summary.section("limit_diagnostic", &d);
            Ok(true)
        }
        Err(e @ (CoupledError::InsufficientBlowUp(_) | CoupledError::TauNotPositive(_))) => {
            ctx.summary.set("limit_diagnostic", "status", "unavailable");
            ctx.summary.set("limit_diagnostic", "reason", e.to_string());
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

fn trace_summary(ctx: &mut Ctx, trace: &ContinuationTrace) -> Result<()> {
    for r in &trace.records {
        ctx.summary.push("trace", r);
    }
    let outcome = toml::Value::try_from(trace.outcome)?;
    ctx.summary.set("final", "outcome", outcome);
    if let Some(f) = &trace.failure {
        ctx.summary.set("final", "failure", f.clone());
    }
    if let Some(c) = &trace.certificate {
        ctx.summary.section("certificate", c);
    }
    if let Some(last) = trace.final_state() {
        ctx.summary.set("final", "t", last.t);
        ctx.summary.set("final", "sup_phi", last.phi.max());
        ctx.dump("phi", &last.phi)?;
        ctx.dump("w", &last.w_field)?;
    }
    Ok(())
}

fn continuation(mut ctx: Ctx, data: &ConstraintData, diagnostic_only: bool) -> Result<RunOutcome> {
    let trace = schaefer_continuation(data, &ctx.cfg.continuation.t, &continuation_cfg(ctx.cfg))?;
    trace_summary(&mut ctx, &trace)?;
    let certified = trace.outcome == ContinuationOutcome::ConvergedFull
        && trace.certificate.is_some_and(|c| c.certified);
    if diagnostic_only {
        let ok = diagnose(&mut ctx, data, &trace.tail)?;
        return Ok(if ok {
            ctx.done(
                EXIT_CERTIFIED,
                "limit profile extracted from the blow-up tail",
            )
        } else {
            ctx.done(EXIT_UNCERTIFIED, "no blow-up tail to diagnose")
        });
    }
    if certified {
        return Ok(ctx.done(EXIT_CERTIFIED, "certified: continuation reached t = 1"));
    }
    diagnose(&mut ctx, data, &trace.tail)?;
    let status = match trace.outcome {
        ContinuationOutcome::BlowUp => "blow-up branch detected",
        ContinuationOutcome::Stagnated => "continuation stagnated",
        ContinuationOutcome::ConvergedFull => "uncertified at t = 1",
    };
    Ok(ctx.done(EXIT_UNCERTIFIED, status))
}

fn modified(mut ctx: Ctx, data: &ConstraintData) -> Result<RunOutcome> {
    match modified_continuation_t12(data, &ctx.cfg.continuation.t, &continuation_cfg(ctx.cfg)) {
        Ok(res) => {
            for r in &res.records {
                ctx.summary.push("trace", r);
            }
            ctx.summary.set("final", "alpha", res.alpha);
            ctx.summary.set("final", "t0", res.t0);
            ctx.summary.set("final", "sup_psi", res.psi.max());
            if let Some((t, why)) = &res.stopped {
                ctx.summary.set("final", "stopped_at", *t);
                ctx.summary.set("final", "stop_reason", why.clone());
            }
            ctx.summary.section("certificate", &res.certificate);
            ctx.dump("psi", &res.psi)?;
            ctx.dump("w", &res.w_field)?;
            let code = if res.certificate.certified {
                EXIT_CERTIFIED
            } else {
                EXIT_UNCERTIFIED
            };
            Ok(ctx.done(
                code,
                format!("solution for scaled data alpha = {:.6}", res.alpha),
            ))
        }
        Err(e) if is_outcome(&e) => Ok(ctx.done(EXIT_UNCERTIFIED, format!("uncertified: {e}"))),
        Err(e) => Err(e.into()),
    }
}

fn defect_summary(ctx: &mut Ctx, rep: &DefectReport) -> Result<i32> {
    for r in &rep.records {
        ctx.summary.push("trace", r);
    }
    ctx.summary
        .set("final", "kind", toml::Value::try_from(rep.kind)?);
    ctx.summary
        .set("final", "outcome", toml::Value::try_from(rep.outcome)?);
    ctx.summary.set("final", "bound", rep.bound);
    ctx.summary.set("final", "branch_held", rep.branch_held);
    ctx.summary.set("final", "sup_phi", rep.phi.max());
    if let Some(m) = &rep.message {
        ctx.summary.set("final", "message", m.clone());
    }
    ctx.summary.section("extras", &rep.extras);
    if let Some(c) = &rep.certificate {
        ctx.summary.section("certificate", c);
    }
    ctx.dump("phi", &rep.phi)?;
    ctx.dump("w", &rep.w_field)?;
    let certified =
        rep.outcome == DefectOutcome::Certified && rep.certificate.is_some_and(|c| c.certified);
    Ok(if certified {
        EXIT_CERTIFIED
    } else {
        EXIT_UNCERTIFIED
    })
}

fn defect_status(rep: &DefectReport) -> String {
    match rep.outcome {
        DefectOutcome::Certified => format!("certified: sup phi = {:.9}", rep.phi.max()),
        DefectOutcome::ZeroBranch => {
            "zero branch: the data lie outside the gated regime".to_string()
        }
        DefectOutcome::Truncated => "fixed point is truncated".to_string(),
        DefectOutcome::NotConverged => "defect iteration did not converge".to_string(),
    }
}

fn defect(
    mut ctx: Ctx,
    _data: &ConstraintData,
    rep: Result<DefectReport, CoupledError>,
) -> Result<RunOutcome> {
    match rep {
        Ok(rep) => {
            let code = defect_summary(&mut ctx, &rep)?;
            Ok(ctx.done(code, defect_status(&rep)))
        }
        Err(e) if is_outcome(&e) => Ok(ctx.done(EXIT_UNCERTIFIED, format!("uncertified: {e}"))),
        Err(e) => Err(e.into()),
    }
}

fn defect_local(mut ctx: Ctx, data: &ConstraintData) -> Result<RunOutcome> {
    let psi = match &ctx.cfg.defect.psi {
        PsiChoice::SolutionScale(s) => {
            let sol = picard_solve(
                data,
                &ScalarField::zeros(*data.grid()),
                &picard_cfg(ctx.cfg),
            )
            .context("psi_solution_scale needs a converged Picard solution")?;
            sol.phi.scaled(*s)
        }
        PsiChoice::Constant(c) => ScalarField::constant(*data.grid(), *c),
        PsiChoice::File(p) => {
            let f: ScalarField = load(p).with_context(|| format!("loading {}", p.display()))?;
            if f.grid() != data.grid() {
                bail!("{} is on a different grid than the data", p.display());
            }
            f
        }
    };
    if !(psi.min() > 0.0) {
        return Err(invalid("defect.psi", "ψ must be positive").into());
    }
    let d = &ctx.cfg.defect;
    let check = local_supersolution_check(
        data,
        &psi,
        d.probe_count,
        d.seed,
        d.probe_tol,
        &settings(ctx.cfg),
    )?;
    ctx.summary
        .set("probes", "not_falsified", check.not_falsified);
    for p in &check.probes {
        ctx.summary.push("probe", p);
    }
    match local_supersolution_solve(data, &psi, &defect_cfg(ctx.cfg)) {
        Ok(rep) => {
            let code = defect_summary(&mut ctx, &rep)?;
            Ok(ctx.done(code, defect_status(&rep)))
        }
        Err(e) if is_outcome(&e) => Ok(ctx.done(EXIT_UNCERTIFIED, format!("uncertified: {e}"))),
        Err(e) => Err(e.into()),
    }
}

/// Exit 0 when a bisection located its bracket or every row certified.
fn study_verdict(t: &StudyTable) -> (bool, String) {
    if let Some(status) = t.summary_value("status") {
        return (status == "located", status.to_string());
    }
    let errors = t
        .column("error")
        .map_or(0, |c| c.iter().filter(|e| !e.is_empty()).count());
    let uncertified = ["certified", "identity_ok", "converged"]
        .iter()
        .filter_map(|c| t.column(c))
        .flatten()
        .filter(|v| *v != "true")
        .count();
    let ok = errors == 0 && uncertified == 0;
    (
        ok,
        format!(
            "{} rows, {errors} with errors, {uncertified} uncertified cells",
            t.rows.len()
        ),
    )
}

fn study(mut ctx: Ctx) -> Result<RunOutcome> {
    let spec = ctx
        .cfg
        .study
        .clone()
        .ok_or_else(|| invalid("study", "the study subcommand needs a [study] table"))?;
    ctx.summary.set("run", "data", spec.fixture.clone());
    ctx.summary
        .set("study", "kind", toml::Value::try_from(spec.kind)?);
    let (table, out, summary_csv) = run_study_to_files(&spec, &PathBuf::new())?;
    ctx.summary.set("study", "rows", table.rows.len() as i64);
    ctx.summary
        .set("outputs", "table", out.display().to_string());
    ctx.summary
        .set("outputs", "summary", summary_csv.display().to_string());
    for (k, v) in &table.summary {
        ctx.summary.set("study_summary", k, v.clone());
    }
    let (ok, status) = study_verdict(&table);
    Ok(ctx.done(if ok { EXIT_CERTIFIED } else { EXIT_UNCERTIFIED }, status))
}
