//! Scripted campaigns that tabulate solver runs over a parameter grid.
//!
//! Every study produces a [`StudyTable`]: one CSV row per parameter point with
//! its certification status, plus a small key/value summary holding the
//! verdicts. Row failures are recorded in an `error` column and never abort
//! the campaign.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled::{
    certify, far_cmc_defect_iterate, picard_solve, schaefer_continuation, ConstraintData,
    ContinuationConfig, DefectConfig, DefectOutcome, PicardConfig,
};
use crate::eigen::yamabe_sign;
use crate::error::LichError;
use crate::error::{IoError, StudyError};
use crate::field::ScalarField;
use crate::fixtures::{self, Fixture};
use crate::grid::GridSpec;
use crate::lichnerowicz::{self, integral_tau_minus_alpha, LichConfig, LichnerowiczProblem};
use crate::ops::{lp_norm, tensor_inner};

/// Spread bound for a "bounded" ratio column.
pub const BOUNDED_SPREAD: f64 = 2.0;
/// Growth factor for an "unbounded" ratio column.
pub const UNBOUNDED_GROWTH: f64 = 10.0;
/// Target relative width of bisection brackets.
pub const BRACKET_WIDTH: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    BlowupSweep,
    Dichotomy,
    NearCmcBisect,
    FarCmcBisect,
    ScalingMatrix,
    ContinuationAtlas,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyParams {
    /// Constant sources w ≡ k for the sweeps.
    #[serde(default)]
    pub k: Vec<f64>,
    /// Exponents α of the L^{6α} ratio columns.
    #[serde(default)]
    pub alpha: Vec<f64>,
    /// [lo, hi] for ξ = ε·dτ.
    #[serde(default)]
    pub epsilon: Vec<f64>,
    /// [lo, hi] for ∫|σ|² dv.
    #[serde(default)]
    pub sigma_l2_squared: Vec<f64>,
    /// Scaling constants C.
    #[serde(default)]
    pub c: Vec<f64>,
    /// Continuation parameters.
    #[serde(default)]
    pub t: Vec<f64>,
    /// Extra fixtures for the continuation atlas.
    #[serde(default)]
    pub fixtures: Vec<String>,
    #[serde(default)]
    pub relax: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Upper bound on bisection steps.
    #[serde(default)]
    pub max_bisections: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub kind: StudyKind,
    pub fixture: String,
    #[serde(default = "default_n_axis")]
    pub n_axis: usize,
    #[serde(default)]
    pub params: StudyParams,
    /// CSV destination; the summary goes next to it as `<stem>_summary.csv`.
    pub output: PathBuf,
}

fn default_n_axis() -> usize {
    32
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<(String, String)>,
}

impl StudyTable {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), IoError> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(&self.columns)?;
        for r in &self.rows {
            wr.write_record(r)?;
        }
        wr.flush().map_err(IoError::from)?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), IoError> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["key", "value"])?;
        for (k, v) in &self.summary {
            wr.write_record([k, v])?;
        }
        wr.flush().map_err(IoError::from)?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn err_cell<E: std::fmt::Display>(e: &E) -> String {
    e.to_string().replace(['\n', '\r'], " ")
}

fn lookup(id: &str) -> Result<Fixture, StudyError> {
    fixtures::lookup(id).ok_or_else(|| StudyError::Spec(format!("unknown fixture {id:?}")))
}

fn require(ok: bool, msg: &str) -> Result<(), StudyError> {
    if ok {
        Ok(())
    } else {
        Err(StudyError::Spec(msg.to_string()))
    }
}

fn check_range(v: &[f64], name: &str) -> Result<(f64, f64), StudyError> {
    require(
        v.len() == 2 && v[0] > 0.0 && v[1] > v[0] && v[1].is_finite(),
        &format!("{name} must be [lo, hi] with 0 < lo < hi"),
    )?;
    Ok((v[0], v[1]))
}

impl StudySpec {
    /// Checks that do not need any solve.
    pub fn validate(&self) -> Result<(), StudyError> {
        lookup(&self.fixture)?;
        GridSpec::unit(self.n_axis).map_err(|e| StudyError::Spec(e.to_string()))?;
        let p = &self.params;
        if let Some(r) = p.relax {
            require(r > 0.0 && r <= 1.0, "relax must lie in (0, 1]")?;
        }
        match self.kind {
            StudyKind::BlowupSweep | StudyKind::Dichotomy => {
                require(!p.k.is_empty(), "k grid must be non-empty")?;
                require(
                    p.k[0] > 1.0 && p.k.windows(2).all(|w| w[1] > w[0]),
                    "k values must be increasing and greater than 1",
                )?;
                if self.kind == StudyKind::Dichotomy {
                    require(!p.alpha.is_empty(), "alpha grid must be non-empty")?;
                }
                require(
                    p.alpha.iter().all(|a| *a >= 1.0 / 6.0),
                    "alpha must be at least 1/6",
                )?;
            }
            StudyKind::NearCmcBisect => {
                check_range(&p.epsilon, "epsilon")?;
            }
            StudyKind::FarCmcBisect => {
                check_range(&p.sigma_l2_squared, "sigma_l2_squared")?;
            }
            StudyKind::ScalingMatrix => {
                require(!p.c.is_empty(), "c grid must be non-empty")?;
                require(
                    p.c.iter().all(|c| *c > 0.0 && c.is_finite()),
                    "c values must be positive",
                )?;
            }
            StudyKind::ContinuationAtlas => {
                require(!p.t.is_empty(), "t grid must be non-empty")?;
                for f in &p.fixtures {
                    lookup(f)?;
                }
            }
        }
        Ok(())
    }
}

/// Run a study and return its table; nothing is written.
pub fn run_study(spec: &StudySpec) -> Result<StudyTable, StudyError> {
    spec.validate()?;
    let grid = GridSpec::unit(spec.n_axis).map_err(|e| StudyError::Spec(e.to_string()))?;
    let fixture = lookup(&spec.fixture)?;
    match spec.kind {
        StudyKind::BlowupSweep | StudyKind::Dichotomy => sweep(spec, &fixture, grid),
        StudyKind::NearCmcBisect => near_bisect(spec, &fixture, grid),
        StudyKind::FarCmcBisect => far_bisect(spec, &fixture, grid),
        StudyKind::ScalingMatrix => scaling_matrix(spec, &fixture, grid),
        StudyKind::ContinuationAtlas => atlas(spec, grid),
    }
}

/// Run a study and write `<output>` and `<stem>_summary.csv`, with relative
/// output paths resolved against `base_dir`.
pub fn run_study_to_files(
    spec: &StudySpec,
    base_dir: &Path,
) -> Result<(StudyTable, PathBuf, PathBuf), StudyError> {
    let table = run_study(spec)?;
    let out = if spec.output.is_absolute() {
        spec.output.clone()
    } else {
        base_dir.join(&spec.output)
    };
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("study")
        .to_string();
    let summary = out.with_file_name(format!("{stem}_summary.csv"));
    table.write_csv(File::create(&out).map_err(IoError::from)?)?;
    table.write_summary_csv(File::create(&summary).map_err(IoError::from)?)?;
    Ok((table, out, summary))
}

fn sweep(spec: &StudySpec, fixture: &Fixture, grid: GridSpec) -> Result<StudyTable, StudyError> {
    let f = fixture.build(grid).map_err(LichError::from)?;
    let metric = Arc::new(f.metric);
    let yamabe = yamabe_sign(&metric).map_err(LichError::from)?;
    let alphas = &spec.params.alpha;
    let cfg = LichConfig::default();
    let mut columns = vec!["k".to_string(), "sup_u".into(), "ratio_sup".into()];
    columns.extend(alphas.iter().map(|a| format!("ratio_alpha_{a}")));
    columns.extend(["residual".to_string(), "certified".into(), "error".into()]);
    let rows: Vec<(Vec<String>, Option<(f64, Vec<f64>)>)> = spec
        .params
        .k
        .par_iter()
        .map(|&k| {
            let solved = LichnerowiczProblem::new(
                metric.clone(),
                f.tau.clone(),
                ScalarField::constant(grid, k),
            )
            .map(|p| p.with_yamabe(yamabe))
            .and_then(|p| lichnerowicz::solve(&p, &cfg));
            match solved {
                Ok(rep) => {
                    let sup = rep.u.max_abs();
                    let ratio_sup = sup.powi(6) / k;
                    let ratios: Vec<f64> = alphas
                        .iter()
                        .map(|&a| {
                            lp_norm(&metric, &rep.u, 6.0 * a)
                                .map(|v| v.powi(6) / k)
                                .unwrap_or(f64::NAN)
                        })
                        .collect();
                    let res = rep.relative_residual();
                    let mut r = vec![num(k), num(sup), num(ratio_sup)];
                    r.extend(ratios.iter().map(|v| num(*v)));
                    r.extend([num(res), (res <= cfg.tol).to_string(), String::new()]);
                    (r, Some((ratio_sup, ratios)))
                }
                Err(e) => {
                    let mut r = vec![num(k), String::new(), String::new()];
                    r.extend(alphas.iter().map(|_| String::new()));
                    r.extend([String::new(), "false".into(), err_cell(&e)]);
                    (r, None)
                }
            }
        })
        .collect();
    let mut table = StudyTable {
        columns,
        rows: rows.iter().map(|r| r.0.clone()).collect(),
        summary: Vec::new(),
    };
    let ok: Vec<&(f64, Vec<f64>)> = rows.iter().filter_map(|r| r.1.as_ref()).collect();
    let all_ok = ok.len() == rows.len();
    table.summary.push(("fixture".into(), spec.fixture.clone()));
    table
        .summary
        .push(("rows_certified".into(), all_ok.to_string()));
    let verdict = |col: &[f64]| -> (f64, f64, &'static str) {
        let growth = col.last().unwrap() / col[0];
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = max / min;
        let v = if growth >= UNBOUNDED_GROWTH {
            "unbounded"
        } else if spread <= BOUNDED_SPREAD {
            "bounded"
        } else {
            "inconclusive"
        };
        (growth, spread, v)
    };
    if all_ok && !ok.is_empty() {
        let sup_col: Vec<f64> = ok.iter().map(|r| r.0).collect();
        let (g, s, v) = verdict(&sup_col);
        table.summary.push(("ratio_sup_growth".into(), num(g)));
        table.summary.push(("ratio_sup_spread".into(), num(s)));
        table.summary.push(("ratio_sup_verdict".into(), v.into()));
        let order = fixture.tau.zero_order();
        for (i, a) in alphas.iter().enumerate() {
            let col: Vec<f64> = ok.iter().map(|r| r.1[i]).collect();
            let (g, s, v) = verdict(&col);
            let integrable = order == 0 || (order != u32::MAX && a * (order as f64) < 1.0);
            table.summary.push((format!("alpha_{a}_growth"), num(g)));
            table.summary.push((format!("alpha_{a}_spread"), num(s)));
            table.summary.push((format!("alpha_{a}_verdict"), v.into()));
            table
                .summary
                .push((format!("alpha_{a}_integrable"), integrable.to_string()));
            table.summary.push((
                format!("alpha_{a}_discrete_integral"),
                integral_tau_minus_alpha(&metric, &f.tau, *a).map_or("inf".into(), num),
            ));
            let matches = match v {
                "bounded" => integrable.to_string(),
                "unbounded" => (!integrable).to_string(),
                _ => "inconclusive".to_string(),
            };
            table
                .summary
                .push((format!("alpha_{a}_matches_integrability"), matches));
        }
    } else {
        table
            .summary
            .push(("ratio_sup_verdict".into(), "incomplete".into()));
    }
    Ok(table)
}

fn picard_cfg(p: &StudyParams) -> PicardConfig {
    let mut cfg = PicardConfig::default();
    if let Some(r) = p.relax {
        cfg.relax = r;
    }
    if let Some(m) = p.max_iter {
        cfg.max_iter = m;
    }
    cfg
}

/// Geometric bisection on a predicate that holds at `lo` and fails at `hi`.
fn bisect<F>(lo: f64, hi: f64, max_steps: usize, mut eval: F) -> (Option<(f64, f64)>, &'static str)
where
    F: FnMut(f64) -> bool,
{
    let at_lo = eval(lo);
    let at_hi = eval(hi);
    if !at_lo || at_hi {
        let why = match (at_lo, at_hi) {
            (true, true) => "no transition: predicate holds on the whole range",
            (false, false) => "no transition: predicate fails on the whole range",
            _ => "reversed transition: predicate fails at lo and holds at hi",
        };
        return (None, why);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..max_steps {
        if (b - a) / b <= BRACKET_WIDTH {
            break;
        }
        let mid = (a * b).sqrt();
        if eval(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    (
        Some((a, b)),
        if (b - a) / b <= BRACKET_WIDTH {
            "located"
        } else {
            "step limit reached"
        },
    )
}

fn push_bracket(table: &mut StudyTable, bracket: Option<(f64, f64)>, status: &str) {
    table.summary.push(("status".into(), status.into()));
    if let Some((a, b)) = bracket {
        table.summary.push(("bracket_lo".into(), num(a)));
        table.summary.push(("bracket_hi".into(), num(b)));
        table
            .summary
            .push(("relative_width".into(), num((b - a) / b)));
    }
}

fn near_bisect(
    spec: &StudySpec,
    fixture: &Fixture,
    grid: GridSpec,
) -> Result<StudyTable, StudyError> {
    let (lo, hi) = check_range(&spec.params.epsilon, "epsilon")?;
    let base = ConstraintData::from_fixture(fixture, grid)?;
    let dtau = crate::ops::centered_gradient(base.tau());
    let cfg = picard_cfg(&spec.params);
    let mut table = StudyTable::new(&[
        "epsilon",
        "converged",
        "certified",
        "iterations",
        "sup_phi",
        "lw_l2",
        "lich_residual",
        "vector_residual",
        "error",
    ]);
    let (bracket, status) = bisect(lo, hi, spec.params.max_bisections.unwrap_or(40), |eps| {
        let row = base
            .with_xi(dtau.scaled(eps))
            .and_then(|d| picard_solve(&d, &ScalarField::zeros(grid), &cfg));
        match row {
            Ok(s) => {
                table.rows.push(vec![
                    num(eps),
                    "true".into(),
                    s.certificate.certified.to_string(),
                    s.iterations.to_string(),
                    num(s.phi.max()),
                    num(s.lw_l2),
                    num(s.certificate.lich_residual),
                    num(s.certificate.vector_residual),
                    String::new(),
                ]);
                s.certificate.certified
            }
            Err(e) => {
                table.rows.push(vec![
                    num(eps),
                    "false".into(),
                    "false".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    err_cell(&e),
                ]);
                false
            }
        }
    });
    table.summary.push(("fixture".into(), spec.fixture.clone()));
    table
        .summary
        .push(("predicate".into(), "picard_certified".into()));
    push_bracket(&mut table, bracket, status);
    Ok(table)
}

fn far_bisect(
    spec: &StudySpec,
    fixture: &Fixture,
    grid: GridSpec,
) -> Result<StudyTable, StudyError> {
    let (lo, hi) = check_range(&spec.params.sigma_l2_squared, "sigma_l2_squared")?;
    let base = ConstraintData::from_fixture(fixture, grid)?;
    let current = tensor_inner(base.metric(), base.sigma(), base.sigma())
        .map_err(crate::error::CoupledError::from)?;
    if !(current > 0.0) {
        return Err(StudyError::Spec("fixture sigma vanishes".into()));
    }
    let mut cfg = DefectConfig::default();
    if let Some(r) = spec.params.relax {
        cfg.relax = r;
    }
    if let Some(m) = spec.params.max_iter {
        cfg.max_iter = m;
    }
    let mut table = StudyTable::new(&[
        "sigma_l2_squared",
        "outcome",
        "certified",
        "iterations",
        "sup_phi",
        "min_margin",
        "conservative",
        "chain_value",
        "error",
    ]);
    let (bracket, status) = bisect(lo, hi, spec.params.max_bisections.unwrap_or(40), |s2| {
        let row = base
            .with_sigma_scaled((s2 / current).sqrt())
            .and_then(|d| far_cmc_defect_iterate(&d, None, &cfg));
        match row {
            Ok(r) => {
                let ok = r.outcome == DefectOutcome::Certified;
                table.rows.push(vec![
                    num(s2),
                    format!("{:?}", r.outcome),
                    ok.to_string(),
                    r.records.len().to_string(),
                    num(r.phi.max()),
                    r.extras.min_margin.map_or(String::new(), num),
                    r.extras.conservative.to_string(),
                    r.extras.chain_value.map_or(String::new(), num),
                    String::new(),
                ]);
                ok
            }
            Err(e) => {
                table.rows.push(vec![
                    num(s2),
                    "error".into(),
                    "false".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    err_cell(&e),
                ]);
                false
            }
        }
    });
    table.summary.push(("fixture".into(), spec.fixture.clone()));
    table
        .summary
        .push(("predicate".into(), "far_cmc_certified".into()));
    push_bracket(&mut table, bracket, status);
    Ok(table)
}

fn scaling_matrix(
    spec: &StudySpec,
    fixture: &Fixture,
    grid: GridSpec,
) -> Result<StudyTable, StudyError> {
    let base = ConstraintData::from_fixture(fixture, grid)?;
    let cfg = picard_cfg(&spec.params);
    let sol = picard_solve(&base, &ScalarField::zeros(grid), &cfg)?;
    let mut table = StudyTable::new(&[
        "c",
        "transform_lich_residual",
        "transform_vector_residual",
        "transform_certified",
        "solve_certified",
        "phi_diff",
        "w_diff",
        "identity_ok",
        "error",
    ]);
    const IDENTITY_TOL: f64 = 1e-6;
    let rows: Vec<Vec<String>> = spec
        .params
        .c
        .par_iter()
        .map(|&c| {
            let run = || -> Result<Vec<String>, crate::error::CoupledError> {
                let data = base.rescaled(c)?;
                let phi_c = sol.phi.scaled(1.0 / c);
                let w_c = sol.w_field.scaled(c.powi(-4));
                let cert = certify(&data, &phi_c, &w_c, IDENTITY_TOL)?;
                let solved = picard_solve(&data, &ScalarField::zeros(grid), &cfg)?;
                let phi_diff = solved
                    .phi
                    .values()
                    .iter()
                    .zip(phi_c.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let w_diff = solved.w_field.add_scaled(-1.0, &w_c)?.max_abs();
                Ok(vec![
                    num(c),
                    num(cert.lich_residual),
                    num(cert.vector_residual),
                    cert.certified.to_string(),
                    solved.certificate.certified.to_string(),
                    num(phi_diff),
                    num(w_diff),
                    (cert.certified && phi_diff <= IDENTITY_TOL && w_diff <= IDENTITY_TOL)
                        .to_string(),
                    String::new(),
                ])
            };
            run().unwrap_or_else(|e| {
                let mut r = vec![num(c)];
                r.extend(std::iter::repeat_n(String::new(), 2));
                r.extend([
                    "false".into(),
                    "false".into(),
                    String::new(),
                    String::new(),
                    "false".into(),
                    err_cell(&e),
                ]);
                r
            })
        })
        .collect();
    table.rows = rows;
    let all = table
        .column("identity_ok")
        .unwrap()
        .iter()
        .all(|v| *v == "true");
    table.summary.push(("fixture".into(), spec.fixture.clone()));
    table.summary.push((
        "base_certified".into(),
        sol.certificate.certified.to_string(),
    ));
    table
        .summary
        .push(("all_identity_ok".into(), all.to_string()));
    Ok(table)
}

fn atlas(spec: &StudySpec, grid: GridSpec) -> Result<StudyTable, StudyError> {
    let mut ids = vec![spec.fixture.clone()];
    ids.extend(
        spec.params
            .fixtures
            .iter()
            .filter(|f| **f != spec.fixture)
            .cloned(),
    );
    let cfg = ContinuationConfig {
        picard: picard_cfg(&spec.params),
        ..ContinuationConfig::default()
    };
    let t_grid = spec.params.t.clone();
    let per_fixture: Vec<(
        String,
        Result<crate::coupled::ContinuationTrace, crate::error::CoupledError>,
    )> = ids
        .par_iter()
        .map(|id| {
            let res = lookup(id)
                .map_err(|e| crate::error::CoupledError::InvalidData(e.to_string()))
                .and_then(|f| ConstraintData::from_fixture(&f, grid))
                .and_then(|d| schaefer_continuation(&d, &t_grid, &cfg));
            (id.clone(), res)
        })
        .collect();
    let mut table = StudyTable::new(&[
        "fixture",
        "t",
        "sup_phi",
        "sup_psi",
        "picard_iters",
        "lich_residual",
        "vector_residual",
        "lw_l2",
        "converged",
        "outcome",
        "error",
    ]);
    for (id, res) in per_fixture {
        match res {
            Ok(trace) => {
                let outcome = format!("{:?}", trace.outcome);
                for r in &trace.records {
                    table.rows.push(vec![
                        id.clone(),
                        num(r.t),
                        num(r.sup_phi),
                        num(r.sup_psi),
                        r.picard_iters.to_string(),
                        num(r.lich_residual),
                        num(r.vector_residual),
                        num(r.lw_l2),
                        r.converged.to_string(),
                        outcome.clone(),
                        if r.converged {
                            String::new()
                        } else {
                            trace.failure.clone().unwrap_or_default()
                        },
                    ]);
                }
                table.summary.push((format!("{id}_outcome"), outcome));
            }
            Err(e) => {
                let mut r = vec![id.clone()];
                r.extend(std::iter::repeat_n(String::new(), 7));
                r.extend(["false".into(), "error".into(), err_cell(&e)]);
                table.rows.push(r);
                table
                    .summary
                    .push((format!("{id}_outcome"), "error".into()));
            }
        }
    }
    Ok(table)
}
