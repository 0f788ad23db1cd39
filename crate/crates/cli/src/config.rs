//! Run configuration files.
//!
//! A config is a TOML document. Every key is optional; unknown keys are
//! rejected. Relative paths are resolved against the directory holding the
//! config file.
//!
//! ```toml
//! fixture = "benchmark"     # registry id; or give [fields]
//! n_axis = 32
//! summary = "run.toml"      # run summary destination (also printed)
//! dump_dir = "out"          # solution fields are written here
//!
//! [data]
//! sigma_scale = 1.0         # σ → sσ
//! xi_scale = 1.0            # ξ → sξ
//!
//! [fields]                  # field files written by `cforge_core::io`
//! metric = "g.field"        # default: flat
//! tau = "tau.field"
//! sigma = "sigma.field"     # default: 0
//! xi = "xi.field"           # default: centered dτ
//! w = "w.field"             # solve-lich source
//! phi = "phi.field"         # solve-vector input
//!
//! [solver]
//! lich_tol = 1e-9
//! vector_tol = 1e-8
//! picard_tol = 1e-10
//! certify_tol = 1e-8
//! relax = 0.5
//! max_iter = 200
//! ceiling = 1e6
//!
//! [continuation]
//! t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
//! growth_limit = 10.0
//!
//! [defect]
//! truncation = 8.0          # a; default from the CMC comparison solve
//! probe_count = 8
//! seed = 0
//! probe_tol = 1e-8
//! psi_solution_scale = 2.0  # ψ = s·(Picard solution); or psi_constant / psi_file
//!
//! [study]
//! kind = "scaling_matrix"
//! output = "scaling.csv"
//! [study.params]
//! c = [1.0, 2.0, 4.0]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use cforge_core::fixtures::{self, Fixture};
use cforge_core::studies::{StudyKind, StudyParams, StudySpec};
use cforge_core::GridSpec;
use serde::Deserialize;

pub const DEFAULT_N_AXIS: usize = 32;
pub const DEFAULT_LICH_TOL: f64 = 1e-9;
pub const DEFAULT_VECTOR_TOL: f64 = 1e-8;
pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_CERTIFY_TOL: f64 = 1e-8;
pub const DEFAULT_RELAX: f64 = 0.5;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_CEILING: f64 = 1e6;
pub const DEFAULT_GROWTH_LIMIT: f64 = 10.0;
pub const DEFAULT_PROBE_COUNT: usize = 8;
pub const DEFAULT_PROBE_TOL: f64 = 1e-8;
pub const DEFAULT_PSI_SCALE: f64 = 2.0;

pub fn default_t_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug)]
pub enum ConfigError {
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        line: usize,
        message: String,
    },
    Validation {
        field: String,
        message: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Read { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            Self::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Self::Validation { field, message } => write!(f, "invalid `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub(crate) fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    fixture: Option<String>,
    n_axis: Option<usize>,
    summary: Option<PathBuf>,
    dump_dir: Option<PathBuf>,
    #[serde(default)]
    data: RawData,
    fields: Option<FieldPaths>,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    continuation: RawContinuation,
    #[serde(default)]
    defect: RawDefect,
    study: Option<RawStudy>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    sigma_scale: Option<f64>,
    xi_scale: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPaths {
    pub metric: Option<PathBuf>,
    pub tau: Option<PathBuf>,
    pub sigma: Option<PathBuf>,
    pub xi: Option<PathBuf>,
    pub w: Option<PathBuf>,
    pub phi: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    lich_tol: Option<f64>,
    vector_tol: Option<f64>,
    picard_tol: Option<f64>,
    certify_tol: Option<f64>,
    relax: Option<f64>,
    max_iter: Option<usize>,
    ceiling: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContinuation {
    t: Option<Vec<f64>>,
    growth_limit: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefect {
    truncation: Option<f64>,
    probe_count: Option<usize>,
    seed: Option<u64>,
    probe_tol: Option<f64>,
    psi_solution_scale: Option<f64>,
    psi_constant: Option<f64>,
    psi_file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    kind: StudyKind,
    output: PathBuf,
    #[serde(default)]
    params: StudyParams,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Fixture(Fixture),
    Fields(FieldPaths),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub lich_tol: f64,
    pub vector_tol: f64,
    pub picard_tol: f64,
    pub certify_tol: f64,
    pub relax: f64,
    pub max_iter: usize,
    pub ceiling: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationOptions {
    pub t: Vec<f64>,
    pub growth_limit: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PsiChoice {
    SolutionScale(f64),
    Constant(f64),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectOptions {
    pub truncation: Option<f64>,
    pub probe_count: usize,
    pub seed: u64,
    pub probe_tol: f64,
    pub psi: PsiChoice,
}

/// A fully validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub base_dir: PathBuf,
    pub source: DataSource,
    pub n_axis: usize,
    pub sigma_scale: f64,
    pub xi_scale: f64,
    pub solver: SolverOptions,
    pub continuation: ContinuationOptions,
    pub defect: DefectOptions,
    pub study: Option<StudySpec>,
    pub summary: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub fixture: Option<String>,
    pub n_axis: Option<usize>,
    pub relax: Option<f64>,
    pub sigma_scale: Option<f64>,
    pub summary: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
    pub t: Option<Vec<f64>>,
    pub psi_solution_scale: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(
            field,
            format!("must be a positive finite number (got {v})"),
        ))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(
            field,
            format!("must be a nonnegative finite number (got {v})"),
        ))
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Read and validate a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config_with(Some(path), &Overrides::default())
}

/// Read (when `path` is given) and validate, applying command-line overrides.
/// Without a file, paths resolve against the working directory.
pub fn parse_config_with(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    let (raw, base_dir) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (parse_text(&text)?, base)
        }
        None => (RawConfig::default(), PathBuf::new()),
    };
    validate(raw, base_dir, ov)
}

/// Parse config text without touching the file system.
pub fn parse_str(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    validate(
        parse_text(text)?,
        base_dir.to_path_buf(),
        &Overrides::default(),
    )
}

fn parse_text(text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })
}

fn validate(raw: RawConfig, base_dir: PathBuf, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    let n_axis = ov.n_axis.or(raw.n_axis).unwrap_or(DEFAULT_N_AXIS);
    GridSpec::unit(n_axis).map_err(|e| invalid("n_axis", e.to_string()))?;

    let fixture_id = ov.fixture.clone().or(raw.fixture);
    let source = match (fixture_id, raw.fields) {
        (Some(_), Some(_)) if ov.fixture.is_none() => {
            return Err(invalid(
                "fields",
                "give either `fixture` or [fields], not both",
            ));
        }
        (Some(id), _) => DataSource::Fixture(
            fixtures::lookup(&id)
                .ok_or_else(|| invalid("fixture", format!("unknown fixture id {id:?}")))?,
        ),
        (None, Some(f)) => {
            if f.tau.is_none() && f.w.is_none() && f.phi.is_none() {
                return Err(invalid(
                    "fields",
                    "at least one of `tau`, `w`, `phi` is required",
                ));
            }
            let r = |p: Option<PathBuf>| p.map(|p| resolve(&base_dir, p));
            DataSource::Fields(FieldPaths {
                metric: r(f.metric),
                tau: r(f.tau),
                sigma: r(f.sigma),
                xi: r(f.xi),
                w: r(f.w),
                phi: r(f.phi),
            })
        }
        (None, None) => {
            return Err(invalid(
                "fixture",
                "a fixture id or a [fields] table is required",
            ))
        }
    };

    let s = raw.solver;
    let relax = ov.relax.or(s.relax).unwrap_or(DEFAULT_RELAX);
    if !(relax > 0.0 && relax <= 1.0) {
        return Err(invalid(
            "solver.relax",
            format!("must lie in (0, 1] (got {relax})"),
        ));
    }
    let max_iter = s.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    if max_iter == 0 {
        return Err(invalid("solver.max_iter", "must be at least 1"));
    }
    let solver = SolverOptions {
        lich_tol: positive("solver.lich_tol", s.lich_tol.unwrap_or(DEFAULT_LICH_TOL))?,
        vector_tol: positive(
            "solver.vector_tol",
            s.vector_tol.unwrap_or(DEFAULT_VECTOR_TOL),
        )?,
        picard_tol: positive(
            "solver.picard_tol",
            s.picard_tol.unwrap_or(DEFAULT_PICARD_TOL),
        )?,
        certify_tol: positive(
            "solver.certify_tol",
            s.certify_tol.unwrap_or(DEFAULT_CERTIFY_TOL),
        )?,
        relax,
        max_iter,
        ceiling: positive("solver.ceiling", s.ceiling.unwrap_or(DEFAULT_CEILING))?,
    };

    let t =
        ov.t.clone()
            .or(raw.continuation.t)
            .unwrap_or_else(default_t_grid);
    if t.is_empty() || t.windows(2).any(|w| w[1] <= w[0]) || t[0] < 0.0 || *t.last().unwrap() != 1.0
    {
        return Err(invalid(
            "continuation.t",
            "must be strictly increasing in [0, 1] and end at 1",
        ));
    }
    let growth_limit = raw
        .continuation
        .growth_limit
        .unwrap_or(DEFAULT_GROWTH_LIMIT);
    if !(growth_limit > 1.0) {
        return Err(invalid("continuation.growth_limit", "must exceed 1"));
    }

    let d = raw.defect;
    let psi = match (d.psi_solution_scale, d.psi_constant, d.psi_file) {
        _ if ov.psi_solution_scale.is_some() => PsiChoice::SolutionScale(positive(
            "defect.psi_solution_scale",
            ov.psi_solution_scale.unwrap(),
        )?),
        (Some(s), None, None) => {
            PsiChoice::SolutionScale(positive("defect.psi_solution_scale", s)?)
        }
        (None, Some(c), None) => PsiChoice::Constant(positive("defect.psi_constant", c)?),
        (None, None, Some(p)) => PsiChoice::File(resolve(&base_dir, p)),
        (None, None, None) => PsiChoice::SolutionScale(DEFAULT_PSI_SCALE),
        _ => {
            return Err(invalid(
                "defect",
                "give at most one of psi_solution_scale, psi_constant, psi_file",
            ))
        }
    };
    let defect = DefectOptions {
        truncation: d
            .truncation
            .map(|a| positive("defect.truncation", a))
            .transpose()?,
        probe_count: d.probe_count.unwrap_or(DEFAULT_PROBE_COUNT),
        seed: d.seed.unwrap_or(0),
        probe_tol: nonnegative("defect.probe_tol", d.probe_tol.unwrap_or(DEFAULT_PROBE_TOL))?,
        psi,
    };
    if defect.probe_count == 0 {
        return Err(invalid("defect.probe_count", "must be at least 1"));
    }

    let study = match raw.study {
        Some(st) => {
            let fixture = match &source {
                DataSource::Fixture(f) => f.id.clone(),
                DataSource::Fields(_) => {
                    return Err(invalid("study", "studies run on registry fixtures only"))
                }
            };
            let spec = StudySpec {
                kind: st.kind,
                fixture,
                n_axis,
                params: st.params,
                output: resolve(&base_dir, st.output),
            };
            spec.validate()
                .map_err(|e| invalid("study", e.to_string()))?;
            Some(spec)
        }
        None => None,
    };

    Ok(RunConfig {
        source,
        n_axis,
        sigma_scale: nonnegative(
            "data.sigma_scale",
            ov.sigma_scale.or(raw.data.sigma_scale).unwrap_or(1.0),
        )?,
        xi_scale: nonnegative("data.xi_scale", raw.data.xi_scale.unwrap_or(1.0))?,
        solver,
        continuation: ContinuationOptions { t, growth_limit },
        defect,
        study,
        summary: ov
            .summary
            .clone()
            .or(raw.summary)
            .map(|p| resolve(&base_dir, p)),
        dump_dir: ov
            .dump_dir
            .clone()
            .or(raw.dump_dir)
            .map(|p| resolve(&base_dir, p)),
        base_dir,
    })
}
