//! Named, versioned analytic fixtures.
//!
//! The registry ships as `fixtures.toml` next to this crate's manifest and is
//! embedded at compile time. Each entry picks formulas for g, τ, σ (and
//! optionally ξ or a Lichnerowicz source w) by name.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::field::{OneFormField, ScalarField, SymTensorField};
use crate::grid::GridSpec;
use crate::metric::{build_metric, Metric};
use crate::ops;

const REGISTRY_TEXT: &str = include_str!("../fixtures.toml");

/// Symmetric perturbation used by the generic bumpy metric. Phases are chosen
/// so that no translation, reflection or rotation of the torus is an isometry.
fn bumpy_perturbation(p: [f64; 3], k: f64) -> [f64; 6] {
    let (x, y, z) = (k * p[0], k * p[1], k * p[2]);
    [
        (x + 0.3).sin() + 0.5 * (y - 0.7).cos(),
        0.5 * (x + y + 0.5).sin(),
        0.5 * (x - z + 0.1).cos(),
        (y + 1.1).cos() + 0.5 * (z + 0.2).sin(),
        0.5 * (y + z - 0.8).sin(),
        (z - 0.4).sin() + 0.5 * (x + 0.9).cos(),
    ]
}

/// Perturbation depending on x only; ∂_y and ∂_z remain Killing.
fn x_only_perturbation(p: [f64; 3], k: f64) -> [f64; 6] {
    let x = k * p[0];
    [
        (x + 0.3).sin(),
        0.5 * (x + 0.5).cos(),
        0.3 * (2.0 * x - 0.2).sin(),
        0.8 * (x + 1.1).cos(),
        0.4 * (x - 0.8).sin(),
        0.6 * (2.0 * x + 0.4).cos(),
    ]
}

/// g = δ + ε h(x) with data on all six components.
pub fn bumpy_metric_components(grid: GridSpec, epsilon: f64) -> SymTensorField {
    let k = grid.fundamental_wavenumber();
    SymTensorField::from_fn(grid, |p| {
        let h = bumpy_perturbation(p, k);
        let d = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        std::array::from_fn(|c| d[c] + epsilon * h[c])
    })
}

pub fn bumpy_metric(grid: GridSpec, epsilon: f64) -> Metric {
    build_metric(grid, bumpy_metric_components(grid, epsilon)).expect("small perturbation of δ")
}

pub fn x_only_metric(grid: GridSpec, epsilon: f64) -> Metric {
    let k = grid.fundamental_wavenumber();
    let g = SymTensorField::from_fn(grid, |p| {
        let h = x_only_perturbation(p, k);
        let d = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        std::array::from_fn(|c| d[c] + epsilon * h[c])
    });
    build_metric(grid, g).expect("small perturbation of δ")
}

/// g = ψ⁴ δ with ψ = 1 + a sin(2πx/L).
pub fn conformally_flat_metric(grid: GridSpec, amplitude: f64) -> Metric {
    let k = grid.fundamental_wavenumber();
    let g = SymTensorField::from_fn(grid, |p| {
        let psi4 = (1.0 + amplitude * (k * p[0]).sin()).powi(4);
        [psi4, 0.0, 0.0, psi4, 0.0, psi4]
    });
    build_metric(grid, g).expect("positive conformal factor")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricFormula {
    Flat,
    Bumpy { epsilon: f64 },
    XOnly { epsilon: f64 },
    ConformallyFlat { amplitude: f64 },
}

impl MetricFormula {
    pub fn build(&self, grid: GridSpec, curvature_shift: f64) -> Metric {
        let m = match *self {
            MetricFormula::Flat => Metric::flat(grid),
            MetricFormula::Bumpy { epsilon } => bumpy_metric(grid, epsilon),
            MetricFormula::XOnly { epsilon } => x_only_metric(grid, epsilon),
            MetricFormula::ConformallyFlat { amplitude } => {
                conformally_flat_metric(grid, amplitude)
            }
        };
        if curvature_shift != 0.0 {
            m.with_curvature_shift(curvature_shift)
        } else {
            m
        }
    }
}

/// Scalar formulas in the phase X = 2πx/L.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarFormula {
    Constant {
        value: f64,
    },
    /// offset + amplitude·sin X
    SinX {
        offset: f64,
        amplitude: f64,
    },
    /// amplitude·sin² X
    SinSquaredX {
        amplitude: f64,
    },
    /// exp(rate·sin X)
    ExpSinX {
        rate: f64,
    },
}

impl ScalarFormula {
    pub fn eval(&self, p: [f64; 3], k: f64) -> f64 {
        let x = k * p[0];
        match *self {
            ScalarFormula::Constant { value } => value,
            ScalarFormula::SinX { offset, amplitude } => offset + amplitude * x.sin(),
            ScalarFormula::SinSquaredX { amplitude } => amplitude * x.sin().powi(2),
            ScalarFormula::ExpSinX { rate } => (rate * x.sin()).exp(),
        }
    }

    pub fn sample(&self, grid: GridSpec) -> ScalarField {
        let k = grid.fundamental_wavenumber();
        ScalarField::from_fn(grid, |p| self.eval(p, k))
    }

    /// Highest vanishing order of the formula's zeros (0 if it never vanishes).
    pub fn zero_order(&self) -> u32 {
        match *self {
            ScalarFormula::Constant { value } => {
                if value == 0.0 {
                    u32::MAX
                } else {
                    0
                }
            }
            ScalarFormula::SinX { offset, amplitude } => {
                if offset.abs() < amplitude.abs() {
                    1
                } else if offset.abs() == amplitude.abs() && amplitude != 0.0 {
                    2
                } else if offset == 0.0 && amplitude == 0.0 {
                    u32::MAX
                } else {
                    0
                }
            }
            ScalarFormula::SinSquaredX { amplitude } => {
                if amplitude == 0.0 {
                    u32::MAX
                } else {
                    2
                }
            }
            ScalarFormula::ExpSinX { .. } => 0,
        }
    }
}

/// Trace-free tensors σ. `TtWaves` is transverse-traceless for the flat
/// metric; on curved metrics the trace is removed with respect to g and the
/// divergence is only small.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaFormula {
    Zero,
    /// σ_xy = c (constant)
    ConstantXy {
        value: f64,
    },
    /// σ_xy = a(c₀ + cos Z), σ_xz = a sin Y, σ_yz = a cos X
    TtWaves {
        amplitude: f64,
    },
}

impl SigmaFormula {
    pub fn sample(&self, metric: &Metric) -> SymTensorField {
        let grid = *metric.grid();
        let k = grid.fundamental_wavenumber();
        let raw = match *self {
            SigmaFormula::Zero => SymTensorField::zeros(grid),
            SigmaFormula::ConstantXy { value } => {
                SymTensorField::from_fn(grid, |_| [0.0, value, 0.0, 0.0, 0.0, 0.0])
            }
            SigmaFormula::TtWaves { amplitude: a } => SymTensorField::from_fn(grid, |p| {
                let (x, y, z) = (k * p[0], k * p[1], k * p[2]);
                [0.0, a * (0.6 + z.cos()), a * y.sin(), 0.0, a * x.cos(), 0.0]
            }),
        };
        trace_free_part(metric, &raw)
    }
}

/// s − (1/3)(tr_g s) g
pub fn trace_free_part(metric: &Metric, s: &SymTensorField) -> SymTensorField {
    let tr = ops::tensor_trace(metric, s).expect("same grid");
    let grid = *metric.grid();
    let nodes: Vec<[f64; 6]> = (0..grid.node_count())
        .map(|i| {
            let g = metric.g().at(i);
            let v = s.at(i);
            std::array::from_fn(|c| v[c] - tr.values()[i] / 3.0 * g[c])
        })
        .collect();
    SymTensorField::from_nodes(grid, &nodes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum XiFormula {
    /// Centered-difference dτ, the default.
    Dtau,
    /// ε·dτ
    ScaledDtau {
        factor: f64,
    },
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub id: String,
    pub version: u32,
    pub description: String,
    pub metric: MetricFormula,
    #[serde(default)]
    pub curvature_shift: f64,
    pub tau: ScalarFormula,
    #[serde(default)]
    pub sigma: Option<SigmaFormula>,
    /// Rescale σ so that ∫|σ|² dv equals this value.
    #[serde(default)]
    pub sigma_l2_squared: Option<f64>,
    #[serde(default)]
    pub xi: Option<XiFormula>,
    /// Source amplitude for Lichnerowicz-only fixtures.
    #[serde(default)]
    pub w: Option<ScalarFormula>,
}

/// Sampled fields of a fixture on a concrete grid.
#[derive(Clone, Debug)]
pub struct FixtureFields {
    pub metric: Metric,
    pub tau: ScalarField,
    pub sigma: SymTensorField,
    pub xi: Option<OneFormField>,
    pub w: Option<ScalarField>,
}

impl Fixture {
    pub fn build(&self, grid: GridSpec) -> Result<FixtureFields, GeometryError> {
        let metric = self.metric.build(grid, self.curvature_shift);
        let tau = self.tau.sample(grid);
        let mut sigma = self
            .sigma
            .clone()
            .unwrap_or(SigmaFormula::Zero)
            .sample(&metric);
        if let Some(target) = self.sigma_l2_squared {
            let current = ops::tensor_inner(&metric, &sigma, &sigma)?;
            if current > 0.0 {
                sigma = sigma.scaled((target / current).sqrt());
            }
        }
        let xi = match self.xi.clone().unwrap_or(XiFormula::Dtau) {
            XiFormula::Dtau => None,
            XiFormula::ScaledDtau { factor } => Some(ops::centered_gradient(&tau).scaled(factor)),
            XiFormula::Zero => Some(OneFormField::zeros(grid)),
        };
        let w = self.w.as_ref().map(|f| f.sample(grid));
        Ok(FixtureFields {
            metric,
            tau,
            sigma,
            xi,
            w,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    fixture: Vec<Fixture>,
}

/// All fixtures shipped with the crate.
pub fn registry() -> Vec<Fixture> {
    let file: RegistryFile =
        toml::from_str(REGISTRY_TEXT).expect("embedded fixture registry parses");
    file.fixture
}

pub fn lookup(id: &str) -> Option<Fixture> {
    registry().into_iter().find(|f| f.id == id)
}

/// x-phase helper for tests and oracles: `TAU / L`.
pub fn wavenumber(grid: &GridSpec) -> f64 {
    TAU / grid.box_length()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_ids_are_unique_and_buildable() {
        let reg = registry();
        assert!(!reg.is_empty());
        let mut ids: Vec<_> = reg.iter().map(|f| f.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), reg.len());
        let grid = GridSpec::unit(8).unwrap();
        for f in &reg {
            f.build(grid).unwrap_or_else(|e| panic!("{}: {e}", f.id));
        }
    }

    #[test]
    fn sigma_is_trace_free_on_curved_metric() {
        let grid = GridSpec::unit(8).unwrap();
        let m = bumpy_metric(grid, 0.05);
        let s = SigmaFormula::TtWaves { amplitude: 0.3 }.sample(&m);
        assert!(ops::tensor_trace(&m, &s).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn sigma_l2_target_is_met() {
        let grid = GridSpec::unit(8).unwrap();
        let f = lookup("positive-yamabe").unwrap();
        let fields = f.build(grid).unwrap();
        let s2 = ops::tensor_inner(&fields.metric, &fields.sigma, &fields.sigma).unwrap();
        assert!((s2 - f.sigma_l2_squared.unwrap()).abs() < 1e-18);
    }

    #[test]
    fn zero_orders() {
        assert_eq!(
            ScalarFormula::SinX {
                offset: 0.0,
                amplitude: 1.0
            }
            .zero_order(),
            1
        );
        assert_eq!(
            ScalarFormula::SinSquaredX { amplitude: 1.0 }.zero_order(),
            2
        );
        assert_eq!(ScalarFormula::Constant { value: 1.0 }.zero_order(), 0);
        assert_eq!(
            ScalarFormula::SinX {
                offset: 1.0,
                amplitude: 0.1
            }
            .zero_order(),
            0
        );
    }
}
