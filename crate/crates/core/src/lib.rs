//! Periodic-grid laboratory for the conformal constraint equations
//!
//! ```text
//! 8Δφ + Rφ + (2/3)τ²φ⁵ = |σ + LW|² φ⁻⁷,     −½ L*L W = (2/3) φ⁶ dτ
//! ```
//!
//! on a uniform periodic 3-grid. Δ is the nonnegative Laplace–Beltrami
//! operator and L the conformal Killing operator.

pub mod conformal;
pub mod coupled;
pub mod eigen;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod lichnerowicz;
pub mod metric;
pub mod ops;
pub mod studies;
pub mod vector;

mod krylov;
mod par;
mod spectral;
mod stencil;

pub use eigen::{ckv_kernel, yamabe_sign, YamabeEstimate, YamabeSign};
pub use error::{
    CoupledError, GeometryError, IoError, KrylovError, LichError, StudyError, VectorError,
};
pub use field::{OneFormField, ScalarField, SymTensorField};
pub use grid::GridSpec;
pub use metric::{build_metric, Metric};
pub use ops::{
    conformal_killing, half_lstar_l, integrate, laplace_beltrami, lp_norm, lw_pairing, sup_norm,
    tensor_norm2,
};
