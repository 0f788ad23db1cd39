use serde::{Deserialize, Serialize};

use super::{certify, source_magnitude, Certificate, ConstraintData};
use crate::error::{CoupledError, GeometryError};
use crate::field::{OneFormField, ScalarField};
use crate::metric::Metric;
use crate::ops::{gradient_pairing, integrate, laplace_beltrami, lp_norm};
use crate::par::det_sum;
use crate::vector::lw_norms;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbpReport {
    /// 8∫φ⁷Δφ dv with spectral derivatives.
    pub lhs: f64,
    /// (7/2)∫|∇φ⁴|² dv with spectral derivatives.
    pub rhs: f64,
    pub rel_gap: f64,
    /// Both sides with the finite-difference operators of the solvers.
    pub fd_lhs: f64,
    pub fd_rhs: f64,
    pub fd_rel_gap: f64,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s > 0.0 {
        (a - b).abs() / s
    } else {
        0.0
    }
}

/// Both sides of 8∫φ⁷Δφ dv = (7/2)∫|∇φ⁴|² dv. The spectral pair is exact for
/// band-limited φ whose seventh power stays below the Nyquist frequency.
pub fn ibp_identity(m: &Metric, phi: &ScalarField) -> Result<IbpReport, GeometryError> {
    if phi.grid() != m.grid() {
        return Err(GeometryError::GridMismatch);
    }
    let min = phi.min();
    if !(min > 0.0) {
        return Err(GeometryError::NonPositive(min));
    }
    let grid = *m.grid();
    let n = grid.node_count();
    let h3 = grid.cell_volume();
    let sp = m.spectral();
    let gi = m.g_inv();
    let sq = m.sqrt_det().values();
    let flux = |d: &[Vec<f64>; 3], a: usize, i: usize| -> f64 {
        let g = gi.at(i);
        let row = [[g[0], g[1], g[2]], [g[1], g[3], g[4]], [g[2], g[4], g[5]]][a];
        sq[i] * (row[0] * d[0][i] + row[1] * d[1][i] + row[2] * d[2][i])
    };
    let p = phi.values();
    let dphi = sp.gradient(p);
    let mut div = vec![0.0; n];
    for a in 0..3 {
        let fa: Vec<f64> = (0..n).map(|i| flux(&dphi, a, i)).collect();
        let da = &sp.gradient(&fa)[a];
        div.iter_mut().zip(da).for_each(|(d, v)| *d += v);
    }
    // √g Δφ = −∂_a(√g g^{ab} ∂_b φ)
    let lhs = -8.0 * det_sum(n, |i| p[i].powi(7) * div[i]) * h3;
    let p4: Vec<f64> = p.iter().map(|v| v.powi(4)).collect();
    let d4 = sp.gradient(&p4);
    let rhs =
        3.5 * det_sum(n, |i| {
            let g = gi.at(i);
            let v = [d4[0][i], d4[1][i], d4[2][i]];
            sq[i]
                * (g[0] * v[0] * v[0]
                    + g[3] * v[1] * v[1]
                    + g[5] * v[2] * v[2]
                    + 2.0 * (g[1] * v[0] * v[1] + g[2] * v[0] * v[2] + g[4] * v[1] * v[2]))
        }) * h3;
    let lap = laplace_beltrami(m, phi)?;
    let fd_lhs = 8.0 * integrate(m, &phi.zip_map(&lap, |u, l| u.powi(7) * l)?)?;
    let phi4 = phi.map(|v| v.powi(4));
    let fd_rhs = 3.5 * gradient_pairing(m, &phi4, &phi4)?;
    Ok(IbpReport {
        lhs,
        rhs,
        rel_gap: rel_gap(lhs, rhs),
        fd_lhs,
        fd_rhs,
        fd_rel_gap: rel_gap(fd_lhs, fd_rhs),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub certificate: Certificate,
    pub lw_l2: f64,
    pub l: f64,
    pub within_l: bool,
    pub phi_sup: f64,
    pub phi4_l2: f64,
    pub phi4_l6: f64,
    /// ‖∇φ⁴‖_{L²} recovered from 8∫φ⁷Δφ = (7/2)∫|∇φ⁴|².
    pub grad_phi4_l2: f64,
    /// ∫Rφ⁸ dv
    pub curvature_term: f64,
    /// (2/3)∫τ²φ¹² dv
    pub tau_term: f64,
    /// ∫|σ + LW|² dv
    pub source_term: f64,
    /// Relative defect of 8∫φ⁷Δφ + ∫Rφ⁸ + (2/3)∫τ²φ¹² = ∫|σ + LW|².
    pub energy_gap: f64,
}

/// Norms entering the a priori bound for a claimed solution (φ, W).
pub fn apriori_monitor(
    data: &ConstraintData,
    phi: &ScalarField,
    w_field: &OneFormField,
    l: f64,
    tol: f64,
) -> Result<AprioriReport, CoupledError> {
    let certificate = certify(data, phi, w_field, tol)?;
    if !certificate.certified {
        return Err(CoupledError::NotASolution {
            lich: certificate.lich_residual,
            vector: certificate.vector_residual,
        });
    }
    let m = data.metric();
    let lw_l2 = lw_norms(m, w_field)?.l2;
    let phi4 = phi.map(|v| v.powi(4));
    let lap = laplace_beltrami(m, phi)?;
    let lap_term = 8.0 * integrate(m, &phi.zip_map(&lap, |u, l| u.powi(7) * l)?)?;
    let curvature_term = integrate(m, &phi.zip_map(m.scalar_curvature(), |u, r| r * u.powi(8))?)?;
    let tau_term =
        (2.0 / 3.0) * integrate(m, &phi.zip_map(data.tau(), |u, t| t * t * u.powi(12))?)?;
    let w = source_magnitude(data, w_field)?;
    let source_term = integrate(m, &w.map(|v| v * v))?;
    Ok(AprioriReport {
        certificate,
        lw_l2,
        l,
        within_l: lw_l2 <= l,
        phi_sup: phi.max(),
        phi4_l2: lp_norm(m, &phi4, 2.0)?,
        phi4_l6: lp_norm(m, &phi4, 6.0)?,
        grad_phi4_l2: (lap_term / 3.5).max(0.0).sqrt(),
        curvature_term,
        tau_term,
        source_term,
        energy_gap: rel_gap(lap_term + curvature_term + tau_term, source_term),
    })
}
