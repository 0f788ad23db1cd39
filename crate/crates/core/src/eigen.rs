//! Low eigenpairs of the conformal operator 8Δ + R and of ½L*L.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::field::{sym_index, OneFormField, ScalarField};
use crate::krylov::{pcg, CgSettings};
use crate::metric::Metric;
use crate::par::{axpy, det_sum, dot};

/// Eigenvalues with |λ₁| at or below this count as zero.
pub const YAMABE_DEAD_BAND: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YamabeSign {
    Positive,
    Zero,
    Negative,
}

impl YamabeSign {
    pub fn from_eigenvalue(lambda: f64) -> Self {
        if lambda.abs() <= YAMABE_DEAD_BAND {
            YamabeSign::Zero
        } else if lambda > 0.0 {
            YamabeSign::Positive
        } else {
            YamabeSign::Negative
        }
    }

    /// −1, 0 or 1.
    pub fn signum(self) -> i32 {
        match self {
            YamabeSign::Positive => 1,
            YamabeSign::Zero => 0,
            YamabeSign::Negative => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YamabeEstimate {
    pub sign: YamabeSign,
    /// First eigenvalue of 8Δ + R with respect to the L² inner product.
    pub lambda1: f64,
    pub iterations: usize,
}

/// Mean of √g·tr(g⁻¹)/3, the effective flat diffusion coefficient.
pub(crate) fn mean_diffusion(m: &Metric) -> f64 {
    let n = m.grid().node_count();
    det_sum(n, |i| {
        let gi = m.g_inv().at(i);
        m.sqrt_det().values()[i] * (gi[0] + gi[3] + gi[5]) / 3.0
    }) / n as f64
}

/// Sign of the Yamabe invariant from the first eigenvalue of 8Δ + R.
pub fn yamabe_sign(m: &Metric) -> Result<YamabeEstimate, GeometryError> {
    let (lambda1, iterations) = first_eigenvalue(m, m.scalar_curvature())?;
    Ok(YamabeEstimate {
        sign: YamabeSign::from_eigenvalue(lambda1),
        lambda1,
        iterations,
    })
}

/// First eigenvalue of 8Δ + V by shifted inverse iteration.
pub fn first_eigenvalue(
    m: &Metric,
    potential: &ScalarField,
) -> Result<(f64, usize), GeometryError> {
    if m.grid() != potential.grid() {
        return Err(GeometryError::GridMismatch);
    }
    let op = m.scalar_operator();
    let mass = &op.mass;
    let n = mass.len();
    let v = potential.values();
    let shift = (-potential.min()).max(0.0) + 1.0;
    let h3 = m.grid().cell_volume();
    let mean_mass_pot = det_sum(n, |i| mass[i] * (v[i] + shift)) / (n as f64 * h3);
    let diff = 8.0 * mean_diffusion(m);
    let spectral = m.spectral();

    let apply_a = |x: &[f64], out: &mut [f64], s: f64| {
        op.stencil.apply(x, out);
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = 8.0 * *o + mass[i] * (v[i] + s) * x[i]);
    };
    let mut x = vec![1.0; n];
    normalize(&mut x, mass);
    let mut lambda_prev = f64::INFINITY;
    let mut ax = vec![0.0; n];
    let scale = shift.max(1.0);
    let max_iter = 500;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let b: Vec<f64> = x.iter().zip(mass).map(|(x, m)| x * m).collect();
        let mut y = x.clone();
        pcg(
            |p, out| apply_a(p, out, shift),
            |r, z| spectral.solve_shifted(r, z, diff, mean_mass_pot),
            &b,
            &mut y,
            CgSettings {
                rel_tol: 1e-12,
                max_iter: 2000,
            },
        )
        .map_err(|_| GeometryError::EigenSolveFailure {
            iterations: it,
            residual,
        })?;
        normalize(&mut y, mass);
        x = y;
        apply_a(&x, &mut ax, 0.0);
        let lambda = dot(&x, &ax);
        // ‖A x − λ M x‖ in the M⁻¹ norm
        residual = det_sum(n, |i| {
            let r = ax[i] - lambda * mass[i] * x[i];
            r * r / mass[i]
        })
        .sqrt();
        if residual <= 1e-9 * scale && (lambda - lambda_prev).abs() <= 1e-13 * scale {
            return Ok((lambda, it));
        }
        lambda_prev = lambda;
    }
    Err(GeometryError::EigenSolveFailure {
        iterations: max_iter,
        residual,
    })
}

fn normalize(x: &mut [f64], mass: &[f64]) {
    let nrm = det_sum(x.len(), |i| x[i] * x[i] * mass[i]).sqrt();
    x.iter_mut().for_each(|v| *v /= nrm);
}

/// `out = M x` for covectors, M = √g h³ g^{ab}.
pub(crate) fn apply_vector_mass(m: &Metric, x: &[f64], out: &mut [f64]) {
    let n = m.grid().node_count();
    let h3 = m.grid().cell_volume();
    let nodes: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let gi = m.g_inv().at(i);
            let w = m.sqrt_det().values()[i] * h3;
            let v = [x[i], x[n + i], x[2 * n + i]];
            std::array::from_fn(|a| w * (0..3).map(|b| gi[sym_index(a, b)] * v[b]).sum::<f64>())
        })
        .collect();
    for (i, v) in nodes.iter().enumerate() {
        for a in 0..3 {
            out[a * n + i] = v[a];
        }
    }
}

/// Mean √g·g^{aa}/3 used to scale the flat preconditioner's mass term.
fn mean_vector_mass(m: &Metric) -> f64 {
    mean_diffusion(m)
}

/// Component-wise flat preconditioner for `K + μM` acting on covectors.
pub(crate) fn vector_preconditioner(m: &Metric, mu: f64) -> impl Fn(&[f64], &mut [f64]) + '_ {
    let n = m.grid().node_count();
    let diff = mean_diffusion(m);
    let mass = mu * mean_vector_mass(m);
    let spectral = m.spectral();
    move |r: &[f64], z: &mut [f64]| {
        for c in 0..3 {
            spectral.solve_shifted(
                &r[c * n..(c + 1) * n],
                &mut z[c * n..(c + 1) * n],
                diff,
                mass,
            );
        }
    }
}

const BLOCK: usize = 6;

/// L²-orthonormal basis of the discrete conformal Killing kernel: eigenvectors
/// of ½L*L with eigenvalue below `tol`.
pub fn ckv_kernel(m: &Metric, tol: f64) -> Result<Vec<OneFormField>, GeometryError> {
    let (values, vectors) = lowest_vector_modes(m)?;
    Ok(values
        .iter()
        .zip(vectors)
        .filter(|(l, _)| **l < tol)
        .map(|(_, v)| v)
        .collect())
}

/// The six lowest Ritz pairs of ½L*L (ascending), L²-orthonormal. Pairs below
/// a quarter of the lowest flat nonzero eigenvalue are converged; the others
/// are stable Ritz values only.
pub fn lowest_vector_modes(m: &Metric) -> Result<(Vec<f64>, Vec<OneFormField>), GeometryError> {
    let grid = *m.grid();
    let n = grid.node_count();
    let op = m.vector_operator();
    let k0 = grid.fundamental_wavenumber();
    let mu = 0.025 * k0 * k0;
    let guard = 0.25 * k0 * k0;
    let precond = vector_preconditioner(m, mu);
    let shifted = |x: &[f64], out: &mut [f64]| {
        op.stencil.apply(x, out);
        let mut mx = vec![0.0; x.len()];
        apply_vector_mass(m, x, &mut mx);
        axpy(mu, &mx, out);
    };

    let two_pi = std::f64::consts::TAU / grid.box_length();
    let mut block: Vec<Vec<f64>> = (0..BLOCK)
        .map(|b| {
            let f = OneFormField::from_fn(grid, |p| match b {
                0 => [1.0, 0.0, 0.0],
                1 => [0.0, 1.0, 0.0],
                2 => [0.0, 0.0, 1.0],
                3 => [(two_pi * p[1]).sin(), (two_pi * p[2]).cos(), 0.0],
                4 => [0.0, (two_pi * p[0]).cos(), (two_pi * p[2]).sin()],
                _ => [(two_pi * p[2]).cos(), 0.0, (two_pi * p[1]).sin()],
            });
            f.into_vec()
        })
        .collect();
    let mut previous = vec![f64::INFINITY; BLOCK];
    let max_iter = 60;
    let mut last_residual = f64::INFINITY;
    for it in 0..max_iter {
        if it > 0 {
            let mut next = Vec::with_capacity(BLOCK);
            for x in &block {
                let mut rhs = vec![0.0; 3 * n];
                apply_vector_mass(m, x, &mut rhs);
                let mut y = x.clone();
                pcg(
                    shifted,
                    &precond,
                    &rhs,
                    &mut y,
                    CgSettings {
                        rel_tol: 1e-11,
                        max_iter: 3000,
                    },
                )
                .map_err(|_| GeometryError::EigenSolveFailure {
                    iterations: it,
                    residual: last_residual,
                })?;
                next.push(y);
            }
            block = next;
        }
        let (values, rotated, residuals) = rayleigh_ritz(m, &block)?;
        block = rotated;
        last_residual = residuals.iter().cloned().fold(0.0, f64::max);
        // Modes below the guard must converge; the rest only bound the gap and
        // may sit inside a near-degenerate cluster.
        let stable = values
            .iter()
            .zip(&previous)
            .zip(&residuals)
            .all(|((v, p), r)| {
                if *v < guard {
                    (v - p).abs() <= 1e-9 * (1.0 + v.abs()) && *r <= 1e-6 * (1.0 + v.abs())
                } else {
                    (v - p).abs() <= 1e-3 * v.abs()
                }
            });
        previous = values.clone();
        if it > 0 && stable {
            let vectors = block
                .into_iter()
                .map(|x| OneFormField::new(grid, x))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok((values, vectors));
        }
    }
    Err(GeometryError::EigenSolveFailure {
        iterations: max_iter,
        residual: last_residual,
    })
}

type RitzResult = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

fn rayleigh_ritz(m: &Metric, block: &[Vec<f64>]) -> Result<RitzResult, GeometryError> {
    let op = m.vector_operator();
    let dim = block.len();
    let len = block[0].len();
    let kx: Vec<Vec<f64>> = block
        .iter()
        .map(|x| {
            let mut out = vec![0.0; len];
            op.stencil.apply(x, &mut out);
            out
        })
        .collect();
    let mx: Vec<Vec<f64>> = block
        .iter()
        .map(|x| {
            let mut out = vec![0.0; len];
            apply_vector_mass(m, x, &mut out);
            out
        })
        .collect();
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            a[(i, j)] = dot(&block[i], &kx[j]);
            b[(i, j)] = dot(&block[i], &mx[j]);
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let b = (&b + b.transpose()) * 0.5;
    let chol = b.cholesky().ok_or(GeometryError::EigenSolveFailure {
        iterations: 0,
        residual: f64::NAN,
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(GeometryError::EigenSolveFailure {
            iterations: 0,
            residual: f64::NAN,
        })?;
    let c = &linv * &a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let coeffs = linv.transpose() * &eig.eigenvectors;
    let mut values = Vec::with_capacity(dim);
    let mut rotated = Vec::with_capacity(dim);
    let mut residuals = Vec::with_capacity(dim);
    let n = m.grid().node_count();
    let h3 = m.grid().cell_volume();
    for &col in &order {
        let lambda = eig.eigenvalues[col];
        let mut x = vec![0.0; len];
        let mut kxr = vec![0.0; len];
        let mut mxr = vec![0.0; len];
        for i in 0..dim {
            let cf = coeffs[(i, col)];
            axpy(cf, &block[i], &mut x);
            axpy(cf, &kx[i], &mut kxr);
            axpy(cf, &mx[i], &mut mxr);
        }
        // residual in the M⁻¹ norm, approximated with the diagonal of M
        let res = det_sum(len, |k| {
            let node = k % n;
            let w = m.sqrt_det().values()[node] * h3;
            let r = kxr[k] - lambda * mxr[k];
            r * r / w
        })
        .sqrt();
        values.push(lambda);
        rotated.push(x);
        residuals.push(res);
    }
    Ok((values, rotated, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn flat_metric_has_zero_yamabe_sign() {
        let grid = GridSpec::unit(8).unwrap();
        let est = yamabe_sign(&Metric::flat(grid)).unwrap();
        assert_eq!(est.sign, YamabeSign::Zero);
        assert!(est.lambda1.abs() < 1e-10);
    }

    #[test]
    fn shifted_flat_metric_is_positive_with_unit_eigenvalue() {
        let grid = GridSpec::unit(8).unwrap();
        let est = yamabe_sign(&Metric::flat(grid).with_curvature_shift(1.0)).unwrap();
        assert_eq!(est.sign, YamabeSign::Positive);
        assert!((est.lambda1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_kernel_is_three_translations() {
        let grid = GridSpec::unit(8).unwrap();
        let m = Metric::flat(grid);
        let kernel = ckv_kernel(&m, 1e-6).unwrap();
        assert_eq!(kernel.len(), 3);
        for k in &kernel {
            for c in 0..3 {
                let comp = k.component(c);
                let spread = comp.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - comp.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(spread < 1e-8, "kernel field is not constant: {spread}");
            }
        }
    }
}
