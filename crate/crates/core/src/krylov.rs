//! Preconditioned conjugate gradients for symmetric operators.

use crate::error::KrylovError;
use crate::par::{axpy, dot};

#[derive(Clone, Copy, Debug)]
pub(crate) struct CgSettings {
    /// Stop when ‖r‖₂ ≤ rel_tol · ‖b‖₂.
    pub rel_tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct CgStats {
    pub iterations: usize,
}

/// Solve `A x = b` starting from the contents of `x`.
pub(crate) fn pcg<A, P>(
    apply: A,
    precond: P,
    b: &[f64],
    x: &mut [f64],
    settings: CgSettings,
) -> Result<CgStats, KrylovError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0 });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    let mut best = rel;
    let mut since_best = 0;
    for it in 0..settings.max_iter {
        if rel <= settings.rel_tol {
            return Ok(CgStats { iterations: it });
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            if rel <= settings.rel_tol * 10.0 || pq == 0.0 && rel < 1e-14 {
                return Ok(CgStats { iterations: it });
            }
            return Err(KrylovError::Indefinite(pq));
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel < best * 0.999 {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 200 {
                return Err(KrylovError::Stagnation {
                    iterations: it + 1,
                    residual: rel,
                });
            }
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    if rel <= settings.rel_tol {
        Ok(CgStats {
            iterations: settings.max_iter,
        })
    } else {
        Err(KrylovError::Stagnation {
            iterations: settings.max_iter,
            residual: rel,
        })
    }
}
