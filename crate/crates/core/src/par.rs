//! Parallel helpers whose floating-point results do not depend on scheduling.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Sum of `f(i)` for `i in 0..n`, reduced in fixed chunks so the result is
/// bit-identical for any thread count.
pub fn det_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        })
        .collect();
    partial.iter().sum()
}

pub fn det_max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(f)
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    det_sum(a.len(), |i| a[i] * b[i])
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut()
        .zip(x.par_iter())
        .for_each(|(y, x)| *y += alpha * x);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_sum_matches_serial_order_independent_of_pool() {
        let n = 50_001;
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = det_sum(n, f);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| det_sum(n, f));
        assert_eq!(a.to_bits(), b.to_bits());
        let serial: f64 = (0..n).map(f).sum();
        assert!((a - serial).abs() < 1e-9);
    }
}
