//! FFT utilities on the periodic grid: constant-coefficient inverses used as
//! preconditioners, and spectral differentiation.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

#[derive(Clone)]
pub(crate) struct Spectral {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Symbol of the flat 7-point Laplacian, (4/h²) Σ sin²(π m_a / n).
    symbol: Vec<f64>,
    /// Signed wave numbers per axis index, Nyquist mode set to zero.
    wavenumber: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub(crate) fn new(grid: GridSpec) -> Self {
        let n = grid.n_axis();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let h = grid.spacing();
        let one_d: Vec<f64> = (0..n)
            .map(|m| (4.0 / (h * h)) * (std::f64::consts::PI * m as f64 / n as f64).sin().powi(2))
            .collect();
        let mut symbol = vec![0.0; grid.node_count()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    symbol[grid.index(i, j, k)] = one_d[i] + one_d[j] + one_d[k];
                }
            }
        }
        let k0 = grid.fundamental_wavenumber();
        let wavenumber = (0..n)
            .map(|m| {
                if 2 * m == n {
                    0.0
                } else if 2 * m < n {
                    k0 * m as f64
                } else {
                    k0 * (m as f64 - n as f64)
                }
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            symbol,
            wavenumber,
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n_axis();
        // contiguous axis
        fft.process(data);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        // middle axis
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    line[j] = data[(i * n + j) * n + k];
                }
                fft.process(&mut line);
                for j in 0..n {
                    data[(i * n + j) * n + k] = line[j];
                }
            }
        }
        // slow axis
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    line[i] = data[(i * n + j) * n + k];
                }
                fft.process(&mut line);
                for i in 0..n {
                    data[(i * n + j) * n + k] = line[i];
                }
            }
        }
    }

    /// `out = (a·(−δ²) + b)⁻¹ rhs / h³`, where δ² is the flat 7-point Laplacian.
    /// Modes with a nonpositive denominator use the lowest nonzero mode instead.
    pub(crate) fn solve_shifted(&self, rhs: &[f64], out: &mut [f64], a: f64, b: f64) {
        let count = self.grid.node_count();
        let mut data: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        let lowest = a * self.symbol[1] + b;
        let norm = 1.0 / (count as f64 * self.grid.cell_volume());
        for (d, &s) in data.iter_mut().zip(&self.symbol) {
            let mut den = a * s + b;
            if den <= 1e-14 * lowest.abs() {
                den = lowest;
            }
            *d *= norm / den;
        }
        self.transform(&mut data, &self.inverse);
        for (o, d) in out.iter_mut().zip(&data) {
            *o = d.re;
        }
    }

    /// Spectral partial derivatives of periodic grid data.
    pub(crate) fn gradient(&self, u: &[f64]) -> [Vec<f64>; 3] {
        let n = self.grid.n_axis();
        let count = self.grid.node_count();
        let mut hat: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut hat, &self.forward);
        std::array::from_fn(|axis| {
            let mut d = hat.clone();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let m = [i, j, k][axis];
                        let idx = (i * n + j) * n + k;
                        d[idx] *= Complex64::new(0.0, self.wavenumber[m] / count as f64);
                    }
                }
            }
            self.transform(&mut d, &self.inverse);
            d.iter().map(|c| c.re).collect()
        })
    }
}
