//! Assembled 19-point periodic stencils with small dense blocks.
//!
//! Offsets lie in {−1, 0, 1}³ with at most two nonzero entries. Inputs and
//! outputs use the component-major field layout.

use rayon::prelude::*;

use crate::grid::GridSpec;

pub(crate) const SLOTS: usize = 19;

/// Offsets indexed by slot.
pub(crate) const OFFSETS: [[i64; 3]; SLOTS] = {
    let mut out = [[0i64; 3]; SLOTS];
    let mut s = 0;
    let mut a = 0;
    while a < 27 {
        let o = [
            (a / 9) as i64 - 1,
            ((a / 3) % 3) as i64 - 1,
            (a % 3) as i64 - 1,
        ];
        let nz = (o[0] != 0) as usize + (o[1] != 0) as usize + (o[2] != 0) as usize;
        if nz <= 2 {
            out[s] = o;
            s += 1;
        }
        a += 1;
    }
    out
};

pub(crate) fn slot_of(o: [i64; 3]) -> usize {
    OFFSETS
        .iter()
        .position(|&q| q == o)
        .unwrap_or_else(|| panic!("offset {o:?} outside the 19-point stencil"))
}

#[derive(Clone, Debug)]
pub(crate) struct Stencil {
    grid: GridSpec,
    block: usize,
    neighbors: Vec<u32>,
    coeffs: Vec<f64>,
}

impl Stencil {
    pub(crate) fn zeros(grid: GridSpec, block: usize) -> Self {
        let n = grid.node_count();
        let neighbors = (0..n)
            .flat_map(|idx| OFFSETS.iter().map(move |&o| grid.shifted(idx, o) as u32))
            .collect();
        Self {
            grid,
            block,
            neighbors,
            coeffs: vec![0.0; n * SLOTS * block * block],
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, row: usize, slot: usize, r: usize, c: usize, v: f64) {
        let b = self.block;
        self.coeffs[(row * SLOTS + slot) * b * b + r * b + c] += v;
    }

    /// `y = A x`
    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.grid.node_count();
        let b = self.block;
        debug_assert_eq!(x.len(), b * n);
        debug_assert_eq!(y.len(), b * n);
        match b {
            1 => {
                y.par_iter_mut().enumerate().for_each(|(row, out)| {
                    let nb = &self.neighbors[row * SLOTS..(row + 1) * SLOTS];
                    let cf = &self.coeffs[row * SLOTS..(row + 1) * SLOTS];
                    let mut s = 0.0;
                    for (m, c) in nb.iter().zip(cf) {
                        s += c * x[*m as usize];
                    }
                    *out = s;
                });
            }
            3 => {
                let (y0, rest) = y.split_at_mut(n);
                let (y1, y2) = rest.split_at_mut(n);
                let (x0, rest) = x.split_at(n);
                let (x1, x2) = rest.split_at(n);
                y0.par_iter_mut()
                    .zip(y1.par_iter_mut())
                    .zip(y2.par_iter_mut())
                    .enumerate()
                    .for_each(|(row, ((o0, o1), o2))| {
                        let nb = &self.neighbors[row * SLOTS..(row + 1) * SLOTS];
                        let cf = &self.coeffs[row * SLOTS * 9..(row + 1) * SLOTS * 9];
                        let mut acc = [0.0; 3];
                        for (slot, m) in nb.iter().enumerate() {
                            let m = *m as usize;
                            let v = [x0[m], x1[m], x2[m]];
                            let c = &cf[slot * 9..slot * 9 + 9];
                            acc[0] += c[0] * v[0] + c[1] * v[1] + c[2] * v[2];
                            acc[1] += c[3] * v[0] + c[4] * v[1] + c[5] * v[2];
                            acc[2] += c[6] * v[0] + c[7] * v[1] + c[8] * v[2];
                        }
                        *o0 = acc[0];
                        *o1 = acc[1];
                        *o2 = acc[2];
                    });
            }
            _ => unreachable!("unsupported block size {b}"),
        }
    }

    /// Diagonal entries in component-major order.
    pub(crate) fn diagonal(&self) -> Vec<f64> {
        let n = self.grid.node_count();
        let b = self.block;
        let centre = slot_of([0, 0, 0]);
        let mut d = vec![0.0; b * n];
        for row in 0..n {
            for r in 0..b {
                d[r * n + row] = self.coeffs[(row * SLOTS + centre) * b * b + r * b + r];
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nineteen_distinct_offsets() {
        let mut seen = std::collections::HashSet::new();
        for o in OFFSETS {
            assert!(o.iter().filter(|&&c| c != 0).count() <= 2);
            assert!(seen.insert(o));
        }
        assert_eq!(
            slot_of([0, 0, 0]),
            OFFSETS.iter().position(|o| *o == [0, 0, 0]).unwrap()
        );
    }
}
