//! Uniform periodic grids on the flat 3-torus.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Smallest admissible number of points per axis.
pub const MIN_POINTS: usize = 8;

/// A cubic periodic grid with `n_axis` points per axis and period `box_length`.
///
/// Nodes are stored row-major with the x index slowest:
/// `idx = (i * n + j) * n + k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n_axis: usize,
    box_length: f64,
}

impl GridSpec {
    pub fn new(n_axis: usize, box_length: f64) -> Result<Self, GeometryError> {
        if n_axis < MIN_POINTS {
            return Err(GeometryError::InvalidGrid(format!(
                "n_axis = {n_axis} is below the minimum {MIN_POINTS}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(GeometryError::InvalidGrid(format!(
                "box_length = {box_length} must be positive and finite"
            )));
        }
        Ok(Self { n_axis, box_length })
    }

    /// Unit-period grid, the default for fixtures.
    pub fn unit(n_axis: usize) -> Result<Self, GeometryError> {
        Self::new(n_axis, 1.0)
    }

    pub fn n_axis(&self) -> usize {
        self.n_axis
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n_axis as f64
    }

    /// h³, the coordinate volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn node_count(&self) -> usize {
        self.n_axis * self.n_axis * self.n_axis
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_axis + j) * self.n_axis + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n_axis;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    /// Physical position of a node, `x_i = i h`.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let [i, j, k] = self.coords(idx);
        [i as f64 * h, j as f64 * h, k as f64 * h]
    }

    /// Index of the node displaced by `offset`, wrapping periodically.
    #[inline]
    pub fn shifted(&self, idx: usize, offset: [i64; 3]) -> usize {
        let n = self.n_axis as i64;
        let c = self.coords(idx);
        let w = |a: usize, o: i64| ((a as i64 + o).rem_euclid(n)) as usize;
        self.index(w(c[0], offset[0]), w(c[1], offset[1]), w(c[2], offset[2]))
    }

    /// Wave number 2π/L of the fundamental mode.
    pub fn fundamental_wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }
}

pub(crate) fn unit_offset(axis: usize, sign: i64) -> [i64; 3] {
    let mut o = [0; 3];
    o[axis] = sign;
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(GridSpec::new(4, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        assert!(GridSpec::new(8, f64::NAN).is_err());
        assert!(GridSpec::new(8, 2.0).is_ok());
    }

    #[test]
    fn index_round_trip_and_wrap() {
        let g = GridSpec::unit(8).unwrap();
        for idx in [0, 7, 63, 511, 300] {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        let origin = g.index(0, 0, 0);
        assert_eq!(g.shifted(origin, [-1, 0, 0]), g.index(7, 0, 0));
        assert_eq!(g.shifted(origin, [1, -1, 9]), g.index(1, 7, 1));
    }
}
