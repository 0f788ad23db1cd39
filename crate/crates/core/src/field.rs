//! Sampled scalar, covector and symmetric-tensor fields.
//!
//! Multi-component fields are stored component-major: all nodes of component 0,
//! then component 1, and so on.

use rayon::prelude::*;

use crate::error::GeometryError;
use crate::grid::GridSpec;

/// Component order of a stored symmetric tensor.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Storage slot of the (a, b) entry of a symmetric 3×3 tensor.
#[inline]
pub const fn sym_index(a: usize, b: usize) -> usize {
    const TABLE: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    TABLE[a][b]
}

/// Expand six stored components into a full 3×3 array.
#[inline]
pub fn sym_to_full(s: &[f64; 6]) -> [[f64; 3]; 3] {
    [[s[0], s[1], s[2]], [s[1], s[3], s[4]], [s[2], s[4], s[5]]]
}

fn check_values(values: &[f64], expected: usize) -> Result<(), GeometryError> {
    if values.len() != expected {
        return Err(GeometryError::BadLength {
            expected,
            found: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite(i));
    }
    Ok(())
}

macro_rules! field_common {
    ($name:ident, $ncomp:expr) => {
        impl $name {
            pub const COMPONENTS: usize = $ncomp;

            /// Wrap raw component-major data, checking length and finiteness.
            pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self, GeometryError> {
                check_values(&data, $ncomp * grid.node_count())?;
                Ok(Self { grid, data })
            }

            pub fn zeros(grid: GridSpec) -> Self {
                Self {
                    grid,
                    data: vec![0.0; $ncomp * grid.node_count()],
                }
            }

            pub fn grid(&self) -> &GridSpec {
                &self.grid
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.data
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.data
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.data
            }

            pub fn component(&self, c: usize) -> &[f64] {
                let n = self.grid.node_count();
                &self.data[c * n..(c + 1) * n]
            }

            pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
                let n = self.grid.node_count();
                &mut self.data[c * n..(c + 1) * n]
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self {
                    grid: self.grid,
                    data: self.data.par_iter().map(|v| v * s).collect(),
                }
            }

            /// `self + s * other`
            pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self, GeometryError> {
                if self.grid != other.grid {
                    return Err(GeometryError::GridMismatch);
                }
                let data = self
                    .data
                    .par_iter()
                    .zip(other.data.par_iter())
                    .map(|(a, b)| a + s * b)
                    .collect();
                Ok(Self {
                    grid: self.grid,
                    data,
                })
            }

            /// Largest absolute entry over all components.
            pub fn max_abs(&self) -> f64 {
                self.data
                    .par_iter()
                    .map(|v| v.abs())
                    .reduce(|| 0.0, f64::max)
            }

            pub fn all_finite(&self) -> bool {
                self.data.iter().all(|v| v.is_finite())
            }
        }
    };
}

/// One real value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

field_common!(ScalarField, 1);

impl ScalarField {
    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.node_count()],
        }
    }

    /// Sample `f` at every node position.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        let data = (0..grid.node_count())
            .into_par_iter()
            .map(|i| f(grid.position(i)))
            .collect();
        Self { grid, data }
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Sync,
    {
        Self {
            grid: self.grid,
            data: self.data.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F>(&self, other: &Self, f: F) -> Result<Self, GeometryError>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        if self.grid != other.grid {
            return Err(GeometryError::GridMismatch);
        }
        let data = self
            .data
            .par_iter()
            .zip(other.data.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            grid: self.grid,
            data,
        })
    }

    pub fn min(&self) -> f64 {
        self.data
            .par_iter()
            .copied()
            .reduce(|| f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data
            .par_iter()
            .copied()
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

/// Three covariant components per node.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormField {
    grid: GridSpec,
    data: Vec<f64>,
}

field_common!(OneFormField, 3);

impl OneFormField {
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync,
    {
        let n = grid.node_count();
        let samples: Vec<[f64; 3]> = (0..n)
            .into_par_iter()
            .map(|i| f(grid.position(i)))
            .collect();
        let mut data = vec![0.0; 3 * n];
        for (i, s) in samples.iter().enumerate() {
            for c in 0..3 {
                data[c * n + i] = s[c];
            }
        }
        Self { grid, data }
    }

    /// Components at a single node.
    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        let n = self.grid.node_count();
        [self.data[idx], self.data[n + idx], self.data[2 * n + idx]]
    }
}

/// Six independent components (ordered xx, xy, xz, yy, yz, zz) per node.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    grid: GridSpec,
    data: Vec<f64>,
}

field_common!(SymTensorField, 6);

impl SymTensorField {
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> [f64; 6] + Sync,
    {
        let n = grid.node_count();
        let samples: Vec<[f64; 6]> = (0..n)
            .into_par_iter()
            .map(|i| f(grid.position(i)))
            .collect();
        Self::from_nodes(grid, &samples)
    }

    pub(crate) fn from_nodes(grid: GridSpec, samples: &[[f64; 6]]) -> Self {
        let n = grid.node_count();
        let mut data = vec![0.0; 6 * n];
        for (i, s) in samples.iter().enumerate() {
            for c in 0..6 {
                data[c * n + i] = s[c];
            }
        }
        Self { grid, data }
    }

    /// Flat identity tensor δ_ab at every node.
    pub fn identity(grid: GridSpec) -> Self {
        Self::from_fn(grid, |_| [1.0, 0.0, 0.0, 1.0, 0.0, 1.0])
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 6] {
        let n = self.grid.node_count();
        std::array::from_fn(|c| self.data[c * n + idx])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_is_consistent_with_pairs() {
        for (slot, &(a, b)) in SYM_PAIRS.iter().enumerate() {
            assert_eq!(sym_index(a, b), slot);
            assert_eq!(sym_index(b, a), slot);
        }
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = GridSpec::unit(8).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 10]).is_err());
        let mut v = vec![0.0; 512];
        v[3] = f64::NAN;
        assert_eq!(ScalarField::new(g, v), Err(GeometryError::NonFinite(3)));
        assert!(OneFormField::new(g, vec![1.0; 3 * 512]).is_ok());
    }

    #[test]
    fn component_major_layout() {
        let g = GridSpec::unit(8).unwrap();
        let w = OneFormField::from_fn(g, |p| [p[0], 2.0, -p[2]]);
        let idx = g.index(3, 1, 5);
        let x = g.position(idx);
        assert_eq!(w.at(idx), [x[0], 2.0, -x[2]]);
        assert_eq!(w.component(1)[idx], 2.0);
    }
}
