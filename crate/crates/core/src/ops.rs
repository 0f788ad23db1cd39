//! Metric-dependent differential operators, norms and integrals.
//!
//! The scalar Laplacian and the vector operator ½L*L are Hessians of discrete
//! energies. Each energy averages a nodal quadrature over the eight
//! orientations of one-sided differences, which keeps the operators symmetric,
//! second order and free of grid-scale null modes. The pointwise conformal
//! Killing operator uses centered differences.

use rayon::prelude::*;

use crate::error::GeometryError;
use crate::field::{sym_index, OneFormField, ScalarField, SymTensorField, SYM_PAIRS};
use crate::grid::unit_offset;
use crate::metric::Metric;
use crate::par::{det_max, det_sum};
use crate::stencil::{slot_of, Stencil};

const ORIENTATIONS: [[i64; 3]; 8] = [
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [1, -1, -1],
    [-1, 1, 1],
    [-1, 1, -1],
    [-1, -1, 1],
    [-1, -1, -1],
];

/// Local offsets of the four nodes touched by one orientation.
fn local_offsets(s: [i64; 3]) -> [[i64; 3]; 4] {
    [[0, 0, 0], [s[0], 0, 0], [0, s[1], 0], [0, 0, s[2]]]
}

fn diff(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
}

fn same_grid(m: &Metric, g: &crate::grid::GridSpec) -> Result<(), GeometryError> {
    if m.grid() != g {
        Err(GeometryError::GridMismatch)
    } else {
        Ok(())
    }
}

/// Assembled scalar Laplacian: `Δu = K u / (√g h³)`.
#[derive(Clone, Debug)]
pub(crate) struct ScalarOperator {
    pub(crate) stencil: Stencil,
    pub(crate) mass: Vec<f64>,
}

impl ScalarOperator {
    pub(crate) fn assemble(m: &Metric) -> Self {
        let grid = *m.grid();
        let h = grid.spacing();
        let h3 = grid.cell_volume();
        let mut stencil = Stencil::zeros(grid, 1);
        for idx in 0..grid.node_count() {
            let gi = m.g_inv().at(idx);
            let sg = m.sqrt_det().values()[idx];
            for s in ORIENTATIONS {
                let offs = local_offsets(s);
                let nodes: [usize; 4] = std::array::from_fn(|p| grid.shifted(idx, offs[p]));
                // gradient rows: D_a u = s_a (u_{a+1} − u_0) / h
                let mut gmat = [[0.0; 4]; 3];
                for a in 0..3 {
                    gmat[a][0] = -(s[a] as f64) / h;
                    gmat[a][a + 1] = s[a] as f64 / h;
                }
                let w = sg * h3 / 8.0;
                for p in 0..4 {
                    for q in 0..4 {
                        let mut v = 0.0;
                        for a in 0..3 {
                            for b in 0..3 {
                                v += gmat[a][p] * gi[sym_index(a, b)] * gmat[b][q];
                            }
                        }
                        if v != 0.0 {
                            stencil.add(nodes[p], slot_of(diff(offs[p], offs[q])), 0, 0, w * v);
                        }
                    }
                }
            }
        }
        let mass = m.volume_weights();
        Self { stencil, mass }
    }
}

/// Linear map from the twelve local unknowns (4 nodes × 3 components) to the
/// nine entries of LW for one node and orientation.
fn local_lw_map(m: &Metric, idx: usize, s: [i64; 3]) -> [[f64; 12]; 9] {
    let grid = *m.grid();
    let h = grid.spacing();
    let g = m.g().at(idx);
    let gi = m.g_inv().at(idx);
    let g_nb: [[f64; 6]; 3] =
        std::array::from_fn(|a| m.g().at(grid.shifted(idx, unit_offset(a, s[a]))));
    // one-sided metric derivatives D_a g_bd
    let dg = |a: usize, b: usize, d: usize| -> f64 {
        s[a] as f64 * (g_nb[a][sym_index(b, d)] - g[sym_index(b, d)]) / h
    };
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for (c, gc) in gamma.iter_mut().enumerate() {
        for a in 0..3 {
            for b in 0..3 {
                let mut v = 0.0;
                for d in 0..3 {
                    v += gi[sym_index(c, d)] * 0.5 * (dg(a, b, d) + dg(b, a, d) - dg(d, a, b));
                }
                gc[a][b] = v;
            }
        }
    }
    // ∇_a W_b
    let mut nabla = [[0.0; 12]; 9];
    for a in 0..3 {
        for b in 0..3 {
            let row = &mut nabla[a * 3 + b];
            row[(a + 1) * 3 + b] += s[a] as f64 / h;
            row[b] -= s[a] as f64 / h;
            for c in 0..3 {
                row[c] -= gamma[c][a][b];
            }
        }
    }
    let mut div = [0.0; 12];
    for c in 0..3 {
        for d in 0..3 {
            let gcd = gi[sym_index(c, d)];
            for (k, v) in div.iter_mut().enumerate() {
                *v += gcd * nabla[c * 3 + d][k];
            }
        }
    }
    let mut lw = [[0.0; 12]; 9];
    for a in 0..3 {
        for b in 0..3 {
            let gab = g[sym_index(a, b)];
            for k in 0..12 {
                lw[a * 3 + b][k] =
                    nabla[a * 3 + b][k] + nabla[b * 3 + a][k] - (2.0 / 3.0) * gab * div[k];
            }
        }
    }
    lw
}

/// g^{ac} g^{bd} on flattened index pairs.
fn tensor_metric(gi: &[f64; 6]) -> [[f64; 9]; 9] {
    let mut out = [[0.0; 9]; 9];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    out[a * 3 + b][c * 3 + d] = gi[sym_index(a, c)] * gi[sym_index(b, d)];
                }
            }
        }
    }
    out
}

/// Assembled vector operator: `(½L*L W)_a = g_ab (K W)_b / (√g h³)`.
#[derive(Clone, Debug)]
pub(crate) struct VectorOperator {
    pub(crate) stencil: Stencil,
}

impl VectorOperator {
    pub(crate) fn assemble(m: &Metric) -> Self {
        let grid = *m.grid();
        let h3 = grid.cell_volume();
        let mut stencil = Stencil::zeros(grid, 3);
        for idx in 0..grid.node_count() {
            let gi = m.g_inv().at(idx);
            let g9 = tensor_metric(&gi);
            let w = 0.5 * m.sqrt_det().values()[idx] * h3 / 8.0;
            for s in ORIENTATIONS {
                let offs = local_offsets(s);
                let nodes: [usize; 4] = std::array::from_fn(|p| grid.shifted(idx, offs[p]));
                let l = local_lw_map(m, idx, s);
                let mut gl = [[0.0; 12]; 9];
                for r in 0..9 {
                    for c in 0..9 {
                        let gv = g9[r][c];
                        if gv != 0.0 {
                            for k in 0..12 {
                                gl[r][k] += gv * l[c][k];
                            }
                        }
                    }
                }
                for i in 0..12 {
                    for j in 0..12 {
                        let mut v = 0.0;
                        for r in 0..9 {
                            v += l[r][i] * gl[r][j];
                        }
                        if v != 0.0 {
                            let (p, ci) = (i / 3, i % 3);
                            let (q, cj) = (j / 3, j % 3);
                            stencil.add(nodes[p], slot_of(diff(offs[p], offs[q])), ci, cj, w * v);
                        }
                    }
                }
            }
        }
        Self { stencil }
    }

    /// Lower raw stencil output `K W` into `½L*L W`.
    pub(crate) fn lower(m: &Metric, kw: &[f64], out: &mut [f64]) {
        let n = m.grid().node_count();
        let h3 = m.grid().cell_volume();
        let lowered: Vec<[f64; 3]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let g = m.g().at(i);
                let scale = 1.0 / (m.sqrt_det().values()[i] * h3);
                let v = [kw[i], kw[n + i], kw[2 * n + i]];
                std::array::from_fn(|a| {
                    scale * (0..3).map(|b| g[sym_index(a, b)] * v[b]).sum::<f64>()
                })
            })
            .collect();
        for (i, v) in lowered.iter().enumerate() {
            for a in 0..3 {
                out[a * n + i] = v[a];
            }
        }
    }
}

/// Nonnegative Laplace–Beltrami operator Δu = −(1/√g)∂_i(√g g^{ij}∂_j u).
pub fn laplace_beltrami(m: &Metric, u: &ScalarField) -> Result<ScalarField, GeometryError> {
    same_grid(m, u.grid())?;
    let op = m.scalar_operator();
    let mut out = vec![0.0; u.values().len()];
    op.stencil.apply(u.values(), &mut out);
    out.par_iter_mut()
        .zip(op.mass.par_iter())
        .for_each(|(o, w)| *o /= w);
    ScalarField::new(*u.grid(), out)
}

/// Discrete Dirichlet form ∫⟨∇u, ∇v⟩ dv consistent with [`laplace_beltrami`].
pub fn gradient_pairing(
    m: &Metric,
    u: &ScalarField,
    v: &ScalarField,
) -> Result<f64, GeometryError> {
    same_grid(m, u.grid())?;
    same_grid(m, v.grid())?;
    let mut kv = vec![0.0; v.values().len()];
    m.scalar_operator().stencil.apply(v.values(), &mut kv);
    Ok(crate::par::dot(u.values(), &kv))
}

/// Conformal Killing operator (LW)_ij = ∇_iW_j + ∇_jW_i − (2/3)(div W) g_ij,
/// evaluated pointwise with centered differences.
pub fn conformal_killing(m: &Metric, w: &OneFormField) -> Result<SymTensorField, GeometryError> {
    same_grid(m, w.grid())?;
    let grid = *m.grid();
    let h = grid.spacing();
    let nodes: Vec<[f64; 6]> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let mut nabla = [[0.0; 3]; 3];
            let here = w.at(idx);
            for (a, row) in nabla.iter_mut().enumerate() {
                let p = w.at(grid.shifted(idx, unit_offset(a, 1)));
                let q = w.at(grid.shifted(idx, unit_offset(a, -1)));
                for b in 0..3 {
                    let mut v = (p[b] - q[b]) / (2.0 * h);
                    for (c, wc) in here.iter().enumerate() {
                        v -= m.christoffel(c, a, b, idx) * wc;
                    }
                    row[b] = v;
                }
            }
            let g = m.g().at(idx);
            let gi = m.g_inv().at(idx);
            let mut div = 0.0;
            for c in 0..3 {
                for d in 0..3 {
                    div += gi[sym_index(c, d)] * nabla[c][d];
                }
            }
            std::array::from_fn(|s| {
                let (a, b) = SYM_PAIRS[s];
                nabla[a][b] + nabla[b][a] - (2.0 / 3.0) * div * g[s]
            })
        })
        .collect();
    Ok(SymTensorField::from_nodes(grid, &nodes))
}

/// ½L*L W = −∇^i(LW)_ij, the operator of the vector equation.
pub fn half_lstar_l(m: &Metric, w: &OneFormField) -> Result<OneFormField, GeometryError> {
    same_grid(m, w.grid())?;
    let op = m.vector_operator();
    let mut kw = vec![0.0; w.as_slice().len()];
    op.stencil.apply(w.as_slice(), &mut kw);
    let mut out = vec![0.0; kw.len()];
    VectorOperator::lower(m, &kw, &mut out);
    OneFormField::new(*w.grid(), out)
}

/// ⟨LW, LV⟩_{L²} with the orientation-averaged quadrature that defines
/// [`half_lstar_l`], so that ⟨½L*LW, V⟩ = ½ lw_pairing(W, V) exactly.
pub fn lw_pairing(m: &Metric, w: &OneFormField, v: &OneFormField) -> Result<f64, GeometryError> {
    same_grid(m, w.grid())?;
    same_grid(m, v.grid())?;
    let grid = *m.grid();
    let h3 = grid.cell_volume();
    Ok(det_sum(grid.node_count(), |idx| {
        let gi = m.g_inv().at(idx);
        let g9 = tensor_metric(&gi);
        let mut acc = 0.0;
        for s in ORIENTATIONS {
            let offs = local_offsets(s);
            let mut wl = [0.0; 12];
            let mut vl = [0.0; 12];
            for (p, o) in offs.iter().enumerate() {
                let node = grid.shifted(idx, *o);
                let (a, b) = (w.at(node), v.at(node));
                wl[p * 3..p * 3 + 3].copy_from_slice(&a);
                vl[p * 3..p * 3 + 3].copy_from_slice(&b);
            }
            let l = local_lw_map(m, idx, s);
            let lw: [f64; 9] = std::array::from_fn(|r| (0..12).map(|k| l[r][k] * wl[k]).sum());
            let lv: [f64; 9] = std::array::from_fn(|r| (0..12).map(|k| l[r][k] * vl[k]).sum());
            for r in 0..9 {
                for c in 0..9 {
                    acc += lw[r] * g9[r][c] * lv[c];
                }
            }
        }
        acc * m.sqrt_det().values()[idx] * h3 / 8.0
    }))
}

/// ∫ u dv with nodal quadrature `Σ u √g h³`.
pub fn integrate(m: &Metric, u: &ScalarField) -> Result<f64, GeometryError> {
    same_grid(m, u.grid())?;
    let sg = m.sqrt_det().values();
    let uv = u.values();
    Ok(det_sum(uv.len(), |i| uv[i] * sg[i]) * m.grid().cell_volume())
}

/// (∫|u|^p dv)^{1/p}; `p = f64::INFINITY` gives the sup norm.
pub fn lp_norm(m: &Metric, u: &ScalarField, p: f64) -> Result<f64, GeometryError> {
    same_grid(m, u.grid())?;
    if p.is_infinite() {
        return Ok(sup_norm(u));
    }
    assert!(p >= 1.0, "lp_norm requires p >= 1, got {p}");
    let sg = m.sqrt_det().values();
    let uv = u.values();
    let s = det_sum(uv.len(), |i| uv[i].abs().powf(p) * sg[i]) * m.grid().cell_volume();
    Ok(s.powf(1.0 / p))
}

pub fn sup_norm(u: &ScalarField) -> f64 {
    let v = u.values();
    det_max(v.len(), |i| v[i].abs()).max(0.0)
}

/// |s|²_g = g^{ac} g^{bd} s_ab s_cd pointwise.
pub fn tensor_norm2(m: &Metric, s: &SymTensorField) -> Result<ScalarField, GeometryError> {
    same_grid(m, s.grid())?;
    let vals = (0..m.grid().node_count())
        .into_par_iter()
        .map(|i| {
            let gi = crate::field::sym_to_full(&m.g_inv().at(i));
            let t = crate::field::sym_to_full(&s.at(i));
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        for d in 0..3 {
                            acc += gi[a][c] * gi[b][d] * t[a][b] * t[c][d];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    ScalarField::new(*m.grid(), vals)
}

/// Trace g^{ab} s_ab pointwise.
pub fn tensor_trace(m: &Metric, s: &SymTensorField) -> Result<ScalarField, GeometryError> {
    same_grid(m, s.grid())?;
    let vals = (0..m.grid().node_count())
        .into_par_iter()
        .map(|i| {
            let gi = m.g_inv().at(i);
            let t = s.at(i);
            (0..6)
                .map(|c| {
                    if matches!(c, 0 | 3 | 5) {
                        gi[c] * t[c]
                    } else {
                        2.0 * gi[c] * t[c]
                    }
                })
                .sum()
        })
        .collect();
    ScalarField::new(*m.grid(), vals)
}

/// ∫⟨s, t⟩_g dv.
pub fn tensor_inner(
    m: &Metric,
    s: &SymTensorField,
    t: &SymTensorField,
) -> Result<f64, GeometryError> {
    same_grid(m, s.grid())?;
    same_grid(m, t.grid())?;
    let h3 = m.grid().cell_volume();
    Ok(det_sum(m.grid().node_count(), |i| {
        let gi = crate::field::sym_to_full(&m.g_inv().at(i));
        let a = crate::field::sym_to_full(&s.at(i));
        let b = crate::field::sym_to_full(&t.at(i));
        let mut acc = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                for r in 0..3 {
                    for u in 0..3 {
                        acc += gi[p][r] * gi[q][u] * a[p][q] * b[r][u];
                    }
                }
            }
        }
        acc * m.sqrt_det().values()[i]
    }) * h3)
}

/// |ξ|²_g = g^{ab} ξ_a ξ_b pointwise.
pub fn one_form_norm2(m: &Metric, xi: &OneFormField) -> Result<ScalarField, GeometryError> {
    same_grid(m, xi.grid())?;
    let vals = (0..m.grid().node_count())
        .into_par_iter()
        .map(|i| {
            let gi = m.g_inv().at(i);
            let v = xi.at(i);
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += gi[sym_index(a, b)] * v[a] * v[b];
                }
            }
            acc
        })
        .collect();
    ScalarField::new(*m.grid(), vals)
}

/// ∫ g^{ab} ξ_a η_b dv.
pub fn one_form_inner(
    m: &Metric,
    xi: &OneFormField,
    eta: &OneFormField,
) -> Result<f64, GeometryError> {
    same_grid(m, xi.grid())?;
    same_grid(m, eta.grid())?;
    let h3 = m.grid().cell_volume();
    Ok(det_sum(m.grid().node_count(), |i| {
        let gi = m.g_inv().at(i);
        let a = xi.at(i);
        let b = eta.at(i);
        let mut acc = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                acc += gi[sym_index(p, q)] * a[p] * b[q];
            }
        }
        acc * m.sqrt_det().values()[i]
    }) * h3)
}

pub fn one_form_l2(m: &Metric, xi: &OneFormField) -> Result<f64, GeometryError> {
    Ok(one_form_inner(m, xi, xi)?.max(0.0).sqrt())
}

/// Centered-difference differential du.
pub fn centered_gradient(u: &ScalarField) -> OneFormField {
    let grid = *u.grid();
    let h = grid.spacing();
    let v = u.values();
    OneFormField::from_nodes_fn(grid, |idx| {
        std::array::from_fn(|a| {
            let p = grid.shifted(idx, unit_offset(a, 1));
            let q = grid.shifted(idx, unit_offset(a, -1));
            (v[p] - v[q]) / (2.0 * h)
        })
    })
}

impl OneFormField {
    pub(crate) fn from_nodes_fn<F>(grid: crate::grid::GridSpec, f: F) -> Self
    where
        F: Fn(usize) -> [f64; 3] + Sync + Send,
    {
        let n = grid.node_count();
        let nodes: Vec<[f64; 3]> = (0..n).into_par_iter().map(f).collect();
        let mut data = vec![0.0; 3 * n];
        for (i, s) in nodes.iter().enumerate() {
            for c in 0..3 {
                data[c * n + i] = s[c];
            }
        }
        OneFormField::new(grid, data).expect("finite components")
    }
}
