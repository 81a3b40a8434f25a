//! Tensor-product LGL grid on `(-1, 1)^d` with interior, boundary and face
//! bookkeeping, plus the discrete inner product.
//!
//! Nodal arrays are flattened lexicographically with axis 0 most
//! significant: the multi-index `(k_0, ..., k_{d-1})` lives at
//! `sum_a k_a (N+1)^(d-1-a)`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::legendre::LglRule;

/// One of the `2d` faces. Ids are 1-based: face `j <= d` is `{x_j = 1}`,
/// face `d + j` is `{x_j = -1}`.
#[derive(Debug, Clone)]
pub struct Face {
    pub id: usize,
    pub axis: usize,
    /// +1.0 or -1.0; the outward normal is `sign * e_axis`.
    pub sign: f64,
    /// Flat grid indices of the face nodes, in face-local lexicographic order.
    pub nodes: Vec<usize>,
    /// `(d-1)`-dimensional LGL weights of the face nodes.
    pub weights: Vec<f64>,
}

#[derive(Debug)]
pub struct TensorGrid {
    dim: usize,
    rule: Arc<LglRule>,
    fine: Arc<LglRule>,
    to_fine: Vec<f64>,
    diff1_t: Vec<f64>,
    diff2_t: Vec<f64>,
    n_nodes: usize,
    weights: Vec<f64>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    interior_slot: Vec<usize>,
    faces: Vec<Face>,
    gamma_faces: Vec<usize>,
    gamma_weight: Vec<f64>,
}

pub const NOT_INTERIOR: usize = usize::MAX;

impl TensorGrid {
    /// Grid with the observation boundary made of the `d` faces `{x_j = 1}`.
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        Self::with_gamma(dim, degree, (1..=dim).collect())
    }

    pub fn with_gamma(dim: usize, degree: usize, mut gamma_faces: Vec<usize>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        gamma_faces.sort_unstable();
        gamma_faces.dedup();
        for &f in &gamma_faces {
            if f == 0 || f > 2 * dim {
                return Err(Error::InvalidFace { face: f, dim });
            }
        }
        let rule = Arc::new(LglRule::new(degree)?);
        let fine = Arc::new(LglRule::new(degree + 1)?);
        let to_fine = rule.interpolation_matrix(fine.nodes());
        let n1 = degree + 1;
        let n_nodes = n1.pow(dim as u32);

        let mut weights = vec![1.0; n_nodes];
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut interior_slot = vec![NOT_INTERIOR; n_nodes];
        for flat in 0..n_nodes {
            let idx = unflatten(flat, dim, n1);
            weights[flat] = idx.iter().map(|&k| rule.weights()[k]).product();
            if idx.iter().all(|&k| k > 0 && k < degree) {
                interior_slot[flat] = interior.len();
                interior.push(flat);
            } else {
                boundary.push(flat);
            }
        }

        let faces: Vec<Face> = (1..=2 * dim)
            .map(|id| {
                let axis = (id - 1) % dim;
                let (sign, fixed) = if id <= dim { (1.0, degree) } else { (-1.0, 0) };
                let mut nodes = Vec::new();
                let mut fw = Vec::new();
                for flat in 0..n_nodes {
                    let idx = unflatten(flat, dim, n1);
                    if idx[axis] == fixed {
                        nodes.push(flat);
                        fw.push(
                            idx.iter()
                                .enumerate()
                                .filter(|&(a, _)| a != axis)
                                .map(|(_, &k)| rule.weights()[k])
                                .product(),
                        );
                    }
                }
                Face {
                    id,
                    axis,
                    sign,
                    nodes,
                    weights: fw,
                }
            })
            .collect();

        let mut gamma_weight = vec![0.0; n_nodes];
        for &g in &gamma_faces {
            let face = &faces[g - 1];
            for (&node, &w) in face.nodes.iter().zip(&face.weights) {
                gamma_weight[node] += w;
            }
        }

        let diff1_t = transpose(rule.diff1(), n1);
        let diff2_t = transpose(rule.diff2(), n1);
        Ok(Self {
            dim,
            rule,
            fine,
            to_fine,
            diff1_t,
            diff2_t,
            n_nodes,
            weights,
            interior,
            boundary,
            interior_slot,
            faces,
            gamma_faces,
            gamma_weight,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.rule.degree()
    }

    /// Points per axis, `N + 1`.
    pub fn points_per_axis(&self) -> usize {
        self.rule.len()
    }

    pub fn rule(&self) -> &LglRule {
        &self.rule
    }

    /// Rule of degree `N + 1`, exact for integrands of degree `2N + 1` per variable.
    pub fn fine_rule(&self) -> &LglRule {
        &self.fine
    }

    pub fn len(&self) -> usize {
        self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        self.n_nodes == 0
    }

    /// Tensor weights `omega_i = prod_j omega_{k_j}`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interior_indices(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_indices(&self) -> &[usize] {
        &self.boundary
    }

    /// Position of a flat node in the interior list, or [`NOT_INTERIOR`].
    pub fn interior_slot(&self, flat: usize) -> usize {
        self.interior_slot[flat]
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        self.interior_slot[flat] != NOT_INTERIOR
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, id: usize) -> Result<&Face> {
        if id == 0 || id > 2 * self.dim {
            return Err(Error::InvalidFace {
                face: id,
                dim: self.dim,
            });
        }
        Ok(&self.faces[id - 1])
    }

    pub fn gamma_faces(&self) -> &[usize] {
        &self.gamma_faces
    }

    /// Summed face weight of a node over the faces of the observation
    /// boundary that contain it; zero off the observation boundary.
    pub fn gamma_weight(&self, flat: usize) -> f64 {
        self.gamma_weight[flat]
    }

    pub fn on_gamma(&self, flat: usize) -> bool {
        self.gamma_weight[flat] > 0.0
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        unflatten(flat, self.dim, self.points_per_axis())
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .fold(0, |acc, &k| acc * self.points_per_axis() + k)
    }

    /// Physical coordinates of a node.
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .into_iter()
            .map(|k| self.rule.nodes()[k])
            .collect()
    }

    /// Samples a function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.n_nodes).map(|i| f(&self.coords(i))).collect()
    }

    /// Applies a 1-D operator (row-major, square `(N+1) x (N+1)`) along one axis.
    pub fn apply_axis(&self, mat: &[f64], values: &[f64], axis: usize) -> Vec<f64> {
        let n1 = self.points_per_axis();
        let shape = vec![n1; self.dim];
        apply_along_axis(mat, n1, values, &shape, axis)
    }

    /// First derivative along `axis`.
    pub fn d1(&self, values: &[f64], axis: usize) -> Vec<f64> {
        self.apply_axis(self.rule.diff1(), values, axis)
    }

    /// Second derivative along `axis`.
    pub fn d2(&self, values: &[f64], axis: usize) -> Vec<f64> {
        self.apply_axis(self.rule.diff2(), values, axis)
    }

    /// Transpose of [`d1`](Self::d1) as a linear map on nodal arrays.
    pub fn d1_transposed(&self, values: &[f64], axis: usize) -> Vec<f64> {
        self.apply_axis(&self.diff1_t, values, axis)
    }

    /// Transpose of [`d2`](Self::d2) as a linear map on nodal arrays.
    pub fn d2_transposed(&self, values: &[f64], axis: usize) -> Vec<f64> {
        self.apply_axis(&self.diff2_t, values, axis)
    }

    /// Interpolates nodal values onto the tensor grid of the fine rule.
    pub fn to_fine(&self, values: &[f64]) -> Vec<f64> {
        let nf = self.fine.len();
        let mut shape = vec![self.points_per_axis(); self.dim];
        let mut data = values.to_vec();
        for axis in 0..self.dim {
            data = apply_along_axis(&self.to_fine, nf, &data, &shape, axis);
            shape[axis] = nf;
        }
        data
    }

    /// Tensor weights of the fine rule on `dim` axes.
    pub fn fine_weights(&self, dim: usize) -> Vec<f64> {
        let nf = self.fine.len();
        (0..nf.pow(dim as u32))
            .map(|flat| {
                unflatten(flat, dim, nf)
                    .iter()
                    .map(|&k| self.fine.weights()[k])
                    .product()
            })
            .collect()
    }

    /// Interpolates values given on the nodes of a face (face-local order)
    /// onto the `(d-1)`-dimensional fine grid.
    pub fn face_to_fine(&self, values: &[f64]) -> Vec<f64> {
        let nf = self.fine.len();
        let mut shape = vec![self.points_per_axis(); self.dim - 1];
        let mut data = values.to_vec();
        for axis in 0..self.dim - 1 {
            data = apply_along_axis(&self.to_fine, nf, &data, &shape, axis);
            shape[axis] = nf;
        }
        data
    }

    /// Fine-grid coordinates of every fine node on `dim` axes.
    pub fn fine_coords(&self, dim: usize) -> Vec<Vec<f64>> {
        let nf = self.fine.len();
        (0..nf.pow(dim as u32))
            .map(|flat| {
                unflatten(flat, dim, nf)
                    .iter()
                    .map(|&k| self.fine.nodes()[k])
                    .collect()
            })
            .collect()
    }

    pub fn same_as(&self, other: &TensorGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim
                && self.degree() == other.degree()
                && self.gamma_faces == other.gamma_faces)
    }
}

fn transpose(mat: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = mat[i * n + j];
        }
    }
    t
}

pub(crate) fn unflatten(mut flat: usize, dim: usize, n1: usize) -> Vec<usize> {
    let mut idx = vec![0; dim];
    for a in (0..dim).rev() {
        idx[a] = flat % n1;
        flat /= n1;
    }
    idx
}

/// Contracts `values` (tensor of `shape`) along `axis` with a row-major
/// `rows x shape[axis]` matrix.
pub(crate) fn apply_along_axis(
    mat: &[f64],
    rows: usize,
    values: &[f64],
    shape: &[usize],
    axis: usize,
) -> Vec<f64> {
    let cols = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        let src = &values[o * cols * inner..(o + 1) * cols * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for i in 0..rows {
            let row = &mat[i * cols..(i + 1) * cols];
            let d = &mut dst[i * inner..(i + 1) * inner];
            for (k, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let s = &src[k * inner..(k + 1) * inner];
                for (dv, sv) in d.iter_mut().zip(s) {
                    *dv += m * sv;
                }
            }
        }
    }
    out
}

/// Element of `P_N(Omega)` stored by its nodal values.
#[derive(Debug, Clone)]
pub struct ScalarGridFn {
    pub grid: Arc<TensorGrid>,
    pub values: Vec<f64>,
}

impl ScalarGridFn {
    pub fn new(grid: Arc<TensorGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<TensorGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.sample(f);
        Self { grid, values }
    }

    /// Independent standard-normal nodal values.
    pub fn random(grid: Arc<TensorGrid>, rng: &mut impl Rng) -> Self {
        let values = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
        Self { grid, values }
    }
}

/// `(w, z)_N = sum_i w(P_i) z(P_i) omega_i`.
pub fn discrete_inner_product(w: &ScalarGridFn, z: &ScalarGridFn) -> Result<f64> {
    if !w.grid.same_as(&z.grid) {
        return Err(Error::GridMismatch(
            "inner product of functions on different grids".into(),
        ));
    }
    Ok(weighted_dot(w.grid.weights(), &w.values, &z.values))
}

pub(crate) fn weighted_dot(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * x * y)
        .sum()
}

/// True `L^2(Omega)` norm of the degree-`N` interpolant, by re-quadrature
/// on the degree-`N+1` rule.
pub fn l2_norm_exact(w: &ScalarGridFn) -> f64 {
    let grid = &w.grid;
    let fine = grid.to_fine(&w.values);
    let fw = grid.fine_weights(grid.dim());
    weighted_dot(&fw, &fine, &fine).sqrt()
}

/// Extremes of `||p||_N^2 / |p|_{L^2}^2` over `samples` random grid functions.
pub fn norm_equivalence_report(
    grid: &Arc<TensorGrid>,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..samples {
        let p = ScalarGridFn::random(grid.clone(), rng);
        let r = norm_ratio(&p)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// `||p||_N^2 / |p|_{L^2}^2` for one grid function.
pub fn norm_ratio(p: &ScalarGridFn) -> Result<f64> {
    let discrete = discrete_inner_product(p, p)?;
    let exact = l2_norm_exact(p).powi(2);
    Ok(discrete / exact)
}

/// Upper constant of the discrete/continuous norm equivalence, `(2 + 1/N)^d`.
pub fn norm_equivalence_upper(dim: usize, degree: usize) -> f64 {
    (2.0 + 1.0 / degree as f64).powi(dim as i32)
}
