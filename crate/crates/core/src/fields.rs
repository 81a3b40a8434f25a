//! Vector-valued grid fields and the spatial operators of isotropic linear
//! elasticity: the Lamé operator `mu Lap + (lambda + mu) grad div`, the
//! boundary traction and the second-order normal boundary term.
//!
//! All derivatives are tensor contractions with the 1-D LGL
//! differentiation matrices, one axis at a time.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{weighted_dot, Face, TensorGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Lamé parameters must be positive, got lambda={lambda}, mu={mu}"
            )));
        }
        Ok(Self { lambda, mu })
    }

    /// `lambda + mu`, the coefficient of `grad div`.
    pub fn lm(&self) -> f64 {
        self.lambda + self.mu
    }

    /// Pressure-wave modulus `lambda + 2 mu`.
    pub fn p_modulus(&self) -> f64 {
        self.lambda + 2.0 * self.mu
    }
}

/// `d` nodal components sharing one grid, stored component-major.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<TensorGrid>,
    pub data: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Arc<TensorGrid>) -> Self {
        let data = vec![0.0; grid.dim() * grid.len()];
        Self { grid, data }
    }

    pub fn new(grid: Arc<TensorGrid>, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.dim() * grid.len() {
            return Err(Error::GridMismatch(format!(
                "vector field of length {} on a grid of {} nodes in dimension {}",
                data.len(),
                grid.len(),
                grid.dim()
            )));
        }
        Ok(Self { grid, data })
    }

    /// Samples `f(x) -> [u_1, ..., u_d]` at every node.
    pub fn from_fn(grid: Arc<TensorGrid>, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let n = grid.len();
        let d = grid.dim();
        let mut data = vec![0.0; d * n];
        for i in 0..n {
            let v = f(&grid.coords(i));
            for c in 0..d {
                data[c * n + i] = v[c];
            }
        }
        Self { grid, data }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn check_grid(&self, other: &VectorField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("vector fields on different grids".into()))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest magnitude over boundary nodes.
    pub fn boundary_max_abs(&self) -> f64 {
        let n = self.grid.len();
        let mut m: f64 = 0.0;
        for c in 0..self.dim() {
            for &b in self.grid.boundary_indices() {
                m = m.max(self.data[c * n + b].abs());
            }
        }
        m
    }

    /// Sum over components of the discrete inner products `(u_c, v_c)_N`.
    pub fn discrete_dot(&self, other: &VectorField) -> f64 {
        let n = self.grid.len();
        (0..self.dim())
            .map(|c| {
                weighted_dot(
                    self.grid.weights(),
                    &self.data[c * n..(c + 1) * n],
                    &other.data[c * n..(c + 1) * n],
                )
            })
            .sum()
    }
}

/// Values of a `d`-vector quantity on the nodes of one face, component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTrace {
    pub face: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl FaceTrace {
    pub fn nodes_per_face(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let m = self.nodes_per_face();
        &self.values[c * m..(c + 1) * m]
    }
}

/// Nodal values of `mu Lap u + (lambda + mu) grad div u` at all nodes.
pub fn lame_apply(m: &Material, u: &VectorField) -> VectorField {
    let data = lame_apply_raw(&u.grid, m, &u.data);
    VectorField {
        grid: u.grid.clone(),
        data,
    }
}

pub(crate) fn lame_apply_raw(grid: &TensorGrid, m: &Material, u: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let n = grid.len();
    let mut out = vec![0.0; d * n];
    // first derivatives d_j u_j, summed per component in the mixed terms
    let partials: Vec<Vec<f64>> = (0..d).map(|j| grid.d1(&u[j * n..(j + 1) * n], j)).collect();
    for i in 0..d {
        let ui = &u[i * n..(i + 1) * n];
        let o = &mut out[i * n..(i + 1) * n];
        for a in 0..d {
            let second = grid.d2(ui, a);
            let coef = if a == i { m.mu + m.lm() } else { m.mu };
            for (ov, sv) in o.iter_mut().zip(&second) {
                *ov += coef * sv;
            }
        }
        if d > 1 {
            let mut others = vec![0.0; n];
            for (j, p) in partials.iter().enumerate() {
                if j != i {
                    others.iter_mut().zip(p).for_each(|(s, v)| *s += v);
                }
            }
            let mixed = grid.d1(&others, i);
            for (ov, mv) in o.iter_mut().zip(&mixed) {
                *ov += m.lm() * mv;
            }
        }
    }
    out
}

/// Transpose of [`lame_apply_raw`] as a linear map on nodal arrays.
pub(crate) fn lame_apply_transposed_raw(grid: &TensorGrid, m: &Material, x: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let n = grid.len();
    let mut out = vec![0.0; d * n];
    // block (i, j), i != j, is (lambda + mu) D1_i D1_j; its transpose D1_j^T D1_i^T lands in row j
    let pulled: Vec<Vec<f64>> = (0..d)
        .map(|i| grid.d1_transposed(&x[i * n..(i + 1) * n], i))
        .collect();
    for j in 0..d {
        let xj = &x[j * n..(j + 1) * n];
        let o = &mut out[j * n..(j + 1) * n];
        for a in 0..d {
            let second = grid.d2_transposed(xj, a);
            let coef = if a == j { m.mu + m.lm() } else { m.mu };
            for (ov, sv) in o.iter_mut().zip(&second) {
                *ov += coef * sv;
            }
        }
        if d > 1 {
            let mut others = vec![0.0; n];
            for (i, p) in pulled.iter().enumerate() {
                if i != j {
                    others.iter_mut().zip(p).for_each(|(s, v)| *s += v);
                }
            }
            let mixed = grid.d1_transposed(&others, j);
            for (ov, mv) in o.iter_mut().zip(&mixed) {
                *ov += m.lm() * mv;
            }
        }
    }
    out
}

/// First derivatives `d_a u_c` (index `c * d + a`) and the divergence.
pub(crate) struct FirstDerivatives {
    pub grad: Vec<Vec<f64>>,
    pub div: Vec<f64>,
}

impl FirstDerivatives {
    pub fn new(grid: &TensorGrid, u: &[f64]) -> Self {
        let d = grid.dim();
        let n = grid.len();
        let mut grad = Vec::with_capacity(d * d);
        for c in 0..d {
            for a in 0..d {
                grad.push(grid.d1(&u[c * n..(c + 1) * n], a));
            }
        }
        let mut div = vec![0.0; n];
        for c in 0..d {
            div.iter_mut()
                .zip(&grad[c * d + c])
                .for_each(|(s, v)| *s += v);
        }
        Self { grad, div }
    }
}

fn face_values(face: &Face, dim: usize, value: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let m = face.nodes.len();
    let mut out = vec![0.0; dim * m];
    for c in 0..dim {
        for (k, &node) in face.nodes.iter().enumerate() {
            out[c * m + k] = value(c, node);
        }
    }
    out
}

/// `mu du/dnu + (lambda + mu) nu div u` on the nodes of face `face`.
pub fn traction(m: &Material, u: &VectorField, face: usize) -> Result<FaceTrace> {
    let grid = &u.grid;
    let f = grid.face(face)?;
    let der = FirstDerivatives::new(grid, &u.data);
    Ok(traction_from(grid, m, &der, f))
}

pub(crate) fn traction_from(
    grid: &TensorGrid,
    m: &Material,
    der: &FirstDerivatives,
    f: &Face,
) -> FaceTrace {
    let d = grid.dim();
    let values = face_values(f, d, |c, node| {
        let mut v = m.mu * f.sign * der.grad[c * d + f.axis][node];
        if c == f.axis {
            v += m.lm() * f.sign * der.div[node];
        }
        v
    });
    FaceTrace {
        face: f.id,
        dim: d,
        values,
    }
}

/// `mu d^2u/dnu^2 + (lambda + mu) nu d(div u)/dnu` on the nodes of face `face`.
pub fn second_normal_term(m: &Material, u: &VectorField, face: usize) -> Result<FaceTrace> {
    let grid = &u.grid;
    let f = grid.face(face)?;
    let der = FirstDerivatives::new(grid, &u.data);
    let sec = NormalSecondDerivatives::new(grid, &u.data, &der);
    Ok(second_normal_from(grid, m, &sec, f))
}

/// `d^2 u_c / dx_a^2` (index `c * d + a`) and `d(div u)/dx_a`.
pub(crate) struct NormalSecondDerivatives {
    pub pure: Vec<Vec<f64>>,
    pub grad_div: Vec<Vec<f64>>,
}

impl NormalSecondDerivatives {
    pub fn new(grid: &TensorGrid, u: &[f64], der: &FirstDerivatives) -> Self {
        let d = grid.dim();
        let n = grid.len();
        let mut pure = Vec::with_capacity(d * d);
        for c in 0..d {
            for a in 0..d {
                pure.push(grid.d2(&u[c * n..(c + 1) * n], a));
            }
        }
        // d_a div u = d2_a u_a + d_a (sum_{j != a} d_j u_j)
        let grad_div = (0..d)
            .map(|a| {
                let mut others = vec![0.0; n];
                for j in (0..d).filter(|&j| j != a) {
                    others
                        .iter_mut()
                        .zip(&der.grad[j * d + j])
                        .for_each(|(s, v)| *s += v);
                }
                let mut g = if d > 1 { grid.d1(&others, a) } else { vec![0.0; n] };
                g.iter_mut()
                    .zip(&pure[a * d + a])
                    .for_each(|(s, v)| *s += v);
                g
            })
            .collect();
        Self { pure, grad_div }
    }
}

pub(crate) fn second_normal_from(
    grid: &TensorGrid,
    m: &Material,
    sec: &NormalSecondDerivatives,
    f: &Face,
) -> FaceTrace {
    let d = grid.dim();
    // nu d/dnu = sign^2 e_axis d_axis, so the normal's sign drops out
    let values = face_values(f, d, |c, node| {
        let mut v = m.mu * sec.pure[c * d + f.axis][node];
        if c == f.axis {
            v += m.lm() * sec.grad_div[f.axis][node];
        }
        v
    });
    FaceTrace {
        face: f.id,
        dim: d,
        values,
    }
}

/// `int_{Gamma_j} |t|^2` of the polynomial trace, via the degree-`N+1`
/// surface rule (exact for degree `2N` per variable).
pub fn face_l2_norm_sq(grid: &TensorGrid, t: &FaceTrace) -> Result<f64> {
    let f = grid.face(t.face)?;
    if t.dim != grid.dim() || t.values.len() != t.dim * f.nodes.len() {
        return Err(Error::GridMismatch(format!(
            "trace with {} values does not fit face {} of the grid",
            t.values.len(),
            t.face
        )));
    }
    let fw = grid.fine_weights(grid.dim() - 1);
    Ok((0..t.dim)
        .map(|c| {
            let fine = grid.face_to_fine(t.component(c));
            weighted_dot(&fw, &fine, &fine)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(d: usize, n: usize) -> Arc<TensorGrid> {
        Arc::new(TensorGrid::new(d, n).unwrap())
    }

    fn mat() -> Material {
        Material::new(0.5, 4.0).unwrap()
    }

    #[test]
    fn rejects_non_positive_material() {
        assert!(Material::new(0.0, 1.0).is_err());
        assert!(Material::new(1.0, -1.0).is_err());
    }

    #[test]
    fn lame_on_quadratic() {
        let g = grid(2, 5);
        let m = mat();
        let u = VectorField::from_fn(g.clone(), |x| vec![x[0] * x[0], 0.0]);
        let r = lame_apply(&m, &u);
        for i in 0..g.len() {
            assert_abs_diff_eq!(r.component(0)[i], 2.0 * m.lambda + 4.0 * m.mu, epsilon = 1e-10);
            assert_abs_diff_eq!(r.component(1)[i], 0.0, epsilon = 1e-10);
        }
        let u = VectorField::from_fn(g, |x| vec![x[1], x[0]]);
        assert!(lame_apply(&m, &u).max_abs() < 1e-11);
    }

    #[test]
    fn lame_matches_symbolic_cubic() {
        // u = (x^2 y, x y^3): Lap u1 = 2y, Lap u2 = 6xy, div = 2xy + 3xy^2
        // grad div = (2y + 3y^2, 2x + 6xy)
        let g = grid(2, 6);
        let m = mat();
        let u = VectorField::from_fn(g.clone(), |x| vec![x[0] * x[0] * x[1], x[0] * x[1].powi(3)]);
        let r = lame_apply(&m, &u);
        for i in 0..g.len() {
            let p = g.coords(i);
            let (x, y) = (p[0], p[1]);
            let e1 = m.mu * 2.0 * y + m.lm() * (2.0 * y + 3.0 * y * y);
            let e2 = m.mu * 6.0 * x * y + m.lm() * (2.0 * x + 6.0 * x * y);
            assert_abs_diff_eq!(r.component(0)[i], e1, epsilon = 1e-10);
            assert_abs_diff_eq!(r.component(1)[i], e2, epsilon = 1e-10);
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let g = grid(3, 4);
        let m = mat();
        let n = g.dim() * g.len();
        let a: Vec<f64> = (0..n).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i * 53 % 97) as f64 / 48.0) - 1.0).collect();
        let la = lame_apply_raw(&g, &m, &a);
        let ltb = lame_apply_transposed_raw(&g, &m, &b);
        let lhs: f64 = la.iter().zip(&b).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(&ltb).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn traction_examples() {
        let g = grid(2, 6);
        let m = mat();
        let c = 0.7;
        let u = VectorField::from_fn(g.clone(), |x| {
            vec![(1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * c, 0.0]
        });
        let t = traction(&m, &u, 1).unwrap();
        let f = g.face(1).unwrap();
        for (k, &node) in f.nodes.iter().enumerate() {
            let y = g.coords(node)[1];
            assert_abs_diff_eq!(
                t.component(0)[k],
                -2.0 * c * m.p_modulus() * (1.0 - y * y),
                epsilon = 1e-10
            );
            assert_abs_diff_eq!(t.component(1)[k], 0.0, epsilon = 1e-10);
        }
        let u = VectorField::from_fn(g, |x| vec![x[1], x[0]]);
        let t = traction(&m, &u, 1).unwrap();
        for k in 0..t.nodes_per_face() {
            assert_abs_diff_eq!(t.component(0)[k], 0.0, epsilon = 1e-11);
            assert_abs_diff_eq!(t.component(1)[k], m.mu, epsilon = 1e-11);
        }
    }

    #[test]
    fn second_normal_example() {
        let g = grid(2, 4);
        let m = mat();
        let u = VectorField::from_fn(g, |x| vec![x[0] * x[0], 0.0]);
        for face in [1, 3] {
            let s = second_normal_term(&m, &u, face).unwrap();
            for k in 0..s.nodes_per_face() {
                assert_abs_diff_eq!(s.component(0)[k], 2.0 * m.lambda + 4.0 * m.mu, epsilon = 1e-10);
                assert_abs_diff_eq!(s.component(1)[k], 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn invalid_face() {
        let g = grid(2, 4);
        let u = VectorField::zeros(g);
        assert!(matches!(traction(&mat(), &u, 5), Err(Error::InvalidFace { .. })));
        assert!(matches!(second_normal_term(&mat(), &u, 0), Err(Error::InvalidFace { .. })));
    }

    #[test]
    fn face_norms() {
        let g = grid(2, 5);
        let f = g.face(1).unwrap();
        let m = f.nodes.len();
        let mut vals = vec![0.0; 2 * m];
        for (k, &node) in f.nodes.iter().enumerate() {
            let y = g.coords(node)[1];
            vals[k] = 1.0 - y * y;
        }
        let t = FaceTrace { face: 1, dim: 2, values: vals };
        assert_abs_diff_eq!(face_l2_norm_sq(&g, &t).unwrap(), 16.0 / 15.0, epsilon = 1e-13);
        let c = 1.3;
        let mut vals = vec![0.0; 2 * m];
        vals[..m].iter_mut().for_each(|v| *v = c);
        let t = FaceTrace { face: 2, dim: 2, values: vals };
        assert_abs_diff_eq!(face_l2_norm_sq(&g, &t).unwrap(), 2.0 * c * c, epsilon = 1e-13);
    }
}
