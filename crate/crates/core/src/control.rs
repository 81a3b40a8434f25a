//! Boundary control synthesis by the Hilbert uniqueness method.
//!
//! The controlled system carries Dirichlet data `f` on the observation
//! boundary and, for each face `j`, an auxiliary control `g_j` that enters
//! the interior through a lifting `G_j = A_j h~(x_axis) g_j(x')`.
//!
//! The observation used to build controls from adjoint data is the exact
//! transpose of the fully discrete control-to-state map, so the resulting
//! Gramian is symmetric to rounding. Writing the step as the trapezoid
//! rule on `(u, v)`, one has for any free trajectory `z` and controlled
//! trajectory `y` ending at rest
//!
//! `Omega(y_0, z_0) = sum_k F_k^T M ubar_k`,
//!
//! where `Omega(y, z) = u_y^T M v_z - v_y^T M u_z`, `F_k` is the interior
//! forcing at sample `k` and `ubar_k` is the time-averaged adjoint
//! displacement around `t_k`. Controls are the Riesz representers of this
//! pairing in the discrete space-time norm of the controls.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{
    interior_forcing, scatter, ElasticState, ElasticSystem, InteriorForcing, Integrator, Scheme,
    TimeGridSpec,
};
use crate::error::{Error, Result};
use crate::fields::{face_l2_norm_sq, lame_apply_transposed_raw, FaceTrace, Material, VectorField};
use crate::grid::{Face, TensorGrid};
use crate::BoundaryForcing;

/// One-dimensional lifting profiles and the per-axis coefficient matrices.
#[derive(Debug, Clone)]
pub struct LiftingKernels {
    /// `(1 + s)/2` at interior nodes, zero at the endpoints.
    pub h1: Vec<f64>,
    /// `(1 - s)/2` at interior nodes, zero at the endpoints.
    pub h2: Vec<f64>,
    /// `(h1'' + Psi_N' / w_N) / sqrt(w_N)` at every node (faces `x_j = 1`).
    pub h_tilde_plus: Vec<f64>,
    /// `(h2'' - Psi_0' / w_0) / sqrt(w_0)` at every node (faces `x_j = -1`).
    pub h_tilde_minus: Vec<f64>,
    /// Diagonals of `A_j`: `mu + (lambda + mu) delta_kj`.
    pub a_diag: Vec<Vec<f64>>,
}

pub fn build_lifting(grid: &TensorGrid, m: &Material) -> LiftingKernels {
    let rule = grid.rule();
    let n = rule.degree();
    let s = rule.nodes();
    let interior = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        (0..=n)
            .map(|k| if k == 0 || k == n { 0.0 } else { f(s[k]) })
            .collect()
    };
    let h1 = interior(&|x| 0.5 * (1.0 + x));
    let h2 = interior(&|x| 0.5 * (1.0 - x));
    let d2 = |h: &[f64]| -> Vec<f64> {
        (0..=n)
            .map(|i| (0..=n).map(|j| rule.d2(i, j) * h[j]).sum())
            .collect()
    };
    let (psi_n, psi_0) = rule.lagrange_edge_derivatives();
    let w_n = rule.weights()[n];
    let w_0 = rule.weights()[0];
    let h_tilde_plus = d2(&h1)
        .iter()
        .zip(&psi_n)
        .map(|(a, p)| (a + p / w_n) / w_n.sqrt())
        .collect();
    let h_tilde_minus = d2(&h2)
        .iter()
        .zip(&psi_0)
        .map(|(a, p)| (a - p / w_0) / w_0.sqrt())
        .collect();
    let a_diag = (0..grid.dim())
        .map(|j| {
            (0..grid.dim())
                .map(|k| if k == j { m.mu + m.lm() } else { m.mu })
                .collect()
        })
        .collect();
    LiftingKernels {
        h1,
        h2,
        h_tilde_plus,
        h_tilde_minus,
        a_diag,
    }
}

impl LiftingKernels {
    fn profile(&self, face: &Face) -> &[f64] {
        if face.sign > 0.0 {
            &self.h_tilde_plus
        } else {
            &self.h_tilde_minus
        }
    }

    /// Interior source `G_j` (whole grid, component-major, zero at boundary
    /// nodes) produced by face values `g` (component-major over face nodes).
    pub fn source(&self, grid: &Arc<TensorGrid>, face: &Face, g: &[f64]) -> VectorField {
        let map = FaceMap::new(grid, face);
        let mut out = vec![0.0; grid.dim() * grid.interior_indices().len()];
        self.add_source(grid, face, &map, g, &mut out);
        VectorField {
            grid: grid.clone(),
            data: scatter(grid, &out, None, grid.dim() * grid.len()),
        }
    }

    fn add_source(&self, grid: &TensorGrid, face: &Face, map: &FaceMap, g: &[f64], out: &mut [f64]) {
        let n_int = grid.interior_indices().len();
        let m = face.nodes.len();
        let h = self.profile(face);
        let a = &self.a_diag[face.axis];
        for (slot, &(p, k)) in map.interior.iter().enumerate() {
            for c in 0..grid.dim() {
                out[c * n_int + slot] += a[c] * h[k] * g[c * m + p];
            }
        }
    }

    /// Transpose of [`add_source`]: face values from an interior vector.
    fn source_transposed(&self, grid: &TensorGrid, face: &Face, map: &FaceMap, r: &[f64]) -> Vec<f64> {
        let n_int = grid.interior_indices().len();
        let m = face.nodes.len();
        let h = self.profile(face);
        let a = &self.a_diag[face.axis];
        let mut out = vec![0.0; grid.dim() * m];
        for (slot, &(p, k)) in map.interior.iter().enumerate() {
            for c in 0..grid.dim() {
                out[c * m + p] += a[c] * h[k] * r[c * n_int + slot];
            }
        }
        out
    }
}

/// For each interior node: position of its projection in the face's node
/// list and its index along the face's normal axis.
#[derive(Debug, Clone)]
struct FaceMap {
    interior: Vec<(usize, usize)>,
}

impl FaceMap {
    fn new(grid: &TensorGrid, face: &Face) -> Self {
        let fixed = if face.sign > 0.0 { grid.degree() } else { 0 };
        let mut pos = vec![usize::MAX; grid.len()];
        for (p, &node) in face.nodes.iter().enumerate() {
            pos[node] = p;
        }
        let interior = grid
            .interior_indices()
            .iter()
            .map(|&node| {
                let mut idx = grid.multi_index(node);
                let k = idx[face.axis];
                idx[face.axis] = fixed;
                (pos[grid.flat_index(&idx)], k)
            })
            .collect();
        Self { interior }
    }
}

/// Time samples of all controls: `f[k]` is a whole-grid array, nonzero
/// only on observation-boundary nodes; `g[k][j]` holds face `j + 1` values.
#[derive(Debug, Clone)]
pub struct ControlSamples {
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSettings {
    /// Relative residual target of the iterative solve.
    pub tol: f64,
    pub max_iter: usize,
    /// Gramian symmetry probe tolerance; the probe is skipped when `None`.
    pub symmetry_tol: Option<f64>,
    pub seed: u64,
}

impl Default for ControlSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            symmetry_tol: Some(1e-6),
            seed: 0,
        }
    }
}

/// The HUM Gramian on adjoint data, with the energy inner product
/// `<(a, b), (c, d)> = a^T K c + b^T M d`, `K = -M L`.
pub struct HumOperator {
    integrator: Integrator,
    lifting: LiftingKernels,
    face_maps: Vec<FaceMap>,
    weight_g: f64,
}

impl std::fmt::Debug for HumOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HumOperator")
            .field("integrator", &self.integrator)
            .field("weight_g", &self.weight_g)
            .finish()
    }
}

impl HumOperator {
    pub fn new(system: Arc<ElasticSystem>, spec: TimeGridSpec, weight_g: f64) -> Result<Self> {
        if !(weight_g >= 0.0 && weight_g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight_g must be finite and non-negative, got {weight_g}"
            )));
        }
        if spec.scheme != Scheme::Newmark {
            return Err(Error::InvalidParameter(
                "control synthesis needs the Newmark scheme".into(),
            ));
        }
        let grid = system.grid().clone();
        let lifting = build_lifting(&grid, system.material());
        let face_maps = grid.faces().iter().map(|f| FaceMap::new(&grid, f)).collect();
        Ok(Self {
            integrator: Integrator::new(system, spec)?,
            lifting,
            face_maps,
            weight_g,
        })
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integrator
    }

    pub fn system(&self) -> &Arc<ElasticSystem> {
        self.integrator.system()
    }

    pub fn lifting(&self) -> &LiftingKernels {
        &self.lifting
    }

    /// Length of a stacked `(u, v)` interior vector.
    pub fn len(&self) -> usize {
        2 * self.system().dofs()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.system().dofs();
        let sys = self.system();
        sys.stiffness_dot(&a[..n], &b[..n]) + sys.mass_dot(&a[n..], &b[n..])
    }

    /// Controls generated by free adjoint data `(zu, zv)`.
    pub fn observe(&self, z: &[f64]) -> Result<ControlSamples> {
        let sys = self.system();
        let grid = sys.grid();
        let m = sys.material();
        let n = sys.dofs();
        let spec = *self.integrator.spec();
        let steps = spec.steps();
        let traj = self.integrator.trajectory(&z[..n], &z[n..])?;
        let half: Vec<Vec<f64>> = (0..steps)
            .map(|k| traj.u[k].iter().zip(&traj.u[k + 1]).map(|(a, b)| 0.5 * (a + b)).collect())
            .collect();
        let len = grid.dim() * grid.len();
        let npts = grid.len();
        let mut f = Vec::with_capacity(steps + 1);
        let mut g = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let tau = spec.trapezoid_weight(k);
            // r = M ubar_k
            let mut r = vec![0.0; n];
            for j in [k.checked_sub(1), (k < steps).then_some(k)].into_iter().flatten() {
                for (ri, (h, w)) in r.iter_mut().zip(half[j].iter().zip(sys.mass())) {
                    *ri += 0.5 * spec.dt * h * w;
                }
            }
            let lt = lame_apply_transposed_raw(grid, m, &scatter(grid, &r, None, len));
            let mut fk = vec![0.0; len];
            for c in 0..grid.dim() {
                for &b in grid.boundary_indices() {
                    let wg = grid.gamma_weight(b);
                    if wg > 0.0 {
                        fk[c * npts + b] = lt[c * npts + b] / (tau * wg);
                    }
                }
            }
            f.push(fk);
            let gk: Vec<Vec<f64>> = grid
                .faces()
                .iter()
                .zip(&self.face_maps)
                .map(|(face, map)| {
                    let mut v = self.lifting.source_transposed(grid, face, map, &r);
                    let mf = face.nodes.len();
                    for c in 0..grid.dim() {
                        for p in 0..mf {
                            v[c * mf + p] *= self.weight_g / (tau * face.weights[p]);
                        }
                    }
                    v
                })
                .collect();
            g.push(gk);
        }
        Ok(ControlSamples { f, g })
    }

    /// Interior form of the forcing generated by control samples.
    pub fn forcing(&self, c: &ControlSamples) -> InteriorForcing {
        let grid = self.system().grid();
        let n = self.system().dofs();
        let source = c
            .g
            .iter()
            .map(|gk| {
                let mut s = vec![0.0; n];
                for ((face, map), gj) in grid.faces().iter().zip(&self.face_maps).zip(gk) {
                    self.lifting.add_source(grid, face, map, gj, &mut s);
                }
                s
            })
            .collect();
        InteriorForcing {
            boundary: c.f.clone(),
            source,
        }
    }

    /// Applies the Gramian to stacked adjoint data.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.system().dofs();
        let controls = self.observe(z)?;
        let forcing = self.forcing(&controls);
        let s = self
            .integrator
            .run_forced(vec![0.0; n], vec![0.0; n], &forcing, true)?;
        let mut out = self.system().solve_operator(&s.v)?;
        out.extend_from_slice(&s.u);
        Ok(out)
    }

    /// Squared control norm `sum_k tau_k (|f_k|^2 + |g_k|^2 / weight_g)`
    /// in the nodal face quadrature. Equals `<apply(z), z>` for controls
    /// generated by `z`.
    pub fn control_energy(&self, c: &ControlSamples) -> f64 {
        let grid = self.system().grid();
        let spec = self.integrator.spec();
        let npts = grid.len();
        let mut total = 0.0;
        for (k, (fk, gk)) in c.f.iter().zip(&c.g).enumerate() {
            let mut s = 0.0;
            for comp in 0..grid.dim() {
                for &b in grid.boundary_indices() {
                    s += grid.gamma_weight(b) * fk[comp * npts + b].powi(2);
                }
            }
            if self.weight_g > 0.0 {
                for (face, gj) in grid.faces().iter().zip(gk) {
                    let mf = face.nodes.len();
                    for comp in 0..grid.dim() {
                        for p in 0..mf {
                            s += face.weights[p] * gj[comp * mf + p].powi(2) / self.weight_g;
                        }
                    }
                }
            }
            total += spec.trapezoid_weight(k) * s;
        }
        total
    }
}

/// Applies the Gramian to adjoint data given as fields.
pub fn gramian_apply(adjoint: &ElasticState, op: &HumOperator) -> Result<ElasticState> {
    let sys = op.system();
    let mut z = sys.to_interior(&adjoint.displacement);
    z.extend(sys.to_interior(&adjoint.velocity));
    let out = op.apply(&z)?;
    let n = sys.dofs();
    Ok(ElasticState {
        displacement: sys.to_field(&out[..n], None),
        velocity: sys.to_field(&out[n..], None),
        time: 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct ControlResult {
    pub degree: usize,
    /// Sample times `t_k`.
    pub times: Vec<f64>,
    /// Dirichlet control on each observation face, per sample.
    pub f: Vec<Vec<FaceTrace>>,
    /// Auxiliary controls on every face, per sample.
    pub g: Vec<Vec<FaceTrace>>,
    pub f_norm: f64,
    pub g_norm: f64,
    /// `|f(t_k)|_{L^2(Gamma)}` per sample.
    pub f_trace: Vec<f64>,
    /// Final state relative to the data in the `L^2 x H^{-1}` norm, the
    /// natural state space of the controlled system.
    pub final_state_norm_rel: f64,
    /// The same ratio with the plain discrete `L^2` norm of both fields.
    pub final_state_l2_rel: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    /// Relative residual after each iteration, starting with 1.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Relative symmetry defect of the probe, when run.
    pub symmetry_defect: Option<f64>,
}

/// Space-time norms `(|f|_{L^2(0,T; Gamma)}, |g|_{L^2(0,T; dOmega)})` and
/// the per-sample trace `|f(t_k)|_{L^2(Gamma)}`, with the fine face rule in
/// space and the trapezoid rule in time.
pub fn control_norms(
    f: &[Vec<FaceTrace>],
    g: &[Vec<FaceTrace>],
    grid: &TensorGrid,
    spec: &TimeGridSpec,
) -> Result<(f64, f64, Vec<f64>)> {
    let mut f_sq = 0.0;
    let mut g_sq = 0.0;
    let mut trace = Vec::with_capacity(f.len());
    for (k, (fk, gk)) in f.iter().zip(g).enumerate() {
        let w = spec.trapezoid_weight(k);
        let mut fs = 0.0;
        for t in fk {
            fs += face_l2_norm_sq(grid, t)?;
        }
        let mut gs = 0.0;
        for t in gk {
            gs += face_l2_norm_sq(grid, t)?;
        }
        trace.push(fs.sqrt());
        f_sq += w * fs;
        g_sq += w * gs;
    }
    Ok((f_sq.sqrt(), g_sq.sqrt(), trace))
}

fn to_traces(grid: &TensorGrid, c: &ControlSamples) -> (Vec<Vec<FaceTrace>>, Vec<Vec<FaceTrace>>) {
    let d = grid.dim();
    let npts = grid.len();
    let f = c
        .f
        .iter()
        .map(|fk| {
            grid.gamma_faces()
                .iter()
                .map(|&id| {
                    let face = &grid.faces()[id - 1];
                    let m = face.nodes.len();
                    let mut values = vec![0.0; d * m];
                    for comp in 0..d {
                        for (p, &node) in face.nodes.iter().enumerate() {
                            values[comp * m + p] = fk[comp * npts + node];
                        }
                    }
                    FaceTrace { face: id, dim: d, values }
                })
                .collect()
        })
        .collect();
    let g = c
        .g
        .iter()
        .map(|gk| {
            grid.faces()
                .iter()
                .zip(gk)
                .map(|(face, v)| FaceTrace {
                    face: face.id,
                    dim: d,
                    values: v.clone(),
                })
                .collect()
        })
        .collect();
    (f, g)
}

/// Steers `(u0, u1)` to rest at the final time. `u0`, `u1` are sampled at
/// interior nodes (boundary values are ignored).
pub fn solve_control(
    op: &HumOperator,
    u0: &VectorField,
    u1: &VectorField,
    settings: &ControlSettings,
) -> Result<ControlResult> {
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    u0.check_grid(u1)?;
    let sys = op.system().clone();
    let grid = sys.grid().clone();
    if !u0.grid.same_as(&grid) {
        return Err(Error::GridMismatch("initial data on a different grid".into()));
    }
    let spec = *op.integrator().spec();
    let n = sys.dofs();
    let iu0 = sys.to_interior(u0);
    let iu1 = sys.to_interior(u1);
    let data_norm = (sys.mass_dot(&iu0, &iu0) + sys.mass_dot(&iu1, &iu1)).sqrt();

    let mut b = sys.solve_operator(&iu1)?;
    b.extend_from_slice(&iu0);
    let b_norm = op.inner(&b, &b).sqrt();

    let mut symmetry_defect = None;
    let mut z = vec![0.0; 2 * n];
    let mut history = vec![1.0];
    let mut iterations = 0;
    let mut converged = true;
    if b_norm > 0.0 {
        if let Some(tol) = settings.symmetry_tol {
            let defect = symmetry_probe(op, settings.seed)?;
            symmetry_defect = Some(defect);
            if defect > tol {
                return Err(Error::GramianAsymmetry { defect, tol });
            }
        }
        // conjugate residual iteration in the energy inner product
        let mut r = b.clone();
        let mut p = r.clone();
        let mut ar = op.apply(&r)?;
        let mut ap = ar.clone();
        let mut rar = op.inner(&r, &ar);
        converged = false;
        while iterations < settings.max_iter {
            let apap = op.inner(&ap, &ap);
            if !(apap > 0.0) || !(rar > 0.0) {
                break;
            }
            let alpha = rar / apap;
            z.iter_mut().zip(&p).for_each(|(x, y)| *x += alpha * y);
            r.iter_mut().zip(&ap).for_each(|(x, y)| *x -= alpha * y);
            iterations += 1;
            let rel = op.inner(&r, &r).sqrt() / b_norm;
            history.push(rel);
            if rel <= settings.tol {
                converged = true;
                break;
            }
            ar = op.apply(&r)?;
            let rar_new = op.inner(&r, &ar);
            let beta = rar_new / rar;
            rar = rar_new;
            p.iter_mut().zip(&r).for_each(|(x, y)| *x = y + beta * *x);
            ap.iter_mut().zip(&ar).for_each(|(x, y)| *x = y + beta * *x);
        }
    }

    let controls = op.observe(&z)?;
    let forcing = op.forcing(&controls);
    let end = op.integrator().run_forced(iu0.clone(), iu1.clone(), &forcing, false)?;
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    let final_state_norm_rel = rel(
        state_space_norm(&sys, &end.u, &end.v)?,
        state_space_norm(&sys, &iu0, &iu1)?,
    );
    let end_l2 = (sys.mass_dot(&end.u, &end.u) + sys.mass_dot(&end.v, &end.v)).sqrt();
    let final_state_l2_rel = rel(end_l2, data_norm);

    let (f, g) = to_traces(&grid, &controls);
    let (f_norm, g_norm, f_trace) = control_norms(&f, &g, &grid, &spec)?;
    Ok(ControlResult {
        degree: grid.degree(),
        times: (0..=spec.steps()).map(|k| spec.time(k)).collect(),
        f,
        g,
        f_norm,
        g_norm,
        f_trace,
        final_state_norm_rel,
        final_state_l2_rel,
        cg_iterations: iterations,
        cg_residual: *history.last().expect("history starts with 1"),
        residual_history: history,
        converged,
        symmetry_defect,
    })
}

/// `(|u|_N^2 + |v|_{-1}^2)^{1/2}` with `|v|_{-1}^2 = v^T M (-L)^{-1} v`.
/// For the free system this is conserved, and it equals the energy norm
/// of the Gramian residual for the mismatch it measures.
pub fn state_space_norm(sys: &ElasticSystem, u: &[f64], v: &[f64]) -> Result<f64> {
    let lv = sys.solve_operator(v)?;
    Ok((sys.mass_dot(u, u) - sys.mass_dot(v, &lv)).max(0.0).sqrt())
}

/// `|<Ax, y> - <x, Ay>| / (|Ax| |y|)` for two seeded random vectors.
pub fn symmetry_probe(op: &HumOperator, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fa1);
    let len = op.len();
    let x: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let ax = op.apply(&x)?;
    let ay = op.apply(&y)?;
    let lhs = op.inner(&ax, &y);
    let rhs = op.inner(&x, &ay);
    let scale = op.inner(&ax, &ax).sqrt() * op.inner(&y, &y).sqrt();
    Ok(if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 })
}

/// Runs the controlled system forward from `(u0, u1)` with public forcing
/// samples and returns the final state.
pub fn run_controlled(
    integrator: &Integrator,
    u0: &VectorField,
    u1: &VectorField,
    forcing: &BoundaryForcing,
) -> Result<ElasticState> {
    let sys = integrator.system();
    let grid = sys.grid();
    let f = interior_forcing(grid, forcing);
    let s = integrator.run_forced(sys.to_interior(u0), sys.to_interior(u1), &f, false)?;
    let steps = integrator.spec().steps();
    Ok(ElasticState {
        displacement: sys.to_field(&s.u, f.boundary.get(steps).map(|b| b.as_slice())),
        velocity: sys.to_field(&s.v, None),
        time: integrator.spec().t_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn op(n: usize, t: f64, weight_g: f64) -> HumOperator {
        let grid = Arc::new(TensorGrid::new(2, n).unwrap());
        let sys = Arc::new(ElasticSystem::new(grid, Material::new(0.5, 4.0).unwrap()));
        HumOperator::new(sys, TimeGridSpec::new(t, 0.01, Scheme::Newmark).unwrap(), weight_g).unwrap()
    }

    #[test]
    fn lifting_profiles() {
        let grid = TensorGrid::new(2, 7).unwrap();
        let m = Material::new(0.5, 4.0).unwrap();
        let l = build_lifting(&grid, &m);
        let n = 7;
        for k in 0..=n {
            let s = l.h1[k] + l.h2[k];
            let expect = if k == 0 || k == n { 0.0 } else { 1.0 };
            assert_abs_diff_eq!(s, expect, epsilon = 1e-15);
            assert!(l.h_tilde_plus[k].is_finite() && l.h_tilde_minus[k].is_finite());
        }
        assert_eq!(l.a_diag[0], vec![8.5, 4.0]);
        assert_eq!(l.a_diag[1], vec![4.0, 8.5]);
    }

    #[test]
    fn lifting_at_degree_two() {
        // h1 interpolant through (-1,0), (0,1/2), (1,0): -x^2/2 + 1/2, so h1'' = -1;
        // Psi_2' = s + 1/2 and w_2 = 1/3
        let grid = TensorGrid::new(1, 2).unwrap();
        let l = build_lifting(&grid, &Material::new(0.5, 4.0).unwrap());
        let w: f64 = 1.0 / 3.0;
        for (k, s) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
            let expect = (-1.0 + (s + 0.5) / w) / w.sqrt();
            assert_abs_diff_eq!(l.h_tilde_plus[k], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_data_gives_zero_controls() {
        let o = op(5, 0.3, 1.0);
        let grid = o.system().grid().clone();
        let z = VectorField::zeros(grid);
        let r = solve_control(&o, &z, &z, &ControlSettings::default()).unwrap();
        assert_eq!(r.cg_iterations, 0);
        assert_eq!(r.f_norm, 0.0);
        assert_eq!(r.g_norm, 0.0);
    }

    #[test]
    fn gramian_symmetric_and_matches_control_energy() {
        let o = op(5, 0.5, 1.0);
        assert!(symmetry_probe(&o, 4).unwrap() < 1e-10);
        let len = o.len();
        let z: Vec<f64> = (0..len).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let az = o.apply(&z).unwrap();
        let c = o.observe(&z).unwrap();
        let e = o.control_energy(&c);
        assert!((o.inner(&az, &z) - e).abs() <= 1e-9 * e, "{} vs {e}", o.inner(&az, &z));
    }

    #[test]
    fn weight_zero_removes_auxiliary_controls() {
        let o = op(5, 0.3, 0.0);
        let len = o.len();
        let z: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = o.observe(&z).unwrap();
        assert!(c.g.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_control_norm() {
        let grid = TensorGrid::new(2, 6).unwrap();
        let spec = TimeGridSpec::new(1.0, 0.1, Scheme::Newmark).unwrap();
        let steps = spec.steps();
        let f: Vec<Vec<FaceTrace>> = (0..=steps)
            .map(|_| {
                grid.gamma_faces()
                    .iter()
                    .map(|&id| {
                        let m = grid.faces()[id - 1].nodes.len();
                        let mut values = vec![0.0; 2 * m];
                        values[..m].iter_mut().for_each(|v| *v = 1.0);
                        FaceTrace { face: id, dim: 2, values }
                    })
                    .collect()
            })
            .collect();
        let g = vec![Vec::new(); steps + 1];
        let (fnorm, gnorm, trace) = control_norms(&f, &g, &grid, &spec).unwrap();
        assert_abs_diff_eq!(fnorm, 2.0, epsilon = 1e-12);
        assert_eq!(gnorm, 0.0);
        assert_abs_diff_eq!(trace[3], 2.0, epsilon = 1e-12);
    }
}
