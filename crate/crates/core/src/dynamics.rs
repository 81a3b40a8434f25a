//! Time integration of the semi-discrete elasticity system and the
//! discrete energy.
//!
//! Unknowns are the displacement and velocity at interior nodes; boundary
//! nodes carry prescribed Dirichlet values (zero for the free system).
//! Interior vectors are laid out component-major over
//! [`TensorGrid::interior_indices`].
//!
//! The default scheme is average-acceleration Newmark (`beta = 1/4`,
//! `gamma = 1/2`). The mass-weighted interior operator `-M L` is
//! symmetric positive definite, so the implicit system
//! `(I - beta dt^2 L) a = b` is solved through a Cholesky factor of
//! `I + beta dt^2 M^{1/2} (-L) M^{-1/2}`, computed once per time step size.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fields::{lame_apply_raw, FirstDerivatives, Material, VectorField};
use crate::grid::{weighted_dot, TensorGrid};

pub const NEWMARK_BETA: f64 = 0.25;
pub const NEWMARK_GAMMA: f64 = 0.5;

/// RK4 is stable on the imaginary axis up to `|z| = 2 sqrt(2)`.
pub const RK4_IMAGINARY_LIMIT: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Newmark,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGridSpec {
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Scheme,
}

impl TimeGridSpec {
    /// Rounds the step down so that `t_final / dt` is an integer.
    pub fn new(t_final: f64, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(t_final > 0.0 && dt > 0.0 && t_final.is_finite() && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time and step must be positive, got T={t_final}, dt={dt}"
            )));
        }
        let steps = (t_final / dt - 1e-9).ceil().max(1.0);
        Ok(Self {
            t_final,
            dt: t_final / steps,
            scheme,
        })
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Trapezoid weights on the time grid.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.steps() {
            0.5 * self.dt
        } else {
            self.dt
        }
    }
}

/// Displacement/velocity pair at one instant.
#[derive(Debug, Clone)]
pub struct ElasticState {
    pub displacement: VectorField,
    pub velocity: VectorField,
    pub time: f64,
}

impl ElasticState {
    pub fn zeros(grid: Arc<TensorGrid>) -> Self {
        Self {
            displacement: VectorField::zeros(grid.clone()),
            velocity: VectorField::zeros(grid),
            time: 0.0,
        }
    }

    pub fn new(displacement: VectorField, velocity: VectorField) -> Result<Self> {
        displacement.check_grid(&velocity)?;
        Ok(Self {
            displacement,
            velocity,
            time: 0.0,
        })
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.displacement.grid
    }

    /// Independent standard-normal values at interior nodes for both
    /// fields, zero on the boundary.
    pub fn random(grid: Arc<TensorGrid>, rng: &mut impl Rng) -> Self {
        let n = grid.len();
        let mut u = VectorField::zeros(grid.clone());
        let mut v = VectorField::zeros(grid.clone());
        for c in 0..grid.dim() {
            for &node in grid.interior_indices() {
                u.data[c * n + node] = rng.sample(StandardNormal);
                v.data[c * n + node] = rng.sample(StandardNormal);
            }
        }
        Self {
            displacement: u,
            velocity: v,
            time: 0.0,
        }
    }
}

/// Time-sampled Dirichlet data and interior sources on a uniform grid.
///
/// `dirichlet[k]` holds full-grid vector fields whose boundary entries are
/// the prescribed displacement at `t_k`; entries off the observation
/// boundary must vanish. `source[k]` holds the interior source, summed
/// over faces; its boundary entries are ignored.
#[derive(Debug, Clone)]
pub struct BoundaryForcing {
    pub dt: f64,
    pub dirichlet: Vec<VectorField>,
    pub source: Vec<VectorField>,
}

impl BoundaryForcing {
    pub fn zeros(grid: Arc<TensorGrid>, spec: &TimeGridSpec) -> Self {
        let n = spec.steps() + 1;
        Self {
            dt: spec.dt,
            dirichlet: vec![VectorField::zeros(grid.clone()); n],
            source: vec![VectorField::zeros(grid); n],
        }
    }

    /// Same Dirichlet data at every sample, no interior source.
    pub fn constant_dirichlet(values: &VectorField, spec: &TimeGridSpec) -> Self {
        let n = spec.steps() + 1;
        Self {
            dt: spec.dt,
            dirichlet: vec![values.clone(); n],
            source: vec![VectorField::zeros(values.grid.clone()); n],
        }
    }

    fn validate(&self, grid: &TensorGrid, spec: &TimeGridSpec) -> Result<()> {
        let n = spec.steps() + 1;
        if self.dirichlet.len() != n || self.source.len() != n {
            return Err(Error::ForcingMismatch(format!(
                "expected {n} samples, got {} Dirichlet and {} source samples",
                self.dirichlet.len(),
                self.source.len()
            )));
        }
        if (self.dt - spec.dt).abs() > 1e-12 * spec.dt {
            return Err(Error::ForcingMismatch(format!(
                "forcing step {} differs from integrator step {}",
                self.dt, spec.dt
            )));
        }
        let npts = grid.len();
        for f in &self.dirichlet {
            if !f.grid.same_as(grid) {
                return Err(Error::GridMismatch("forcing on a different grid".into()));
            }
            for c in 0..grid.dim() {
                for &b in grid.boundary_indices() {
                    if !grid.on_gamma(b) && f.data[c * npts + b] != 0.0 {
                        return Err(Error::ForcingMismatch(
                            "Dirichlet data must vanish off the observation boundary".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Interior collocation operator `L` of the Lamé system together with its
/// factorizations.
pub struct ElasticSystem {
    grid: Arc<TensorGrid>,
    material: Material,
    mass: Vec<f64>,
    mass_sqrt: Vec<f64>,
    /// `M^{1/2} (-L) M^{-1/2}`, symmetrized.
    stiffness_sym: DMatrix<f64>,
    asymmetry: f64,
    stiffness_chol: OnceLock<std::result::Result<Cholesky<f64, Dyn>, String>>,
}

impl std::fmt::Debug for ElasticSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ElasticSystem")
            .field("dim", &self.grid.dim())
            .field("degree", &self.grid.degree())
            .field("material", &self.material)
            .finish()
    }
}

impl ElasticSystem {
    pub fn new(grid: Arc<TensorGrid>, material: Material) -> Self {
        let d = grid.dim();
        let n_int = grid.interior_indices().len();
        let dofs = d * n_int;
        let mass: Vec<f64> = (0..dofs)
            .map(|k| grid.weights()[grid.interior_indices()[k % n_int]])
            .collect();
        let mass_sqrt: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();

        let mut raw = DMatrix::<f64>::zeros(dofs, dofs);
        let mut unit = vec![0.0; dofs];
        let full_len = d * grid.len();
        for col in 0..dofs {
            unit[col] = 1.0;
            let full = scatter(&grid, &unit, None, full_len);
            let lu = lame_apply_raw(&grid, &material, &full);
            let column = gather(&grid, &lu);
            for (row, v) in column.into_iter().enumerate() {
                raw[(row, col)] = -mass_sqrt[row] * v / mass_sqrt[col];
            }
            unit[col] = 0.0;
        }
        let mut asym: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..dofs {
            for j in 0..i {
                asym = asym.max((raw[(i, j)] - raw[(j, i)]).abs());
            }
            scale = scale.max(raw[(i, i)].abs());
        }
        let sym = (&raw + raw.transpose()) * 0.5;
        Self {
            grid,
            material,
            mass,
            mass_sqrt,
            stiffness_sym: sym,
            asymmetry: if scale > 0.0 { asym / scale } else { 0.0 },
            stiffness_chol: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.grid
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    /// Number of interior unknowns per field, `d (N-1)^d`.
    pub fn dofs(&self) -> usize {
        self.mass.len()
    }

    /// Interior quadrature weights per unknown (the diagonal mass `M`).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Relative asymmetry of `M^{1/2} L M^{-1/2}` before symmetrization.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// Symmetrized `M^{1/2} (-L) M^{-1/2}`.
    pub fn stiffness_sym(&self) -> &DMatrix<f64> {
        &self.stiffness_sym
    }

    /// `L` applied to interior displacement with boundary values
    /// `boundary` (full-grid array, only boundary entries read).
    pub fn apply(&self, u: &[f64], boundary: Option<&[f64]>) -> Vec<f64> {
        let full = scatter(&self.grid, u, boundary, self.grid.dim() * self.grid.len());
        gather(&self.grid, &lame_apply_raw(&self.grid, &self.material, &full))
    }

    /// Largest eigenvalue of `-L` (squared top frequency), by power iteration.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.dofs();
        let mut x = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
        x /= x.norm();
        let mut rho = 0.0;
        for _ in 0..500 {
            let y = &self.stiffness_sym * &x;
            let next = y.dot(&x);
            let norm = y.norm();
            if norm == 0.0 {
                return 0.0;
            }
            x = y / norm;
            if (next - rho).abs() <= 1e-10 * next.abs() {
                rho = next;
                break;
            }
            rho = next;
        }
        rho
    }

    fn stiffness_cholesky(&self) -> Result<&Cholesky<f64, Dyn>> {
        self.stiffness_chol
            .get_or_init(|| {
                Cholesky::new(self.stiffness_sym.clone())
                    .ok_or_else(|| "interior stiffness is not positive definite".to_string())
            })
            .as_ref()
            .map_err(|e| Error::LinearSolve(e.clone()))
    }

    /// `L^{-1} v` for an interior vector.
    pub fn solve_operator(&self, v: &[f64]) -> Result<Vec<f64>> {
        let chol = self.stiffness_cholesky()?;
        let mut x = DVector::from_iterator(
            v.len(),
            v.iter().zip(&self.mass_sqrt).map(|(a, s)| a * s),
        );
        chol.solve_mut(&mut x);
        Ok(x.iter()
            .zip(&self.mass_sqrt)
            .map(|(a, s)| -a / s)
            .collect())
    }

    /// Discrete energy bilinear form on interior displacements:
    /// `mu (grad a, grad b)_N + (lambda + mu)(div a, div b)_N`.
    pub fn stiffness_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let len = self.grid.dim() * self.grid.len();
        let fa = scatter(&self.grid, a, None, len);
        let fb = scatter(&self.grid, b, None, len);
        elastic_dot(&self.grid, &self.material, &fa, &fb)
    }

    /// `(a, b)_N` for interior vectors.
    pub fn mass_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_dot(&self.mass, a, b)
    }

    pub fn to_interior(&self, f: &VectorField) -> Vec<f64> {
        gather(&self.grid, &f.data)
    }

    pub fn to_field(&self, interior: &[f64], boundary: Option<&[f64]>) -> VectorField {
        let len = self.grid.dim() * self.grid.len();
        VectorField {
            grid: self.grid.clone(),
            data: scatter(&self.grid, interior, boundary, len),
        }
    }
}

/// Places interior values (and optionally boundary values from a full-grid
/// array) into a full-grid array.
pub(crate) fn scatter(grid: &TensorGrid, interior: &[f64], boundary: Option<&[f64]>, len: usize) -> Vec<f64> {
    let n = grid.len();
    let n_int = grid.interior_indices().len();
    let mut full = vec![0.0; len];
    if let Some(b) = boundary {
        for c in 0..grid.dim() {
            for &node in grid.boundary_indices() {
                full[c * n + node] = b[c * n + node];
            }
        }
    }
    for c in 0..grid.dim() {
        for (slot, &node) in grid.interior_indices().iter().enumerate() {
            full[c * n + node] = interior[c * n_int + slot];
        }
    }
    full
}

pub(crate) fn gather(grid: &TensorGrid, full: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut out = Vec::with_capacity(grid.dim() * grid.interior_indices().len());
    for c in 0..grid.dim() {
        out.extend(grid.interior_indices().iter().map(|&node| full[c * n + node]));
    }
    out
}

/// `mu (grad a, grad b)_N + (lambda + mu)(div a, div b)_N` for full-grid fields.
pub(crate) fn elastic_dot(grid: &TensorGrid, m: &Material, a: &[f64], b: &[f64]) -> f64 {
    let da = FirstDerivatives::new(grid, a);
    let db = FirstDerivatives::new(grid, b);
    let w = grid.weights();
    let grad: f64 = da
        .grad
        .iter()
        .zip(&db.grad)
        .map(|(x, y)| weighted_dot(w, x, y))
        .sum();
    m.mu * grad + m.lm() * weighted_dot(w, &da.div, &db.div)
}

/// `E^N = 1/2 (||u_t||_N^2 + mu ||grad u||_N^2 + (lambda + mu) ||div u||_N^2)`.
pub fn discrete_energy(state: &ElasticState, m: &Material) -> f64 {
    let grid = state.grid();
    let kinetic = state.velocity.discrete_dot(&state.velocity);
    let d = &state.displacement.data;
    0.5 * (kinetic + elastic_dot(grid, m, d, d))
}

/// Largest interior-node deviation of `accel` from `Lamé(displacement)`.
pub fn interior_residual(state: &ElasticState, accel: &VectorField, m: &Material) -> f64 {
    let grid = state.grid();
    let l = lame_apply_raw(grid, m, &state.displacement.data);
    let n = grid.len();
    let mut r: f64 = 0.0;
    for c in 0..grid.dim() {
        for &node in grid.interior_indices() {
            r = r.max((accel.data[c * n + node] - l[c * n + node]).abs());
        }
    }
    r
}

/// Interior displacement, velocity and acceleration.
#[derive(Debug, Clone)]
pub struct InteriorState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

/// Forcing samples in interior form: full-grid boundary arrays (already
/// restricted to the observation boundary) and interior source vectors.
#[derive(Debug, Clone, Default)]
pub struct InteriorForcing {
    pub boundary: Vec<Vec<f64>>,
    pub source: Vec<Vec<f64>>,
}

impl InteriorForcing {
    fn boundary_at(&self, k: usize) -> Option<&[f64]> {
        self.boundary.get(k).map(|v| v.as_slice())
    }

    fn source_at(&self, k: usize) -> Option<&[f64]> {
        self.source.get(k).map(|v| v.as_slice())
    }
}

/// Stored displacement and velocity at every time sample.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: TimeGridSpec,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// Time stepper bound to one system and one time grid.
pub struct Integrator {
    system: Arc<ElasticSystem>,
    spec: TimeGridSpec,
    newmark: Option<Cholesky<f64, Dyn>>,
}

impl std::fmt::Debug for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Integrator")
            .field("system", &self.system)
            .field("spec", &self.spec)
            .finish()
    }
}

impl Integrator {
    pub fn new(system: Arc<ElasticSystem>, spec: TimeGridSpec) -> Result<Self> {
        let newmark = match spec.scheme {
            Scheme::Newmark => {
                let c = NEWMARK_BETA * spec.dt * spec.dt;
                let mut m = system.stiffness_sym.scale(c);
                for i in 0..m.nrows() {
                    m[(i, i)] += 1.0;
                }
                Some(Cholesky::new(m).ok_or_else(|| {
                    Error::LinearSolve("Newmark system matrix is not positive definite".into())
                })?)
            }
            Scheme::Rk4 => None,
        };
        Ok(Self {
            system,
            spec,
            newmark,
        })
    }

    pub fn system(&self) -> &Arc<ElasticSystem> {
        &self.system
    }

    pub fn spec(&self) -> &TimeGridSpec {
        &self.spec
    }

    /// `dt sqrt(rho(-L)) / (2 sqrt 2)`; RK4 needs this at most 1.
    pub fn rk4_stability_ratio(&self) -> f64 {
        self.spec.dt * self.system.spectral_radius().sqrt() / RK4_IMAGINARY_LIMIT
    }

    /// Acceleration consistent with the displacement and forcing at sample `k`.
    pub fn initial(&self, u: Vec<f64>, v: Vec<f64>, forcing: Option<&InteriorForcing>, k: usize) -> InteriorState {
        let mut a = self.system.apply(&u, forcing.and_then(|f| f.boundary_at(k)));
        if let Some(s) = forcing.and_then(|f| f.source_at(k)) {
            a.iter_mut().zip(s).for_each(|(x, y)| *x += y);
        }
        InteriorState { u, v, a }
    }

    /// Advances one step of size `h` (negative for reverse time) using the
    /// forcing sample `k_next` at the new time.
    pub fn step(&self, s: &mut InteriorState, h: f64, forcing: Option<&InteriorForcing>, k_next: usize) -> Result<()> {
        match self.spec.scheme {
            Scheme::Newmark => self.newmark_step(s, h, forcing, k_next),
            Scheme::Rk4 => self.rk4_step(s, h, forcing, k_next),
        }
    }

    fn newmark_step(&self, s: &mut InteriorState, h: f64, forcing: Option<&InteriorForcing>, k_next: usize) -> Result<()> {
        let chol = self
            .newmark
            .as_ref()
            .ok_or_else(|| Error::LinearSolve("Newmark factorization missing".into()))?;
        let c = (0.5 - NEWMARK_BETA) * h * h;
        let pred: Vec<f64> = s
            .u
            .iter()
            .zip(&s.v)
            .zip(&s.a)
            .map(|((u, v), a)| u + h * v + c * a)
            .collect();
        let mut rhs = self.system.apply(&pred, forcing.and_then(|f| f.boundary_at(k_next)));
        if let Some(src) = forcing.and_then(|f| f.source_at(k_next)) {
            rhs.iter_mut().zip(src).for_each(|(x, y)| *x += y);
        }
        let ms = &self.system.mass_sqrt;
        let mut x = DVector::from_iterator(rhs.len(), rhs.iter().zip(ms).map(|(r, s)| r * s));
        chol.solve_mut(&mut x);
        let a_new: Vec<f64> = x.iter().zip(ms).map(|(y, s)| y / s).collect();
        let b = NEWMARK_BETA * h * h;
        for i in 0..pred.len() {
            s.u[i] = pred[i] + b * a_new[i];
            s.v[i] += h * ((1.0 - NEWMARK_GAMMA) * s.a[i] + NEWMARK_GAMMA * a_new[i]);
        }
        s.a = a_new;
        Ok(())
    }

    fn rk4_step(&self, s: &mut InteriorState, h: f64, forcing: Option<&InteriorForcing>, k_next: usize) -> Result<()> {
        // forcing at the half step is the mean of the two samples
        let k_prev = if h > 0.0 { k_next.wrapping_sub(1) } else { k_next + 1 };
        let mid = forcing.map(|f| {
            let avg = |xs: &Vec<Vec<f64>>| -> Option<Vec<f64>> {
                let a = xs.get(k_prev)?;
                let b = xs.get(k_next)?;
                Some(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
            };
            InteriorForcing {
                boundary: avg(&f.boundary).into_iter().collect(),
                source: avg(&f.source).into_iter().collect(),
            }
        });
        let accel = |u: &[f64], f: Option<&InteriorForcing>, k: usize| -> Vec<f64> {
            let mut a = self.system.apply(u, f.and_then(|f| f.boundary_at(k)));
            if let Some(src) = f.and_then(|f| f.source_at(k)) {
                a.iter_mut().zip(src).for_each(|(x, y)| *x += y);
            }
            a
        };
        let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| p + a * q).collect()
        };
        let (u, v) = (&s.u, &s.v);
        let k1u = v.clone();
        let k1v = s.a.clone();
        let u2 = axpy(u, 0.5 * h, &k1u);
        let k2u = axpy(v, 0.5 * h, &k1v);
        let k2v = accel(&u2, mid.as_ref(), 0);
        let u3 = axpy(u, 0.5 * h, &k2u);
        let k3u = axpy(v, 0.5 * h, &k2v);
        let k3v = accel(&u3, mid.as_ref(), 0);
        let u4 = axpy(u, h, &k3u);
        let k4u = axpy(v, h, &k3v);
        let new_u: Vec<f64> = (0..u.len())
            .map(|i| u[i] + h / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]))
            .collect();
        let k4v = accel(&u4, forcing, k_next);
        let new_v: Vec<f64> = (0..v.len())
            .map(|i| v[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]))
            .collect();
        s.a = accel(&new_u, forcing, k_next);
        s.u = new_u;
        s.v = new_v;
        Ok(())
    }

    /// Free evolution from interior data over the whole time grid,
    /// keeping every sample. Explicit runs abort once the energy exceeds
    /// ten times its initial value.
    pub fn trajectory(&self, u0: &[f64], v0: &[f64]) -> Result<Trajectory> {
        let mut s = self.initial(u0.to_vec(), v0.to_vec(), None, 0);
        let steps = self.spec.steps();
        let mut us = Vec::with_capacity(steps + 1);
        let mut vs = Vec::with_capacity(steps + 1);
        us.push(s.u.clone());
        vs.push(s.v.clone());
        let e0 = self.interior_energy(&s.u, &s.v);
        for k in 1..=steps {
            self.step(&mut s, self.spec.dt, None, k)?;
            if self.spec.scheme == Scheme::Rk4 {
                let e = self.interior_energy(&s.u, &s.v);
                if !e.is_finite() || e > 10.0 * e0.max(f64::MIN_POSITIVE) && e0 > 0.0 {
                    return Err(Error::Unstable {
                        time: self.spec.time(k),
                        initial: e0,
                        current: e,
                    });
                }
            }
            us.push(s.u.clone());
            vs.push(s.v.clone());
        }
        Ok(Trajectory {
            spec: self.spec,
            u: us,
            v: vs,
        })
    }

    /// Runs the forced system over the full grid and returns the final
    /// interior state. Forward runs start at sample 0, reverse runs at the
    /// last sample.
    pub fn run_forced(&self, u: Vec<f64>, v: Vec<f64>, forcing: &InteriorForcing, reverse: bool) -> Result<InteriorState> {
        let steps = self.spec.steps();
        let (start, h) = if reverse { (steps, -self.spec.dt) } else { (0, self.spec.dt) };
        let mut s = self.initial(u, v, Some(forcing), start);
        for i in 1..=steps {
            let k = if reverse { steps - i } else { i };
            self.step(&mut s, h, Some(forcing), k)?;
        }
        Ok(s)
    }

    /// Discrete energy of interior data (boundary values zero).
    pub fn interior_energy(&self, u: &[f64], v: &[f64]) -> f64 {
        0.5 * (self.system.mass_dot(v, v) + self.system.stiffness_dot(u, u))
    }

    /// One step of the free system. Boundary displacement must vanish.
    pub fn step_adjoint(&self, state: &ElasticState) -> Result<ElasticState> {
        if state.displacement.boundary_max_abs() != 0.0 {
            return Err(Error::InvalidParameter(
                "free-system state must vanish at boundary nodes".into(),
            ));
        }
        let sys = &self.system;
        let mut s = self.initial(sys.to_interior(&state.displacement), sys.to_interior(&state.velocity), None, 0);
        self.step(&mut s, self.spec.dt, None, 1)?;
        Ok(ElasticState {
            displacement: sys.to_field(&s.u, None),
            velocity: sys.to_field(&s.v, None),
            time: state.time + self.spec.dt,
        })
    }

    /// One step of the forced system. The sample index is read from
    /// `state.time`; `reverse` steps backward in time.
    pub fn step_controlled(&self, state: &ElasticState, forcing: &BoundaryForcing, reverse: bool) -> Result<ElasticState> {
        let grid = self.system.grid().clone();
        forcing.validate(&grid, &self.spec)?;
        let k_f = state.time / self.spec.dt;
        let k = k_f.round();
        if (k_f - k).abs() > 1e-6 || k < 0.0 {
            return Err(Error::ForcingMismatch(format!(
                "state time {} is not on the forcing grid",
                state.time
            )));
        }
        let k = k as usize;
        let k_next = if reverse {
            k.checked_sub(1)
                .ok_or_else(|| Error::ForcingMismatch("cannot step before t = 0".into()))?
        } else {
            k + 1
        };
        if k_next > self.spec.steps() || k > self.spec.steps() {
            return Err(Error::ForcingMismatch("step leaves the forcing time grid".into()));
        }
        let interior = interior_forcing(&grid, forcing);
        let sys = &self.system;
        let mut s = self.initial(
            sys.to_interior(&state.displacement),
            sys.to_interior(&state.velocity),
            Some(&interior),
            k,
        );
        let h = if reverse { -self.spec.dt } else { self.spec.dt };
        self.step(&mut s, h, Some(&interior), k_next)?;
        let b = &interior.boundary[k_next];
        let db = vec![0.0; b.len()];
        let vel_boundary: Vec<f64> = velocity_boundary(&interior, k, k_next, h).unwrap_or(db);
        Ok(ElasticState {
            displacement: sys.to_field(&s.u, Some(b)),
            velocity: sys.to_field(&s.v, Some(&vel_boundary)),
            time: self.spec.time(k_next),
        })
    }
}

/// Boundary velocity from the difference quotient of the Dirichlet samples.
fn velocity_boundary(f: &InteriorForcing, k: usize, k_next: usize, h: f64) -> Option<Vec<f64>> {
    let a = f.boundary.get(k)?;
    let b = f.boundary.get(k_next)?;
    Some(a.iter().zip(b).map(|(x, y)| (y - x) / h).collect())
}

/// Converts public forcing samples into interior form, masking Dirichlet
/// data to the observation boundary.
pub fn interior_forcing(grid: &TensorGrid, forcing: &BoundaryForcing) -> InteriorForcing {
    let n = grid.len();
    let boundary = forcing
        .dirichlet
        .iter()
        .map(|f| {
            let mut b = f.data.clone();
            for c in 0..grid.dim() {
                for node in 0..n {
                    if grid.is_interior(node) || !grid.on_gamma(node) {
                        b[c * n + node] = 0.0;
                    }
                }
            }
            b
        })
        .collect();
    let source = forcing.source.iter().map(|f| gather(grid, &f.data)).collect();
    InteriorForcing { boundary, source }
}

/// Writes `t,energy` rows for a stored trajectory.
pub fn write_energy_trace<W: Write>(out: W, integrator: &Integrator, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "energy"])?;
    for k in 0..traj.u.len() {
        let e = integrator.interior_energy(&traj.u[k], &traj.v[k]);
        w.write_record([format!("{:e}", traj.spec.time(k)), format!("{e:e}")])?;
    }
    w.flush()?;
    Ok(())
}
