//! Boundary observation of free trajectories: the traction/second-normal
//! observation functional, worst-case observation ratios, and multiplier
//! diagnostics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{discrete_energy, scatter, ElasticState, Integrator, Scheme, Trajectory};
use crate::error::{Error, Result};
use crate::fields::{
    face_l2_norm_sq, lame_apply_raw, second_normal_from, traction_from, FirstDerivatives,
    Material, NormalSecondDerivatives, VectorField,
};
use crate::grid::{weighted_dot, TensorGrid};

/// Minimal observation time guaranteed by the multiplier argument,
/// `4 sqrt(d) (2 + 1/N)^d / sqrt(mu)`.
pub fn observability_threshold(dim: usize, degree: usize, mu: f64) -> f64 {
    4.0 * (dim as f64).sqrt() * (2.0 + 1.0 / degree as f64).powi(dim as i32) / mu.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityReport {
    pub degree: usize,
    pub t_final: f64,
    /// `2 E^N(0)`.
    pub lhs_norm_sq: f64,
    /// `int_0^T int_Gamma |traction|^2`.
    pub term_traction: f64,
    /// `int_0^T int_{dOmega} |second normal term|^2`.
    pub term_second: f64,
    /// `(term_traction + term_second) / lhs_norm_sq`; NaN for zero data.
    pub ratio: f64,
    pub threshold: f64,
}

/// Observation terms of one displacement snapshot: `(traction on Gamma,
/// second normal term on every face)`.
fn snapshot_terms(grid: &TensorGrid, m: &Material, u: &[f64]) -> Result<(f64, f64)> {
    let der = FirstDerivatives::new(grid, u);
    let sec = NormalSecondDerivatives::new(grid, u, &der);
    let mut tr = 0.0;
    for &id in grid.gamma_faces() {
        tr += face_l2_norm_sq(grid, &traction_from(grid, m, &der, grid.face(id)?))?;
    }
    let mut second = 0.0;
    for f in grid.faces() {
        second += face_l2_norm_sq(grid, &second_normal_from(grid, m, &sec, f))?;
    }
    Ok((tr, second))
}

/// Integrates the free system from `initial` and accumulates both
/// boundary terms with the trapezoid rule in time.
pub fn observe_trajectory(initial: &ElasticState, integrator: &Integrator) -> Result<ObservabilityReport> {
    if initial.displacement.boundary_max_abs() != 0.0 || initial.velocity.boundary_max_abs() != 0.0 {
        return Err(Error::InvalidParameter(
            "initial data must vanish on the boundary".into(),
        ));
    }
    let sys = integrator.system();
    let u0 = sys.to_interior(&initial.displacement);
    let v0 = sys.to_interior(&initial.velocity);
    let traj = integrator.trajectory(&u0, &v0)?;
    observe_stored(&traj, integrator, discrete_energy(initial, sys.material()))
}

pub(crate) fn observe_stored(traj: &Trajectory, integrator: &Integrator, energy0: f64) -> Result<ObservabilityReport> {
    let sys = integrator.system();
    let grid = sys.grid();
    let len = grid.dim() * grid.len();
    let (mut tr, mut sec) = (0.0, 0.0);
    for (k, u) in traj.u.iter().enumerate() {
        let full = scatter(grid, u, None, len);
        let (a, b) = snapshot_terms(grid, sys.material(), &full)?;
        let w = traj.spec.trapezoid_weight(k);
        tr += w * a;
        sec += w * b;
    }
    let lhs = 2.0 * energy0;
    Ok(ObservabilityReport {
        degree: grid.degree(),
        t_final: traj.spec.t_final,
        lhs_norm_sq: lhs,
        term_traction: tr,
        term_second: sec,
        ratio: if lhs > 0.0 { (tr + sec) / lhs } else { f64::NAN },
        threshold: observability_threshold(grid.dim(), grid.degree(), sys.material().mu),
    })
}

/// Dense matrix `F` with `|F u|^2 = |traction|^2_Gamma + w |second|^2_{dOmega}`
/// for interior displacements `u`, using the fine face rule.
fn observation_features(integrator: &Integrator, second_weight: f64) -> Result<DMatrix<f64>> {
    let sys = integrator.system();
    let grid = sys.grid();
    let m = sys.material();
    let d = grid.dim();
    let len = d * grid.len();
    let fw: Vec<f64> = grid.fine_weights(d - 1).iter().map(|w| w.sqrt()).collect();
    let sw = second_weight.sqrt();
    let n = sys.dofs();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        let full = scatter(grid, &unit, None, len);
        unit[j] = 0.0;
        let der = FirstDerivatives::new(grid, &full);
        let sec = NormalSecondDerivatives::new(grid, &full, &der);
        let mut col = Vec::new();
        let mut push = |t: crate::FaceTrace, s: f64| {
            for c in 0..d {
                let fine = grid.face_to_fine(t.component(c));
                col.extend(fine.iter().zip(&fw).map(|(v, w)| s * v * w));
            }
        };
        for &id in grid.gamma_faces() {
            push(traction_from(grid, m, &der, grid.face(id)?), 1.0);
        }
        if second_weight > 0.0 {
            for f in grid.faces() {
                push(second_normal_from(grid, m, &sec, f), sw);
            }
        }
        cols.push(col);
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, n, |i, j| cols[j][i]))
}

/// Result of the extremal search over initial data.
#[derive(Debug, Clone)]
pub struct WorstCase {
    pub ratio: f64,
    pub data: ElasticState,
    /// Smallest Ritz value after each Lanczos step (non-increasing).
    pub history: Vec<f64>,
}

/// Smallest value of the observation ratio over all initial data,
/// estimated by Lanczos with full reorthogonalization on the observation
/// quadratic form relative to `2 E^N(0)`. `second_weight` scales the
/// second-normal term (0 drops it). Requires the Newmark scheme, whose
/// step map is symplectic; the transposed step is then
/// `J R^{-1} J^{-1}` with `J = [[0, M], [-M, 0]]`.
pub fn worst_case_ratio(
    integrator: &Integrator,
    iterations: usize,
    second_weight: f64,
    rng: &mut impl Rng,
) -> Result<WorstCase> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1".into()));
    }
    if integrator.spec().scheme != Scheme::Newmark {
        return Err(Error::InvalidParameter(
            "worst-case search needs the Newmark scheme".into(),
        ));
    }
    let sys = integrator.system().clone();
    let n = sys.dofs();
    let mass = sys.mass().to_vec();
    let features = observation_features(integrator, second_weight)?;
    let q = |u: &[f64]| -> Vec<f64> {
        let fu = &features * DVector::from_column_slice(u);
        (features.transpose() * fu).as_slice().to_vec()
    };

    let apply = |z: &[f64]| -> Result<Vec<f64>> {
        let traj = integrator.trajectory(&z[..n], &z[n..])?;
        let spec = traj.spec;
        let steps = spec.steps();
        let mut su = q(&traj.u[steps]);
        su.iter_mut().for_each(|x| *x *= spec.trapezoid_weight(steps));
        let mut sv = vec![0.0; n];
        for k in (0..steps).rev() {
            // R^T s = J R^{-1} J^{-1} s
            let ju: Vec<f64> = sv.iter().zip(&mass).map(|(q, m)| -q / m).collect();
            let jv: Vec<f64> = su.iter().zip(&mass).map(|(p, m)| p / m).collect();
            let mut st = integrator.initial(ju, jv, None, 0);
            integrator.step(&mut st, -spec.dt, None, 0)?;
            su = st.v.iter().zip(&mass).map(|(v, m)| m * v).collect();
            sv = st.u.iter().zip(&mass).map(|(u, m)| -m * u).collect();
            let qk = q(&traj.u[k]);
            let w = spec.trapezoid_weight(k);
            su.iter_mut().zip(&qk).for_each(|(s, x)| *s += w * x);
        }
        // E^{-1} = diag(K^{-1}, M^{-1}), K^{-1} p = -L^{-1} M^{-1} p
        let scaled: Vec<f64> = su.iter().zip(&mass).map(|(p, m)| p / m).collect();
        let mut out: Vec<f64> = sys.solve_operator(&scaled)?.into_iter().map(|x| -x).collect();
        out.extend(sv.iter().zip(&mass).map(|(q, m)| q / m));
        Ok(out)
    };
    let inner = |a: &[f64], b: &[f64]| sys.stiffness_dot(&a[..n], &b[..n]) + sys.mass_dot(&a[n..], &b[n..]);

    let start: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    let (ratio, vec, history) = lanczos_min(2 * n, iterations, start, apply, inner)?;
    let data = ElasticState::new(sys.to_field(&vec[..n], None), sys.to_field(&vec[n..], None))?;
    Ok(WorstCase {
        ratio,
        data,
        history,
    })
}

/// Exact minimum of the observation ratio for the Newmark scheme.
///
/// In the `M`-orthonormal eigenbasis `x_j` of the operator, with
/// `omega_j^2` its eigenvalues, each mode of the scheme rotates the pair
/// `(omega_j a_j, b_j)` by `theta_j = 2 atan(omega_j dt / 2)` per step and
/// `2 E = |p|^2 + |q|^2` in those coordinates. The time-sampled Gramian
/// then has closed-form entries and its smallest eigenvalue is the ratio.
/// Cost is one dense eigensolve of size `2 * dofs`.
pub fn worst_case_modal(integrator: &Integrator, second_weight: f64) -> Result<WorstCase> {
    let spec = *integrator.spec();
    if spec.scheme != Scheme::Newmark {
        return Err(Error::InvalidParameter(
            "modal worst case needs the Newmark scheme".into(),
        ));
    }
    let sys = integrator.system();
    let n = sys.dofs();
    let eig = SymmetricEigen::new(sys.stiffness_sym().clone());
    let omega: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    if omega.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::LinearSolve("operator is not negative definite".into()));
    }
    let inv_sqrt_mass: Vec<f64> = sys.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
    let x = DMatrix::from_fn(n, n, |i, j| inv_sqrt_mass[i] * eig.eigenvectors[(i, j)]);
    let phi = observation_features(integrator, second_weight)? * &x;
    let mut p = phi.transpose() * &phi;
    for j in 0..n {
        for i in 0..n {
            p[(i, j)] /= omega[i] * omega[j];
        }
    }

    let steps = spec.steps();
    let dt = spec.dt;
    // trapezoid sums of cos(k a) and sin(k a) over k = 0..=steps
    let sums = |a: f64| -> (f64, f64) {
        let half = (0.5 * a).sin();
        let (c, s) = if half.abs() < 0.05 {
            (0..=steps).fold((0.0, 0.0), |(c, s), k| {
                let (sk, ck) = (k as f64 * a).sin_cos();
                (c + ck, s + sk)
            })
        } else {
            let r = ((steps + 1) as f64 * 0.5 * a).sin() / half;
            let (sm, cm) = (steps as f64 * 0.5 * a).sin_cos();
            (cm * r, sm * r)
        };
        let (se, ce) = (steps as f64 * a).sin_cos();
        (dt * (c - 0.5 * (1.0 + ce)), dt * (s - 0.5 * se))
    };
    let theta: Vec<f64> = omega.iter().map(|w| 2.0 * (0.5 * w * dt).atan()).collect();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for l in 0..n {
            let (cd, sd) = sums(theta[j] - theta[l]);
            let (cs, ss) = sums(theta[j] + theta[l]);
            let w = p[(j, l)];
            g[(j, l)] = 0.5 * w * (cd + cs);
            g[(n + j, n + l)] = 0.5 * w * (cd - cs);
            // p_j against q_l: sum cos(k theta_j) sin(k theta_l)
            g[(j, n + l)] = 0.5 * w * (ss - sd);
            g[(n + l, j)] = g[(j, n + l)];
        }
    }
    let eg = SymmetricEigen::new(g);
    let (imin, &ratio) = eg
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty Gramian");
    let z = eg.eigenvectors.column(imin);
    let a: Vec<f64> = (0..n).map(|j| z[j] / omega[j]).collect();
    let u0 = &x * DVector::from_vec(a);
    let v0 = &x * DVector::from_iterator(n, (0..n).map(|j| z[n + j]));
    let data = ElasticState::new(sys.to_field(u0.as_slice(), None), sys.to_field(v0.as_slice(), None))?;
    Ok(WorstCase {
        ratio,
        data,
        history: vec![ratio],
    })
}

/// Smallest eigenvalue of an operator self-adjoint in `inner`, with its
/// Ritz vector (normalized in `inner`) and the per-step Ritz history.
pub(crate) fn lanczos_min(
    dim: usize,
    iterations: usize,
    start: Vec<f64>,
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    inner: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let steps = iterations.min(dim);
    let norm0 = inner(&start, &start).sqrt();
    if !(norm0 > 0.0) {
        return Err(Error::InvalidParameter("Lanczos start vector is zero".into()));
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / norm0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, DVector::zeros(1));
    for j in 0..steps {
        let mut w = apply(&basis[j])?;
        let a = inner(&w, &basis[j]);
        alpha.push(a);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let t = DMatrix::from_fn(alpha.len(), alpha.len(), |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c || c + 1 == r {
                beta[r.min(c)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imin, &lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .expect("nonempty tridiagonal");
        history.push(lmin);
        best = (lmin, eig.eigenvectors.column(imin).into_owned());
        let b = inner(&w, &w).sqrt();
        if j + 1 == steps || !(b > 1e-12 * a.abs().max(f64::MIN_POSITIVE)) {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let (lmin, s) = best;
    let mut x = vec![0.0; dim];
    for (coef, b) in s.iter().zip(&basis) {
        x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += coef * bi);
    }
    Ok((lmin, x, history))
}

/// Quantities of the multiplier identity with `m(x) = x + (1, ..., 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultiplierDiagnostics {
    /// `int phi_t . (m . grad) phi`, difference between `t = T` and `t = 0`.
    pub x: f64,
    /// `int phi_t . phi`, difference between `t = T` and `t = 0`.
    pub y: f64,
    /// `1/2 int_0^T int (|phi_t|^2 + mu |grad phi|^2 + (lambda+mu) |div phi|^2)`.
    pub interior_energy_integral: f64,
    /// `int_0^T int_Gamma (mu |d_nu phi|^2 + (lambda+mu) |div phi|^2)`.
    pub boundary_flux_integral: f64,
    /// `|int_0^T int rho . (m . grad) phi|`, `rho` the boundary residual
    /// of the collocation equations.
    pub source_coupling_integral: f64,
    /// `|int_0^T int rho . phi|`.
    pub zero_order_coupling: f64,
    pub energy0: f64,
    /// `interior - (flux - (X + (d-1)/2 Y) + coupling terms)` with signs
    /// kept; vanishes up to time-discretization error.
    pub identity_defect: f64,
    /// Right side minus left side of the first multiplier inequality.
    pub lions1_slack: f64,
    /// `(4 sqrt(d) / sqrt(mu)) E^N(0) - |X + (d-1)/2 Y|`.
    pub lions2_slack: f64,
}

/// Evaluates the multiplier quantities on a stored trajectory, with exact
/// spatial quadrature (degree `N+1` rule) and trapezoid rule in time.
pub fn multiplier_diagnostics(traj: &Trajectory, integrator: &Integrator) -> MultiplierDiagnostics {
    let sys = integrator.system();
    let grid = sys.grid();
    let m = *sys.material();
    let d = grid.dim();
    let n = grid.len();
    let len = d * n;
    let fw = grid.fine_weights(d);
    let mult: Vec<Vec<f64>> = grid
        .fine_coords(d)
        .iter()
        .map(|x| x.iter().map(|xi| xi + 1.0).collect())
        .collect();
    let ffw = grid.fine_weights(d - 1);
    let half = 0.5 * (d as f64 - 1.0);

    struct Snapshot {
        velocity_dot_mgrad: f64,
        velocity_dot_phi: f64,
        energy_density: f64,
        flux: f64,
        rho_mgrad: f64,
        rho_phi: f64,
    }
    let snapshot = |u: &[f64], v: &[f64]| -> Snapshot {
        let phi = scatter(grid, u, None, len);
        let vel = scatter(grid, v, None, len);
        let der = FirstDerivatives::new(grid, &phi);
        let lame = lame_apply_raw(grid, &m, &phi);
        let fine = |x: &[f64]| grid.to_fine(x);
        let mut vdm = 0.0;
        let mut vdp = 0.0;
        let mut kinetic = 0.0;
        let mut grad_sq = 0.0;
        let mut rho_mgrad = 0.0;
        let mut rho_phi = 0.0;
        for c in 0..d {
            let pc = fine(&phi[c * n..(c + 1) * n]);
            let vc = fine(&vel[c * n..(c + 1) * n]);
            let mut rho = vec![0.0; n];
            for &b in grid.boundary_indices() {
                rho[b] = -lame[c * n + b];
            }
            let rc = fine(&rho);
            let mut mgrad = vec![0.0; pc.len()];
            for a in 0..d {
                let g = fine(&der.grad[c * d + a]);
                grad_sq += weighted_dot(&fw, &g, &g);
                mgrad.iter_mut()
                    .zip(&g)
                    .zip(&mult)
                    .for_each(|((s, gv), mx)| *s += mx[a] * gv);
            }
            vdm += weighted_dot(&fw, &vc, &mgrad);
            vdp += weighted_dot(&fw, &vc, &pc);
            kinetic += weighted_dot(&fw, &vc, &vc);
            rho_mgrad += weighted_dot(&fw, &rc, &mgrad);
            rho_phi += weighted_dot(&fw, &rc, &pc);
        }
        let div = fine(&der.div);
        let energy_density = 0.5 * (kinetic + m.mu * grad_sq + m.lm() * weighted_dot(&fw, &div, &div));
        let mut flux = 0.0;
        for &id in grid.gamma_faces() {
            let f = &grid.faces()[id - 1];
            let face_vals = |x: &[f64]| -> Vec<f64> {
                grid.face_to_fine(&f.nodes.iter().map(|&i| x[i]).collect::<Vec<_>>())
            };
            for c in 0..d {
                let dn = face_vals(&der.grad[c * d + f.axis]);
                flux += m.mu * weighted_dot(&ffw, &dn, &dn);
            }
            let dv = face_vals(&der.div);
            flux += m.lm() * weighted_dot(&ffw, &dv, &dv);
        }
        Snapshot {
            velocity_dot_mgrad: vdm,
            velocity_dot_phi: vdp,
            energy_density,
            flux,
            rho_mgrad,
            rho_phi,
        }
    };

    let steps = traj.u.len() - 1;
    let mut out = MultiplierDiagnostics::default();
    let (mut rho_mgrad, mut rho_phi) = (0.0, 0.0);
    for k in 0..=steps {
        let s = snapshot(&traj.u[k], &traj.v[k]);
        let w = traj.spec.trapezoid_weight(k);
        out.interior_energy_integral += w * s.energy_density;
        out.boundary_flux_integral += w * s.flux;
        rho_mgrad += w * s.rho_mgrad;
        rho_phi += w * s.rho_phi;
        if k == 0 {
            out.x -= s.velocity_dot_mgrad;
            out.y -= s.velocity_dot_phi;
        }
        if k == steps {
            out.x += s.velocity_dot_mgrad;
            out.y += s.velocity_dot_phi;
        }
    }
    out.source_coupling_integral = rho_mgrad.abs();
    out.zero_order_coupling = rho_phi.abs();
    out.energy0 = integrator.interior_energy(&traj.u[0], &traj.v[0]);
    let xy = out.x + half * out.y;
    out.identity_defect = out.interior_energy_integral
        - (out.boundary_flux_integral - xy + rho_mgrad + half * rho_phi);
    let sd = (d as f64).sqrt();
    out.lions1_slack = xy.abs()
        + sd * out.boundary_flux_integral
        + out.source_coupling_integral
        + half * out.zero_order_coupling
        - out.interior_energy_integral;
    out.lions2_slack = 4.0 * sd / m.mu.sqrt() * out.energy0 - xy.abs();
    out
}

/// Displacement/velocity fields of a stored trajectory at sample `k`.
pub fn trajectory_state(traj: &Trajectory, integrator: &Integrator, k: usize) -> ElasticState {
    let sys = integrator.system();
    ElasticState {
        displacement: sys.to_field(&traj.u[k], None),
        velocity: sys.to_field(&traj.v[k], None),
        time: traj.spec.time(k),
    }
}

/// `VectorField` convenience for callers building data from closures.
pub fn interior_field(grid: std::sync::Arc<TensorGrid>, f: impl Fn(&[f64]) -> Vec<f64>) -> VectorField {
    let mut v = VectorField::from_fn(grid.clone(), f);
    let n = grid.len();
    for c in 0..grid.dim() {
        for &b in grid.boundary_indices() {
            v.data[c * n + b] = 0.0;
        }
    }
    v
}
