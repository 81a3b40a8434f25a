use std::sync::Arc;

use elasto_collocation::fields::lame_apply;
use elasto_collocation::{ElasticState, ElasticSystem, Integrator, Material, Scheme, TensorGrid, TimeGridSpec};
use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn system(n: usize) -> Arc<ElasticSystem> {
    let grid = Arc::new(TensorGrid::new(2, n).unwrap());
    Arc::new(ElasticSystem::new(grid, Material::new(0.5, 4.0).unwrap()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn newmark_follows_discrete_eigenmode() {
    let sys = system(6);
    let grid = sys.grid().clone();
    let eig = SymmetricEigen::new(sys.stiffness_sym().clone());
    let k = (0..sys.dofs())
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .unwrap();
    let lambda = eig.eigenvalues[k];
    // undo the symmetric scaling: x = M^{-1/2} y
    let x: Vec<f64> = eig
        .eigenvectors
        .column(k)
        .iter()
        .zip(sys.mass())
        .map(|(y, m)| y / m.sqrt())
        .collect();

    // independent check that x is a collocation eigenfunction
    let field = sys.to_field(&x, None);
    let lx = sys.to_interior(&lame_apply(sys.material(), &field));
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let resid = lx.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a + lambda * b).abs()));
    assert!(resid < 1e-9 * lambda * scale, "eigen residual {resid}");

    // trapezoidal rule on the oscillator: exact amplitude, phase 2 atan(w dt / 2) per step
    let dt = 0.01;
    let it = Integrator::new(sys.clone(), TimeGridSpec::new(1.0, dt, Scheme::Newmark).unwrap()).unwrap();
    let traj = it.trajectory(&x, &vec![0.0; x.len()]).unwrap();
    let theta = 2.0 * (lambda.sqrt() * dt / 2.0).atan();
    for (j, u) in traj.u.iter().enumerate() {
        let c = (j as f64 * theta).cos();
        let expect: Vec<f64> = x.iter().map(|v| c * v).collect();
        assert!(max_diff(u, &expect) < 1e-10 * scale, "step {j}");
    }
    assert_eq!(grid.degree(), 6);
}

#[test]
fn newmark_is_time_reversible() {
    let sys = system(8);
    let it = Integrator::new(sys.clone(), TimeGridSpec::new(0.5, 0.01, Scheme::Newmark).unwrap()).unwrap();
    let s = ElasticState::random(sys.grid().clone(), &mut ChaCha8Rng::seed_from_u64(4));
    let u0 = sys.to_interior(&s.displacement);
    let v0 = sys.to_interior(&s.velocity);
    let mut st = it.initial(u0.clone(), v0.clone(), None, 0);
    for k in 1..=50 {
        it.step(&mut st, 0.01, None, k).unwrap();
    }
    for k in (0..50).rev() {
        it.step(&mut st, -0.01, None, k).unwrap();
    }
    assert!(max_diff(&st.u, &u0) < 1e-9);
    assert!(max_diff(&st.v, &v0) < 1e-8);
}

#[test]
fn evolution_is_linear() {
    let sys = system(6);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = ElasticState::random(sys.grid().clone(), &mut rng);
    let b = ElasticState::random(sys.grid().clone(), &mut rng);
    for scheme in [Scheme::Newmark, Scheme::Rk4] {
        let dt = if scheme == Scheme::Rk4 { 1e-3 } else { 0.01 };
        let it = Integrator::new(sys.clone(), TimeGridSpec::new(0.3, dt, scheme).unwrap()).unwrap();
        let (ua, va) = (sys.to_interior(&a.displacement), sys.to_interior(&a.velocity));
        let (ub, vb) = (sys.to_interior(&b.displacement), sys.to_interior(&b.velocity));
        let comb = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| 2.0 * p - 3.0 * q).collect() };
        let ta = it.trajectory(&ua, &va).unwrap();
        let tb = it.trajectory(&ub, &vb).unwrap();
        let tc = it.trajectory(&comb(&ua, &ub), &comb(&va, &vb)).unwrap();
        let last = ta.u.len() - 1;
        let expect = comb(&ta.u[last], &tb.u[last]);
        let scale = expect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_diff(&tc.u[last], &expect) < 1e-11 * scale, "{scheme:?}");
    }
}

#[test]
fn explicit_scheme_reports_instability() {
    let sys = system(12);
    let it = Integrator::new(sys.clone(), TimeGridSpec::new(1.0, 0.01, Scheme::Rk4).unwrap()).unwrap();
    // past the stability limit for this degree only when the ratio exceeds 1
    let s = ElasticState::random(sys.grid().clone(), &mut ChaCha8Rng::seed_from_u64(1));
    let r = it.trajectory(&sys.to_interior(&s.displacement), &sys.to_interior(&s.velocity));
    if it.rk4_stability_ratio() > 1.0 {
        assert!(r.is_err());
    } else {
        assert!(r.is_ok());
    }
}

#[test]
fn traction_alone_loses_uniformity_below_threshold() {
    use elasto_collocation::observability::worst_case_modal;
    let ratio = |n: usize, w: f64| {
        let it = Integrator::new(system(n), TimeGridSpec::new(3.0, 0.01, Scheme::Newmark).unwrap()).unwrap();
        worst_case_modal(&it, w).unwrap().ratio
    };
    let (t6, t10) = (ratio(6, 0.0), ratio(10, 0.0));
    let (f6, f10) = (ratio(6, 1.0), ratio(10, 1.0));
    assert!(t10 < 0.5 * t6, "traction only: {t6} -> {t10}");
    assert!(f10 > 0.5 * f6, "with second term: {f6} -> {f10}");
}
