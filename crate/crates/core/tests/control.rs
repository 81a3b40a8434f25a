use std::sync::Arc;

use elasto_collocation::control::{solve_control, ControlSettings, HumOperator};
use elasto_collocation::experiments::standard_displacement;
use elasto_collocation::{ElasticSystem, Material, Scheme, TensorGrid, TimeGridSpec, VectorField};

fn operator(n: usize, t: f64) -> HumOperator {
    let grid = Arc::new(TensorGrid::new(2, n).unwrap());
    let sys = Arc::new(ElasticSystem::new(grid, Material::new(0.5, 4.0).unwrap()));
    HumOperator::new(sys, TimeGridSpec::new(t, 0.01, Scheme::Newmark).unwrap(), 1.0).unwrap()
}

#[test]
fn zero_data_needs_no_control() {
    let op = operator(6, 1.0);
    let grid = op.system().grid().clone();
    let zero = VectorField::zeros(grid);
    let r = solve_control(&op, &zero, &zero, &ControlSettings::default()).unwrap();
    assert_eq!(r.cg_iterations, 0);
    assert_eq!(r.f_norm, 0.0);
    assert_eq!(r.g_norm, 0.0);
    assert!(r.converged);
}

#[test]
fn control_is_linear_in_data_and_mirror_symmetric() {
    let op = operator(6, 2.0);
    let grid = op.system().grid().clone();
    let u0 = standard_displacement(&grid);
    let u1 = VectorField::zeros(grid.clone());
    let settings = ControlSettings {
        tol: 1e-10,
        max_iter: 400,
        ..ControlSettings::default()
    };
    let r = solve_control(&op, &u0, &u1, &settings).unwrap();
    assert!(r.converged);
    assert!(r.final_state_norm_rel < 1e-9);
    let r2 = solve_control(&op, &u0.scaled(2.0), &u1, &settings).unwrap();
    assert!((r2.f_norm - 2.0 * r.f_norm).abs() < 1e-8 * r.f_norm);
    assert!((r2.g_norm - 2.0 * r.g_norm).abs() < 1e-8 * r.g_norm);

    // data symmetric under (x1, x2) -> (x2, x1) with swapped components:
    // face 1 (x1 = 1) mirrors face 2 (x2 = 1)
    let n1 = grid.degree() + 1;
    let f1 = grid.face(1).unwrap();
    let f2 = grid.face(2).unwrap();
    let peak = r.f_trace.iter().cloned().fold(0.0, f64::max);
    for (k, traces) in r.f.iter().enumerate() {
        let a = traces.iter().find(|t| t.face == 1).unwrap();
        let b = traces.iter().find(|t| t.face == 2).unwrap();
        for (p, &node) in f1.nodes.iter().enumerate() {
            let idx = grid.multi_index(node);
            let mirrored = grid.flat_index(&[idx[1], idx[0]]);
            let q = f2.nodes.iter().position(|&m| m == mirrored).unwrap();
            for c in 0..2 {
                let diff = (a.component(c)[p] - b.component(1 - c)[q]).abs();
                assert!(diff < 1e-7 * peak.max(1e-30), "t index {k}, node {p}, comp {c}");
            }
        }
    }
    assert_eq!(n1, 7);
}
