//! Null control of the standard 2-D experiment at one polynomial degree.
//!
//! Usage: `cargo run --release --example hum_control -- [N] [weight_g]`

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use elasto_collocation::control::{solve_control, ControlSettings, HumOperator};
use elasto_collocation::observability::interior_field;
use elasto_collocation::{ElasticSystem, Material, Scheme, TensorGrid, TimeGridSpec, VectorField};

fn main() -> elasto_collocation::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let weight_g: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let start = Instant::now();
    let grid = Arc::new(TensorGrid::new(2, n)?);
    let material = Material::new(0.5, 4.0)?;
    let system = Arc::new(ElasticSystem::new(grid.clone(), material));
    let spec = TimeGridSpec::new(3.0, 0.01, Scheme::Newmark)?;
    let op = HumOperator::new(system, spec, weight_g)?;
    println!("setup: {:.1?}", start.elapsed());

    let u0 = interior_field(grid.clone(), |x| {
        let s = 0.2 * (PI * (x[0] + 1.0) / 2.0).sin() * (PI * (x[1] + 1.0) / 2.0).sin();
        vec![s, s]
    });
    let u1 = VectorField::zeros(grid);
    let r = solve_control(&op, &u0, &u1, &ControlSettings::default())?;
    println!("N = {n}, weight_g = {weight_g}");
    println!("  |f|            = {:.4e}", r.f_norm);
    println!("  |g|            = {:.4e}", r.g_norm);
    println!("  final / data   = {:.3e} (L2 x H^-1), {:.3e} (L2 x L2)", r.final_state_norm_rel, r.final_state_l2_rel);
    println!("  iterations     = {} (residual {:.2e}, converged {})", r.cg_iterations, r.cg_residual, r.converged);
    if let Some(d) = r.symmetry_defect {
        println!("  symmetry probe = {d:.2e}");
    }
    let peak = r.f_trace.iter().cloned().fold(0.0, f64::max);
    println!("  max_t |f(t)|   = {peak:.4e}");
    println!("elapsed: {:.1?}", start.elapsed());
    Ok(())
}
