//! Terms of the multiplier identity along free trajectories.
//!
//! Usage: `cargo run --release --example multiplier_identity -- [N] [T]`

use std::sync::Arc;

use elasto_collocation::observability::multiplier_diagnostics;
use elasto_collocation::{ElasticState, ElasticSystem, Integrator, Material, Scheme, TensorGrid, TimeGridSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> elasto_collocation::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let t: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let grid = Arc::new(TensorGrid::new(2, n)?);
    let sys = Arc::new(ElasticSystem::new(grid.clone(), Material::new(0.5, 4.0)?));
    let it = Integrator::new(sys.clone(), TimeGridSpec::new(t, 0.01, Scheme::Newmark)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    println!(
        "{:>3}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}  {:>10}  {:>10}",
        "run", "X", "Y", "interior", "flux", "defect", "slack 1", "slack 2"
    );
    for k in 0..5 {
        let s = ElasticState::random(grid.clone(), &mut rng);
        let traj = it.trajectory(&sys.to_interior(&s.displacement), &sys.to_interior(&s.velocity))?;
        let m = multiplier_diagnostics(&traj, &it);
        println!(
            "{k:>3}  {:>11.4e}  {:>11.4e}  {:>11.4e}  {:>11.4e}  {:>11.3e}  {:>10.3e}  {:>10.3e}",
            m.x, m.y, m.interior_energy_integral, m.boundary_flux_integral, m.identity_defect, m.lions1_slack, m.lions2_slack
        );
    }
    Ok(())
}
