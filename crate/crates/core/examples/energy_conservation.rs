//! Energy behaviour of the two time integrators on random data.
//!
//! Usage: `cargo run --release --example energy_conservation -- [N] [T]`

use std::sync::Arc;

use elasto_collocation::{ElasticState, ElasticSystem, Integrator, Material, Scheme, TensorGrid, TimeGridSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> elasto_collocation::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(12);
    let t: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3.0);

    let grid = Arc::new(TensorGrid::new(2, n)?);
    let sys = Arc::new(ElasticSystem::new(grid.clone(), Material::new(0.5, 4.0)?));
    let s = ElasticState::random(grid, &mut ChaCha8Rng::seed_from_u64(1));
    let u0 = sys.to_interior(&s.displacement);
    let v0 = sys.to_interior(&s.velocity);
    println!("N = {n}, spectral radius of the operator = {:.4e}", sys.spectral_radius());

    for (scheme, dt) in [(Scheme::Newmark, 0.01), (Scheme::Rk4, 1e-3), (Scheme::Rk4, 0.01)] {
        let it = Integrator::new(sys.clone(), TimeGridSpec::new(t, dt, scheme)?)?;
        print!("{scheme:?} dt = {dt}: ");
        if scheme == Scheme::Rk4 {
            print!("(stability ratio {:.2}) ", it.rk4_stability_ratio());
        }
        match it.trajectory(&u0, &v0) {
            Ok(traj) => {
                let e0 = it.interior_energy(&traj.u[0], &traj.v[0]);
                let drift = traj
                    .u
                    .iter()
                    .zip(&traj.v)
                    .map(|(u, v)| ((it.interior_energy(u, v) - e0) / e0).abs())
                    .fold(0.0, f64::max);
                println!("E(0) = {e0:.6e}, max relative drift {drift:.3e}");
            }
            Err(e) => println!("{e}"),
        }
    }
    Ok(())
}
