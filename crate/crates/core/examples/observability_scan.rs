//! Boundary observation ratio against the observation time, for random
//! data and for the worst case found by Lanczos.
//!
//! Usage: `cargo run --release --example observability_scan -- [N]`

use std::sync::Arc;

use elasto_collocation::observability::{observe_trajectory, worst_case_ratio};
use elasto_collocation::{ElasticState, ElasticSystem, Integrator, Material, Scheme, TensorGrid, TimeGridSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> elasto_collocation::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let grid = Arc::new(TensorGrid::new(2, n)?);
    let sys = Arc::new(ElasticSystem::new(grid.clone(), Material::new(0.5, 4.0)?));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<ElasticState> = (0..5).map(|_| ElasticState::random(grid.clone(), &mut rng)).collect();

    println!("N = {n}");
    println!("{:>5}  {:>12}  {:>12}  {:>12}  {:>12}", "T", "random min", "random max", "worst case", "threshold");
    for t in [1.0, 3.0, 7.0, 13.0] {
        let it = Integrator::new(sys.clone(), TimeGridSpec::new(t, 0.01, Scheme::Newmark)?)?;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        let mut threshold = 0.0;
        for s in &data {
            let r = observe_trajectory(s, &it)?;
            lo = lo.min(r.ratio);
            hi = hi.max(r.ratio);
            threshold = r.threshold;
        }
        let wc = worst_case_ratio(&it, 30, 1.0, &mut rng)?;
        println!("{t:>5}  {lo:>12.4e}  {hi:>12.4e}  {:>12.4e}  {threshold:>12.4e}", wc.ratio);
    }
    Ok(())
}
