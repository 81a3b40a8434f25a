//! Discrete versus exact L2 norms of random grid functions.
//!
//! Usage: `cargo run --example norm_equivalence -- [d] [samples]`

use std::sync::Arc;

use elasto_collocation::grid::{norm_equivalence_report, norm_equivalence_upper};
use elasto_collocation::TensorGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> elasto_collocation::Result<()> {
    let mut args = std::env::args().skip(1);
    let d: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let samples: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!("d = {d}, {samples} random grid functions per degree");
    println!("{:>3}  {:>10}  {:>10}  {:>10}", "N", "min", "max", "bound");
    for n in [2, 4, 8, 16, 32] {
        let grid = Arc::new(TensorGrid::new(d, n)?);
        let (lo, hi) = norm_equivalence_report(&grid, samples, &mut rng)?;
        println!("{n:>3}  {lo:>10.6}  {hi:>10.6}  {:>10.6}", norm_equivalence_upper(d, n));
    }
    Ok(())
}
