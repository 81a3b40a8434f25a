//! LGL nodes, weights and differentiation for one degree.
//!
//! Usage: `cargo run --example lgl_rule -- [N]`

use elasto_collocation::LglRule;

fn main() -> elasto_collocation::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let rule = LglRule::new(n)?;
    println!("{:>3}  {:>22}  {:>22}", "k", "node", "weight");
    for (k, (x, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        println!("{k:>3}  {x:>22.16}  {w:>22.16}");
    }

    // exact up to degree 2N - 1
    for p in [2 * n - 2, 2 * n - 1, 2 * n] {
        let q: f64 = rule.nodes().iter().zip(rule.weights()).map(|(x, w)| w * x.powi(p as i32)).sum();
        let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
        println!("int x^{p:<3} quadrature {q:+.16e}  exact {exact:+.16e}");
    }

    // differentiation matrix on sin(x)
    let x = rule.nodes();
    let m = rule.len();
    let err = (0..m)
        .map(|i| {
            let d: f64 = (0..m).map(|j| rule.d1(i, j) * x[j].sin()).sum();
            (d - x[i].cos()).abs()
        })
        .fold(0.0, f64::max);
    println!("max |D sin - cos| at the nodes = {err:.3e}");
    Ok(())
}
