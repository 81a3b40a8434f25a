//! Runs the experiment drivers from an inline configuration, the same
//! path the `elasto` binary takes.
//!
//! Usage: `cargo run --release --example config_driver -- [output_dir]`

use elasto_collocation::experiments::{cmd_control, cmd_energy, ExperimentConfig};

const CONFIG: &str = r#"
d = 2
N = [6, 8]
T = 2.0
dt = 0.01
initial = "standard"
max_iter = 120
"#;

fn main() -> elasto_collocation::Result<()> {
    let mut cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    cfg.output_dir = std::env::args().nth(1).unwrap_or_else(|| "out/example".into()).into();
    let energy_ok = cmd_energy(&cfg)?;
    let control_ok = cmd_control(&cfg)?;
    println!("energy checks {}, control checks {}", pass(energy_ok), pass(control_ok));
    println!("csv files written to {}", cfg.output_dir.display());
    Ok(())
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "passed"
    } else {
        "failed"
    }
}
