//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Run with `cargo test --release --test acceptance`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use elasto_collocation::control::{ControlResult, HumOperator};
use elasto_collocation::experiments::{control_run, energy_run, write_control_outputs, ExperimentConfig, InitialData};
use elasto_collocation::grid::{discrete_inner_product, ScalarGridFn};
use elasto_collocation::observability::{multiplier_diagnostics, observe_trajectory, worst_case_modal, worst_case_ratio};
use elasto_collocation::{
    ElasticState, ElasticSystem, Integrator, LglRule, Material, Scheme, TensorGrid, TimeGridSpec,
};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("lgl_correctness", lgl_correctness),
        ("norm_equivalence", norm_equivalence),
        ("energy_conservation", energy_conservation),
        ("gramian_structure", gramian_structure),
        ("observability_uniformity", observability_uniformity),
        ("multiplier_diagnostics", multiplier_bound),
        ("table1_reproduction", table1),
        ("figure1_trace", figure1),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all = true;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = run();
        all &= ok;
        println!(
            "{} {name}: {detail} [{:.1?}]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn material() -> Material {
    Material::new(0.5, 4.0).unwrap()
}

fn lgl_correctness() -> Outcome {
    let mut worst_end: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    for n in 2..=64usize {
        let rule = LglRule::new(n).unwrap();
        let (x, w) = (rule.nodes(), rule.weights());
        let we = 2.0 / (n * (n + 1)) as f64;
        worst_end = worst_end.max((w[0] - we).abs()).max((w[n] - we).abs());
        for p in 0..2 * n {
            // exact: 2/(p+1) for even p, 0 for odd p (measured relative to |x^p|_{L1} = 2/(p+1))
            let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            let q: f64 = x.iter().zip(w).map(|(xi, wi)| wi * xi.powi(p as i32)).sum();
            worst_exact = worst_exact.max((q - exact).abs() / (2.0 / (p as f64 + 1.0)));
        }
    }
    (
        worst_end <= 1e-13 && worst_exact <= 1e-12,
        format!("N=2..64 endpoint error {worst_end:.2e} (tol 1e-13), monomial rel error {worst_exact:.2e} (tol 1e-12)"),
    )
}

/// Gauss-Legendre rule by Golub-Welsch.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(n, n, |r, c| {
        if r + 1 == c || c + 1 == r {
            let k = r.max(c) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let e = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (e.eigenvalues[i], 2.0 * e.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Lagrange basis on `nodes` evaluated at `t`, straight from the product formula.
fn lagrange(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (t - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

fn norm_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut lo = f64::INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut ok = true;
    for d in [1usize, 2] {
        for n in [4usize, 8, 16] {
            let grid = Arc::new(TensorGrid::new(d, n).unwrap());
            let nodes = grid.rule().nodes().to_vec();
            let (gx, gw) = gauss_legendre(n + 2);
            let basis: Vec<Vec<f64>> = gx.iter().map(|&t| lagrange(&nodes, t)).collect();
            let upper = (2.0 + 1.0 / n as f64).powi(d as i32);
            for _ in 0..100 {
                let p = ScalarGridFn::random(grid.clone(), &mut rng);
                let discrete = discrete_inner_product(&p, &p).unwrap();
                let exact = if d == 1 {
                    gx.iter()
                        .enumerate()
                        .map(|(q, _)| {
                            let v: f64 = basis[q].iter().zip(&p.values).map(|(l, c)| l * c).sum();
                            gw[q] * v * v
                        })
                        .sum::<f64>()
                } else {
                    let m = n + 1;
                    let mut s = 0.0;
                    for (qa, wa) in gw.iter().enumerate() {
                        for (qb, wb) in gw.iter().enumerate() {
                            let mut v = 0.0;
                            for i in 0..m {
                                for j in 0..m {
                                    let flat = grid.flat_index(&[i, j]);
                                    v += p.values[flat] * basis[qa][i] * basis[qb][j];
                                }
                            }
                            s += wa * wb * v * v;
                        }
                    }
                    s
                };
                let r = discrete / exact;
                lo = lo.min(r);
                worst_excess = worst_excess.max(r - upper);
                ok &= r >= 1.0 - 1e-10 && r <= upper + 1e-10;
            }
        }
    }
    (
        ok,
        format!("600 samples, min ratio {lo:.6} (>= 1 - 1e-10), max ratio minus (2+1/N)^d = {worst_excess:.4}"),
    )
}

fn energy_conservation() -> Outcome {
    let cfg = ExperimentConfig {
        n: elasto_collocation::experiments::Degrees::One(10),
        initial: InitialData::Random,
        seed: 5,
        ..ExperimentConfig::default()
    };
    let mut worst: f64 = 0.0;
    for s in 0..10 {
        match energy_run(&cfg, 10, s) {
            Ok(r) => worst = worst.max(r.max_relative_drift()),
            Err(e) => return (false, format!("run failed: {e}")),
        }
    }
    (worst <= 1e-8, format!("N=10, T=3, 10 random data: max relative drift {worst:.3e} (tol 1e-8)"))
}

fn state_from(sys: &ElasticSystem, z: &[f64]) -> ElasticState {
    let n = sys.dofs();
    ElasticState::new(sys.to_field(&z[..n], None), sys.to_field(&z[n..], None)).unwrap()
}

fn gramian_structure() -> Outcome {
    let grid = Arc::new(TensorGrid::new(2, 6).unwrap());
    let sys = Arc::new(ElasticSystem::new(grid.clone(), material()));
    let spec = TimeGridSpec::new(3.0, 0.01, Scheme::Newmark).unwrap();
    let it = Integrator::new(sys.clone(), spec).unwrap();
    let n = sys.dofs();
    let dim = 2 * n;

    // observation and energy forms assembled by polarization of the
    // quadratic functionals on basis vectors
    let quad = |z: &[f64]| {
        let r = observe_trajectory(&state_from(&sys, z), &it).unwrap();
        (r.term_traction + r.term_second, r.lhs_norm_sq)
    };
    let unit = |i: usize| {
        let mut z = vec![0.0; dim];
        z[i] = 1.0;
        z
    };
    let diag: Vec<(f64, f64)> = (0..dim).map(|i| quad(&unit(i))).collect();
    let mut g = DMatrix::zeros(dim, dim);
    let mut e = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        g[(i, i)] = diag[i].0;
        e[(i, i)] = diag[i].1;
        for j in i + 1..dim {
            let mut z = unit(i);
            z[j] = 1.0;
            let (qg, qe) = quad(&z);
            g[(i, j)] = (qg - diag[i].0 - diag[j].0) / 2.0;
            g[(j, i)] = g[(i, j)];
            e[(i, j)] = (qe - diag[i].1 - diag[j].1) / 2.0;
            e[(j, i)] = e[(i, j)];
        }
    }
    let l = match e.clone().cholesky() {
        Some(c) => c.l(),
        None => return (false, "energy form not positive definite".into()),
    };
    let li = l.try_inverse().unwrap();
    let c = &li * &g * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let dense_min = SymmetricEigen::new(c).eigenvalues.min();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let wc = worst_case_ratio(&it, dim, 1.0, &mut rng).unwrap();
    let rel = (wc.ratio - dense_min).abs() / dense_min.abs();

    // control Gramian: symmetry and positivity on random probes
    let op = HumOperator::new(sys.clone(), spec, 1.0).unwrap();
    let mut worst_sym: f64 = 0.0;
    let mut min_quot = f64::INFINITY;
    for _ in 0..20 {
        let x: Vec<f64> = (0..op.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let y: Vec<f64> = (0..op.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let lx = op.apply(&x).unwrap();
        let ly = op.apply(&y).unwrap();
        let a = op.inner(&lx, &y);
        let b = op.inner(&x, &ly);
        worst_sym = worst_sym.max((a - b).abs() / a.abs().max(b.abs()));
        min_quot = min_quot.min(op.inner(&lx, &x) / op.inner(&x, &x));
    }
    (
        rel <= 1e-6 && worst_sym <= 1e-6 && min_quot > 0.0,
        format!(
            "N=6 T=3: Lanczos min {:.8e} vs dense {dense_min:.8e} (rel {rel:.1e}, tol 1e-6); control Gramian symmetry {worst_sym:.1e} (tol 1e-6), min <Lx,x>/<x,x> {min_quot:.3e} (> 0)",
            wc.ratio
        ),
    )
}

fn observability_uniformity() -> Outcome {
    let mut ratios = Vec::new();
    for n in [6usize, 10, 14] {
        let grid = Arc::new(TensorGrid::new(2, n).unwrap());
        let sys = Arc::new(ElasticSystem::new(grid, material()));
        let it = Integrator::new(sys, TimeGridSpec::new(13.0, 0.01, Scheme::Newmark).unwrap()).unwrap();
        // exact minimum over all initial data (modal Gramian)
        let wc = worst_case_modal(&it, 1.0).unwrap();
        ratios.push((n, wc.ratio));
    }
    let lo = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let list: Vec<String> = ratios.iter().map(|(n, r)| format!("N={n}: {r:.4e}")).collect();
    (
        lo > 0.0 && hi / lo <= 3.0,
        format!("T=13 worst-case ratios {} ; spread {:.3} (tol 3)", list.join(", "), hi / lo),
    )
}

fn multiplier_bound() -> Outcome {
    let grid = Arc::new(TensorGrid::new(2, 8).unwrap());
    let sys = Arc::new(ElasticSystem::new(grid.clone(), material()));
    let it = Integrator::new(sys.clone(), TimeGridSpec::new(3.0, 0.01, Scheme::Newmark).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let s = ElasticState::random(grid.clone(), &mut rng);
        let traj = it.trajectory(&sys.to_interior(&s.displacement), &sys.to_interior(&s.velocity)).unwrap();
        let m = multiplier_diagnostics(&traj, &it);
        // recompute the bound from the raw terms
        let bound = 4.0 * 2f64.sqrt() / 4f64.sqrt() * m.energy0;
        worst = worst.min((bound - (m.x + 0.5 * m.y).abs()) / m.energy0);
    }
    (
        worst >= -1e-6,
        format!("N=8, 20 trajectories: min slack / E(0) = {worst:.4e} (tol -1e-6)"),
    )
}

static CONTROL: std::sync::OnceLock<Vec<ControlResult>> = std::sync::OnceLock::new();

fn control_results() -> &'static [ControlResult] {
    CONTROL.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        cfg.degrees().into_iter().map(|n| control_run(&cfg, n).unwrap()).collect()
    })
}

fn table1() -> Outcome {
    let reference = [(10usize, 1.6e-1), (20, 2.2e-1), (40, 2.5e-1)];
    let rs = control_results();
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, (n, fref)) in rs.iter().zip(reference) {
        let f_ok = (r.f_norm - fref).abs() <= 0.25 * fref;
        let rest_ok = r.final_state_norm_rel <= 1e-3;
        ok &= f_ok && rest_ok;
        parts.push(format!(
            "N={n}: |f|={:.3e} (ref {fref:.1e} +-25% {}), |g|={:.3e}, final/data={:.2e} ({}), iterations={}",
            r.f_norm,
            if f_ok { "ok" } else { "out" },
            r.g_norm,
            r.final_state_norm_rel,
            if rest_ok { "ok" } else { "> 1e-3" },
            r.cg_iterations
        ));
    }
    let decreasing = rs.windows(2).all(|w| w[1].g_norm < w[0].g_norm);
    let g40 = rs.last().map_or(f64::NAN, |r| r.g_norm);
    ok &= decreasing && g40 < 2e-3;
    parts.push(format!(
        "|g| decreasing {decreasing}, |g|(N=40) = {g40:.3e} (tol 2e-3)"
    ));
    (ok, parts.join("; "))
}

fn figure1() -> Outcome {
    let rs = control_results();
    let cfg = ExperimentConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output_dir: dir.path().to_path_buf(),
        ..cfg
    };
    write_control_outputs(&cfg, rs).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("figure1.csv")).unwrap();
    let cols = reader.headers().unwrap().len();
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    let expected_rows = (cfg.t_final / cfg.dt).round() as usize + 1;
    let mut ok = rows.len() == expected_rows && cols == rs.len() + 1;
    let mut parts = vec![format!("{} rows (expected {expected_rows})", rows.len())];
    for c in 1..cols {
        let peak = rows.iter().map(|r| r[c]).fold(0.0, f64::max);
        let nonzero = rows.iter().filter(|r| r[c] > 1e-12 * peak.max(1e-300)).count();
        let col_ok = peak <= 1.0 && peak > 0.0 && nonzero >= 2;
        ok &= col_ok;
        parts.push(format!("N={}: max {peak:.3e}, nonzero samples {nonzero}", rs[c - 1].degree));
    }
    (ok, parts.join(", "))
}
