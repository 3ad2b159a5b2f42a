//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use khtm_core::certify::concentration_upper;
use khtm_core::config::{SweepConfig, SweepKind};
use khtm_core::extremal::{solve_extremal, ExtremalSolution, SolveOptions};
use khtm_core::families::{blowup_table, conc_family, moser, witness_lower_bound, DEFAULT_EPS_GRID};
use khtm_core::functional::{ball_functional, tm_integral};
use khtm_core::hessian::{admissibility_check, hessian_fj, lift, phi_norm};
use khtm_core::model::{DimensionParams, Perturbation};
use khtm_core::profile::{normalized, x1_norm, Profile, QuadraticProfile, RadialProfile};
use khtm_core::quadrature::Scheme;
use khtm_core::special::{binomial, identity_suite};
use khtm_core::sweep::run_sweep;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;

fn p(n: i64) -> DimensionParams {
    DimensionParams::new(n).expect("even dimension")
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

struct Runner {
    failures: usize,
}

impl Runner {
    fn run(&mut self, id: u32, name: &str, budget: Option<Duration>, body: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = body();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match result {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(b) = budget {
            if elapsed > b {
                pass = false;
                detail.push_str(&format!("; over the {:.0} s budget", b.as_secs_f64()));
            }
        }
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {id:>2} {:<4} {name}: {detail} [{:.2} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn special_functions() -> Check {
    let rows = identity_suite().map_err(err)?;
    let beta = rows.iter().filter(|r| r.identity == "beta").map(|r| r.residual).fold(0.0, f64::max);
    let lt1 = rows.iter().filter(|r| r.identity == "lt1").map(|r| r.residual).fold(0.0, f64::max);
    let printed: Vec<f64> = rows.iter().filter(|r| r.identity.starts_with("lt2")).map(|r| r.residual).collect();
    let counts = rows.iter().filter(|r| r.identity == "beta").count() == 16 && rows.iter().filter(|r| r.identity == "lt1").count() == 16;
    let pass = counts && beta < 1e-8 && lt1 < 1e-8 && printed.len() == 1 && (printed[0] - 0.5).abs() < 1e-8;
    Ok((pass, format!("max beta residual {beta:.1e}, max lt1 residual {lt1:.1e}, printed-identity residual {:?}", printed)))
}

fn moser_norms() -> Check {
    let mut worst: f64 = 0.0;
    for n in [2, 4] {
        let d = p(n);
        for j in [1.0, 5.0, 10.0, 20.0] {
            let norm = x1_norm(&moser(j, &d).map_err(err)?, &d, &Scheme::default()).map_err(err)?;
            worst = worst.max((norm - 1.0).abs());
        }
    }
    Ok((worst < 1e-6, format!("max |norm - 1| = {worst:.1e}")))
}

fn blowup() -> Check {
    let d = p(2);
    let rows = blowup_table(&[5.0, 10.0, 15.0, 20.0], 1.2 * d.mu_n, &Perturbation::Zero, &d, &Scheme::default()).map_err(err)?;
    let above = rows.iter().all(|r| r.value >= (0.2 * r.j).exp() / 2.0);
    let ratio = rows[3].value / rows[0].value;
    let values: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.value)).collect();
    Ok((above && ratio > 10.0, format!("values [{}], j=20/j=5 ratio {ratio:.2}", values.join(", "))))
}

fn concentration() -> Check {
    let e = std::f64::consts::E;
    let (c2, c4) = (concentration_upper(&p(2)), concentration_upper(&p(4)));
    let d2 = (c2 - (1.0 + e) / 2.0).abs().max((c2 - 1.859_140_914_229_522_6).abs());
    let d4 = (c4 - (1.0 + e.powf(1.5)) / 4.0).abs();
    Ok((d2 < 1e-12 && d4 < 1e-12, format!("N=2: {c2:.13} (dev {d2:.1e}); N=4: {c4:.13} (dev {d4:.1e})")))
}

fn witness() -> Check {
    let d = p(2);
    let w = witness_lower_bound(&Perturbation::Zero, &d, &DEFAULT_EPS_GRID, &Scheme::default()).map_err(err)?;
    let worst = w.rows.iter().map(|r| (r.norm - 1.0).abs()).fold(0.0, f64::max);
    Ok((
        w.value > 1.859_140_9 && worst < 1e-3,
        format!("witness {:.6} at eps {:e} > 1.8591409; max |norm - 1| = {worst:.1e}", w.value, w.best_epsilon),
    ))
}

fn power_case() -> (Perturbation, DimensionParams, Scheme) {
    (Perturbation::power(1.0, 1.0, 1.0), p(2), Scheme::default())
}

fn extremal(slot: &mut Option<ExtremalSolution>) -> Check {
    let (f, d, s) = power_case();
    let init: Profile = Arc::new(conc_family(1e-3, &d).map_err(err)?);
    let init = normalized(&init, &d, &s).map_err(err)?;
    let sol = solve_extremal(&f, &d, init.as_ref(), &SolveOptions::default(), &s).map_err(err)?;
    let w = witness_lower_bound(&f, &d, &DEFAULT_EPS_GRID, &s).map_err(err)?;
    let pass = sol.iterations <= 500
        && sol.el_residual < 1e-6
        && sol.nonincreasing
        && sol.radial_bound.min_slack >= -1e-6
        && sol.functional_value >= w.value - 1e-8
        && sol.stationarity.derivatives.len() == 5
        && sol.stationarity.max_abs < 1e-4;
    let detail = format!(
        "{} iterations, el_residual {:.1e}, nonincreasing {}, radial slack {:.1e}, value {:.8} vs witness {:.8}, stationarity {:.1e}",
        sol.iterations, sol.el_residual, sol.nonincreasing, sol.radial_bound.min_slack, sol.functional_value, w.value, sol.stationarity.max_abs
    );
    *slot = Some(sol);
    Ok((pass, detail))
}

fn admissibility(sol: Option<&ExtremalSolution>) -> Check {
    let s = Scheme::default();
    let sol = sol.ok_or("no converged solution from criterion 6")?;
    let verdict = admissibility_check(&lift(Arc::new(sol.profile.clone()), &p(2)).map_err(err)?, &s);
    let mut worst: f64 = 0.0;
    let mut quad_pass = true;
    for n in [2u32, 4, 6] {
        let d = p(n as i64);
        let u = lift(Arc::new(QuadraticProfile), &d).map_err(err)?;
        quad_pass &= admissibility_check(&u, &s).pass;
        for j in 1..=n / 2 {
            let want = binomial(n, j);
            for r in [1e-3, 0.1, 0.5, 0.9, 1.0] {
                worst = worst.max(((hessian_fj(&u, j, r).map_err(err)? - want) / want).abs());
            }
        }
    }
    Ok((
        verdict.pass && quad_pass && worst < 1e-10,
        format!("solution min bracket {:.1e} ({} nodes); quadratic max rel dev {worst:.1e}", verdict.min_value, verdict.nodes),
    ))
}

/// `Σ a_i (1 − r^{m_i})` with seeded random coefficients.
#[derive(Debug)]
struct RandomProfile(Vec<(f64, f64)>);

impl RadialProfile for RandomProfile {
    fn value_t(&self, t: f64) -> f64 {
        self.0.iter().map(|&(a, m)| -a * (-m * t).exp_m1()).sum()
    }
    fn slope_t(&self, t: f64) -> f64 {
        self.0.iter().map(|&(a, m)| a * m * (-m * t).exp()).sum()
    }
    fn curvature_t(&self, t: f64) -> Option<f64> {
        Some(self.0.iter().map(|&(a, m)| -a * m * m * (-m * t).exp()).sum())
    }
    fn label(&self) -> String {
        "random".into()
    }
}

fn norm_bridge() -> Check {
    let s = Scheme::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut norm_dev, mut ball_dev): (f64, f64) = (0.0, 0.0);
    for i in 0..5 {
        let d = p([2, 4, 6, 2, 4][i]);
        let terms = (0..rng.gen_range(1..4)).map(|_| (rng.gen_range(0.05..1.5), rng.gen_range(0.5..6.0))).collect();
        let v: Profile = Arc::new(RandomProfile(terms));
        let v = normalized(&v, &d, &s).map_err(err)?;
        let a = phi_norm(&lift(v.clone(), &d).map_err(err)?, &s).map_err(err)?;
        let b = x1_norm(v.as_ref(), &d, &s).map_err(err)?;
        norm_dev = norm_dev.max(((a - b) / b).abs());
        let ball = ball_functional(v.as_ref(), &Perturbation::Zero, &d, &s).map_err(err)?;
        let tm = tm_integral(v.as_ref(), &Perturbation::Zero, d.mu_n, &d, &s).map_err(err)?.value;
        ball_dev = ball_dev.max(((ball - d.omega * tm) / ball).abs());
    }
    Ok((norm_dev <= 1e-14 && ball_dev <= 1e-12, format!("max rel dev: norms {norm_dev:.1e}, ball functional {ball_dev:.1e}")))
}

fn power_sweep() -> Check {
    let cfg = SweepConfig { kind: SweepKind::Power, ..Default::default() };
    let grid_ok = cfg.a == [0.5, 1.0, 2.0] && cfg.b == [0.0, 1.0, 2.0] && cfg.gamma == [0.5, 1.0] && cfg.epsilon == 1e-4;
    let t = run_sweep(&cfg, &Perturbation::Zero, &p(2), &Scheme::default());
    let finite = t.rows.iter().all(|r| r.error.is_none() && r.value.is_some_and(f64::is_finite));
    let delta = t.rows.iter().filter_map(|r| r.refinement_delta).fold(0.0, f64::max);
    Ok((grid_ok && t.rows.len() == 18 && finite && delta < 1e-5, format!("{} cells finite {finite}, max refinement delta {delta:.1e}", t.rows.len())))
}

/// Every output file with lines mentioning a timestamp removed.
fn snapshot(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        let text = fs::read_to_string(&path).map_err(err)?;
        let kept: Vec<&str> = text.split_inclusive('\n').filter(|l| !l.contains("\"timestamp\"")).collect();
        out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), kept.concat());
    }
    Ok(out)
}

fn cli_run(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let runs: [&[&str]; 2] = [&["families"], &["--f", r#"{family="power",a=1,b=1,gamma=1}"#, "solve"]];
    for args in runs {
        let o = Command::new(env!("CARGO_BIN_EXE_khtm")).arg("--out").arg(dir).args(args).output().map_err(err)?;
        if !o.status.success() {
            return Err(format!("{args:?} exited with {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
        }
    }
    snapshot(dir)
}

fn determinism() -> Check {
    let (a, b) = (tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?);
    let (sa, sb) = (cli_run(a.path())?, cli_run(b.path())?);
    let differing: Vec<&String> = sa.keys().filter(|k| sa.get(*k) != sb.get(*k)).collect();
    let pass = sa.len() >= 5 && sa.keys().eq(sb.keys()) && differing.is_empty();
    Ok((pass, format!("{} files compared ({}), differing {:?}", sa.len(), sa.keys().cloned().collect::<Vec<_>>().join(" "), differing)))
}

fn main() {
    let secs = Duration::from_secs;
    let mut r = Runner { failures: 0 };
    let mut solution = None;
    r.run(1, "special-function suite", Some(secs(5)), special_functions);
    r.run(2, "Moser normalization", Some(secs(2)), moser_norms);
    r.run(3, "blow-up along Moser profiles", Some(secs(5)), blowup);
    r.run(4, "concentration constants", None, concentration);
    r.run(5, "lower-bound witness", Some(secs(10)), witness);
    r.run(6, "extremal solver", Some(secs(60)), || extremal(&mut solution));
    r.run(7, "k-admissibility", None, || admissibility(solution.as_ref()));
    r.run(8, "norm bridge", None, norm_bridge);
    r.run(9, "perturbation sweep", Some(secs(30)), power_sweep);
    r.run(10, "determinism", None, determinism);
    println!("acceptance: {} of 10 criteria passed", 10 - r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}
