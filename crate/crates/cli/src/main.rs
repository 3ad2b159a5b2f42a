//! `khtm`: batch front end for the radial supercritical Trudinger–Moser lab.
//!
//! Exit codes: 0 success, 2 configuration or argument error, 3 numeric or
//! convergence failure (outputs are still written), 4 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use khtm_core::certify::{build_report, ReportOptions};
use khtm_core::config::{parse_init, parse_perturbation, RunConfig, SweepKind};
use khtm_core::extremal::{multistart, ExtremalSolution, MultiStart, SolveOptions};
use khtm_core::families::{conc_family, moser, witness_lower_bound};
use khtm_core::hessian::{admissibility_check, lift, phi_norm, AdmissibilityVerdict};
use khtm_core::model::{DimensionParams, Perturbation};
use khtm_core::profile::{radial_bound_check, GridProfile, Profile, RadialBoundReport};
use khtm_core::quadrature::Scheme;
use khtm_core::special::identity_suite;
use khtm_core::sweep::run_sweep;
use khtm_core::table::{fmt_float, write_table};
use khtm_core::LabError;

#[derive(Parser, Debug)]
#[command(name = "khtm", version, about = "Radial supercritical Trudinger-Moser functionals for the k-Hessian operator")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: config, then $KHTM_OUT, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dimension N = 2k.
    #[arg(long, global = true)]
    dim: Option<i64>,
    /// Perturbation as an inline TOML table, e.g. '{family="power",a=1,b=1,gamma=1}'.
    #[arg(long = "f", global = true)]
    perturbation: Option<String>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the dimensional constants.
    Params,
    /// Special-function identities on their test grids.
    Identities,
    /// Moser and concentration families: norms, plateaus and functional values.
    Families {
        #[arg(long, value_delimiter = ',')]
        j: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Certificate report: bounds, blow-up table, extremal and admissibility.
    Bounds {
        /// Zero profile only: no family scan and no solver.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        beta_factor: Option<f64>,
    },
    /// Solve for a candidate maximizer.
    Solve(SolveArgs),
    /// Admissibility, norm and radial estimate of a profile CSV.
    Check { profile: PathBuf },
    /// Parameter sweep written as one CSV.
    Sweep(SweepArgs),
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    /// conc:<eps> | moser:<j> | linear | quadratic | zero | csv:<path>
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxiter: Option<usize>,
    #[arg(long)]
    multistart: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Power,
    Beta,
    Eps,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gamma: Option<Vec<f64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    beta_factors: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
}

/// Successful runs either pass or report a numeric failure (exit 3).
#[derive(Debug, PartialEq, Eq)]
enum Status {
    Pass,
    NumericFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::NumericFailure) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(lab) = cause.downcast_ref::<LabError>() {
            return match lab {
                LabError::Io { .. } | LabError::Csv(_) | LabError::Json(_) => 4,
                other if other.is_numeric() => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    2
}

/// Configuration after file, global flags and validation.
struct Ctx {
    cfg: RunConfig,
    params: DimensionParams,
    out: PathBuf,
}

impl Ctx {
    fn scheme(&self) -> &Scheme {
        &self.cfg.quadrature
    }

    fn f(&self) -> &Perturbation {
        &self.cfg.perturbation
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| LabError::Io { path: self.out.display().to_string(), source: e })?;
        Ok(&self.out)
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        Ok(self.out_dir()?.join(name))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value).map_err(LabError::from)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| LabError::Io { path: path.display().to_string(), source: e })?;
        Ok(path)
    }

    fn inits(&self) -> Result<Vec<Profile>> {
        self.cfg.solver.init_specs().iter().map(|s| Ok(parse_init(s, &self.params, self.scheme())?)).collect()
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = cli.dim {
        cfg.dim = d;
    }
    if let Some(f) = &cli.perturbation {
        cfg.perturbation = parse_perturbation(f)?;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = Some(o.clone());
    }
    if let Some(w) = cli.workers {
        cfg.output.workers = Some(w);
    }
    match &cli.command {
        Command::Solve(a) => {
            let s = &mut cfg.solver;
            if let Some(v) = &a.init {
                s.init = v.clone();
            }
            if let Some(v) = a.damping {
                s.damping = v;
            }
            if let Some(v) = a.tol {
                s.tol = v;
            }
            if let Some(v) = a.maxiter {
                s.maxiter = v;
            }
            if let Some(v) = a.multistart {
                s.multistart = v;
            }
            if let Some(v) = a.seed {
                s.seed = v;
            }
        }
        Command::Bounds { dry_run, beta_factor } => {
            cfg.bounds.dry_run |= *dry_run;
            if let Some(b) = beta_factor {
                cfg.bounds.beta_factor = *b;
            }
        }
        Command::Families { j, eps } => {
            if let Some(j) = j {
                cfg.bounds.j_list = j.clone();
            }
            if let Some(e) = eps {
                cfg.bounds.eps_grid = e.clone();
            }
        }
        Command::Sweep(a) => {
            let s = &mut cfg.sweep;
            if let Some(k) = a.kind {
                s.kind = match k {
                    KindArg::Power => SweepKind::Power,
                    KindArg::Beta => SweepKind::Beta,
                    KindArg::Eps => SweepKind::Eps,
                };
            }
            let set = |dst: &mut Vec<f64>, src: &Option<Vec<f64>>| {
                if let Some(v) = src {
                    *dst = v.clone();
                }
            };
            set(&mut s.a, &a.a);
            set(&mut s.b, &a.b);
            set(&mut s.gamma, &a.gamma);
            set(&mut s.beta_factors, &a.beta_factors);
            set(&mut s.eps_grid, &a.eps_grid);
            if let Some(e) = a.epsilon {
                s.epsilon = e;
            }
        }
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Status> {
    let cfg = load_config(&cli)?;
    if let Command::Params = cli.command {
        return cmd_params(&cfg.params()?);
    }
    cfg.validate()?;
    if let Some(n) = cfg.output.workers {
        // A second initialization (e.g. in tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Ctx { params: cfg.params()?, out: cfg.output.resolve_dir(), cfg };
    match &cli.command {
        Command::Params => unreachable!(),
        Command::Identities => cmd_identities(&ctx),
        Command::Families { .. } => cmd_families(&ctx),
        Command::Bounds { .. } => cmd_bounds(&ctx),
        Command::Solve(_) => cmd_solve(&ctx),
        Command::Check { profile } => cmd_check(&ctx, profile),
        Command::Sweep(_) => cmd_sweep(&ctx),
    }
}

fn cmd_params(p: &DimensionParams) -> Result<Status> {
    println!("{:<8} {}", "N", p.n);
    println!("{:<8} {}", "k", p.k);
    for (name, v) in [("omega", p.omega), ("c_N", p.c_n), ("mu_N", p.mu_n), ("a_N", p.a_n), ("q0", p.q0())] {
        println!("{name:<8} {v:.15e}");
    }
    Ok(Status::Pass)
}

fn cmd_identities(ctx: &Ctx) -> Result<Status> {
    let rows = identity_suite()?;
    let mut ok = true;
    for r in &rows {
        let pass = if r.identity == "lt2_printed" { (r.residual - 0.5).abs() < 1e-8 } else { r.residual < 1e-8 };
        ok &= pass;
        println!("{:<12} {:>6} {:>6} residual {:.3e} {}", r.identity, r.x, r.y, r.residual, if pass { "ok" } else { "FAIL" });
    }
    let path = ctx.path("identities.csv")?;
    write_table(
        &path,
        &["identity", "x", "y", "lhs", "rhs", "residual"],
        rows.iter().map(|r| vec![r.identity.to_string(), fmt_float(r.x), fmt_float(r.y), fmt_float(r.lhs), fmt_float(r.rhs), fmt_float(r.residual)]),
    )?;
    println!("wrote {}", path.display());
    Ok(if ok { Status::Pass } else { Status::NumericFailure })
}

fn cmd_families(ctx: &Ctx) -> Result<Status> {
    let (p, s) = (&ctx.params, ctx.scheme());
    let mut moser_rows = Vec::new();
    for &j in &ctx.cfg.bounds.j_list {
        let w = moser(j, p)?;
        let norm = khtm_core::profile::x1_norm(&w, p, s)?;
        moser_rows.push(vec![fmt_float(j), fmt_float(norm), fmt_float(w.plateau), fmt_float(w.slope), fmt_float(w.kink_t)]);
    }
    let mp = ctx.path("moser.csv")?;
    write_table(&mp, &["j", "norm", "plateau", "slope", "kink_t"], moser_rows)?;
    let witness = witness_lower_bound(ctx.f(), p, &ctx.cfg.bounds.eps_grid, s)?;
    let cp = ctx.path("concentration.csv")?;
    write_table(
        &cp,
        &["epsilon", "c_eps", "b_eps", "norm", "value", "refinement_delta", "kink_r"],
        witness.rows.iter().map(|r| {
            let kink = conc_family(r.epsilon, p).map(|c| c.kink_radius()).unwrap_or(f64::NAN);
            vec![fmt_float(r.epsilon), fmt_float(r.c_eps), fmt_float(r.b_eps), fmt_float(r.norm), fmt_float(r.value), fmt_float(r.refinement_delta), fmt_float(kink)]
        }),
    )?;
    println!("witness lower bound {:.10} at epsilon {:e}", witness.value, witness.best_epsilon);
    println!("wrote {} and {}", mp.display(), cp.display());
    Ok(Status::Pass)
}

fn report_options(ctx: &Ctx) -> Result<ReportOptions> {
    let b = &ctx.cfg.bounds;
    let inits = if b.dry_run { Vec::new() } else { ctx.inits()? };
    let mut o = ReportOptions::new(inits);
    o.beta_factor = b.beta_factor;
    o.j_list = b.j_list.clone();
    o.eps_grid = b.eps_grid.clone();
    o.solve = ctx.cfg.solver.options();
    o.scheme = ctx.scheme().clone();
    o.dry_run = b.dry_run;
    Ok(o)
}

fn cmd_bounds(ctx: &Ctx) -> Result<Status> {
    let run = build_report(ctx.f(), &ctx.params, &report_options(ctx)?);
    let mut report = run.report;
    if let Some(sol) = &run.solution {
        sol.profile.write_csv(&ctx.path("extremal_profile.csv")?)?;
        report.profile_csv = Some("extremal_profile.csv".into());
    }
    if let Some(b) = report.blowup.ok() {
        write_table(
            &ctx.path("blowup.csv")?,
            &["j", "plateau", "value", "bound", "bound_applies", "holds", "refinement_delta"],
            b.rows.iter().map(|r| {
                vec![fmt_float(r.j), fmt_float(r.plateau), fmt_float(r.value), fmt_float(r.bound), r.bound_applies.to_string(), r.holds.to_string(), fmt_float(r.refinement_delta)]
            }),
        )?;
    }
    let path = ctx.write_json("certificate.json", &report)?;
    println!("concentration upper bound {:.10}", report.concentration_upper);
    if let Some(w) = report.witness_lower.ok() {
        println!("witness lower bound       {:.10}", w.value);
    }
    if let Some(e) = report.extremal.ok() {
        println!("extremal value            {:.10} (el residual {:.2e})", e.functional_value, e.el_residual);
    }
    if let Some(a) = report.admissibility.ok() {
        println!("admissibility             {}", if a.pass { "pass" } else { "FAIL" });
    }
    println!("wrote {}", path.display());
    Ok(if report.has_failures() { Status::NumericFailure } else { Status::Pass })
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    timestamp: u64,
    params: &'a DimensionParams,
    perturbation: &'a Perturbation,
    quadrature: &'a Scheme,
    options: SolveOptions,
    #[serde(flatten)]
    result: &'a MultiStart,
    profile_csv: &'static str,
    history_csv: &'static str,
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    timestamp: u64,
    params: &'a DimensionParams,
    perturbation: &'a Perturbation,
    options: SolveOptions,
    failure: String,
    kind: Option<&'a khtm_core::extremal::FailureKind>,
    iterations: usize,
    best_iterate_csv: Option<&'static str>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_history(ctx: &Ctx, rows: &[khtm_core::extremal::HistoryRow]) -> Result<()> {
    write_table(
        &ctx.path("history.csv")?,
        &["iteration", "change", "functional", "multiplier"],
        rows.iter().map(|h| vec![h.iteration.to_string(), fmt_float(h.change), fmt_float(h.functional), fmt_float(h.multiplier)]),
    )?;
    Ok(())
}

fn cmd_solve(ctx: &Ctx) -> Result<Status> {
    let opts = ctx.cfg.solver.options();
    match multistart(ctx.f(), &ctx.params, &ctx.inits()?, &opts, ctx.scheme()) {
        Ok(m) => {
            let best: &ExtremalSolution = &m.best;
            best.profile.write_csv(&ctx.path("profile.csv")?)?;
            write_history(ctx, &best.history)?;
            let record = SolveRecord {
                timestamp: now(),
                params: &ctx.params,
                perturbation: ctx.f(),
                quadrature: ctx.scheme(),
                options: opts,
                result: &m,
                profile_csv: "profile.csv",
                history_csv: "history.csv",
            };
            let path = ctx.write_json("solution.json", &record)?;
            println!(
                "value {:.12} lambda {:.6e} el_residual {:.2e} iterations {} (start {})",
                best.functional_value, best.lambda, best.el_residual, best.iterations, best.init
            );
            println!("wrote {}", path.display());
            Ok(Status::Pass)
        }
        Err(LabError::Solver(fail)) => {
            let best_csv = match &fail.best {
                Some(b) => {
                    b.write_csv(&ctx.path("best_iterate.csv")?)?;
                    Some("best_iterate.csv")
                }
                None => None,
            };
            write_history(ctx, &fail.history)?;
            let record = FailureRecord {
                timestamp: now(),
                params: &ctx.params,
                perturbation: ctx.f(),
                options: opts,
                failure: fail.to_string(),
                kind: Some(&fail.kind),
                iterations: fail.iterations,
                best_iterate_csv: best_csv,
            };
            ctx.write_json("failure.json", &record)?;
            eprintln!("solver failure: {fail}");
            Ok(Status::NumericFailure)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct CheckRecord {
    timestamp: u64,
    profile: String,
    norm: f64,
    admissibility: AdmissibilityVerdict,
    radial_bound: RadialBoundReport,
}

fn cmd_check(ctx: &Ctx, profile: &Path) -> Result<Status> {
    let grid = GridProfile::read_csv(profile).with_context(|| format!("reading {}", profile.display()))?;
    let radial_bound = radial_bound_check(&grid, &ctx.params, ctx.scheme(), 1e-6)?;
    let u = lift(Arc::new(grid), &ctx.params)?;
    let verdict = admissibility_check(&u, ctx.scheme());
    let record = CheckRecord { timestamp: now(), profile: profile.display().to_string(), norm: phi_norm(&u, ctx.scheme())?, admissibility: verdict, radial_bound };
    ctx.write_json("check.json", &record)?;
    println!(
        "admissibility {} (min bracket derivative {:.3e} at j = {}, r = {:.3e}); norm {:.10}",
        if verdict.pass { "pass" } else { "FAIL" },
        verdict.min_value,
        verdict.worst_j,
        verdict.worst_r,
        record.norm
    );
    Ok(if verdict.pass { Status::Pass } else { Status::NumericFailure })
}

fn cmd_sweep(ctx: &Ctx) -> Result<Status> {
    let table = run_sweep(&ctx.cfg.sweep, ctx.f(), &ctx.params, ctx.scheme());
    let name = match table.kind {
        SweepKind::Power => "sweep_power.csv",
        SweepKind::Beta => "sweep_beta.csv",
        SweepKind::Eps => "sweep_eps.csv",
    };
    let path = ctx.path(name)?;
    write_table(&path, &table.header, table.csv_rows())?;
    let failures = table.failures();
    println!("{} rows, {} failed; wrote {}", table.rows.len(), failures, path.display());
    Ok(if failures == 0 { Status::Pass } else { Status::NumericFailure })
}
