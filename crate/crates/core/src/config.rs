//! Run configuration: a TOML document in which every key is optional.
//!
//! ```toml
//! dim = 2
//!
//! [perturbation]          # zero | power | log | table
//! family = "power"
//! a = 1.0
//! b = 1.0
//! gamma = 1.0
//!
//! [quadrature]            # panels, order, t_max, graded_panels, graded_span, split
//! panels = 64
//!
//! [solver]
//! init = "conc:1e-3"      # conc:<eps> | moser:<j> | linear | quadratic | zero | csv:<path>
//! damping = 0.5
//! tol = 1e-10
//! maxiter = 500
//! multistart = 3          # extra starts: conc:1e-5, then linear
//! seed = 7
//!
//! [output]
//! dir = "out"             # falls back to $KHTM_OUT, then ./out
//! workers = 4             # default: logical cores
//!
//! [bounds]
//! beta_factor = 1.2
//! j_list = [5, 10, 15, 20]
//! eps_grid = [1e-3, 1e-4, 1e-5, 1e-6, 1e-8]
//! dry_run = false
//!
//! [sweep]
//! kind = "power"      # power | beta | eps
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::extremal::SolveOptions;
use crate::families::{conc_family, moser, DEFAULT_EPS_GRID};
use crate::model::{DimensionParams, Perturbation};
use crate::profile::{normalized, GridProfile, LinearProfile, Named, Profile, QuadraticProfile, ZeroProfile};
use crate::quadrature::Scheme;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "KHTM_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dim: i64,
    pub perturbation: Perturbation,
    pub quadrature: Scheme,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub bounds: BoundsConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            perturbation: Perturbation::Zero,
            quadrature: Scheme::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            bounds: BoundsConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub init: String,
    pub damping: f64,
    pub tol: f64,
    pub maxiter: usize,
    pub multistart: usize,
    pub seed: u64,
    pub acceleration: usize,
    pub directions: usize,
    pub fd_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            init: "conc:1e-3".into(),
            damping: o.damping,
            tol: o.tol,
            maxiter: o.maxiter,
            multistart: 3,
            seed: o.seed,
            acceleration: o.acceleration,
            directions: o.directions,
            fd_step: o.fd_step,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            damping: self.damping,
            tol: self.tol,
            maxiter: self.maxiter,
            seed: self.seed,
            directions: self.directions,
            fd_step: self.fd_step,
            acceleration: self.acceleration,
        }
    }

    /// The configured start followed by the default extra starts, deduplicated.
    pub fn init_specs(&self) -> Vec<String> {
        let mut specs = vec![self.init.clone()];
        for extra in ["conc:1e-3", "conc:1e-5", "linear"] {
            if specs.len() >= self.multistart.max(1) {
                break;
            }
            if !specs.iter().any(|s| s == extra) {
                specs.push(extra.into());
            }
        }
        specs
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl OutputConfig {
    pub fn resolve_dir(&self) -> PathBuf {
        self.dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub beta_factor: f64,
    pub j_list: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub dry_run: bool,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { beta_factor: 1.2, j_list: vec![5.0, 10.0, 15.0, 20.0], eps_grid: DEFAULT_EPS_GRID.to_vec(), dry_run: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Power perturbations over the `(a, b, γ)` grid at one concentration profile.
    Power,
    /// Multiples of `μ_N` on one Moser profile.
    Beta,
    /// The concentration family over an ε grid.
    Eps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
    pub epsilon: f64,
    pub beta_factors: Vec<f64>,
    pub moser_j: f64,
    pub eps_grid: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kind: SweepKind::Power,
            a: vec![0.5, 1.0, 2.0],
            b: vec![0.0, 1.0, 2.0],
            gamma: vec![0.5, 1.0],
            epsilon: 1e-4,
            beta_factors: vec![0.8, 1.0, 1.2],
            moser_j: 10.0,
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn params(&self) -> Result<DimensionParams> {
        DimensionParams::new(self.dim)
    }

    /// Checks everything that does not need the numerics to run.
    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        self.perturbation.validate().map_err(|e| LabError::Config(e.to_string()))?;
        self.quadrature.validate().map_err(|e| LabError::Config(e.to_string()))?;
        let s = &self.solver;
        if !(0.0..=1.0).contains(&s.damping) {
            return Err(LabError::Config(format!("solver.damping = {} outside [0, 1]", s.damping)));
        }
        if !(s.tol > 0.0) || !(s.fd_step > 0.0) {
            return Err(LabError::Config("solver.tol and solver.fd_step must be positive".into()));
        }
        if self.output.workers == Some(0) {
            return Err(LabError::Config("output.workers must be at least 1".into()));
        }
        if !(self.bounds.beta_factor > 0.0) {
            return Err(LabError::Config("bounds.beta_factor must be positive".into()));
        }
        for spec in s.init_specs() {
            if !spec.starts_with("csv:") {
                parse_init(&spec, &params, &self.quadrature)?;
            }
        }
        Ok(())
    }
}

/// Parses an inline TOML table such as `{family = "power", a = 1, b = 1, gamma = 1}`.
pub fn parse_perturbation(spec: &str) -> Result<Perturbation> {
    #[derive(Deserialize)]
    struct Wrap {
        f: Perturbation,
    }
    let w: Wrap = toml::from_str(&format!("f = {spec}")).map_err(|e| LabError::Config(format!("perturbation \"{spec}\": {e}")))?;
    w.f.validate().map_err(|e| LabError::Config(e.to_string()))?;
    Ok(w.f)
}

/// Builds a unit-norm initial profile from `conc:<eps>`, `moser:<j>`,
/// `linear`, `quadratic`, `zero` or `csv:<path>`.
pub fn parse_init(spec: &str, params: &DimensionParams, scheme: &Scheme) -> Result<Profile> {
    let bad = |detail: String| LabError::Config(format!("init \"{spec}\": {detail}"));
    let number = |x: &str| x.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
    let (head, arg) = match spec.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a)),
        None => (spec.trim(), None),
    };
    let raw: Profile = match (head, arg) {
        ("conc", Some(a)) => Arc::new(conc_family(number(a)?, params).map_err(|e| bad(e.to_string()))?),
        ("moser", Some(a)) => Arc::new(moser(number(a)?, params).map_err(|e| bad(e.to_string()))?),
        ("linear", None) => Arc::new(LinearProfile),
        ("quadratic", None) => Arc::new(QuadraticProfile),
        ("zero", None) => return Ok(Arc::new(ZeroProfile)),
        ("csv", Some(path)) => Arc::new(GridProfile::read_csv(Path::new(path.trim()))?),
        _ => return Err(bad("expected conc:<eps>, moser:<j>, linear, quadratic, zero or csv:<path>".into())),
    };
    Ok(Arc::new(Named { inner: normalized(&raw, params, scheme)?, name: spec.trim().to_string() }))
}
