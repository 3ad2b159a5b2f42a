//! Parameter sweeps. Cells are independent and evaluated in parallel; rows come
//! back in grid order.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{SweepConfig, SweepKind};
use crate::families::{conc_family, moser};
use crate::functional::tm_integral;
use crate::model::{DimensionParams, Perturbation};
use crate::profile::x1_norm;
use crate::quadrature::Scheme;
use crate::table::{fmt_float, fmt_opt};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Parameter columns in header order.
    pub parameters: Vec<f64>,
    pub value: Option<f64>,
    pub refinement_delta: Option<f64>,
    pub norm: Option<f64>,
    /// Sweep-specific verdict: finiteness, blow-up regime or bound excess.
    pub flag: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub header: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn csv_rows(&self) -> impl Iterator<Item = Vec<String>> + '_ {
        self.rows.iter().map(|r| {
            let mut out: Vec<String> = r.parameters.iter().map(|&x| fmt_float(x)).collect();
            out.push(fmt_opt(r.value));
            out.push(fmt_opt(r.refinement_delta));
            out.push(fmt_opt(r.norm));
            out.push(r.flag.to_string());
            out.push(r.error.clone().unwrap_or_default().replace(',', ";"));
            out
        })
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn cell(parameters: Vec<f64>, run: impl FnOnce() -> crate::Result<(f64, f64, f64, bool)>) -> SweepRow {
    match run() {
        Ok((value, delta, norm, flag)) => {
            SweepRow { parameters, value: Some(value), refinement_delta: Some(delta), norm: Some(norm), flag, error: None }
        }
        Err(e) => SweepRow { parameters, value: None, refinement_delta: None, norm: None, flag: false, error: Some(e.to_string()) },
    }
}

/// Runs the configured sweep. `f` is used by the β and ε sweeps; the
/// power sweep builds its own power perturbations.
pub fn run_sweep(cfg: &SweepConfig, f: &Perturbation, params: &DimensionParams, scheme: &Scheme) -> SweepTable {
    let tail = ["value", "refinement_delta", "norm"];
    match cfg.kind {
        SweepKind::Power => {
            let grid: Vec<[f64; 3]> =
                cfg.a.iter().flat_map(|&a| cfg.b.iter().flat_map(move |&b| cfg.gamma.iter().map(move |&g| [a, b, g]))).collect();
            let rows = grid
                .par_iter()
                .map(|&[a, b, g]| {
                    cell(vec![a, b, g, cfg.epsilon], || {
                        let v = conc_family(cfg.epsilon, params)?;
                        let f = Perturbation::power(a, b, g);
                        let val = tm_integral(&v, &f, params.mu_n, params, scheme)?;
                        let norm = x1_norm(&v, params, scheme)?;
                        Ok((val.value, val.refinement_delta, norm, val.value.is_finite()))
                    })
                })
                .collect();
            SweepTable { kind: cfg.kind, header: [&["a", "b", "gamma", "epsilon"][..], &tail, &["finite", "error"]].concat(), rows }
        }
        SweepKind::Beta => {
            let rows = cfg
                .beta_factors
                .par_iter()
                .map(|&m| {
                    cell(vec![m, m * params.mu_n, cfg.moser_j], || {
                        let w = moser(cfg.moser_j, params)?;
                        let val = tm_integral(&w, f, m * params.mu_n, params, scheme)?;
                        Ok((val.value, val.refinement_delta, x1_norm(&w, params, scheme)?, m > 1.0))
                    })
                })
                .collect();
            SweepTable { kind: cfg.kind, header: [&["beta_factor", "beta", "j"][..], &tail, &["blowup_regime", "error"]].concat(), rows }
        }
        SweepKind::Eps => {
            let upper = crate::certify::concentration_upper(params);
            let rows = cfg
                .eps_grid
                .par_iter()
                .map(|&eps| {
                    cell(vec![eps], || {
                        let v = conc_family(eps, params)?;
                        let val = tm_integral(&v, f, params.mu_n, params, scheme)?;
                        Ok((val.value, val.refinement_delta, x1_norm(&v, params, scheme)?, val.value > upper))
                    })
                })
                .collect();
            SweepTable { kind: cfg.kind, header: [&["epsilon"][..], &tail, &["above_concentration_bound", "error"]].concat(), rows }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_sweep_is_nondecreasing_and_flags_last_row() {
        let p = DimensionParams::new(2).unwrap();
        let cfg = SweepConfig { kind: SweepKind::Beta, ..Default::default() };
        let t = run_sweep(&cfg, &Perturbation::Zero, &p, &Scheme::default());
        let vals: Vec<f64> = t.rows.iter().map(|r| r.value.unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(t.rows.iter().map(|r| r.flag).collect::<Vec<_>>(), [false, false, true]);
        assert_eq!(t.header.len(), t.csv_rows().next().unwrap().len());
    }

    #[test]
    fn empty_and_signed_gamma_grids() {
        let p = DimensionParams::new(2).unwrap();
        let s = Scheme::default();
        let empty = SweepConfig { gamma: vec![], ..Default::default() };
        assert!(run_sweep(&empty, &Perturbation::Zero, &p, &s).rows.is_empty());
        let signed = SweepConfig { a: vec![1.0], b: vec![0.0], gamma: vec![-1.0, 0.0, 1.0], ..Default::default() };
        let t = run_sweep(&signed, &Perturbation::Zero, &p, &s);
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.flag && r.error.is_none()), "{t:?}");
    }
}
