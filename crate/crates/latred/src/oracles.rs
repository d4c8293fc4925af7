//! Engine against closed forms, model by model.

use latred_core::catalog::{CatalogEntry, catalog};
use latred_core::dispersion::solve_dispersion_near;
use latred_core::oracle::{OracleError, oracle_nls_coefficients, oracle_omega};
use latred_core::reduction::{Tolerances, analyze_at};
use latred_core::symbol::nls_from_symbols;
use latred_core::{Complex64, Params};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{Model, linspace, prepare};
use crate::report::F17;

pub const OMEGA_TOL: f64 = 1e-9;
pub const GROUP_VELOCITY_TOL: f64 = 1e-6;
pub const COEFFICIENT_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub kappas: Vec<f64>,
    pub ids: Vec<String>,
    /// Parameter overrides applied to every model.
    pub params: Params,
    /// Relative offset added to every closed form (fault injection).
    pub perturb: f64,
    pub jobs: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            kappas: linspace(0.3, 2.7, 9),
            ids: catalog().iter().map(|e| e.id.to_string()).collect(),
            params: Params::new(),
            perturb: 0.0,
            jobs: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub model: String,
    /// `omega`, `v_g`, `rho1`, `rho2` against closed forms, `symbols` for
    /// the independent symbol derivation of both coefficients.
    pub quantity: &'static str,
    pub max_deviation: F17,
    /// Point where the deviation is largest.
    pub worst_kappa: Option<F17>,
    pub tolerance: F17,
    pub points: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Acc {
    quantity: &'static str,
    tolerance: f64,
    worst: f64,
    at: Option<f64>,
    points: usize,
    error: Option<String>,
}

impl Acc {
    fn new(quantity: &'static str, tolerance: f64) -> Self {
        Acc { quantity, tolerance, worst: 0.0, at: None, points: 0, error: None }
    }

    fn record(&mut self, kappa: f64, dev: f64) {
        self.points += 1;
        if self.at.is_none() || dev.is_nan() || dev > self.worst {
            self.worst = dev;
            self.at = Some(kappa);
        }
    }

    fn fail(&mut self, kappa: f64, msg: String) {
        if self.error.is_none() {
            self.error = Some(format!("κ = {kappa}: {msg}"));
        }
    }

    fn row(self, model: &str) -> OracleRow {
        OracleRow {
            model: model.to_string(),
            quantity: self.quantity,
            max_deviation: F17(self.worst),
            worst_kappa: self.at.map(F17),
            tolerance: F17(self.tolerance),
            points: self.points,
            pass: self.error.is_none() && self.worst <= self.tolerance,
            error: self.error,
        }
    }
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    let d = (a - b).norm();
    if b.norm() > 1e-12 { d / b.norm() } else { d }
}

fn oracle_name(e: &OracleError) -> &'static str {
    match e {
        OracleError::UnknownModel(_) => "UnknownModel",
        OracleError::MissingParameter(_) => "MissingParameter",
        OracleError::SingularFormula(_) => "SingularFormula",
        OracleError::NoRealFrequency(_) => "NoRealFrequency",
        OracleError::ConstraintViolated(_) => "ConstraintViolated",
    }
}

/// Rows for one catalog model, in the order omega, v_g, rho1, rho2, symbols.
pub fn check_model(entry: &CatalogEntry, opts: &OracleOptions) -> Vec<OracleRow> {
    let model = Model::from_catalog(entry.id).expect("catalog entry parses").with_params(&opts.params);
    let params = &model.params;
    let bump = 1.0 + opts.perturb;
    let mut omega = Acc::new("omega", OMEGA_TOL);
    let mut v_g = Acc::new("v_g", GROUP_VELOCITY_TOL);
    let mut rho1 = Acc::new("rho1", COEFFICIENT_TOL);
    let mut rho2 = Acc::new("rho2", COEFFICIENT_TOL);
    let mut symbols = Acc::new("symbols", COEFFICIENT_TOL);
    let all = |accs: [&mut Acc; 5], k: f64, msg: &str| accs.into_iter().for_each(|a| a.fail(k, msg.to_string()));

    let (poly, sym) = match prepare(&model) {
        Ok(x) => x,
        Err(e) => {
            let k = opts.kappas.first().copied().unwrap_or(f64::NAN);
            all([&mut omega, &mut v_g, &mut rho1, &mut rho2, &mut symbols], k, &format!("{} ({e})", e.name()));
            return [omega, v_g, rho1, rho2, symbols].into_iter().map(|a| a.row(entry.id)).collect();
        }
    };
    for &k in &opts.kappas {
        let w_oracle = match oracle_omega(entry.id, k, params) {
            Ok(w) => w * bump,
            Err(e) => {
                all([&mut omega, &mut v_g, &mut rho1, &mut rho2, &mut symbols], k, &format!("{} ({e})", oracle_name(&e)));
                continue;
            }
        };
        let point = match solve_dispersion_near(&sym, k, w_oracle) {
            Ok(p) => p,
            Err(e) => {
                all([&mut omega, &mut v_g, &mut rho1, &mut rho2, &mut symbols], k, &e.to_string());
                continue;
            }
        };
        omega.record(k, (point.omega - w_oracle).abs());
        match (oracle_omega(entry.id, k + FD_STEP, params), oracle_omega(entry.id, k - FD_STEP, params)) {
            (Ok(a), Ok(b)) => v_g.record(k, (point.v_g - bump * (a - b) / (2.0 * FD_STEP)).abs()),
            (Err(e), _) | (_, Err(e)) => v_g.fail(k, e.to_string()),
        }
        let result = match analyze_at(&poly, &sym, point.clone(), model.reality, &Tolerances::default()) {
            Ok(r) => r,
            Err(e) => {
                for a in [&mut rho1, &mut rho2, &mut symbols] {
                    a.fail(k, format!("{} ({e})", e.name()));
                }
                continue;
            }
        };
        let c = &result.cascade;
        match oracle_nls_coefficients(entry.id, k, params) {
            Ok((r1, r2)) => {
                rho1.record(k, relative(c.rho1, r1 * bump));
                rho2.record(k, relative(c.rho2, r2 * bump));
            }
            Err(e) => {
                rho1.fail(k, e.to_string());
                rho2.fail(k, e.to_string());
            }
        }
        match nls_from_symbols(&poly, &sym, &point, model.reality, Tolerances::default().structural) {
            Ok(s) => symbols.record(k, relative(c.rho1, s.rho1 * bump).max(relative(c.rho2, s.rho2 * bump))),
            Err(e) => symbols.fail(k, e.to_string()),
        }
    }
    [omega, v_g, rho1, rho2, symbols].into_iter().map(|a| a.row(entry.id)).collect()
}

/// Every requested model, in catalog order.
pub fn check_oracles(opts: &OracleOptions) -> Result<Vec<OracleRow>, crate::analysis::ModelError> {
    let entries: Vec<&CatalogEntry> = opts
        .ids
        .iter()
        .map(|id| latred_core::catalog::lookup(id).ok_or_else(|| crate::analysis::ModelError::UnknownModel(id.clone())))
        .collect::<Result<_, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build().expect("thread pool");
    let rows: Vec<Vec<OracleRow>> = pool.install(|| entries.par_iter().map(|e| check_model(e, opts)).collect());
    Ok(rows.into_iter().flatten().collect())
}

/// Fixed-width table for terminals.
pub fn table(rows: &[OracleRow]) -> String {
    let mut s = format!("{:<24} {:<9} {:>12} {:>9} {:>9} {:>6}  {}\n", "model", "quantity", "max dev", "at κ", "tol", "pass", "note");
    for r in rows {
        s.push_str(&format!(
            "{:<24} {:<9} {:>12.3e} {:>9} {:>9.0e} {:>6}  {}\n",
            r.model,
            r.quantity,
            r.max_deviation.0,
            r.worst_kappa.map(|k| format!("{:.3}", k.0)).unwrap_or_default(),
            r.tolerance.0,
            if r.pass { "ok" } else { "FAIL" },
            r.error.as_deref().unwrap_or("")
        ));
    }
    s
}
