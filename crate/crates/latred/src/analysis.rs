//! Model resolution and κ sweeps.

use latred_core::catalog::{CatalogEntry, lookup};
use latred_core::dispersion::{DispersionPoint, LinearSymbol, solve_dispersion, solve_dispersion_near};
use latred_core::eqdsl::{EquationIr, ParseError, PolyEquation, TimeKind, parse, taylor_jet, validate};
use latred_core::reduction::{AnalysisError, ReductionResult, Tolerances, analyze_at};
use latred_core::{Params, Reality};
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{C17, F17, params17};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unknown model `{0}` (UnknownModel)")]
    UnknownModel(String),
    #[error("give either a catalog id or an equation, not both")]
    Ambiguous,
    #[error("no model given: use --id or --eq")]
    Missing,
    #[error("cannot parse equation: {0}")]
    Parse(#[from] ParseError),
}

/// A parsed equation with bound parameters.
#[derive(Clone, Debug)]
pub struct Model {
    /// Catalog id, or `custom` for a user equation.
    pub label: String,
    pub source: String,
    pub ir: EquationIr,
    pub params: Params,
    pub reality: Reality,
    pub entry: Option<&'static CatalogEntry>,
}

impl Model {
    pub fn from_catalog(id: &str) -> Result<Self, ModelError> {
        let entry = lookup(id).ok_or_else(|| ModelError::UnknownModel(id.to_string()))?;
        Ok(Model {
            label: entry.id.to_string(),
            source: entry.equation.to_string(),
            ir: parse(entry.equation)?,
            params: entry.params(),
            reality: entry.reality,
            entry: Some(entry),
        })
    }

    /// A user equation. Without an explicit `reality`, equations that use
    /// the imaginary unit are taken to act on a complex field.
    pub fn from_source(src: &str, reality: Option<Reality>) -> Result<Self, ModelError> {
        let ir = parse(src)?;
        let reality = reality.unwrap_or_else(|| {
            if uses_imaginary_unit(&ir.root) {
                Reality::ComplexField
            } else {
                Reality::RealField
            }
        });
        Ok(Model { label: "custom".into(), source: src.to_string(), ir, params: Params::new(), reality, entry: None })
    }

    /// Resolves `--id` / `--eq` (or a config `equation` that may be either).
    pub fn resolve(id: Option<&str>, eq: Option<&str>, reality: Option<Reality>) -> Result<Self, ModelError> {
        let mut m = match (id, eq) {
            (Some(_), Some(_)) => return Err(ModelError::Ambiguous),
            (Some(id), None) => Model::from_catalog(id)?,
            (None, Some(eq)) => Model::from_source(eq, reality)?,
            (None, None) => return Err(ModelError::Missing),
        };
        if let Some(r) = reality {
            m.reality = r;
        }
        Ok(m)
    }

    pub fn with_params(mut self, overrides: &Params) -> Self {
        self.params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }
}

fn uses_imaginary_unit(e: &latred_core::eqdsl::Expr) -> bool {
    use latred_core::eqdsl::Expr;
    match e {
        Expr::ImagUnit => true,
        Expr::Neg(a) | Expr::Exp(a) | Expr::Pow(a, _) => uses_imaginary_unit(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            uses_imaginary_unit(a) || uses_imaginary_unit(b)
        }
        _ => false,
    }
}

/// Jet and linear symbol of a validated model.
pub fn prepare(model: &Model) -> Result<(PolyEquation, LinearSymbol), AnalysisError> {
    validate(&model.ir, &model.params)?;
    let poly = taylor_jet(&model.ir, &model.params)?;
    let sym = LinearSymbol::from_poly(&poly)?;
    Ok((poly, sym))
}

/// Dispersion points along a sweep. The first point uses the branch index,
/// later ones continue from the previous frequency.
pub fn continue_branch(sym: &LinearSymbol, kappas: &[f64], branch: usize) -> Vec<Result<DispersionPoint, AnalysisError>> {
    let mut prev: Option<f64> = None;
    kappas
        .iter()
        .map(|&k| {
            let p = match prev {
                Some(w) => solve_dispersion_near(sym, k, w),
                None => solve_dispersion(sym, k, branch),
            };
            prev = p.as_ref().ok().map(|p| p.omega);
            p.map_err(AnalysisError::from)
        })
        .collect()
}

/// Reduces the model at every κ using `jobs` worker threads (0: all cores).
/// Rows come back in κ order.
pub fn sweep(
    model: &Model,
    kappas: &[f64],
    branch: usize,
    tol: &Tolerances,
    jobs: usize,
) -> Result<Vec<Result<ReductionResult, AnalysisError>>, AnalysisError> {
    let (poly, sym) = prepare(model)?;
    let points = continue_branch(&sym, kappas, branch);
    let work = || {
        points
            .into_par_iter()
            .map(|p| p.and_then(|p| analyze_at(&poly, &sym, p, model.reality, tol)))
            .collect::<Vec<_>>()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    Ok(pool.install(work))
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanFieldRow {
    /// `δ_{n2}^deriv w_order^(0) = coefficient |A|²`.
    pub order: u8,
    pub deriv: u8,
    pub coefficient: C17,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorRow {
    pub name: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisRow {
    pub kappa: F17,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<F17>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_g: Option<F17>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport: Option<F17>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho1: Option<C17>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho2: Option<C17>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_harmonic: Option<C17>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_field: Option<MeanFieldRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRow>,
}

impl AnalysisRow {
    pub fn new(kappa: f64, r: &Result<ReductionResult, AnalysisError>) -> Self {
        match r {
            Ok(r) => AnalysisRow {
                kappa: F17(kappa),
                branch: Some(r.point.branch),
                omega: Some(F17(r.point.omega)),
                v_g: Some(F17(r.point.v_g)),
                transport: Some(F17(r.cascade.transport)),
                rho1: Some(r.cascade.rho1.into()),
                rho2: Some(r.cascade.rho2.into()),
                second_harmonic: r.cascade.second_harmonic.map(C17::from),
                mean_field: r.cascade.mean_field.as_ref().map(|m| MeanFieldRow {
                    order: m.field.order,
                    deriv: m.deriv.n,
                    coefficient: m.coefficient.into(),
                }),
                classification: Some(r.classification.name()),
                error: None,
            },
            Err(e) => AnalysisRow {
                kappa: F17(kappa),
                branch: None,
                omega: None,
                v_g: None,
                transport: None,
                rho1: None,
                rho2: None,
                second_harmonic: None,
                mean_field: None,
                classification: None,
                error: Some(ErrorRow { name: e.name(), message: e.to_string() }),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances17 {
    pub structural: F17,
    pub classify: F17,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub model: String,
    pub equation: String,
    pub params: std::collections::BTreeMap<String, F17>,
    pub field: &'static str,
    pub time: &'static str,
    pub tolerances: Tolerances17,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRow>,
    pub rows: Vec<AnalysisRow>,
}

pub fn field_name(r: Reality) -> &'static str {
    match r {
        Reality::RealField => "real",
        Reality::ComplexField => "complex",
    }
}

pub fn time_name(t: TimeKind) -> &'static str {
    match t {
        TimeKind::FullyDiscrete => "fully-discrete",
        TimeKind::DifferentialDifference => "differential-difference",
    }
}

impl AnalysisReport {
    pub fn new(model: &Model, tol: &Tolerances, kappas: &[f64], result: &Result<Vec<Result<ReductionResult, AnalysisError>>, AnalysisError>) -> Self {
        let (error, rows) = match result {
            Ok(rs) => (None, kappas.iter().zip(rs).map(|(k, r)| AnalysisRow::new(*k, r)).collect()),
            Err(e) => (Some(ErrorRow { name: e.name(), message: e.to_string() }), Vec::new()),
        };
        AnalysisReport {
            model: model.label.clone(),
            equation: model.source.clone(),
            params: params17(&model.params),
            field: field_name(model.reality),
            time: time_name(model.ir.time_kind),
            tolerances: Tolerances17 { structural: F17(tol.structural), classify: F17(tol.classify) },
            error,
            rows,
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some() || self.rows.iter().any(|r| r.error.is_some())
    }

    /// One row per κ.
    pub fn csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "kappa",
            "branch",
            "omega",
            "v_g",
            "transport",
            "rho1_re",
            "rho1_im",
            "rho2_re",
            "rho2_im",
            "classification",
            "error",
        ])?;
        let f = |x: Option<F17>| x.map(|x| x.text()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.kappa.text(),
                r.branch.map(|b| b.to_string()).unwrap_or_default(),
                f(r.omega),
                f(r.v_g),
                f(r.transport),
                f(r.rho1.map(|c| c.re)),
                f(r.rho1.map(|c| c.im)),
                f(r.rho2.map(|c| c.re)),
                f(r.rho2.map(|c| c.im)),
                r.classification.unwrap_or_default().to_string(),
                r.error.as_ref().map(|e| e.name).unwrap_or_default().to_string(),
            ])?;
        }
        if let Some(e) = &self.error {
            w.write_record(["", "", "", "", "", "", "", "", "", "", e.name])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }
}
