//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 structural analysis
//! error (or a failing oracle row), 3 simulation failure or threshold miss.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use latred_core::catalog::{CatalogEntry, catalog, lookup};
use latred_core::reduction::Tolerances;
use latred_core::{Params, Reality};
use serde::Serialize;

use crate::analysis::{AnalysisReport, Model, field_name, sweep, time_name};
use crate::config::{AnalysisConfig, FieldKind, Format, KappaSpec, parse_param};
use crate::oracles::{OracleOptions, check_oracles, table};
use crate::report::{C17, F17, emit, params17, to_json, write_envelope};
use crate::simulate::{SimError, ValidationConfig, ValidationError, validate_envelope};

#[derive(Debug, Parser)]
#[command(name = "latred", version, about = "Reduce lattice equations to NLS normal form and check the reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in equations.
    Catalog(CatalogArgs),
    /// Run the multiscale reduction at one κ or along a sweep.
    Analyze(AnalyzeArgs),
    /// Integrate the lattice and the envelope equation and compare them.
    Simulate(SimulateArgs),
    /// Compare the engine with the closed-form results.
    CheckOracles(OracleArgs),
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Catalog id.
    #[arg(long)]
    pub id: Option<String>,
    /// Equation text, e.g. `u[0,1] - 2*u[0,0] + u[0,-1] = a*(...)`.
    #[arg(long)]
    pub eq: Option<String>,
    /// Parameter value `name=value` (repeatable).
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Field type of a user equation (default: complex if it uses `i`).
    #[arg(long, value_enum)]
    pub field: Option<FieldKind>,
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub branch: Option<usize>,
    /// Worker threads (0: one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `start:stop:count`.
    #[arg(long, conflicts_with = "kappa")]
    pub kappa_sweep: Option<String>,
    #[arg(long)]
    pub tol_structural: Option<f64>,
    #[arg(long)]
    pub tol_classify: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub sites: Option<usize>,
    /// Slow time `ε² m` of the comparison.
    #[arg(long)]
    pub slow_time: Option<f64>,
    /// Largest accepted phase-aligned relative L² error.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Peak of the initial sech envelope.
    #[arg(long, default_value_t = 1.0)]
    pub amp: f64,
    /// Runge–Kutta step for continuous-time equations.
    #[arg(long, default_value_t = 0.05)]
    pub rk4_step: f64,
    /// Start from the leading-order carrier only, without slaved harmonics.
    #[arg(long)]
    pub leading_order: bool,
    /// Output directory for the manifest, metrics and CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Restrict to these catalog ids (repeatable).
    #[arg(long)]
    pub id: Vec<String>,
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value = "0.3:2.7:9")]
    pub kappa_sweep: String,
    /// Offset every closed form by this relative amount (fault injection).
    #[arg(long, num_args = 0..=1, default_missing_value = "1e-6")]
    pub perturb_oracle: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Structural(String),
    Simulation(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Structural(_) => 2,
            Failure::Simulation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Structural(m) | Failure::Simulation(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Catalog(a) => cmd_catalog(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::CheckOracles(a) => cmd_check_oracles(&a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

#[derive(Serialize)]
struct CatalogRow {
    id: &'static str,
    description: &'static str,
    equation: &'static str,
    params: std::collections::BTreeMap<String, F17>,
    field: &'static str,
    time: &'static str,
    expected: &'static str,
    omega_oracle: bool,
    nls_oracle: bool,
}

impl From<&CatalogEntry> for CatalogRow {
    fn from(e: &CatalogEntry) -> Self {
        CatalogRow {
            id: e.id,
            description: e.description,
            equation: e.equation,
            params: params17(&e.params()),
            field: field_name(e.reality),
            time: time_name(e.time_kind),
            expected: e.expected.name(),
            omega_oracle: e.omega_oracle,
            nls_oracle: e.nls_oracle,
        }
    }
}

pub fn cmd_catalog(a: &CatalogArgs) -> Result<(), Failure> {
    let entries: Vec<&CatalogEntry> = match &a.id {
        Some(id) => vec![lookup(id).ok_or_else(|| usage(format!("unknown model `{id}` (UnknownModel)")))?],
        None => catalog().iter().collect(),
    };
    let rows: Vec<CatalogRow> = entries.iter().map(|e| CatalogRow::from(*e)).collect();
    let params = |e: &CatalogEntry| e.defaults.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",");
    let text = match a.format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let rec = |w: &mut csv::Writer<Vec<u8>>, r: [&str; 6]| w.write_record(r).map_err(usage);
            rec(&mut w, ["id", "field", "time", "expected", "params", "equation"])?;
            for e in &entries {
                rec(&mut w, [e.id, field_name(e.reality), time_name(e.time_kind), e.expected.name(), &params(e), e.equation])?;
            }
            String::from_utf8(w.into_inner().map_err(usage)?).map_err(usage)?
        }
        Format::Text => {
            let mut s = String::new();
            for e in &entries {
                s.push_str(&format!(
                    "{:<24} {:<8} {:<24} {:<18} {}\n    {}\n",
                    e.id,
                    field_name(e.reality),
                    time_name(e.time_kind),
                    e.expected.name(),
                    params(e),
                    e.equation
                ));
            }
            s
        }
    };
    emit(a.out.as_deref(), &text).map_err(usage)
}

/// Model and settings after merging the config file with the flags.
struct Resolved {
    model: Model,
    cfg: AnalysisConfig,
}

fn resolve(m: &ModelArgs) -> Result<Resolved, Failure> {
    let mut cfg = match &m.config {
        Some(p) => AnalysisConfig::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => AnalysisConfig::default(),
    };
    let (cfg_id, cfg_eq) = cfg.model_source();
    let (id, eq) = if m.id.is_some() || m.eq.is_some() {
        (m.id.as_deref(), m.eq.as_deref())
    } else {
        (cfg_id, cfg_eq)
    };
    let field = m.field.or(cfg.field).map(Reality::from);
    let mut params: Params = cfg.params.clone().into_iter().collect();
    for p in &m.params {
        let (k, v) = parse_param(p).map_err(usage)?;
        params.insert(k, v);
    }
    let model = Model::resolve(id, eq, field).map_err(usage)?.with_params(&params);
    if let Some(k) = m.kappa {
        cfg.kappa = Some(KappaSpec::Single(k));
    }
    cfg.branch = m.branch.or(cfg.branch);
    cfg.jobs = m.jobs.or(cfg.jobs);
    Ok(Resolved { model, cfg })
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let Resolved { model, mut cfg } = resolve(&a.model)?;
    if let Some(s) = &a.kappa_sweep {
        cfg.kappa = Some(KappaSpec::parse_sweep(s).map_err(usage)?);
    }
    let kappas = cfg.kappa.ok_or_else(|| usage("no κ given: use --kappa or --kappa-sweep"))?.values().map_err(usage)?;
    let file_tol = cfg.tolerances.clone().unwrap_or_default();
    let defaults = Tolerances::default();
    let tol = Tolerances {
        structural: a.tol_structural.or(file_tol.structural).unwrap_or(defaults.structural),
        classify: a.tol_classify.or(file_tol.classify).unwrap_or(defaults.classify),
    };
    let output = cfg.output.clone().unwrap_or_default();
    let out = a.out.clone().or(output.path);
    let format = a.format.or(output.format).unwrap_or(Format::Json);

    let result = sweep(&model, &kappas, cfg.branch.unwrap_or(0), &tol, cfg.jobs.unwrap_or(0));
    let report = AnalysisReport::new(&model, &tol, &kappas, &result);
    let text = match format {
        Format::Json => to_json(&report),
        Format::Csv => report.csv().map_err(usage)?,
        Format::Text => {
            let mut s = String::new();
            if let Some(e) = &report.error {
                s.push_str(&format!("{}: {}\n", e.name, e.message));
            }
            for (k, r) in kappas.iter().zip(result.iter().flatten()) {
                match r {
                    Ok(r) => s.push_str(&format!(
                        "κ = {k:.6}  ω = {:.10}  v_g = {:.10}  rho1 = {}  rho2 = {}  {}\n",
                        r.point.omega,
                        r.point.v_g,
                        complex_text(r.cascade.rho1),
                        complex_text(r.cascade.rho2),
                        r.classification
                    )),
                    Err(e) => s.push_str(&format!("κ = {k:.6}  {}: {e}\n", e.name())),
                }
            }
            s
        }
    };
    emit(out.as_deref(), &text).map_err(usage)?;
    if report.failed() {
        let first = report
            .error
            .as_ref()
            .or_else(|| report.rows.iter().find_map(|r| r.error.as_ref()))
            .map(|e| format!("{}: {}", e.name, e.message))
            .unwrap_or_default();
        return Err(Failure::Structural(format!("{}: {first}", model.label)));
    }
    Ok(())
}

fn complex_text(z: latred_core::Complex64) -> String {
    // adding 0.0 turns -0.0 into 0.0
    format!("{:.10}{:+.10}i", z.re + 0.0, z.im + 0.0)
}

#[derive(Serialize)]
struct MetricsOut {
    rel_l2: F17,
    sup: F17,
    rel_l2_aligned: F17,
    sup_aligned: F17,
    phase: F17,
}

#[derive(Serialize)]
struct Manifest {
    model: String,
    equation: String,
    params: std::collections::BTreeMap<String, F17>,
    field: &'static str,
    eps: F17,
    kappa: F17,
    omega: F17,
    v_g: F17,
    rho1: C17,
    rho2: C17,
    sites: usize,
    steps: usize,
    stride: usize,
    slow_time: F17,
    slaved_initial_data: bool,
    threshold: F17,
    metrics: MetricsOut,
    pass: bool,
    files: Vec<String>,
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let Resolved { model, cfg } = resolve(&a.model)?;
    let defaults = ValidationConfig::default();
    let kappa = match cfg.kappa {
        None => defaults.kappa,
        Some(KappaSpec::Single(k)) => k,
        Some(KappaSpec::Sweep { .. }) => return Err(usage("simulate takes a single κ")),
    };
    KappaSpec::Single(kappa).values().map_err(usage)?;
    let eps = a.eps.or(cfg.eps).unwrap_or(defaults.eps);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(usage(SimError::InvalidEps(eps)));
    }
    let sites = a.sites.or(cfg.sites).unwrap_or(defaults.sites);
    if sites < 8 {
        return Err(usage("at least 8 sites are needed"));
    }
    let threshold = a.threshold.or(cfg.threshold).unwrap_or(0.15);
    let vc = ValidationConfig {
        eps,
        sites,
        slow_time: a.slow_time.or(cfg.slow_time).unwrap_or(defaults.slow_time),
        kappa,
        branch: cfg.branch.unwrap_or(defaults.branch),
        amp: a.amp,
        rk4_step: a.rk4_step,
        slaved: !a.leading_order,
        ..defaults
    };
    let v = validate_envelope(&model.ir, &model.params, model.reality, &vc).map_err(|e| match e {
        ValidationError::Analysis(e) => Failure::Structural(format!("{}: {} ({e})", model.label, e.name())),
        ValidationError::Sim(SimError::InvalidEps(x)) => usage(SimError::InvalidEps(x)),
        ValidationError::Sim(e) => Failure::Simulation(format!("{}: {e}", model.label)),
    })?;
    let m = v.metrics;
    let pass = m.rel_l2_aligned <= threshold;
    let mut files = Vec::new();
    if let Some(dir) = &a.out {
        files = write_simulation(dir, &v).map_err(usage)?;
    }
    let manifest = Manifest {
        model: model.label.clone(),
        equation: model.source.clone(),
        params: params17(&model.params),
        field: field_name(model.reality),
        eps: F17(eps),
        kappa: F17(v.reduction.point.kappa),
        omega: F17(v.reduction.point.omega),
        v_g: F17(v.reduction.point.v_g),
        rho1: v.reduction.cascade.rho1.into(),
        rho2: v.reduction.cascade.rho2.into(),
        sites,
        steps: v.steps,
        stride: v.stride,
        slow_time: F17(v.lattice.slow_time),
        slaved_initial_data: vc.slaved,
        threshold: F17(threshold),
        metrics: MetricsOut {
            rel_l2: F17(m.rel_l2),
            sup: F17(m.sup),
            rel_l2_aligned: F17(m.rel_l2_aligned),
            sup_aligned: F17(m.sup_aligned),
            phase: F17(m.phase),
        },
        pass,
        files,
    };
    let json = to_json(&manifest);
    match &a.out {
        Some(dir) => {
            std::fs::write(dir.join("manifest.json"), &json).map_err(usage)?;
            std::fs::write(dir.join("metrics.json"), to_json(&manifest.metrics)).map_err(usage)?;
        }
        None => emit(None, &json).map_err(usage)?,
    }
    if !pass {
        return Err(Failure::Simulation(format!(
            "{}: phase-aligned relative L² error {:.4} exceeds {threshold}",
            model.label, m.rel_l2_aligned
        )));
    }
    Ok(())
}

fn write_simulation(dir: &Path, v: &crate::simulate::Validation) -> anyhow::Result<Vec<String>> {
    std::fs::create_dir_all(dir.join("history"))?;
    let mut files = Vec::new();
    for (name, env) in [("initial.csv", &v.initial), ("lattice.csv", &v.lattice), ("nls.csv", &v.nls)] {
        write_envelope(&dir.join(name), env)?;
        files.push(name.to_string());
    }
    for s in &v.history.samples {
        let name = format!("history/step_{:07}.csv", s.step);
        std::fs::write(dir.join(&name), crate::report::envelope_csv(&s.values)?)?;
        files.push(name);
    }
    Ok(files)
}

pub fn cmd_check_oracles(a: &OracleArgs) -> Result<(), Failure> {
    let mut opts = OracleOptions::default();
    if !a.id.is_empty() {
        opts.ids = a.id.clone();
    }
    for p in &a.params {
        let (k, v) = parse_param(p).map_err(usage)?;
        opts.params.insert(k, v);
    }
    opts.kappas = KappaSpec::parse_sweep(&a.kappa_sweep).and_then(|s| s.values()).map_err(usage)?;
    opts.perturb = a.perturb_oracle.unwrap_or(0.0);
    opts.jobs = a.jobs;
    let rows = check_oracles(&opts).map_err(usage)?;
    let text = match a.format {
        Format::Json => to_json(&rows),
        Format::Text => table(&rows),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["model", "quantity", "max_deviation", "worst_kappa", "tolerance", "points", "pass", "error"])
                .map_err(usage)?;
            for r in &rows {
                w.write_record([
                    r.model.clone(),
                    r.quantity.to_string(),
                    r.max_deviation.text(),
                    r.worst_kappa.map(|k| k.text()).unwrap_or_default(),
                    r.tolerance.text(),
                    r.points.to_string(),
                    r.pass.to_string(),
                    r.error.clone().unwrap_or_default(),
                ])
                .map_err(usage)?;
            }
            String::from_utf8(w.into_inner().map_err(usage)?).map_err(usage)?
        }
    };
    emit(a.out.as_deref(), &text).map_err(usage)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::Structural(format!("{failed} of {} oracle rows failed", rows.len())));
    }
    Ok(())
}
