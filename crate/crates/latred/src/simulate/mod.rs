//! Direct simulation of a lattice equation with a weakly modulated carrier,
//! checked against the reduced envelope equation.

mod lattice;
mod nls;

use std::f64::consts::PI;

use latred_core::dispersion::{DispersionPoint, LinearSymbol, solve_dispersion};
use latred_core::eqdsl::{EquationIr, TimeKind, taylor_jet, validate};
use latred_core::reduction::{AnalysisError, Cascade, ReductionResult, Tolerances, analyze_at};
use latred_core::{Complex64, Params, Reality};

pub use lattice::LatticeModel;
pub use nls::{Spectral, hamiltonian, mass, run_nls};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("carrier κ = {kappa} is not periodic on {n} sites")]
    CarrierNotPeriodic { kappa: f64, n: usize },
    #[error("field blew up at step {step} (max |u| = {max})")]
    BlowUp { step: usize, max: f64 },
    #[error("implicit update did not converge at step {step}")]
    FixedPointDivergence { step: usize },
    #[error("eps must lie in (0, 1), got {0}")]
    InvalidEps(f64),
    #[error("cannot simulate: {0}")]
    Unsupported(String),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("envelopes live on different grids")]
    GridMismatch,
}

/// Samples of a slowly varying amplitude on the ring, `values[j] = A(j · spacing)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub values: Vec<Complex64>,
    /// Slow spacing `ε` per lattice site.
    pub spacing: f64,
    /// Slow time `ε² m` (or `ε² t`).
    pub slow_time: f64,
}

impl Envelope {
    /// `f(ξ − center)` on `n` sites with slow spacing `eps`, centered on the ring.
    pub fn centered(n: usize, eps: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let center = n as f64 * eps / 2.0;
        Envelope { values: (0..n).map(|j| f(j as f64 * eps - center)).collect(), spacing: eps, slow_time: 0.0 }
    }

    pub fn sech(n: usize, eps: f64, amp: f64) -> Self {
        Self::centered(n, eps, |x| Complex64::new(amp / x.cosh(), 0.0))
    }
}

/// Stored time levels of a lattice field, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    pub levels: Vec<Vec<Complex64>>,
    pub eps: f64,
    pub kappa: f64,
    pub omega: f64,
    pub time_kind: TimeKind,
    /// Time `m` (or `t`) of the newest level.
    pub time: f64,
}

impl LatticeField {
    pub fn sites(&self) -> usize {
        self.levels[0].len()
    }

    pub fn current(&self) -> &[Complex64] {
        self.levels.last().expect("at least one level")
    }
}

fn check_eps(eps: f64) -> Result<(), SimError> {
    if eps > 0.0 && eps < 1.0 { Ok(()) } else { Err(SimError::InvalidEps(eps)) }
}

/// Mode index `j` with `κ = 2πj/n`, if there is one.
pub fn carrier_mode(kappa: f64, n: usize) -> Result<usize, SimError> {
    let j = kappa * n as f64 / (2.0 * PI);
    if (j - j.round()).abs() > 1e-9 * j.abs().max(1.0) {
        return Err(SimError::CarrierNotPeriodic { kappa, n });
    }
    Ok(j.round() as usize)
}

/// Leading-order lattice field `ε (A e^{i(κn − ωm)} + c.c.)` for a real field,
/// without the conjugate for a complex field. Older levels are filled by
/// transporting `A` with the group velocity.
///
/// With `slaved`, the second harmonic `ε² B A² e^{2i(κn − ωm)}` and the mean
/// field of the cascade are added so the packet starts on its slow manifold.
pub fn modulated_initial(
    env0: &Envelope,
    point: &DispersionPoint,
    eps: f64,
    reality: Reality,
    time_kind: TimeKind,
    levels: usize,
    slaved: Option<&Cascade>,
) -> Result<LatticeField, SimError> {
    check_eps(eps)?;
    let n = env0.values.len();
    if (env0.spacing - eps).abs() > 1e-12 * eps {
        return Err(SimError::GridMismatch);
    }
    carrier_mode(point.kappa, n)?;
    let fft = Spectral::new(n);
    let second = slaved.and_then(|c| c.second_harmonic).unwrap_or_default();
    let mean = match slaved.and_then(|c| c.mean_field.as_ref()) {
        None => None,
        Some(mf) if mf.field.harmonic == 0 && mf.deriv.m1 == 0 && mf.deriv.m2 == 0 && mf.deriv.n <= 1 => Some(mf),
        Some(_) => return Err(SimError::Unsupported("mean field relation is not of the form δⁿ w = γ|A|², n ≤ 1".into())),
    };
    let levels = levels.max(1);
    let out = (0..levels)
        .map(|l| {
            let m = l as f64 - (levels - 1) as f64;
            let a = if m == 0.0 { env0.values.clone() } else { fft.shifted(&env0.values, point.v_g * m, 1.0) };
            let background = match mean {
                Some(mf) => {
                    let mut w: Vec<Complex64> = a.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
                    if mf.deriv.n == 1 {
                        antiderivative(&fft, &mut w, eps);
                    }
                    let scale = mf.coefficient * eps.powi(i32::from(mf.field.order) + 1);
                    w.iter().map(|x| x * scale).collect()
                }
                None => vec![Complex64::new(0.0, 0.0); n],
            };
            a.iter()
                .zip(&background)
                .enumerate()
                .map(|(site, (z, b))| {
                    let e = Complex64::from_polar(1.0, point.kappa * site as f64 - point.omega * m);
                    let w = z * e * eps + second * (z * e * eps).powi(2);
                    match reality {
                        Reality::RealField => w + w.conj() + b.re,
                        Reality::ComplexField => w + b,
                    }
                })
                .collect()
        })
        .collect();
    Ok(LatticeField { levels: out, eps, kappa: point.kappa, omega: point.omega, time_kind, time: 0.0 })
}

/// Zero-mean antiderivative of the mean-free part of `v` on a ring with slow
/// spacing `spacing`.
fn antiderivative(fft: &Spectral, v: &mut [Complex64], spacing: f64) {
    let n = v.len();
    fft.forward(v);
    for (q, z) in v.iter_mut().enumerate() {
        if q == 0 || (n.is_multiple_of(2) && q == n / 2) {
            *z = Complex64::new(0.0, 0.0);
        } else {
            *z /= Complex64::new(0.0, fft.wavenumber(q, spacing));
        }
    }
    fft.inverse(v);
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub samples: Vec<Sample>,
    pub stride: usize,
    pub last: LatticeField,
}

/// Advances `field` by `steps` steps, keeping every `⌈1/ε⌉`-th state and the
/// last one. `h` is the Runge–Kutta step of a continuous-time model; a
/// fully discrete model always advances one lattice step.
pub fn run_lattice(model: &LatticeModel, mut field: LatticeField, steps: usize, h: f64) -> Result<History, SimError> {
    check_eps(field.eps)?;
    let stride = (1.0 / field.eps).ceil() as usize;
    let dt = match model.time_kind() {
        TimeKind::FullyDiscrete => 1.0,
        TimeKind::DifferentialDifference => h,
    };
    let sample = |f: &LatticeField, step| Sample { step, time: f.time, values: f.current().to_vec() };
    let mut samples = vec![sample(&field, 0)];
    for step in 1..=steps {
        match model.time_kind() {
            TimeKind::FullyDiscrete => model.step_discrete(&mut field.levels, step)?,
            TimeKind::DifferentialDifference => {
                let u = field.levels.last_mut().expect("one level");
                model.step_rk4(u, h)?;
            }
        }
        field.time += dt;
        let max = field.current().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max.is_nan() || max > 1.0 {
            return Err(SimError::BlowUp { step, max });
        }
        if step % stride == 0 || step == steps {
            samples.push(sample(&field, step));
        }
    }
    Ok(History { samples, stride, last: field })
}

/// Demodulates `u` at time `time` and keeps the spatial modes with
/// `|wavenumber| ≤ κ/2`, divided by `eps`.
pub fn extract_envelope(u: &[Complex64], time: f64, kappa: f64, omega: f64, eps: f64) -> Envelope {
    let n = u.len();
    let fft = Spectral::new(n);
    let mut v: Vec<Complex64> = u
        .iter()
        .enumerate()
        .map(|(site, z)| z * Complex64::from_polar(1.0 / eps, omega * time - kappa * site as f64))
        .collect();
    fft.forward(&mut v);
    for (q, z) in v.iter_mut().enumerate() {
        if fft.wavenumber(q, 1.0).abs() > kappa / 2.0 {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    fft.inverse(&mut v);
    Envelope { values: v, spacing: eps, slow_time: eps * eps * time }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    /// `‖a − b‖₂ / ‖b‖₂`.
    pub rel_l2: f64,
    /// `max|a − b| / max|b|`.
    pub sup: f64,
    pub rel_l2_aligned: f64,
    pub sup_aligned: f64,
    /// Global phase applied to `a` for the aligned variants.
    pub phase: f64,
}

/// Errors of `a` measured against the reference `b`.
pub fn compare_envelopes(a: &Envelope, b: &Envelope) -> Result<Metrics, SimError> {
    if a.values.len() != b.values.len() || (a.spacing - b.spacing).abs() > 1e-12 * b.spacing.abs() {
        return Err(SimError::GridMismatch);
    }
    let l2 = |v: &mut dyn Iterator<Item = Complex64>| v.map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let sup = |v: &mut dyn Iterator<Item = Complex64>| v.map(|z| z.norm()).fold(0.0, f64::max);
    let norm = l2(&mut b.values.iter().copied()).max(f64::MIN_POSITIVE);
    let peak = sup(&mut b.values.iter().copied()).max(f64::MIN_POSITIVE);
    let overlap: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 { overlap.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, phase);
    let diff = |r: Complex64| a.values.iter().zip(&b.values).map(move |(x, y)| x * r - y);
    let one = Complex64::new(1.0, 0.0);
    Ok(Metrics {
        rel_l2: l2(&mut diff(one)) / norm,
        sup: sup(&mut diff(one)) / peak,
        rel_l2_aligned: l2(&mut diff(rot)) / norm,
        sup_aligned: sup(&mut diff(rot)) / peak,
        phase,
    })
}

/// Settings of an end-to-end envelope check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationConfig {
    pub eps: f64,
    pub sites: usize,
    /// Slow time `ε² m` at which the envelopes are compared.
    pub slow_time: f64,
    /// Requested carrier; moved to the nearest `2πj/sites`.
    pub kappa: f64,
    pub branch: usize,
    /// Peak of the initial sech envelope.
    pub amp: f64,
    /// Runge–Kutta step for continuous-time models.
    pub rk4_step: f64,
    /// Split-step count per unit slow time for the envelope equation.
    pub nls_steps_per_unit: usize,
    /// Start from the slaved second harmonic and mean field as well.
    pub slaved: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            eps: 0.05,
            sites: 1024,
            slow_time: 1.0,
            kappa: 1.0,
            branch: 0,
            amp: 1.0,
            rk4_step: 0.05,
            nls_steps_per_unit: 2000,
            slaved: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug)]
pub struct Validation {
    pub reduction: ReductionResult,
    pub steps: usize,
    pub stride: usize,
    pub initial: Envelope,
    /// Lattice envelope in the frame moving with the group velocity.
    pub lattice: Envelope,
    pub nls: Envelope,
    pub metrics: Metrics,
    pub history: History,
}

/// Runs the lattice from a sech-modulated carrier and the envelope equation
/// from the same profile, and compares both at the requested slow time.
pub fn validate_envelope(
    ir: &EquationIr,
    params: &Params,
    reality: Reality,
    cfg: &ValidationConfig,
) -> Result<Validation, ValidationError> {
    check_eps(cfg.eps)?;
    validate(ir, params).map_err(AnalysisError::from)?;
    let poly = taylor_jet(ir, params).map_err(AnalysisError::from)?;
    let symbol = LinearSymbol::from_poly(&poly).map_err(AnalysisError::from)?;
    let j = (cfg.kappa * cfg.sites as f64 / (2.0 * PI)).round().max(1.0);
    let kappa = 2.0 * PI * j / cfg.sites as f64;
    let point = solve_dispersion(&symbol, kappa, cfg.branch).map_err(AnalysisError::from)?;
    let reduction = analyze_at(&poly, &symbol, point.clone(), reality, &Tolerances::default())?;
    let model = LatticeModel::new(ir, params, &poly)?;

    let initial = Envelope::sech(cfg.sites, cfg.eps, cfg.amp);
    let slaved = cfg.slaved.then_some(&reduction.cascade);
    let field = modulated_initial(&initial, &point, cfg.eps, reality, ir.time_kind, model.levels(), slaved)?;
    let dt = match ir.time_kind {
        TimeKind::FullyDiscrete => 1.0,
        TimeKind::DifferentialDifference => cfg.rk4_step,
    };
    let steps = (cfg.slow_time / (cfg.eps * cfg.eps * dt)).round() as usize;
    let history = run_lattice(&model, field, steps, dt)?;

    let t = history.last.time;
    let raw = extract_envelope(history.last.current(), t, point.kappa, point.omega, cfg.eps);
    let fft = Spectral::new(cfg.sites);
    let lattice = Envelope { values: fft.shifted(&raw.values, -point.v_g * t, 1.0), ..raw };
    let nls_steps = ((lattice.slow_time * cfg.nls_steps_per_unit as f64).ceil() as usize).max(1);
    let nls = run_nls(reduction.cascade.rho1, reduction.cascade.rho2, &initial, lattice.slow_time, nls_steps)?;
    let metrics = compare_envelopes(&lattice, &nls)?;
    Ok(Validation { reduction, steps, stride: history.stride, initial, lattice, nls, metrics, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use latred_core::catalog::lookup;
    use latred_core::eqdsl::parse;

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    struct Setup {
        model: LatticeModel,
        point: DispersionPoint,
        entry: &'static latred_core::catalog::CatalogEntry,
    }

    fn setup(id: &str, kappa: f64) -> Setup {
        let entry = lookup(id).unwrap();
        let ir = parse(entry.equation).unwrap();
        let poly = taylor_jet(&ir, &entry.params()).unwrap();
        let sym = LinearSymbol::from_poly(&poly).unwrap();
        let branch = sym.branches(kappa).unwrap().iter().position(|w| *w > 0.0).unwrap_or(0);
        let point = solve_dispersion(&sym, kappa, branch).unwrap();
        Setup { model: LatticeModel::new(&ir, &entry.params(), &poly).unwrap(), point, entry }
    }

    fn plane(n: usize, eps: f64, amp: f64) -> Envelope {
        Envelope { values: vec![Complex64::new(amp, 0.0); n], spacing: eps, slow_time: 0.0 }
    }

    #[test]
    fn zero_envelope_gives_zero_field() {
        let s = setup("toda-naive", 2.0 * PI * 10.0 / 64.0);
        let f = modulated_initial(&plane(64, 0.1, 0.0), &s.point, 0.1, Reality::RealField, TimeKind::FullyDiscrete, 2, None)
            .unwrap();
        assert!(f.levels.iter().flatten().all(|z| *z == ZERO));
        let h = run_lattice(&s.model, f, 5, 1.0).unwrap();
        assert!(h.samples.iter().flat_map(|s| &s.values).all(|z| *z == ZERO));
        let e = extract_envelope(&vec![ZERO; 64], 3.0, 1.0, 0.5, 0.1);
        assert!(e.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn initial_field_amplitudes() {
        let n = 1024;
        let kappa = 2.0 * PI * 100.0 / n as f64;
        let s = setup("toda-naive", kappa);
        let env = Envelope::sech(n, 0.05, 1.0);
        let f = modulated_initial(&env, &s.point, 0.05, Reality::RealField, TimeKind::FullyDiscrete, 2, None).unwrap();
        let max = f.current().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((max - 0.1).abs() < 1e-3, "{max}");
        assert!(f.current().iter().all(|z| z.im == 0.0));

        let c = setup("burgers-dd", kappa);
        let f = modulated_initial(&env, &c.point, 0.05, Reality::ComplexField, TimeKind::DifferentialDifference, 1, None).unwrap();
        for (u, a) in f.current().iter().zip(&env.values) {
            assert!((u.norm() - 0.05 * a.norm()).abs() < 1e-15);
        }
        let bad = Envelope::sech(1000, 0.05, 1.0);
        assert!(matches!(
            modulated_initial(&bad, &s.point, 0.05, Reality::RealField, TimeKind::FullyDiscrete, 2, None),
            Err(SimError::CarrierNotPeriodic { .. })
        ));
        assert_eq!(
            modulated_initial(&env, &s.point, 0.0, Reality::RealField, TimeKind::FullyDiscrete, 2, None),
            Err(SimError::InvalidEps(0.0))
        );
    }

    /// Phase advance of a tiny plane wave, fitted from the demodulated samples.
    #[test]
    fn small_plane_waves_follow_the_dispersion_relation() {
        let n = 64;
        let kappa = 2.0 * PI * 9.0 / n as f64;
        for id in ["toda-hirota", "toda-naive", "kdv-sym", "kdv-asym", "burgers-dd", "burgers-fully-discrete", "hietarinta"]
        {
            let s = setup(id, kappa);
            let h = if s.entry.time_kind == TimeKind::DifferentialDifference { 0.01 } else { 1.0 };
            let eps = 1e-6;
            let f = modulated_initial(&plane(n, eps, 1.0), &s.point, eps, s.entry.reality, s.entry.time_kind, s.model.levels(), None)
                .unwrap();
            let steps = 200;
            let hist = run_lattice(&s.model, f, steps, h).unwrap_or_else(|e| panic!("{id}: {e}"));
            let last = hist.samples.last().unwrap();
            // demodulate with ω = 0 to see the accumulated phase −ω t
            let e = extract_envelope(&last.values, 0.0, kappa, 0.0, eps);
            let phase = e.values[0].arg();
            let expect = Complex64::from_polar(1.0, -s.point.omega * last.time).arg();
            let d = (phase - expect + PI).rem_euclid(2.0 * PI) - PI;
            let omega_err = d.abs() / last.time;
            assert!(omega_err < 1e-6, "{id}: frequency error {omega_err:e}");
        }
    }

    #[test]
    fn runge_kutta_is_fourth_order() {
        let n = 64;
        let s = setup("burgers-dd", 2.0 * PI * 8.0 / n as f64);
        let env = Envelope::sech(n, 0.2, 1.0);
        let f = modulated_initial(&env, &s.point, 0.2, Reality::ComplexField, TimeKind::DifferentialDifference, 1, None).unwrap();
        let run = |h: f64| run_lattice(&s.model, f.clone(), (2.0 / h).round() as usize, h).unwrap().last;
        let reference = run(0.0125);
        let err = |h| {
            run(h).current().iter().zip(reference.current()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let order = (err(0.1) / err(0.05)).log2();
        assert!(order >= 3.8, "order {order}");
    }

    #[test]
    fn round_trip_recovers_the_envelope() {
        let n = 1024;
        let kappa = 2.0 * PI * 100.0 / n as f64;
        let eps = 0.05;
        for (id, reality) in [("toda-naive", Reality::RealField), ("burgers-dd", Reality::ComplexField)] {
            let s = setup(id, kappa);
            let env = Envelope::sech(n, eps, 1.0);
            let f = modulated_initial(&env, &s.point, eps, reality, s.entry.time_kind, 1, None).unwrap();
            let back = extract_envelope(f.current(), 0.0, kappa, s.point.omega, eps);
            let m = compare_envelopes(&back, &env).unwrap();
            assert!(m.rel_l2 <= 3.0 * eps, "{id}: {}", m.rel_l2);
        }
    }

    #[test]
    fn second_harmonic_is_filtered_out() {
        let n = 1024;
        let kappa = 2.0 * PI * 100.0 / n as f64;
        let eps = 0.05;
        let env = Envelope::sech(n, eps, 1.0);
        let u: Vec<Complex64> = env
            .values
            .iter()
            .enumerate()
            .map(|(site, a)| {
                let w = a * Complex64::from_polar(eps, kappa * site as f64);
                let w2 = a * a * Complex64::from_polar(eps * eps, 2.0 * kappa * site as f64);
                w + w.conj() + w2 + w2.conj()
            })
            .collect();
        let clean: Vec<Complex64> = env
            .values
            .iter()
            .enumerate()
            .map(|(site, a)| {
                let w = a * Complex64::from_polar(eps, kappa * site as f64);
                w + w.conj()
            })
            .collect();
        let a = extract_envelope(&u, 0.0, kappa, 0.0, eps);
        let b = extract_envelope(&clean, 0.0, kappa, 0.0, eps);
        assert!(compare_envelopes(&a, &b).unwrap().rel_l2 <= 1e-3);
    }

    #[test]
    fn comparison_metrics() {
        let a = Envelope::centered(128, 0.1, |x| Complex64::new((-x * x).exp(), 0.3 * x.sin()));
        let m = compare_envelopes(&a, &a).unwrap();
        assert_eq!((m.rel_l2, m.sup, m.rel_l2_aligned, m.sup_aligned), (0.0, 0.0, 0.0, 0.0));

        let rotated = Envelope { values: a.values.iter().map(|z| z * Complex64::from_polar(1.0, 0.7)).collect(), ..a.clone() };
        let m = compare_envelopes(&a, &rotated).unwrap();
        assert!(m.rel_l2_aligned <= 1e-12 && m.rel_l2 > 0.1);

        let mut state: u64 = 0x2545_f491_4f6c_dd1d;
        let mut rnd = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x = Envelope { values: (0..128).map(|_| Complex64::new(rnd(), rnd())).collect(), ..a.clone() };
        let y = Envelope { values: (0..128).map(|_| Complex64::new(rnd(), rnd())).collect(), ..a.clone() };
        assert!(compare_envelopes(&x, &y).unwrap().rel_l2 > 0.5);

        let other = Envelope { values: vec![ZERO; 64], ..a.clone() };
        assert_eq!(compare_envelopes(&a, &other), Err(SimError::GridMismatch));
    }
}
