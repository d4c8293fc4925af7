//! Order-by-order solution of the multiscale cascade and NLS extraction.

mod integrate;
pub mod verify;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dispersion::{DispersionError, DispersionPoint, LinearSymbol, solve_dispersion};
use crate::eqdsl::{EquationIr, PolyEquation, ValidateError, taylor_jet, validate};
use crate::series::{
    Carrier, Deriv, DisplayMonomial, FieldId, Frame, MAX_HARMONIC, Monomial, MsExpr, NOISE, SeriesMode, SlowFactor,
    SlowPoly, conj_poly, diff_poly_by, mul_poly, prune_poly,
};
use crate::{Complex64, Params, Reality};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Classification {
    IntegrableNls,
    NonIntegrable,
    LinearSchrodinger,
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::IntegrableNls => "IntegrableNLS",
            Classification::NonIntegrable => "NonIntegrable",
            Classification::LinearSchrodinger => "LinearSchrodinger",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Relative threshold for vanishing coefficients in the cascade.
    pub structural: f64,
    /// Threshold used by [`classify`].
    pub classify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { structural: 1e-8, classify: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ReductionError {
    #[error("the carrier does not solve the dispersion relation (relative residual {0:e})")]
    NotOnDispersion(f64),
    #[error("transport coefficient {transport} differs from the group velocity {v_g}")]
    TransportMismatch { transport: f64, v_g: f64 },
    #[error("harmonic {harmonic} is resonant at order {order} (margin {margin:e})")]
    HarmonicResonance { order: u8, harmonic: i8, margin: f64 },
    #[error("the mean-field equation at order {0} is not an exact n2-derivative")]
    NonIntegrableMeanField(u8),
    #[error("an underived mean field survives in the envelope equation")]
    BareMeanField,
    #[error("term `{term}` is outside the NLS span (relative size {relative:e})")]
    UnreducedTerm { term: String, relative: f64 },
    #[error("the envelope equation has no slow-time derivative")]
    NoSlowTime,
    #[error("rho1 vanishes: no dispersive reduction")]
    ZeroDispersion,
}

/// `δ^deriv w_field = rhs`, found while solving bucket `(order, harmonic)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub order: u8,
    pub field: FieldId,
    pub deriv: Deriv,
    pub rhs: SlowPoly,
}

/// `δ^deriv w_field = coefficient · |A|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanField {
    pub field: FieldId,
    pub deriv: Deriv,
    pub coefficient: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BucketAction {
    /// The amplitude is forced to zero.
    Zero,
    /// No equation for the amplitude at this order.
    Free,
    Transport,
    Solved,
    MeanField,
    /// The bucket vanishes after substitution.
    Consistent,
    Nls,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketReport {
    pub order: u8,
    pub harmonic: i8,
    pub action: BucketAction,
    /// Largest leftover coefficient relative to the bucket scale.
    pub residual: f64,
    /// Size of the solved-for coefficient relative to the symbol scale.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cascade {
    pub transport: f64,
    /// `w_1^(2) = second_harmonic · A²`.
    pub second_harmonic: Option<Complex64>,
    pub mean_field: Option<MeanField>,
    pub rho1: Complex64,
    pub rho2: Complex64,
    pub relations: Vec<Relation>,
    pub buckets: Vec<BucketReport>,
    pub dropped_harmonics: usize,
    pub mode: SeriesMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionResult {
    pub point: DispersionPoint,
    pub cascade: Cascade,
    pub classification: Classification,
}

/// Any failure between source text and classification.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

impl AnalysisError {
    /// Short error name, e.g. `HarmonicResonance`.
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisError::Validate(e) => match e {
                ValidateError::MissingParameter(_) => "MissingParameter",
                ValidateError::ZeroDenominatorAtOrigin => "ZeroDenominatorAtOrigin",
                ValidateError::NonzeroAtOrigin(_) => "NonzeroAtOrigin",
                ValidateError::DegenerateLinearPart => "DegenerateLinearPart",
                ValidateError::NonlinearTimeDerivative => "NonlinearTimeDerivative",
                ValidateError::NonFinite => "NonFinite",
            },
            AnalysisError::Dispersion(e) => match e {
                DispersionError::DegenerateLinearPart => "DegenerateLinearPart",
                DispersionError::NoDispersiveBranch(_) => "NoDispersiveBranch",
                DispersionError::BranchOutOfRange { .. } => "BranchOutOfRange",
                DispersionError::StationarySymbol => "StationarySymbol",
                DispersionError::ComplexGroupVelocity(_) => "ComplexGroupVelocity",
                DispersionError::InvalidWavenumber(_) => "InvalidWavenumber",
            },
            AnalysisError::Reduction(e) => match e {
                ReductionError::NotOnDispersion(_) => "NotOnDispersion",
                ReductionError::TransportMismatch { .. } => "TransportMismatch",
                ReductionError::HarmonicResonance { .. } => "HarmonicResonance",
                ReductionError::NonIntegrableMeanField(_) => "NonIntegrableMeanField",
                ReductionError::BareMeanField => "BareMeanField",
                ReductionError::UnreducedTerm { .. } => "UnreducedTerm",
                ReductionError::NoSlowTime => "NoSlowTime",
                ReductionError::ZeroDispersion => "ZeroDispersion",
            },
        }
    }
}

fn harmonics(reality: Reality) -> Vec<i8> {
    match reality {
        Reality::RealField => (0..=MAX_HARMONIC).collect(),
        Reality::ComplexField => (-MAX_HARMONIC..=MAX_HARMONIC).collect(),
    }
}

/// Substitutes `u_slot := T^slot(ansatz)` into the jet and truncates at
/// `ε^max_order`. The ansatz is `Σ_k Σ_α ε^{k+1} w_k^(α) E^α` for
/// `k < max_order` and `|α| ≤ 3`.
pub fn expand_multiscale(poly: &PolyEquation, point: &DispersionPoint, reality: Reality, max_order: u8) -> MsExpr {
    let mode = SeriesMode { reality, time: poly.time_kind };
    let carrier = Carrier { kappa: point.kappa, omega: point.omega };
    let mut ansatz = MsExpr::zero(mode, Frame::Lab, max_order);
    let one = Complex64::new(1.0, 0.0);
    for k in 0..max_order {
        for &a in &harmonics(reality) {
            let w = FieldId::new(k, a);
            ansatz = ansatz.add(&MsExpr::field(mode, Frame::Lab, max_order, w, false, k + 1, one));
            if reality == Reality::RealField && a > 0 {
                ansatz = ansatz.add(&MsExpr::field(mode, Frame::Lab, max_order, w, true, k + 1, one));
            }
        }
    }
    let shifted: Vec<MsExpr> =
        poly.slots.iter().map(|s| ansatz.apply_shift(s.dn, s.dm, carrier)).collect();

    let mut pairs: BTreeMap<(usize, usize), MsExpr> = BTreeMap::new();
    let mut total = MsExpr::zero(mode, Frame::Lab, max_order);
    for (m, c) in &poly.terms {
        let term = match m.len() {
            1 => shifted[m[0]].clone(),
            _ => {
                let pair = pairs.entry((m[0], m[1])).or_insert_with(|| shifted[m[0]].mul(&shifted[m[1]])).clone();
                m[2..].iter().fold(pair, |acc, &s| acc.mul(&shifted[s]))
            }
        };
        total = total.add(&term.scale(*c));
    }
    for (s, c) in &poly.dt_terms {
        let dt = ansatz
            .apply_shift(poly.dt_slots[*s], 0, carrier)
            .apply_time_derivative(carrier)
            .expect("dt slots only occur in differential-difference equations");
        total = total.add(&dt.scale(*c));
    }
    total
}

/// Coefficient of a single-factor monomial.
fn coeff_of(p: &SlowPoly, f: SlowFactor) -> Complex64 {
    p.get(&alloc::vec![f]).copied().unwrap_or_default()
}

fn max_abs(p: &SlowPoly) -> f64 {
    p.values().map(|c| c.norm()).fold(0.0, f64::max)
}

fn bucket_poly(e: &MsExpr, j: u8, a: i8) -> SlowPoly {
    let mut p = SlowPoly::new();
    for (c, m) in e.bucket(j, a) {
        *p.entry(m).or_default() += c;
    }
    p
}

/// Replaces every factor covered by a relation until none applies.
pub fn substitute(p: &SlowPoly, relations: &[Relation]) -> SlowPoly {
    let mut cur = p.clone();
    for _ in 0..16 {
        let mut changed = false;
        let mut next = SlowPoly::new();
        for (m, c) in &cur {
            match expand_once(m, relations) {
                Some(rep) => {
                    changed = true;
                    for (m2, c2) in rep {
                        *next.entry(m2).or_default() += c * c2;
                    }
                }
                None => *next.entry(m.clone()).or_default() += *c,
            }
        }
        let tol = NOISE * max_abs(&next);
        prune_poly(&mut next, tol);
        cur = next;
        if !changed {
            break;
        }
    }
    cur
}

fn expand_once(m: &Monomial, relations: &[Relation]) -> Option<SlowPoly> {
    for (i, f) in m.iter().enumerate() {
        let Some(r) = relations.iter().find(|r| r.field == f.field && f.deriv.covers(&r.deriv)) else {
            continue;
        };
        let d = Deriv::new(f.deriv.n - r.deriv.n, f.deriv.m1 - r.deriv.m1, f.deriv.m2 - r.deriv.m2);
        let mut rep = diff_poly_by(&r.rhs, d);
        if f.conj {
            rep = conj_poly(&rep);
        }
        let mut rest = m.clone();
        rest.remove(i);
        let rest: SlowPoly = core::iter::once((rest, Complex64::new(1.0, 0.0))).collect();
        return Some(mul_poly(&rep, &rest));
    }
    None
}

struct Solver<'a> {
    e: MsExpr,
    tol: &'a Tolerances,
    scale: f64,
    reality: Reality,
    relations: Vec<Relation>,
    buckets: Vec<BucketReport>,
    second_harmonic: Option<Complex64>,
    mean_field: Option<MeanField>,
}

impl Solver<'_> {
    fn report(&mut self, order: u8, harmonic: i8, action: BucketAction, residual: f64, margin: f64) {
        self.buckets.push(BucketReport { order, harmonic, action, residual, margin });
    }

    fn plain(&self, order: u8, harmonic: i8) -> SlowFactor {
        SlowFactor::new(FieldId::new(order, harmonic), false, Deriv::NONE, self.reality)
    }

    fn amplitude(&self) -> SlowFactor {
        self.plain(0, 1)
    }

    fn abs_sq(&self) -> Monomial {
        let a = self.amplitude();
        let mut m = alloc::vec![a, a.conjugate()];
        m.sort_unstable();
        m
    }

    fn describe(&self, m: &[SlowFactor]) -> String {
        format!("{}", DisplayMonomial { monomial: m, mode: self.e.mode, frame: self.e.frame })
    }

    fn substituted(&self, j: u8, a: i8) -> (SlowPoly, f64) {
        let raw = bucket_poly(&self.e, j, a);
        let p = substitute(&raw, &self.relations);
        let reference = max_abs(&raw).max(max_abs(&p));
        (p, reference)
    }

    fn leading_order(&mut self) -> Result<(), ReductionError> {
        for a in harmonics(self.reality) {
            let p = bucket_poly(&self.e, 1, a);
            let w = self.plain(0, a);
            let c = coeff_of(&p, w);
            let margin = c.norm() / self.scale;
            if a == 1 {
                if margin > self.tol.structural {
                    return Err(ReductionError::NotOnDispersion(margin));
                }
                self.report(1, 1, BucketAction::Consistent, margin, margin);
            } else if margin > self.tol.structural {
                self.relations.push(Relation { order: 1, field: w.field, deriv: Deriv::NONE, rhs: SlowPoly::new() });
                self.report(1, a, BucketAction::Zero, 0.0, margin);
            } else if a == 0 {
                self.report(1, 0, BucketAction::Free, 0.0, margin);
            } else {
                return Err(ReductionError::HarmonicResonance { order: 1, harmonic: a, margin });
            }
        }
        let relations = core::mem::take(&mut self.relations);
        self.e = self.e.map_monomials(|m| expand_once(m, &relations).map(|rep| substitute(&rep, &relations)));
        self.relations = relations;
        Ok(())
    }

    /// Transport ratio from `(2, 1)`, checked against `v_g`.
    fn transport(&mut self, v_g: f64) -> Result<f64, ReductionError> {
        let p = bucket_poly(&self.e, 2, 1);
        let a = self.amplitude();
        let cn = coeff_of(&p, a.with_deriv(Deriv::new(1, 0, 0)));
        let cm = coeff_of(&p, a.with_deriv(Deriv::new(0, 1, 0)));
        if cm.norm() <= self.tol.structural * self.scale {
            return Err(ReductionError::NoSlowTime);
        }
        let t = cn / cm;
        let transport = t.re;
        let mismatch = (t - Complex64::new(v_g, 0.0)).norm();
        if mismatch > 1e-8 * v_g.abs().max(1.0) {
            return Err(ReductionError::TransportMismatch { transport, v_g });
        }
        self.report(2, 1, BucketAction::Transport, mismatch, cm.norm() / self.scale);
        self.e = self.e.to_moving_frame(v_g);
        Ok(transport)
    }

    /// Non-resonant harmonic: `c w_{j-1}^(α) + rest = 0`.
    fn solve_harmonic(&mut self, j: u8, a: i8) -> Result<(), ReductionError> {
        let (p, _) = self.substituted(j, a);
        let w = self.plain(j - 1, a);
        let c = coeff_of(&p, w);
        let margin = c.norm() / self.scale;
        if margin <= self.tol.structural {
            return Err(ReductionError::HarmonicResonance { order: j, harmonic: a, margin });
        }
        let mut rhs = p;
        rhs.remove(&alloc::vec![w]);
        for v in rhs.values_mut() {
            *v = -*v / c;
        }
        if j == 2 && a == 2 {
            let sq = alloc::vec![self.amplitude(), self.amplitude()];
            self.second_harmonic = Some(rhs.get(&sq).copied().unwrap_or_default());
        }
        self.relations.push(Relation { order: j, field: w.field, deriv: Deriv::NONE, rhs });
        self.report(j, a, BucketAction::Solved, 0.0, margin);
        Ok(())
    }

    fn solve_mean_field(&mut self, j: u8) -> Result<(), ReductionError> {
        let (p, reference) = self.substituted(j, 0);
        let tiny = self.tol.structural * reference.max(f64::MIN_POSITIVE);
        if max_abs(&p) <= tiny {
            self.report(j, 0, BucketAction::Consistent, max_abs(&p) / reference.max(f64::MIN_POSITIVE), 0.0);
            return Ok(());
        }
        let w = self.plain(j - 1, 0);
        let c = coeff_of(&p, w);
        let algebraic = c.norm() / self.scale > self.tol.structural;
        let relation_poly = if algebraic {
            p
        } else {
            integrate::integrate_n(&p, tiny).ok_or(ReductionError::NonIntegrableMeanField(j))?
        };
        // Pick the unknown to solve for: highest order, then fewest derivatives.
        let mut target: Option<(SlowFactor, Complex64)> = None;
        for (m, c) in &relation_poly {
            let zeros = m.iter().filter(|f| f.field.harmonic == 0).count();
            if zeros == 0 {
                continue;
            }
            if zeros > 1 || m.len() > 1 {
                return Err(ReductionError::NonIntegrableMeanField(j));
            }
            let f = m[0];
            let better = match target {
                None => true,
                Some((t, _)) => (f.field.order, core::cmp::Reverse(f.deriv.total())) > (t.field.order, core::cmp::Reverse(t.deriv.total())),
            };
            if better {
                target = Some((f, *c));
            }
        }
        let Some((f, c)) = target else {
            return Err(ReductionError::NonIntegrableMeanField(j));
        };
        let mut rhs = relation_poly;
        rhs.remove(&alloc::vec![f]);
        for v in rhs.values_mut() {
            *v = -*v / c;
        }
        let abs_sq = self.abs_sq();
        if rhs.len() == 1 && rhs.contains_key(&abs_sq) {
            self.mean_field = Some(MeanField { field: f.field, deriv: f.deriv, coefficient: rhs[&abs_sq] });
        }
        self.relations.push(Relation { order: j, field: f.field, deriv: f.deriv, rhs });
        self.report(j, 0, BucketAction::MeanField, 0.0, c.norm() / self.scale);
        Ok(())
    }

    /// `(2, 1)` after the frame change must vanish identically.
    fn check_secular(&mut self) -> Result<(), ReductionError> {
        let (p, reference) = self.substituted(2, 1);
        let residual = max_abs(&p) / reference.max(f64::MIN_POSITIVE);
        if residual > self.tol.structural {
            let (m, c) = p.iter().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
            return Err(ReductionError::UnreducedTerm { term: self.describe(m), relative: c.norm() / reference });
        }
        self.report(2, 1, BucketAction::Consistent, residual, 0.0);
        Ok(())
    }

    fn extract_nls(&mut self) -> Result<(Complex64, Complex64), ReductionError> {
        let (p, _) = self.substituted(3, 1);
        let a = self.amplitude();
        let m2 = alloc::vec![a.with_deriv(Deriv::new(0, 0, 1))];
        let nn = alloc::vec![a.with_deriv(Deriv::new(2, 0, 0))];
        let mut cubic = alloc::vec![a, a, a.conjugate()];
        cubic.sort_unstable();
        let c_m2 = p.get(&m2).copied().unwrap_or_default();
        let c_nn = p.get(&nn).copied().unwrap_or_default();
        let c_nl = if self.reality == Reality::RealField { p.get(&cubic).copied().unwrap_or_default() } else { Complex64::default() };
        let reference = c_m2.norm().max(c_nn.norm()).max(c_nl.norm());
        if c_m2.norm() <= self.tol.structural * self.scale {
            return Err(ReductionError::NoSlowTime);
        }
        let mut residual: f64 = 0.0;
        for (m, c) in &p {
            if *m == m2 || *m == nn || (*m == cubic && self.reality == Reality::RealField) {
                continue;
            }
            let rel = c.norm() / reference;
            if rel > 1e-9 {
                if m.iter().any(|f| f.field.harmonic == 0) {
                    return Err(ReductionError::BareMeanField);
                }
                return Err(ReductionError::UnreducedTerm { term: self.describe(m), relative: rel });
            }
            residual = residual.max(rel);
        }
        self.report(3, 1, BucketAction::Nls, residual, c_m2.norm() / self.scale);
        let mi = Complex64::new(0.0, -1.0);
        Ok((mi * c_nn / c_m2, mi * c_nl / c_m2))
    }
}

/// Solves the cascade of an expanded series for the NLS coefficients.
///
/// Order 1 removes the non-resonant leading harmonics. Order 2 yields the
/// transport velocity (then the frame moves with it), the second harmonic
/// and the mean field. Order 3 yields the envelope equation
/// `i δ_{m2} A = rho1 δ²_{n2} A + rho2 |A|² A`.
pub fn solve_cascade(
    expanded: &MsExpr,
    symbol: &LinearSymbol,
    point: &DispersionPoint,
    tol: &Tolerances,
) -> Result<Cascade, ReductionError> {
    let reality = expanded.mode.reality;
    let mut s = Solver {
        e: expanded.clone(),
        tol,
        scale: symbol.scale(),
        reality,
        relations: Vec::new(),
        buckets: Vec::new(),
        second_harmonic: None,
        mean_field: None,
    };
    s.leading_order()?;
    let transport = s.transport(point.v_g)?;

    let mut others: Vec<i8> = harmonics(reality).into_iter().filter(|a| *a != 0 && *a != 1).collect();
    others.sort_by_key(|a| (core::cmp::Reverse(a.abs()), core::cmp::Reverse(*a)));
    for a in &others {
        s.solve_harmonic(2, *a)?;
    }
    s.solve_mean_field(2)?;
    s.check_secular()?;
    for a in &others {
        s.solve_harmonic(3, *a)?;
    }
    s.solve_mean_field(3)?;
    let (rho1, rho2) = s.extract_nls()?;

    Ok(Cascade {
        transport,
        second_harmonic: s.second_harmonic,
        mean_field: s.mean_field,
        rho1,
        rho2,
        relations: s.relations,
        buckets: s.buckets,
        dropped_harmonics: s.e.dropped_harmonics,
        mode: s.e.mode,
    })
}

/// Classifies the reduced equation.
pub fn classify(rho1: Complex64, rho2: Complex64, tol: f64) -> Result<Classification, ReductionError> {
    if rho1.norm() <= tol {
        return Err(ReductionError::ZeroDispersion);
    }
    if rho2.norm() <= tol * rho1.norm().max(1.0) {
        return Ok(Classification::LinearSchrodinger);
    }
    if rho1.im.abs() <= tol * (1.0 + rho1.norm()) && rho2.im.abs() <= tol * (1.0 + rho2.norm()) {
        Ok(Classification::IntegrableNls)
    } else {
        Ok(Classification::NonIntegrable)
    }
}

/// Full pipeline for one carrier wavenumber.
pub fn analyze(
    ir: &EquationIr,
    params: &Params,
    reality: Reality,
    kappa: f64,
    branch: usize,
    tol: &Tolerances,
) -> Result<ReductionResult, AnalysisError> {
    validate(ir, params)?;
    let poly = taylor_jet(ir, params)?;
    let symbol = LinearSymbol::from_poly(&poly)?;
    let point = solve_dispersion(&symbol, kappa, branch)?;
    analyze_at(&poly, &symbol, point, reality, tol)
}

/// Reduction at an already solved dispersion point.
pub fn analyze_at(
    poly: &PolyEquation,
    symbol: &LinearSymbol,
    point: DispersionPoint,
    reality: Reality,
    tol: &Tolerances,
) -> Result<ReductionResult, AnalysisError> {
    let expanded = expand_multiscale(poly, &point, reality, 3);
    let cascade = solve_cascade(&expanded, symbol, &point, tol)?;
    let classification = classify(cascade.rho1, cascade.rho2, tol.classify)?;
    Ok(ReductionResult { point, cascade, classification })
}
