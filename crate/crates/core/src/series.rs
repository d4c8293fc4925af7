//! Truncated multiscale series.
//!
//! A term is `coeff · ε^j · E^α · Π factors`, where `E = e^{i(κn − ωm)}` is
//! the carrier and each factor is a slow derivative of an amplitude
//! `w_k^(α)` (or its conjugate). Before the frame change the slow derivatives
//! are `δ_{n1}, δ_{m1}, δ_{m2}` (`∂_{t1}, ∂_{t2}` for continuous time); after it
//! they are `δ_{n2}, δ_{m2}`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::eqdsl::TimeKind;
use crate::{Complex64, Reality};

/// Harmonics beyond this are discarded.
pub const MAX_HARMONIC: i8 = 3;
/// Highest total slow-derivative order kept on a factor.
pub const MAX_DERIV: u8 = 3;
/// Relative size below which coefficients are treated as rounding noise.
pub const NOISE: f64 = 1e-14;

/// Amplitude `w_k^(α)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldId {
    pub order: u8,
    pub harmonic: i8,
}

impl FieldId {
    pub const fn new(order: u8, harmonic: i8) -> Self {
        FieldId { order, harmonic }
    }
}

/// Slow derivative orders. In the moving frame `n` counts `δ_{n2}` and `m1`
/// is always zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Deriv {
    pub n: u8,
    pub m1: u8,
    pub m2: u8,
}

impl Deriv {
    pub const NONE: Deriv = Deriv { n: 0, m1: 0, m2: 0 };

    pub const fn new(n: u8, m1: u8, m2: u8) -> Self {
        Deriv { n, m1, m2 }
    }

    pub fn total(&self) -> u8 {
        self.n + self.m1 + self.m2
    }

    /// Componentwise `self ≥ other`.
    pub fn covers(&self, other: &Deriv) -> bool {
        self.n >= other.n && self.m1 >= other.m1 && self.m2 >= other.m2
    }

    fn bump(mut self, v: SlowVar) -> Self {
        match v {
            SlowVar::N => self.n += 1,
            SlowVar::M1 => self.m1 += 1,
            SlowVar::M2 => self.m2 += 1,
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlowVar {
    N,
    M1,
    M2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlowFactor {
    pub field: FieldId,
    pub conj: bool,
    pub deriv: Deriv,
}

impl SlowFactor {
    /// Canonical factor: in real-field mode a negative harmonic is stored as
    /// the conjugate of the positive one and harmonic 0 is never conjugated.
    pub fn new(field: FieldId, conj: bool, deriv: Deriv, reality: Reality) -> Self {
        match reality {
            Reality::ComplexField => SlowFactor { field, conj: false, deriv },
            Reality::RealField if field.harmonic < 0 => SlowFactor {
                field: FieldId::new(field.order, -field.harmonic),
                conj: !conj,
                deriv,
            },
            Reality::RealField if field.harmonic == 0 => SlowFactor { field, conj: false, deriv },
            Reality::RealField => SlowFactor { field, conj, deriv },
        }
    }

    pub fn plain(field: FieldId) -> Self {
        SlowFactor { field, conj: false, deriv: Deriv::NONE }
    }

    /// Signed harmonic carried by this factor.
    pub fn harmonic(&self) -> i8 {
        if self.conj { -self.field.harmonic } else { self.field.harmonic }
    }

    pub fn conjugate(&self) -> Self {
        if self.field.harmonic == 0 { *self } else { SlowFactor { conj: !self.conj, ..*self } }
    }

    pub fn with_deriv(&self, deriv: Deriv) -> Self {
        SlowFactor { deriv, ..*self }
    }
}

/// Sorted product of factors; the empty monomial is 1.
pub type Monomial = Vec<SlowFactor>;

/// Polynomial in slow factors.
pub type SlowPoly = BTreeMap<Monomial, Complex64>;

fn sorted(mut m: Monomial) -> Monomial {
    m.sort_unstable();
    m
}

pub fn monomial_harmonic(m: &[SlowFactor]) -> i8 {
    m.iter().map(SlowFactor::harmonic).sum()
}

fn add_to(p: &mut SlowPoly, m: Monomial, c: Complex64) {
    *p.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
}

/// Derivative of a monomial by the product rule.
pub fn diff_monomial(m: &[SlowFactor], v: SlowVar) -> SlowPoly {
    let mut out = SlowPoly::new();
    for i in 0..m.len() {
        let d = m[i].deriv.bump(v);
        if d.total() > MAX_DERIV {
            continue;
        }
        let mut m2 = m.to_vec();
        m2[i] = m2[i].with_deriv(d);
        add_to(&mut out, sorted(m2), Complex64::new(1.0, 0.0));
    }
    out
}

pub fn diff_poly(p: &SlowPoly, v: SlowVar) -> SlowPoly {
    let mut out = SlowPoly::new();
    for (m, c) in p {
        for (m2, c2) in diff_monomial(m, v) {
            add_to(&mut out, m2, c * c2);
        }
    }
    out
}

/// Applies `δ_n^{d.n} δ_{m1}^{d.m1} δ_{m2}^{d.m2}` to a polynomial.
pub fn diff_poly_by(p: &SlowPoly, d: Deriv) -> SlowPoly {
    let mut out = p.clone();
    for (v, k) in [(SlowVar::N, d.n), (SlowVar::M1, d.m1), (SlowVar::M2, d.m2)] {
        for _ in 0..k {
            out = diff_poly(&out, v);
        }
    }
    out
}

pub fn mul_poly(a: &SlowPoly, b: &SlowPoly) -> SlowPoly {
    let mut out = SlowPoly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m = sorted(ma.iter().chain(mb.iter()).copied().collect());
            add_to(&mut out, m, ca * cb);
        }
    }
    out
}

pub fn conj_poly(p: &SlowPoly) -> SlowPoly {
    p.iter().map(|(m, c)| (sorted(m.iter().map(SlowFactor::conjugate).collect()), c.conj())).collect()
}

/// Removes coefficients below `tol` in modulus.
pub fn prune_poly(p: &mut SlowPoly, tol: f64) {
    p.retain(|_, c| c.norm() > tol);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesMode {
    pub reality: Reality,
    pub time: TimeKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Slow variables `n1, m1, m2`.
    Lab,
    /// Slow variables `n2 = n1 − v_g m1, m2`.
    Moving,
}

/// Carrier wavenumber and frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Carrier {
    pub kappa: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsTerm {
    pub coeff: Complex64,
    pub eps: u8,
    pub harmonic: i8,
    pub monomial: Monomial,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("conjugation is undefined for a complex-field series")]
    ComplexFieldModel,
    #[error("time derivatives need a differential-difference series")]
    FullyDiscreteModel,
}

/// Truncated series in `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct MsExpr {
    pub mode: SeriesMode,
    pub frame: Frame,
    pub max_order: u8,
    pub terms: Vec<MsTerm>,
    /// Number of products discarded for exceeding [`MAX_HARMONIC`].
    pub dropped_harmonics: usize,
}

type TermKey = (u8, i8, Monomial);

impl MsExpr {
    pub fn zero(mode: SeriesMode, frame: Frame, max_order: u8) -> Self {
        MsExpr { mode, frame, max_order, terms: Vec::new(), dropped_harmonics: 0 }
    }

    /// `c · ε^eps · E^α · w_k^(α)` with `α` taken from the field.
    pub fn field(mode: SeriesMode, frame: Frame, max_order: u8, field: FieldId, conj: bool, eps: u8, c: Complex64) -> Self {
        let f = SlowFactor::new(field, conj, Deriv::NONE, mode.reality);
        let mut e = Self::zero(mode, frame, max_order);
        if eps <= max_order {
            e.terms.push(MsTerm { coeff: c, eps, harmonic: f.harmonic(), monomial: alloc::vec![f] });
        }
        e
    }

    fn with_terms(&self, map: BTreeMap<TermKey, Complex64>, dropped: usize) -> Self {
        let mut e = MsExpr { terms: Vec::with_capacity(map.len()), dropped_harmonics: dropped, ..Self::zero(self.mode, self.frame, self.max_order) };
        let max = map.values().map(|c| c.norm()).fold(0.0, f64::max);
        for ((eps, harmonic, monomial), coeff) in map {
            if coeff.norm() > NOISE * max {
                e.terms.push(MsTerm { coeff, eps, harmonic, monomial });
            }
        }
        e
    }

    fn accumulate(map: &mut BTreeMap<TermKey, Complex64>, eps: u8, harmonic: i8, m: Monomial, c: Complex64) {
        *map.entry((eps, harmonic, m)).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    /// Canonical form: factors sorted, like terms merged, noise dropped.
    pub fn normalize(&self) -> Self {
        let mut map = BTreeMap::new();
        for t in &self.terms {
            if t.eps <= self.max_order {
                Self::accumulate(&mut map, t.eps, t.harmonic, sorted(t.monomial.clone()), t.coeff);
            }
        }
        self.with_terms(map, self.dropped_harmonics)
    }

    pub fn add(&self, other: &MsExpr) -> Self {
        let mut map = BTreeMap::new();
        for t in self.terms.iter().chain(&other.terms) {
            Self::accumulate(&mut map, t.eps, t.harmonic, sorted(t.monomial.clone()), t.coeff);
        }
        self.with_terms(map, self.dropped_harmonics + other.dropped_harmonics)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut e = self.clone();
        for t in &mut e.terms {
            t.coeff *= c;
        }
        e.normalize()
    }

    /// Truncated product.
    pub fn mul(&self, other: &MsExpr) -> Self {
        let mut map = BTreeMap::new();
        let mut dropped = self.dropped_harmonics + other.dropped_harmonics;
        for a in &self.terms {
            for b in &other.terms {
                let eps = a.eps + b.eps;
                if eps > self.max_order {
                    continue;
                }
                let h = a.harmonic + b.harmonic;
                if h.abs() > MAX_HARMONIC {
                    dropped += 1;
                    continue;
                }
                let m = sorted(a.monomial.iter().chain(&b.monomial).copied().collect());
                Self::accumulate(&mut map, eps, h, m, a.coeff * b.coeff);
            }
        }
        self.with_terms(map, dropped)
    }

    /// Complex conjugate of a real-field series.
    pub fn conjugate(&self) -> Result<Self, SeriesError> {
        if self.mode.reality == Reality::ComplexField {
            return Err(SeriesError::ComplexFieldModel);
        }
        let mut map = BTreeMap::new();
        for t in &self.terms {
            let m = sorted(t.monomial.iter().map(SlowFactor::conjugate).collect());
            Self::accumulate(&mut map, t.eps, -t.harmonic, m, t.coeff.conj());
        }
        Ok(self.with_terms(map, self.dropped_harmonics))
    }

    /// Expansion of the lattice shift `T_n^{dn} T_m^{dm}`: the carrier picks
    /// up `e^{iα(κ dn − ω dm)}` and the slow part is acted on by
    /// `exp(dn ε δ_{n1}) exp(dm (ε δ_{m1} + ε² δ_{m2}))`.
    pub fn apply_shift(&self, dn: i32, dm: i32, carrier: Carrier) -> Self {
        debug_assert_eq!(self.frame, Frame::Lab);
        let ops = shift_operator(dn as f64, dm as f64, self.max_order);
        let mut map = BTreeMap::new();
        for t in &self.terms {
            let arg = f64::from(t.harmonic) * (carrier.kappa * dn as f64 - carrier.omega * dm as f64);
            let c = t.coeff * Complex64::new(0.0, arg).exp();
            let base: SlowPoly = core::iter::once((t.monomial.clone(), c)).collect();
            for (d, w) in &ops {
                let eps = t.eps + d.n + d.m1 + 2 * d.m2;
                if eps > self.max_order {
                    continue;
                }
                for (m, cm) in diff_poly_by(&base, *d) {
                    Self::accumulate(&mut map, eps, t.harmonic, m, cm * w);
                }
            }
        }
        self.with_terms(map, self.dropped_harmonics)
    }

    /// `d/dt` of a continuous-time series: `−iαω + ε ∂_{t1} + ε² ∂_{t2}`.
    pub fn apply_time_derivative(&self, carrier: Carrier) -> Result<Self, SeriesError> {
        if self.mode.time != TimeKind::DifferentialDifference {
            return Err(SeriesError::FullyDiscreteModel);
        }
        let mut map = BTreeMap::new();
        for t in &self.terms {
            let fast = Complex64::new(0.0, -f64::from(t.harmonic) * carrier.omega);
            Self::accumulate(&mut map, t.eps, t.harmonic, t.monomial.clone(), t.coeff * fast);
            for (v, de) in [(SlowVar::M1, 1), (SlowVar::M2, 2)] {
                if t.eps + de > self.max_order {
                    continue;
                }
                for (m, c) in diff_monomial(&t.monomial, v) {
                    Self::accumulate(&mut map, t.eps + de, t.harmonic, m, t.coeff * c);
                }
            }
        }
        Ok(self.with_terms(map, self.dropped_harmonics))
    }

    /// Terms at `ε^j E^α`.
    pub fn bucket(&self, j: u8, alpha: i8) -> Vec<(Complex64, Monomial)> {
        self.terms
            .iter()
            .filter(|t| t.eps == j && t.harmonic == alpha)
            .map(|t| (t.coeff, t.monomial.clone()))
            .collect()
    }

    /// Changes to the moving frame: `δ_{m1} ↦ −v_g δ_{n2}`, `δ_{n1} ↦ δ_{n2}`.
    pub fn to_moving_frame(&self, v_g: f64) -> Self {
        let mut map = BTreeMap::new();
        for t in &self.terms {
            let mut c = t.coeff;
            let m = t
                .monomial
                .iter()
                .map(|f| {
                    c *= (-v_g).powi(i32::from(f.deriv.m1));
                    f.with_deriv(Deriv::new(f.deriv.n + f.deriv.m1, 0, f.deriv.m2))
                })
                .collect();
            Self::accumulate(&mut map, t.eps, t.harmonic, sorted(m), c);
        }
        let mut e = self.with_terms(map, self.dropped_harmonics);
        e.frame = Frame::Moving;
        e
    }

    /// Replaces each monomial `m` by `f(m)` when it returns `Some`.
    pub fn map_monomials(&self, mut f: impl FnMut(&Monomial) -> Option<SlowPoly>) -> Self {
        let mut map = BTreeMap::new();
        for t in &self.terms {
            match f(&t.monomial) {
                Some(p) => {
                    for (m, c) in p {
                        Self::accumulate(&mut map, t.eps, t.harmonic, m, t.coeff * c);
                    }
                }
                None => Self::accumulate(&mut map, t.eps, t.harmonic, t.monomial.clone(), t.coeff),
            }
        }
        self.with_terms(map, self.dropped_harmonics)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max)
    }
}

/// Terms `(derivative, weight)` of the slow shift operator up to `max_order`.
fn shift_operator(dn: f64, dm: f64, max_order: u8) -> Vec<(Deriv, f64)> {
    let fact = |k: u8| (1..=k).map(f64::from).product::<f64>();
    let mut out = Vec::new();
    for p in 0..=max_order {
        for q in 0..=max_order - p {
            for r in 0..=(max_order - p - q) / 2 {
                let w = dn.powi(p.into()) / fact(p) * dm.powi(q.into()) / fact(q) * dm.powi(r.into()) / fact(r);
                if w != 0.0 {
                    out.push((Deriv::new(p, q, r), w));
                }
            }
        }
    }
    out
}

pub(crate) struct FmtCoeff(pub Complex64);

impl fmt::Display for FmtCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6e}{:+.6e}i)", self.0.re, self.0.im)
    }
}

/// Writes `d[n1]^p d[m1]^q d[m2]^r w[k,α](±)` with zero powers omitted.
pub fn fmt_factor(f: &mut fmt::Formatter<'_>, x: &SlowFactor, mode: SeriesMode, frame: Frame) -> fmt::Result {
    let (n, m1, m2) = match (frame, mode.time) {
        (Frame::Lab, TimeKind::FullyDiscrete) => ("n1", "m1", "m2"),
        (Frame::Lab, TimeKind::DifferentialDifference) => ("n1", "t1", "t2"),
        (Frame::Moving, TimeKind::FullyDiscrete) => ("n2", "m1", "m2"),
        (Frame::Moving, TimeKind::DifferentialDifference) => ("n2", "t1", "t2"),
    };
    for (name, k) in [(n, x.deriv.n), (m1, x.deriv.m1), (m2, x.deriv.m2)] {
        match k {
            0 => {}
            1 => write!(f, "d[{name}] ")?,
            _ => write!(f, "d[{name}]^{k} ")?,
        }
    }
    write!(f, "w[{},{}]({})", x.field.order, x.field.harmonic, if x.conj { '-' } else { '+' })
}

/// Displays a monomial as `factor * factor * ...` (`1` when empty).
pub struct DisplayMonomial<'a> {
    pub monomial: &'a [SlowFactor],
    pub mode: SeriesMode,
    pub frame: Frame,
}

impl fmt::Display for DisplayMonomial<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monomial.is_empty() {
            return f.write_str("1");
        }
        for (i, x) in self.monomial.iter().enumerate() {
            if i > 0 {
                f.write_str(" * ")?;
            }
            fmt_factor(f, x, self.mode, self.frame)?;
        }
        Ok(())
    }
}

/// Debug printer: one term per line,
/// `coeff * eps^j * E^α * d[n1]^p d[m1]^q d[m2]^r w[k,α](±) * ...`.
impl fmt::Display for MsExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            write!(f, "{} * eps^{} * E^{}", FmtCoeff(t.coeff), t.eps, t.harmonic)?;
            for x in &t.monomial {
                f.write_str(" * ")?;
                fmt_factor(f, x, self.mode, self.frame)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    const REAL: SeriesMode = SeriesMode { reality: Reality::RealField, time: TimeKind::FullyDiscrete };
    const CPLX: SeriesMode = SeriesMode { reality: Reality::ComplexField, time: TimeKind::DifferentialDifference };

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn amp(mode: SeriesMode) -> MsExpr {
        MsExpr::field(mode, Frame::Lab, 3, FieldId::new(0, 1), false, 1, one())
    }

    #[test]
    fn shift_by_one_site() {
        let c = Carrier { kappa: 0.7, omega: 0.3 };
        let s = amp(REAL).apply_shift(1, 0, c);
        // e^{iκ} (A + ε δA + ε²/2 δ²A)
        assert_eq!(s.terms.len(), 3);
        let ph = Complex64::new(0.0, 0.7).exp();
        assert!((s.terms[0].coeff - ph).norm() < 1e-15);
        assert_eq!(s.terms[1].monomial[0].deriv, Deriv::new(1, 0, 0));
        assert!((s.terms[2].coeff - ph * 0.5).norm() < 1e-15);
        assert_eq!(s.terms[2].eps, 3);
    }

    #[test]
    fn time_shift_has_two_slow_times() {
        let c = Carrier { kappa: 0.7, omega: 0.3 };
        let s = amp(REAL).apply_shift(0, 1, c);
        let ph = Complex64::new(0.0, -0.3).exp();
        let eps3: Vec<_> = s.terms.iter().filter(|t| t.eps == 3).collect();
        // ε³: δ_{m1}²/2 and δ_{m2}
        assert_eq!(eps3.len(), 2);
        for t in eps3 {
            let expect = if t.monomial[0].deriv.m2 == 1 { ph } else { ph * 0.5 };
            assert!((t.coeff - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn real_mode_canonical_conjugates() {
        let f = SlowFactor::new(FieldId::new(0, -1), false, Deriv::NONE, Reality::RealField);
        assert_eq!(f, SlowFactor { field: FieldId::new(0, 1), conj: true, deriv: Deriv::NONE });
        let z = SlowFactor::new(FieldId::new(1, 0), true, Deriv::NONE, Reality::RealField);
        assert!(!z.conj);
        let a = amp(REAL);
        let abar = a.conjugate().unwrap();
        assert_eq!(abar.terms[0].harmonic, -1);
        let sq = a.mul(&abar);
        assert_eq!(sq.terms[0].harmonic, 0);
        assert!(amp(CPLX).conjugate().is_err());
    }

    #[test]
    fn harmonic_cap_counts_drops() {
        let a = MsExpr::field(REAL, Frame::Lab, 3, FieldId::new(0, 2), false, 1, one());
        let p = a.mul(&a);
        assert!(p.terms.is_empty());
        assert_eq!(p.dropped_harmonics, 1);
    }

    #[test]
    fn time_derivative_requires_continuous_time() {
        let c = Carrier { kappa: 0.7, omega: 0.3 };
        assert_eq!(amp(REAL).apply_time_derivative(c), Err(SeriesError::FullyDiscreteModel));
        let d = amp(CPLX).apply_time_derivative(c).unwrap();
        assert_eq!(d.terms.len(), 3);
        assert!((d.terms[0].coeff - Complex64::new(0.0, -0.3)).norm() < 1e-15);
    }

    #[test]
    fn moving_frame_maps_time_derivative() {
        let c = Carrier { kappa: 0.7, omega: 0.3 };
        let s = amp(REAL).apply_shift(0, 1, c).to_moving_frame(0.5);
        // ε² term: δ_{m1} ↦ −v_g δ_{n2}
        let b = s.bucket(2, 1);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].1[0].deriv, Deriv::new(1, 0, 0));
        assert!((b[0].0 - Complex64::new(0.0, -0.3).exp() * -0.5).norm() < 1e-15);
    }

    #[test]
    fn printer_format() {
        let s = amp(REAL).apply_shift(1, 0, Carrier { kappa: 0.0, omega: 0.0 });
        let text = s.to_string();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "(1.000000e0+0.000000e0i) * eps^1 * E^1 * w[0,1](+)");
        assert_eq!(lines[2], "(5.000000e-1+0.000000e0i) * eps^3 * E^1 * d[n1]^2 w[0,1](+)");
    }
}
