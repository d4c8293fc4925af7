//! Truncated multivariate Taylor polynomials of total degree ≤ 3.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::eval::{Algebra, EvalError, eval};
use super::{EquationIr, Shift, TimeKind, ValidateError};
use crate::{Complex64, Params};

const MAX_DEGREE: usize = 3;

/// Sorted slot indices of a monomial, e.g. `[0, 0, 2]` for `x0² x2`.
pub type SlotMonomial = Vec<usize>;

/// Monomial basis with a precomputed truncated product table.
struct Basis {
    monos: Vec<SlotMonomial>,
    /// For each monomial `i`, the pairs `(j, k)` with `mono_i * mono_j = mono_k`.
    products: Vec<Vec<(usize, usize)>>,
    nvars: usize,
}

impl Basis {
    fn new(nvars: usize) -> Self {
        let mut monos: Vec<SlotMonomial> = vec![Vec::new()];
        let mut frontier: Vec<SlotMonomial> = vec![Vec::new()];
        for _ in 0..MAX_DEGREE {
            let mut next = Vec::new();
            for m in &frontier {
                let lo = m.last().copied().unwrap_or(0);
                for v in lo..nvars {
                    let mut m2 = m.clone();
                    m2.push(v);
                    next.push(m2);
                }
            }
            monos.extend(next.iter().cloned());
            frontier = next;
        }
        let index: BTreeMap<&SlotMonomial, usize> = monos.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut products = vec![Vec::new(); monos.len()];
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                if a.len() + b.len() > MAX_DEGREE {
                    continue;
                }
                let mut m: SlotMonomial = a.iter().chain(b.iter()).copied().collect();
                m.sort_unstable();
                products[i].push((j, index[&m]));
            }
        }
        Basis { monos, products, nvars }
    }
}

/// Jet algebra; variables are the field slots followed by the `dt` slots.
struct JetAlgebra<'a> {
    basis: &'a Basis,
    slot_index: &'a BTreeMap<Shift, usize>,
    dt_index: &'a BTreeMap<i32, usize>,
}

type Jet = Vec<Complex64>;

impl JetAlgebra<'_> {
    fn zero(&self) -> Jet {
        vec![Complex64::new(0.0, 0.0); self.basis.monos.len()]
    }

    fn var(&self, v: usize) -> Jet {
        let mut j = self.zero();
        // Degree-1 monomials follow the constant in variable order.
        j[1 + v] = Complex64::new(1.0, 0.0);
        j
    }

    /// Sum of `coeffs[k] * h^k` for a jet `h` with zero constant term.
    fn series(&self, h: &Jet, coeffs: [Complex64; MAX_DEGREE + 1]) -> Jet {
        let mut out = self.zero();
        let mut pow = self.zero();
        pow[0] = Complex64::new(1.0, 0.0);
        for c in coeffs {
            for (o, p) in out.iter_mut().zip(&pow) {
                *o += c * p;
            }
            pow = self.mul(&pow, h);
        }
        out
    }
}

impl Algebra for JetAlgebra<'_> {
    type V = Jet;

    fn constant(&self, c: Complex64) -> Jet {
        let mut j = self.zero();
        j[0] = c;
        j
    }
    fn field(&self, s: Shift) -> Jet {
        self.var(self.slot_index[&s])
    }
    fn time_deriv(&self, dn: i32) -> Jet {
        self.var(self.slot_index.len() + self.dt_index[&dn])
    }
    fn add(&self, a: &Jet, b: &Jet) -> Jet {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }
    fn sub(&self, a: &Jet, b: &Jet) -> Jet {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }
    fn mul(&self, a: &Jet, b: &Jet) -> Jet {
        let mut out = self.zero();
        for (i, x) in a.iter().enumerate() {
            if *x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(j, k) in &self.basis.products[i] {
                out[k] += x * b[j];
            }
        }
        out
    }
    fn div(&self, a: &Jet, b: &Jet) -> Option<Jet> {
        let b0 = b[0];
        if b0 == Complex64::new(0.0, 0.0) {
            return None;
        }
        let mut h = b.clone();
        h[0] = Complex64::new(0.0, 0.0);
        // 1/(b0 + h) = (1/b0) Σ (-h/b0)^k
        let r = Complex64::new(1.0, 0.0) / b0;
        let recip = self.series(&h, [r, -r * r, r * r * r, -r * r * r * r]);
        Some(self.mul(a, &recip))
    }
    fn exp(&self, a: &Jet) -> Jet {
        let e0 = a[0].exp();
        let mut h = a.clone();
        h[0] = Complex64::new(0.0, 0.0);
        self.series(&h, [e0, e0, e0 / 2.0, e0 / 6.0])
    }
    fn neg(&self, a: &Jet) -> Jet {
        a.iter().map(|x| -x).collect()
    }
}

/// Cubic Taylor polynomial of an equation about `u ≡ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyEquation {
    pub time_kind: TimeKind,
    /// Field slots that appear in at least one term.
    pub slots: Vec<Shift>,
    /// `dn` of the time-derivative slots (differential-difference only).
    pub dt_slots: Vec<i32>,
    /// Coefficients of the field monomials of degree 1 to 3.
    pub terms: BTreeMap<SlotMonomial, Complex64>,
    /// Coefficient of each (linear) time-derivative slot.
    pub dt_terms: BTreeMap<usize, Complex64>,
}

impl PolyEquation {
    /// Highest degree present.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Evaluates the polynomial at slot values.
    pub fn eval(&self, field: &[Complex64], dt: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            acc += m.iter().fold(*c, |p, &s| p * field[s]);
        }
        for (s, c) in &self.dt_terms {
            acc += c * dt[*s];
        }
        acc
    }
}

/// Relative size below which jet coefficients are treated as rounding noise.
const JET_NOISE: f64 = 1e-13;

/// Computes the degree-3 Taylor polynomial of the equation at `u ≡ 0`.
pub fn taylor_jet(ir: &EquationIr, params: &Params) -> Result<PolyEquation, ValidateError> {
    let slot_index: BTreeMap<Shift, usize> = ir.fields_used.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let dt_index: BTreeMap<i32, usize> = ir.dt_fields.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let basis = Basis::new(slot_index.len() + dt_index.len());
    let alg = JetAlgebra { basis: &basis, slot_index: &slot_index, dt_index: &dt_index };
    let jet = eval(&ir.root, params, &alg).map_err(|e| match e {
        EvalError::MissingParameter(p) => ValidateError::MissingParameter(p),
        EvalError::DivisionByZero => ValidateError::ZeroDenominatorAtOrigin,
    })?;
    if jet.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(ValidateError::NonFinite);
    }

    // The constant term is compared against the size of the top-level
    // summands so that exactly cancelling floating-point sums pass.
    let scale = summand_scale(&ir.root, params, &alg).max(1.0);
    if jet[0].norm() > 1e-12 * scale {
        return Err(ValidateError::NonzeroAtOrigin(jet[0].norm()));
    }

    let nfield = slot_index.len();
    let max = jet.iter().skip(1).map(|c| c.norm()).fold(0.0, f64::max);
    let mut terms = BTreeMap::new();
    let mut dt_terms = BTreeMap::new();
    for (m, c) in basis.monos.iter().zip(&jet).skip(1) {
        if c.norm() <= JET_NOISE * max {
            continue;
        }
        let has_dt = m.iter().any(|&v| v >= nfield);
        if has_dt {
            if m.len() > 1 {
                return Err(ValidateError::NonlinearTimeDerivative);
            }
            dt_terms.insert(m[0] - nfield, *c);
        } else {
            terms.insert(m.clone(), *c);
        }
    }
    debug_assert_eq!(basis.nvars, nfield + dt_index.len());

    // Drop slots that only appeared in cancelling terms.
    let mut used = vec![false; nfield];
    for m in terms.keys() {
        for &s in m {
            used[s] = true;
        }
    }
    let remap: Vec<Option<usize>> = used
        .iter()
        .scan(0, |next, &u| {
            Some(if u {
                *next += 1;
                Some(*next - 1)
            } else {
                None
            })
        })
        .collect();
    let slots = ir.fields_used.iter().zip(&used).filter(|(_, u)| **u).map(|(s, _)| *s).collect();
    let terms = terms
        .into_iter()
        .map(|(m, c)| (m.iter().map(|&s| remap[s].unwrap()).collect(), c))
        .collect();
    let mut dt_used: Vec<usize> = dt_terms.keys().copied().collect();
    dt_used.sort_unstable();
    let dt_slots = dt_used.iter().map(|&i| ir.dt_fields[i]).collect();
    let dt_terms = dt_terms
        .into_iter()
        .map(|(i, c)| (dt_used.iter().position(|&j| j == i).unwrap(), c))
        .collect();

    Ok(PolyEquation { time_kind: ir.time_kind, slots, dt_slots, terms, dt_terms })
}

/// Largest modulus of the constant parts of the top-level `+`/`-` summands.
fn summand_scale(e: &super::Expr, params: &Params, alg: &JetAlgebra<'_>) -> f64 {
    use super::Expr;
    match e {
        Expr::Add(a, b) | Expr::Sub(a, b) => summand_scale(a, params, alg).max(summand_scale(b, params, alg)),
        Expr::Neg(a) => summand_scale(a, params, alg),
        _ => eval(e, params, alg).map(|j| j[0].norm()).unwrap_or(0.0),
    }
}
