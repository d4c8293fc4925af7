//! Time stepping of the full lattice equation on a periodic ring.

use latred_core::dispersion::LinearSymbol;
use latred_core::eqdsl::{Algebra, EquationIr, Expr, PolyEquation, Shift, TimeKind, eval};
use latred_core::{Complex64, Params};

use super::SimError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Replaces parameters by their values so the hot loop does no lookups.
fn bind(e: &Expr, params: &Params) -> Result<Expr, SimError> {
    let b = |x: &Expr| bind(x, params).map(Box::new);
    Ok(match e {
        Expr::Param(p) => Expr::Num(*params.get(p).ok_or_else(|| SimError::Unsupported(format!("parameter `{p}` has no value")))?),
        Expr::Neg(a) => Expr::Neg(b(a)?),
        Expr::Exp(a) => Expr::Exp(b(a)?),
        Expr::Pow(a, n) => Expr::Pow(b(a)?, *n),
        Expr::Add(x, y) => Expr::Add(b(x)?, b(y)?),
        Expr::Sub(x, y) => Expr::Sub(b(x)?, b(y)?),
        Expr::Mul(x, y) => Expr::Mul(b(x)?, b(y)?),
        Expr::Div(x, y) => Expr::Div(b(x)?, b(y)?),
        other => other.clone(),
    })
}

/// Value and derivative with respect to one unknown.
struct Dual<F> {
    field: F,
}

impl<F: Fn(Shift) -> (Complex64, Complex64)> Algebra for Dual<F> {
    type V = (Complex64, Complex64);
    fn constant(&self, c: Complex64) -> Self::V {
        (c, ZERO)
    }
    fn field(&self, s: Shift) -> Self::V {
        (self.field)(s)
    }
    fn time_deriv(&self, _: i32) -> Self::V {
        (ZERO, ZERO)
    }
    fn add(&self, a: &Self::V, b: &Self::V) -> Self::V {
        (a.0 + b.0, a.1 + b.1)
    }
    fn sub(&self, a: &Self::V, b: &Self::V) -> Self::V {
        (a.0 - b.0, a.1 - b.1)
    }
    fn mul(&self, a: &Self::V, b: &Self::V) -> Self::V {
        (a.0 * b.0, a.1 * b.0 + a.0 * b.1)
    }
    fn div(&self, a: &Self::V, b: &Self::V) -> Option<Self::V> {
        if b.0 == ZERO {
            return None;
        }
        let q = a.0 / b.0;
        Some((q, (a.1 - q * b.1) / b.0))
    }
    fn exp(&self, a: &Self::V) -> Self::V {
        let e = a.0.exp();
        (e, e * a.1)
    }
    fn neg(&self, a: &Self::V) -> Self::V {
        (-a.0, -a.1)
    }
}

/// Plain complex values with given field and time-derivative closures.
struct Values<F, D> {
    field: F,
    dt: D,
}

impl<F: Fn(Shift) -> Complex64, D: Fn(i32) -> Complex64> Algebra for Values<F, D> {
    type V = Complex64;
    fn constant(&self, c: Complex64) -> Complex64 {
        c
    }
    fn field(&self, s: Shift) -> Complex64 {
        (self.field)(s)
    }
    fn time_deriv(&self, dn: i32) -> Complex64 {
        (self.dt)(dn)
    }
    fn add(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a + b
    }
    fn sub(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a - b
    }
    fn mul(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a * b
    }
    fn div(&self, a: &Complex64, b: &Complex64) -> Option<Complex64> {
        (*b != ZERO).then(|| a / b)
    }
    fn exp(&self, a: &Complex64) -> Complex64 {
        a.exp()
    }
    fn neg(&self, a: &Complex64) -> Complex64 {
        -a
    }
}

#[derive(Clone, Debug)]
enum Scheme {
    /// The newest level `top` is solved site by site for the unknown at
    /// horizontal offset `pivot`, sweeping in the given direction.
    Discrete { lo: i32, top: i32, pivot: i32, ascending: bool, coupled: bool },
    /// `α du_n/dt + F_n(u) = 0` with one time-derivative slot.
    Continuous { dt_dn: i32 },
}

/// A lattice equation prepared for time stepping.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    root: Expr,
    scheme: Scheme,
    time_kind: TimeKind,
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

impl LatticeModel {
    pub fn new(ir: &EquationIr, params: &Params, poly: &PolyEquation) -> Result<Self, SimError> {
        let root = bind(&ir.root, params)?;
        let scheme = match ir.time_kind {
            TimeKind::DifferentialDifference => match ir.dt_fields.as_slice() {
                [dn] => Scheme::Continuous { dt_dn: *dn },
                _ => return Err(SimError::Unsupported("exactly one time-derivative slot is required".into())),
            },
            TimeKind::FullyDiscrete => {
                let lo = ir.fields_used.iter().map(|s| s.dm).min().unwrap_or(0);
                let top = ir.fields_used.iter().map(|s| s.dm).max().unwrap_or(0);
                if top == lo {
                    return Err(SimError::Unsupported("the equation has a single time level".into()));
                }
                let sym = LinearSymbol::from_poly(poly).map_err(|e| SimError::Unsupported(e.to_string()))?;
                let weight = |dn: i32| sym.terms.get(&Shift::new(dn, top)).map_or(0.0, |c| c.norm());
                let unknowns: Vec<i32> = ir.fields_used.iter().filter(|s| s.dm == top).map(|s| s.dn).collect();
                let pivot = *unknowns
                    .iter()
                    .max_by(|a, b| weight(**a).total_cmp(&weight(**b)))
                    .expect("top level has a field");
                if weight(pivot) == 0.0 {
                    return Err(SimError::Unsupported("the newest time level does not enter linearly".into()));
                }
                // solved neighbours should already be updated when a site is visited
                let ascending = !unknowns.iter().any(|dn| *dn > pivot);
                Scheme::Discrete { lo, top, pivot, ascending, coupled: unknowns.len() > 1 }
            }
        };
        Ok(LatticeModel { root, scheme, time_kind: ir.time_kind })
    }

    pub fn time_kind(&self) -> TimeKind {
        self.time_kind
    }

    /// Number of stored time levels a step needs (1 for continuous time).
    pub fn levels(&self) -> usize {
        match self.scheme {
            Scheme::Discrete { lo, top, .. } => (top - lo) as usize,
            Scheme::Continuous { .. } => 1,
        }
    }

    /// Advances the stored levels (oldest first) by one lattice step.
    pub fn step_discrete(&self, levels: &mut Vec<Vec<Complex64>>, step: usize) -> Result<(), SimError> {
        let Scheme::Discrete { lo, top, pivot, ascending, coupled } = self.scheme else {
            unreachable!("continuous model stepped as discrete");
        };
        let n = levels[0].len();
        let mut new = levels.last().unwrap().clone();
        let order: Vec<usize> = if ascending { (0..n).collect() } else { (0..n).rev().collect() };
        let max_sweeps = if coupled { 200 } else { 1 };
        let mut converged = false;
        let mut prev = f64::INFINITY;
        for _ in 0..max_sweeps {
            let mut change: f64 = 0.0;
            for &k in &order {
                let anchor = k as i64 - i64::from(pivot);
                let z = self.newton(levels, &new, lo, top, anchor, k, step)?;
                change = change.max((z - new[k]).norm());
                new[k] = z;
            }
            let scale = new.iter().map(|z| z.norm()).fold(0.0, f64::max);
            // tiny fields reach the roundoff floor before the relative tolerance
            if !coupled || change <= 1e-12 * scale || (change < 1e-13 && change > 0.5 * prev) {
                converged = true;
                break;
            }
            prev = change;
        }
        if !converged {
            return Err(SimError::FixedPointDivergence { step });
        }
        levels.remove(0);
        levels.push(new);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn newton(
        &self,
        levels: &[Vec<Complex64>],
        new: &[Complex64],
        lo: i32,
        top: i32,
        anchor: i64,
        k: usize,
        step: usize,
    ) -> Result<Complex64, SimError> {
        let n = new.len();
        let mut z = new[k];
        let mut prev = f64::INFINITY;
        for _ in 0..30 {
            let alg = Dual {
                field: |s: Shift| {
                    let site = wrap(anchor + i64::from(s.dn), n);
                    if s.dm == top {
                        if site == k { (z, ONE) } else { (new[site], ZERO) }
                    } else {
                        (levels[(s.dm - lo) as usize][site], ZERO)
                    }
                },
            };
            let (r, dr) = eval(&self.root, &Params::new(), &alg).map_err(|e| SimError::Eval(e.to_string()))?;
            if dr == ZERO || !r.is_finite() {
                return Err(SimError::FixedPointDivergence { step });
            }
            let delta = r / dr;
            z -= delta;
            let d = delta.norm();
            // the second test stops at the roundoff floor of the residual
            if d <= 1e-15 + 1e-14 * z.norm() || (d < 1e-12 && d > 0.5 * prev) {
                return Ok(z);
            }
            prev = d;
        }
        Err(SimError::FixedPointDivergence { step })
    }

    /// `du/dt` for a continuous-time model.
    pub fn rate(&self, u: &[Complex64]) -> Result<Vec<Complex64>, SimError> {
        let Scheme::Continuous { dt_dn } = self.scheme else {
            unreachable!("discrete model asked for a rate");
        };
        let n = u.len();
        let mut out = vec![ZERO; n];
        for (k, slot) in out.iter_mut().enumerate() {
            let anchor = k as i64 - i64::from(dt_dn);
            let field = |s: Shift| u[wrap(anchor + i64::from(s.dn), n)];
            let at = |d: Complex64| {
                eval(&self.root, &Params::new(), &Values { field, dt: |_| d }).map_err(|e| SimError::Eval(e.to_string()))
            };
            let f = at(ZERO)?;
            let alpha = at(ONE)? - f;
            if alpha == ZERO {
                return Err(SimError::Unsupported("time-derivative coefficient vanishes".into()));
            }
            *slot = -f / alpha;
        }
        Ok(out)
    }

    /// One classical fourth-order Runge–Kutta step of size `h`.
    pub fn step_rk4(&self, u: &mut [Complex64], h: f64) -> Result<(), SimError> {
        let axpy = |a: &[Complex64], k: &[Complex64], c: f64| -> Vec<Complex64> { a.iter().zip(k).map(|(x, y)| x + y * c).collect() };
        let k1 = self.rate(u)?;
        let k2 = self.rate(&axpy(u, &k1, h / 2.0))?;
        let k3 = self.rate(&axpy(u, &k2, h / 2.0))?;
        let k4 = self.rate(&axpy(u, &k3, h))?;
        for i in 0..u.len() {
            u[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        Ok(())
    }
}
