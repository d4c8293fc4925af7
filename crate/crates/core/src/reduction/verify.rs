//! Residual of the original equation on a lattice function built from a
//! solved cascade.
//!
//! The envelope is `A(ξ, τ) = A0(ξ) + τ A1(ξ)` with
//! `A0 = amp · sech(ξ) · e^{iθξ}` and `A1 = −i (rho1 A0'' + rho2 |A0|² A0)`,
//! so the envelope equation holds at `τ = 0`. Every solved amplitude is
//! evaluated from its relation, unsolved ones are set to zero, and the
//! equation is evaluated on
//! `u_{n,m} = Σ ε^{k+1} w_k^(α)(ε(n − v_g m) + ξ0, ε² m) e^{iα(κn − ωm)}`.
//! For a consistent cascade the residual is `O(ε⁴)`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{ReductionResult, Relation};
use crate::eqdsl::{EquationIr, Shift, TimeKind, residual};
use crate::series::{Deriv, FieldId, SlowFactor, SlowPoly, diff_poly_by};
use crate::{Complex64, Params, Reality};

const ORDER: usize = 10;

/// Truncated Taylor series in `h` about a point.
#[derive(Clone, Copy, Debug)]
struct Taylor([Complex64; ORDER]);

impl Taylor {
    fn zero() -> Self {
        Taylor([Complex64::new(0.0, 0.0); ORDER])
    }

    fn add(&self, o: &Taylor) -> Taylor {
        let mut r = *self;
        for (a, b) in r.0.iter_mut().zip(o.0.iter()) {
            *a += b;
        }
        r
    }

    fn scale(&self, c: Complex64) -> Taylor {
        let mut r = *self;
        for a in r.0.iter_mut() {
            *a *= c;
        }
        r
    }

    fn mul(&self, o: &Taylor) -> Taylor {
        let mut r = Taylor::zero();
        for i in 0..ORDER {
            for j in 0..ORDER - i {
                r.0[i + j] += self.0[i] * o.0[j];
            }
        }
        r
    }

    fn recip(&self) -> Taylor {
        let mut r = Taylor::zero();
        r.0[0] = Complex64::new(1.0, 0.0) / self.0[0];
        for k in 1..ORDER {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.0[j] * r.0[k - j];
            }
            r.0[k] = -s * r.0[0];
        }
        r
    }

    fn conj(&self) -> Taylor {
        let mut r = *self;
        for a in r.0.iter_mut() {
            *a = a.conj();
        }
        r
    }

    fn second_derivative(&self) -> Taylor {
        let mut r = Taylor::zero();
        for k in 0..ORDER - 2 {
            r.0[k] = self.0[k + 2] * ((k + 2) * (k + 1)) as f64;
        }
        r
    }

    /// `p`-th derivative at the expansion point.
    fn derivative(&self, p: usize) -> Complex64 {
        let fact: f64 = (1..=p).map(|i| i as f64).product();
        self.0.get(p).copied().unwrap_or_default() * fact
    }
}

/// Sech envelope `amp · sech(ξ) · e^{iθξ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SechProfile {
    pub amp: f64,
    pub theta: f64,
}

impl Default for SechProfile {
    fn default() -> Self {
        SechProfile { amp: 1.0, theta: 0.4 }
    }
}

impl SechProfile {
    fn a0(&self, xi: f64) -> Taylor {
        let mut cosh = Taylor::zero();
        let mut phase = Taylor::zero();
        let e = Complex64::new(0.0, self.theta * xi).exp();
        let mut fact = 1.0;
        for k in 0..ORDER {
            if k > 0 {
                fact *= k as f64;
            }
            let hyp = if k % 2 == 0 { xi.cosh() } else { xi.sinh() };
            cosh.0[k] = Complex64::new(hyp / fact, 0.0);
            phase.0[k] = e * Complex64::new(0.0, self.theta).powu(k as u32) / fact;
        }
        cosh.recip().mul(&phase).scale(Complex64::new(self.amp, 0.0))
    }

    /// `∫_0^ξ |A0|²`.
    fn mass_primitive(&self, xi: f64) -> f64 {
        self.amp * self.amp * xi.tanh()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("only fully discrete equations can be checked")]
    ContinuousTime,
    #[error(transparent)]
    Eval(#[from] crate::eqdsl::EvalError),
}

struct Synth<'a> {
    relations: &'a [Relation],
    rho1: Complex64,
    rho2: Complex64,
    profile: SechProfile,
    reality: Reality,
}

impl Synth<'_> {
    /// Value of `δ^deriv w_field` (conjugated if asked) at `(ξ, τ)`.
    fn factor(&self, f: &SlowFactor, xi: f64, tau: f64) -> Complex64 {
        let v = self.plain(f.field, f.deriv, xi, tau);
        if f.conj { v.conj() } else { v }
    }

    fn plain(&self, field: FieldId, d: Deriv, xi: f64, tau: f64) -> Complex64 {
        let amplitude = SlowFactor::new(FieldId::new(0, 1), false, Deriv::NONE, self.reality).field;
        if field == amplitude {
            let a0 = self.profile.a0(xi);
            let cubic = a0.mul(&a0).mul(&a0.conj());
            let a1 = a0.second_derivative().scale(self.rho1).add(&cubic.scale(self.rho2)).scale(Complex64::new(0.0, -1.0));
            let p = usize::from(d.n);
            return match d.m2 {
                0 => a0.derivative(p) + a1.derivative(p) * tau,
                1 => a1.derivative(p),
                _ => Complex64::new(0.0, 0.0),
            };
        }
        for r in self.relations.iter().filter(|r| r.field == field) {
            if d.covers(&r.deriv) {
                let rest = Deriv::new(d.n - r.deriv.n, d.m1 - r.deriv.m1, d.m2 - r.deriv.m2);
                return self.poly(&diff_poly_by(&r.rhs, rest), xi, tau);
            }
            // δ_{n2} w = γ |A|² integrated with the τ = 0 profile.
            let abs_sq = r.rhs.len() == 1
                && r.rhs.keys().next().is_some_and(|m| m.len() == 2 && m.iter().all(|f| f.field == amplitude && f.deriv == Deriv::NONE) && m[0].conj != m[1].conj);
            if d == Deriv::NONE && r.deriv == Deriv::new(1, 0, 0) && abs_sq {
                let gamma = *r.rhs.values().next().unwrap();
                return gamma * self.profile.mass_primitive(xi);
            }
        }
        Complex64::new(0.0, 0.0)
    }

    fn poly(&self, p: &SlowPoly, xi: f64, tau: f64) -> Complex64 {
        p.iter().map(|(m, c)| m.iter().fold(*c, |acc, f| acc * self.factor(f, xi, tau))).sum()
    }
}

/// Largest modulus of the equation residual over a few anchor sites.
pub fn synthesized_residual(
    ir: &EquationIr,
    params: &Params,
    result: &ReductionResult,
    eps: f64,
    profile: SechProfile,
) -> Result<f64, VerifyError> {
    if ir.time_kind != TimeKind::FullyDiscrete {
        return Err(VerifyError::ContinuousTime);
    }
    let c = &result.cascade;
    let reality = c.mode.reality;
    let synth = Synth { relations: &c.relations, rho1: c.rho1, rho2: c.rho2, profile, reality };
    let (kappa, omega, v_g) = (result.point.kappa, result.point.omega, result.point.v_g);
    let fields: Vec<FieldId> = (0..3u8)
        .flat_map(|k| {
            let hs: Vec<i8> = match reality {
                Reality::RealField => (0..=3).collect(),
                Reality::ComplexField => (-3..=3).collect(),
            };
            hs.into_iter().map(move |a| FieldId::new(k, a))
        })
        .collect();
    let u = |n: i32, m: i32| -> Complex64 {
        let xi = eps * (f64::from(n) - v_g * f64::from(m)) + 0.3;
        let tau = eps * eps * f64::from(m);
        let mut acc = Complex64::new(0.0, 0.0);
        for w in &fields {
            let val = synth.plain(*w, Deriv::NONE, xi, tau);
            let carrier = Complex64::new(0.0, f64::from(w.harmonic) * (kappa * f64::from(n) - omega * f64::from(m))).exp();
            let mut term = val * carrier;
            if reality == Reality::RealField && w.harmonic > 0 {
                term += (val * carrier).conj();
            }
            acc += term * eps.powi(i32::from(w.order) + 1);
        }
        acc
    };
    let mut worst: f64 = 0.0;
    for anchor in [0, 5, 11] {
        let r = residual(ir, params, |s: Shift| u(anchor + s.dn, s.dm), |_| Complex64::new(0.0, 0.0))?;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}
