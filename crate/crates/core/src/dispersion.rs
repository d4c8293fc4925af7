//! Linear dispersion relation of the linearized equation.
//!
//! With `u = e^{i(κn − ωm)}` the linear part becomes the symbol
//! `D(κ, ω) = Σ l_s e^{i(κ dn_s − ω dm_s)}` (plus `−iω` times the `dt`
//! coefficients for continuous time). Real roots `ω(κ)` are the dispersive
//! branches.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::Complex64;
use crate::eqdsl::{PolyEquation, Shift, TimeKind};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DispersionError {
    #[error("the linear part has no time dependence")]
    DegenerateLinearPart,
    #[error("no real dispersive branch at kappa = {0}")]
    NoDispersiveBranch(f64),
    #[error("branch {branch} requested but only {count} exist")]
    BranchOutOfRange { branch: usize, count: usize },
    #[error("the symbol is stationary in omega (dD/domega = 0)")]
    StationarySymbol,
    #[error("group velocity is not real (imaginary part {0:e})")]
    ComplexGroupVelocity(f64),
    #[error("kappa = {0} is outside (-pi, pi) or zero")]
    InvalidWavenumber(f64),
}

/// Linear part of an equation as a Fourier symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSymbol {
    pub time_kind: TimeKind,
    /// Coefficient of each linear field slot.
    pub terms: BTreeMap<Shift, Complex64>,
    /// Coefficient of each `dt(u[dn])`.
    pub dt_terms: BTreeMap<i32, Complex64>,
}

/// A point on a dispersive branch.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersionPoint {
    pub kappa: f64,
    pub omega: f64,
    pub v_g: f64,
    pub branch: usize,
    /// All real branches at this `kappa`, ascending.
    pub branches: Vec<f64>,
}

const ROOT_TOL: f64 = 1e-10;

fn expi(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

fn ipow(z: Complex64, k: u32) -> Complex64 {
    (0..k).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

impl LinearSymbol {
    pub fn from_poly(p: &PolyEquation) -> Result<Self, DispersionError> {
        let terms: BTreeMap<Shift, Complex64> = p
            .terms
            .iter()
            .filter(|(m, _)| m.len() == 1)
            .map(|(m, c)| (p.slots[m[0]], *c))
            .collect();
        let dt_terms: BTreeMap<i32, Complex64> = p.dt_terms.iter().map(|(s, c)| (p.dt_slots[*s], *c)).collect();
        let sym = LinearSymbol { time_kind: p.time_kind, terms, dt_terms };
        if sym.dt_terms.is_empty() && sym.terms.keys().all(|s| s.dm == sym.terms.keys().next().map_or(0, |f| f.dm)) {
            return Err(DispersionError::DegenerateLinearPart);
        }
        Ok(sym)
    }

    /// `Σ |l_s|`, a bound for `|D|` on the real torus.
    pub fn scale(&self) -> f64 {
        self.terms.values().chain(self.dt_terms.values()).map(|c| c.norm()).sum()
    }

    /// `D(κ, ω)`.
    pub fn eval(&self, kappa: f64, omega: f64) -> Complex64 {
        self.deriv(kappa, omega, 0, 0)
    }

    /// `∂_κ^p ∂_ω^q D(κ, ω)`.
    pub fn deriv(&self, kappa: f64, omega: f64, p: u32, q: u32) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, c) in &self.terms {
            let f = ipow(Complex64::new(0.0, f64::from(s.dn)), p) * ipow(Complex64::new(0.0, -f64::from(s.dm)), q);
            acc += c * f * expi(kappa * f64::from(s.dn) - omega * f64::from(s.dm));
        }
        for (dn, c) in &self.dt_terms {
            let w = match q {
                0 => Complex64::new(0.0, -omega),
                1 => Complex64::new(0.0, -1.0),
                _ => continue,
            };
            acc += c * w * ipow(Complex64::new(0.0, f64::from(*dn)), p) * expi(kappa * f64::from(*dn));
        }
        acc
    }

    /// `k`-th derivative of `η ↦ D(κ + η, ω + v η)` at `η = 0`.
    pub fn directional(&self, kappa: f64, omega: f64, v: f64, k: u32) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..=k {
            let binom = (0..j).fold(1.0, |b, i| b * f64::from(k - i) / f64::from(i + 1));
            acc += self.deriv(kappa, omega, k - j, j) * binom * v.powi(j as i32);
        }
        acc
    }

    /// Newton refinement of a real root in `ω`.
    fn polish(&self, kappa: f64, mut omega: f64) -> f64 {
        for _ in 0..8 {
            let d = self.eval(kappa, omega);
            let dw = self.deriv(kappa, omega, 0, 1);
            if dw.norm() == 0.0 {
                break;
            }
            let step = (d / dw).re;
            omega -= step;
            if step.abs() < 1e-16 * (1.0 + omega.abs()) {
                break;
            }
        }
        omega
    }

    /// All real roots `ω ∈ (−π, π]` at `κ`, ascending.
    pub fn branches(&self, kappa: f64) -> Result<Vec<f64>, DispersionError> {
        if !kappa.is_finite() || kappa == 0.0 || kappa.abs() >= core::f64::consts::PI {
            return Err(DispersionError::InvalidWavenumber(kappa));
        }
        let scale = self.scale();
        let mut roots = match self.time_kind {
            TimeKind::DifferentialDifference => self.continuous_root(kappa).into_iter().collect(),
            TimeKind::FullyDiscrete => self.discrete_roots(kappa),
        };
        roots.retain(|w| self.eval(kappa, *w).norm() <= ROOT_TOL * scale);
        roots.sort_by(f64::total_cmp);
        if roots.is_empty() {
            return Err(DispersionError::NoDispersiveBranch(kappa));
        }
        Ok(roots)
    }

    fn continuous_root(&self, kappa: f64) -> Option<f64> {
        // D = a(κ) − iω b(κ)
        let a = self.eval(kappa, 0.0);
        let b: Complex64 = self.dt_terms.iter().map(|(dn, c)| c * expi(kappa * f64::from(*dn))).sum();
        if b.norm() == 0.0 {
            return None;
        }
        let w = a / (Complex64::new(0.0, 1.0) * b);
        (w.im.abs() <= ROOT_TOL * w.norm().max(1.0)).then_some(w.re)
    }

    fn discrete_roots(&self, kappa: f64) -> Vec<f64> {
        // Polynomial in Ω = e^{−iω}: Σ_dm (Σ_dn l K^dn) Ω^dm
        let lo = self.terms.keys().map(|s| s.dm).min().unwrap_or(0);
        let hi = self.terms.keys().map(|s| s.dm).max().unwrap_or(0);
        let mut coeffs = alloc::vec![Complex64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for (s, c) in &self.terms {
            coeffs[(s.dm - lo) as usize] += c * expi(kappa * f64::from(s.dn));
        }
        let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        while coeffs.last().is_some_and(|c| c.norm() <= 1e-14 * max) {
            coeffs.pop();
        }
        let first = coeffs.iter().position(|c| c.norm() > 1e-14 * max).unwrap_or(0);
        let coeffs = &coeffs[first..];
        let deg = coeffs.len().saturating_sub(1);
        if deg == 0 {
            return Vec::new();
        }
        let lead = coeffs[deg];
        let mut companion = DMatrix::<Complex64>::zeros(deg, deg);
        for i in 1..deg {
            companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..deg {
            companion[(i, deg - 1)] = -coeffs[i] / lead;
        }
        let eig: Vec<Complex64> = match nalgebra::linalg::Schur::new(companion).eigenvalues() {
            Some(v) => v.iter().copied().collect(),
            None => return Vec::new(),
        };
        eig.into_iter()
            .filter(|z| (z.norm() - 1.0).abs() < 1e-6)
            .map(|z| {
                let w = self.polish(kappa, -z.arg());
                wrap(w)
            })
            .collect()
    }

    /// `v_g = −D_κ / D_ω` on the dispersion relation.
    pub fn group_velocity(&self, kappa: f64, omega: f64) -> Result<f64, DispersionError> {
        let dw = self.deriv(kappa, omega, 0, 1);
        if dw.norm() <= 1e-12 * self.scale() {
            return Err(DispersionError::StationarySymbol);
        }
        let v = -self.deriv(kappa, omega, 1, 0) / dw;
        if v.im.abs() > 1e-8 * v.norm().max(1.0) {
            return Err(DispersionError::ComplexGroupVelocity(v.im));
        }
        Ok(v.re)
    }
}

fn wrap(w: f64) -> f64 {
    use core::f64::consts::PI;
    let mut w = w % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Solves for branch `branch` (0-based, ascending in `ω`).
pub fn solve_dispersion(sym: &LinearSymbol, kappa: f64, branch: usize) -> Result<DispersionPoint, DispersionError> {
    let branches = sym.branches(kappa)?;
    let omega = *branches
        .get(branch)
        .ok_or(DispersionError::BranchOutOfRange { branch, count: branches.len() })?;
    let v_g = sym.group_velocity(kappa, omega)?;
    Ok(DispersionPoint { kappa, omega, v_g, branch, branches })
}

/// Solves for the branch closest to `omega_ref` (used to continue a branch
/// along a sweep).
pub fn solve_dispersion_near(sym: &LinearSymbol, kappa: f64, omega_ref: f64) -> Result<DispersionPoint, DispersionError> {
    let branches = sym.branches(kappa)?;
    let branch = (0..branches.len())
        .min_by(|&a, &b| (branches[a] - omega_ref).abs().total_cmp(&(branches[b] - omega_ref).abs()))
        .unwrap();
    let omega = branches[branch];
    let v_g = sym.group_velocity(kappa, omega)?;
    Ok(DispersionPoint { kappa, omega, v_g, branch, branches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqdsl::{parse, taylor_jet};
    use crate::Params;
    use alloc::string::ToString;

    fn symbol(src: &str, kv: &[(&str, f64)]) -> LinearSymbol {
        let params: Params = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        LinearSymbol::from_poly(&taylor_jet(&parse(src).unwrap(), &params).unwrap()).unwrap()
    }

    #[test]
    fn second_order_difference_branches() {
        // cos ω = 1 + a (cos κ − 1)
        let s = symbol("u[0,1] - 2*u[0,0] + u[0,-1] - a*(u[1,0] - 2*u[0,0] + u[-1,0])", &[("a", 0.5)]);
        let k: f64 = 1.1;
        let w = (1.0 + 0.5 * (k.cos() - 1.0)).acos();
        let b = s.branches(k).unwrap();
        assert_eq!(b.len(), 2);
        assert!((b[0] + w).abs() < 1e-13 && (b[1] - w).abs() < 1e-13);
        let p = solve_dispersion(&s, k, 1).unwrap();
        let v = 0.5 * k.sin() / w.sin();
        assert!((p.v_g - v).abs() < 1e-12);
        assert_eq!(solve_dispersion(&s, k, 2), Err(DispersionError::BranchOutOfRange { branch: 2, count: 2 }));
    }

    #[test]
    fn continuous_time_branch() {
        let s = symbol("i*a^2*dt(u[0]) - (u[1] - 2*u[0] + u[-1])", &[("a", 1.0)]);
        let p = solve_dispersion(&s, 0.5, 0).unwrap();
        assert!((p.omega - 2.0 * (0.5f64.cos() - 1.0)).abs() < 1e-14);
        assert!((p.v_g + 2.0 * 0.5f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn growing_modes_are_not_branches() {
        // Ω − 3Ω^{-1} has roots off the unit circle
        let s = symbol("u[0,1] - 3*u[0,-1] + u[1,0] - u[0,0]", &[]);
        assert!(matches!(s.branches(0.4), Err(DispersionError::NoDispersiveBranch(_))));
    }

    #[test]
    fn static_equation_is_degenerate() {
        let p = taylor_jet(&parse("u[1,0] - u[0,0]").unwrap(), &Params::new()).unwrap();
        assert_eq!(LinearSymbol::from_poly(&p), Err(DispersionError::DegenerateLinearPart));
    }

    #[test]
    fn directional_derivative_matches_difference_quotient() {
        let s = symbol("u[0,1] - u[0,-1] - (u[3,0] - 3*u[1,0] + 3*u[-1,0] - u[-3,0])/4", &[]);
        let (k, w, v, h) = (0.8, 0.3, 0.7, 1e-4);
        let f = |e: f64| s.eval(k + e, w + v * e);
        let fd2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert!((s.directional(k, w, v, 2) - fd2).norm() < 1e-6);
    }
}
