//! NLS coefficients straight from the Fourier symbols of the jet.
//!
//! This route never builds a multiscale series. For a real field with
//! carrier `k = (κ, ω)` and the quadratic and cubic symbols
//! `Q(p, q)`, `C(p, q, r)` (symmetrized), it uses
//!
//! ```text
//! B2   = −Q(k, k) / D(2k)
//! M    = lim_{η→0} −2Q(k, ηe) · 2Q(k + ηe/2, −k + ηe/2) / D(ηe),  e = (1, v_g)
//! N    = 2Q(−k, 2k) B2 + 3C(k, k, −k) + M
//! rho1 = D_ee / (2 D_ω),   rho2 = −N / D_ω
//! ```
//!
//! where `D_ee` is the second derivative of `D` along `e`. The limit is taken
//! exactly with Taylor coefficients in `η`. A complex field has no `A²Ā`
//! coupling, so `rho2 = 0` there.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dispersion::{DispersionPoint, LinearSymbol};
use crate::eqdsl::{PolyEquation, Shift};
use crate::{Complex64, Reality};

const TAYLOR: usize = 3;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SymbolError {
    #[error("second harmonic is resonant: |D(2k)| = {0:e}")]
    ResonantSecondHarmonic(f64),
    #[error("the symbol is stationary in omega")]
    StationarySymbol,
    #[error("mean-field forcing is not an exact slow derivative")]
    NonIntegrableMeanField,
    #[error("mean-field response diverges at zero wavenumber")]
    BareMeanField,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolCoefficients {
    pub second_harmonic: Complex64,
    /// Contribution `M` of the induced mean field to the cubic coefficient.
    pub mean_field: Complex64,
    pub rho1: Complex64,
    pub rho2: Complex64,
}

/// Wave vector `(κ, ω)`.
#[derive(Clone, Copy, Debug)]
struct Wave(f64, f64);

impl Wave {
    fn phase(&self, s: Shift) -> f64 {
        self.0 * f64::from(s.dn) - self.1 * f64::from(s.dm)
    }

    fn times(&self, a: f64) -> Wave {
        Wave(self.0 * a, self.1 * a)
    }
}

struct Parts {
    quad: Vec<([Shift; 2], Complex64)>,
    cubic: Vec<([Shift; 3], Complex64)>,
}

impl Parts {
    fn new(p: &PolyEquation) -> Self {
        let mut quad = Vec::new();
        let mut cubic = Vec::new();
        for (m, c) in &p.terms {
            match m.as_slice() {
                [a, b] => quad.push(([p.slots[*a], p.slots[*b]], *c)),
                [a, b, d] => cubic.push(([p.slots[*a], p.slots[*b], p.slots[*d]], *c)),
                _ => {}
            }
        }
        Parts { quad, cubic }
    }

    /// Taylor coefficients in `η` of `Q(p + ηa, q + ηb)`.
    fn q_series(&self, p: Wave, a: Wave, q: Wave, b: Wave) -> [Complex64; TAYLOR] {
        let mut out = [Complex64::new(0.0, 0.0); TAYLOR];
        for ([s, t], c) in &self.quad {
            for (x, y) in [(*s, *t), (*t, *s)] {
                let base = Complex64::from_polar(0.5, p.phase(x) + q.phase(y));
                let rate = Complex64::new(0.0, a.phase(x) + b.phase(y));
                let mut term = c * base;
                for (j, o) in out.iter_mut().enumerate() {
                    *o += term;
                    term *= rate / (j as f64 + 1.0);
                }
            }
        }
        out
    }

    fn q(&self, p: Wave, q: Wave) -> Complex64 {
        self.q_series(p, Wave(0.0, 0.0), q, Wave(0.0, 0.0))[0]
    }

    fn c(&self, p: Wave, q: Wave, r: Wave) -> Complex64 {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, c) in &self.cubic {
            for perm in PERMS {
                let ph = p.phase(s[perm[0]]) + q.phase(s[perm[1]]) + r.phase(s[perm[2]]);
                acc += c * Complex64::from_polar(1.0 / 6.0, ph);
            }
        }
        acc
    }
}

fn mul_series(f: &[Complex64; TAYLOR], g: &[Complex64; TAYLOR]) -> [Complex64; TAYLOR] {
    let mut out = [Complex64::new(0.0, 0.0); TAYLOR];
    for i in 0..TAYLOR {
        for j in 0..TAYLOR - i {
            out[i + j] += f[i] * g[j];
        }
    }
    out
}

/// `(rho1, rho2)` and the intermediate coefficients at a solved dispersion
/// point, with relative tolerance `tol`.
pub fn nls_from_symbols(
    poly: &PolyEquation,
    sym: &LinearSymbol,
    point: &DispersionPoint,
    reality: Reality,
    tol: f64,
) -> Result<SymbolCoefficients, SymbolError> {
    let parts = Parts::new(poly);
    let (kappa, omega, v_g) = (point.kappa, point.omega, point.v_g);
    let k = Wave(kappa, omega);
    let zero = Wave(0.0, 0.0);
    let scale = sym.scale();

    let d_omega = sym.deriv(kappa, omega, 0, 1);
    if d_omega.norm() <= tol * scale {
        return Err(SymbolError::StationarySymbol);
    }
    let rho1 = sym.directional(kappa, omega, v_g, 2) / (d_omega * 2.0);

    let d2k = sym.eval(2.0 * kappa, 2.0 * omega);
    let q_kk = parts.q(k, k);
    if d2k.norm() <= tol * scale && q_kk.norm() > tol * scale {
        return Err(SymbolError::ResonantSecondHarmonic(d2k.norm()));
    }
    let second_harmonic = if q_kk.norm() == 0.0 { q_kk } else { -q_kk / d2k };

    if reality == Reality::ComplexField {
        return Ok(SymbolCoefficients {
            second_harmonic,
            mean_field: Complex64::new(0.0, 0.0),
            rho1,
            rho2: Complex64::new(0.0, 0.0),
        });
    }

    let e = Wave(1.0, v_g);
    let mk = k.times(-1.0);
    let f = parts.q_series(k, zero, zero, e).map(|z| z * 2.0);
    let g = parts.q_series(k, e.times(0.5), mk, e.times(0.5)).map(|z| z * 2.0);
    let mut fact = 1.0;
    let d: Vec<Complex64> = (0..TAYLOR as u32)
        .map(|j| {
            if j > 0 {
                fact *= f64::from(j);
            }
            sym.directional(0.0, 0.0, v_g, j) / fact
        })
        .collect();
    let order = d.iter().position(|x| x.norm() > tol * scale).ok_or(SymbolError::BareMeanField)?;
    let quad_scale: f64 = parts.quad.iter().map(|(_, c)| c.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    if order > 0 && g[0].norm() <= tol * quad_scale {
        // the forcing starts at first order; it must be δ|A|², not a mix of A δĀ and Ā δA
        let g1 = parts.q_series(k, e, mk, zero)[1];
        let g2 = parts.q_series(k, zero, mk, e)[1];
        if (g1 - g2).norm() > tol * quad_scale * 10.0 {
            return Err(SymbolError::NonIntegrableMeanField);
        }
    }
    let fg = mul_series(&f, &g);
    if fg[..order].iter().any(|x| x.norm() > tol * quad_scale * quad_scale) {
        return Err(SymbolError::BareMeanField);
    }
    let mean_field = -fg[order] / d[order];

    let n = parts.q(mk, k.times(2.0)) * 2.0 * second_harmonic + parts.c(k, k, mk) * 3.0 + mean_field;
    Ok(SymbolCoefficients { second_harmonic, mean_field, rho1, rho2: -n / d_omega })
}
