//! Split-step integration of `i A_τ = rho1 A_ξξ + rho2 |A|² A` on a ring.

use std::f64::consts::PI;
use std::sync::Arc;

use latred_core::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Envelope, SimError};

/// Forward/inverse FFT pair of one length.
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), n }
    }

    pub fn forward(&self, v: &mut [Complex64]) {
        self.forward.process(v);
    }

    /// Inverse transform including the `1/n` normalization.
    pub fn inverse(&self, v: &mut [Complex64]) {
        self.inverse.process(v);
        let s = 1.0 / self.n as f64;
        v.iter_mut().for_each(|z| *z *= s);
    }

    /// Signed mode index of FFT bin `q`.
    pub fn mode(&self, q: usize) -> f64 {
        if q <= self.n / 2 { q as f64 } else { q as f64 - self.n as f64 }
    }

    /// Angular wavenumber of bin `q` on a ring of length `n · spacing`.
    pub fn wavenumber(&self, q: usize, spacing: f64) -> f64 {
        2.0 * PI * self.mode(q) / (self.n as f64 * spacing)
    }

    /// `f(x − shift)` for samples `f(x_j)`, `x_j = j · spacing`, by
    /// trigonometric interpolation. The Nyquist bin is dropped so real
    /// signals stay real.
    pub fn shifted(&self, v: &[Complex64], shift: f64, spacing: f64) -> Vec<Complex64> {
        let mut w = v.to_vec();
        self.forward(&mut w);
        for (q, z) in w.iter_mut().enumerate() {
            if self.n.is_multiple_of(2) && q == self.n / 2 {
                *z = Complex64::new(0.0, 0.0);
            } else {
                *z *= Complex64::from_polar(1.0, -self.wavenumber(q, spacing) * shift);
            }
        }
        self.inverse(&mut w);
        w
    }
}

/// Exact flow of `i A_τ = rho2 |A|² A` over `h` (also for complex `rho2`,
/// where `|A|` changes).
fn nonlinear(a: &mut [Complex64], rho2: Complex64, h: f64) {
    let g = rho2.im;
    for z in a.iter_mut() {
        let s = z.norm_sqr();
        let x = 2.0 * g * s * h;
        // ∫_0^h |A|² dτ
        let integral = if x.abs() < 1e-8 { s * h * (1.0 + x / 2.0) } else { -(1.0 - x).ln() / (2.0 * g) };
        *z *= (Complex64::new(0.0, -1.0) * rho2 * integral).exp();
    }
}

/// Second-order Strang splitting with `steps` steps up to slow time `slow_t`.
pub fn run_nls(rho1: Complex64, rho2: Complex64, env0: &Envelope, slow_t: f64, steps: usize) -> Result<Envelope, SimError> {
    let n = env0.values.len();
    let fft = Spectral::new(n);
    let h = slow_t / steps.max(1) as f64;
    let half: Vec<Complex64> = (0..n)
        .map(|q| {
            let k = fft.wavenumber(q, env0.spacing);
            (Complex64::new(0.0, 1.0) * rho1 * (k * k * h / 2.0)).exp()
        })
        .collect();
    let mut a = env0.values.clone();
    for _ in 0..steps.max(1) {
        fft.forward(&mut a);
        a.iter_mut().zip(&half).for_each(|(z, p)| *z *= p);
        fft.inverse(&mut a);
        nonlinear(&mut a, rho2, h);
        fft.forward(&mut a);
        a.iter_mut().zip(&half).for_each(|(z, p)| *z *= p);
        fft.inverse(&mut a);
        if a.iter().any(|z| !z.is_finite()) {
            return Err(SimError::BlowUp { step: 0, max: f64::INFINITY });
        }
    }
    Ok(Envelope { values: a, spacing: env0.spacing, slow_time: env0.slow_time + slow_t })
}

/// `∫ |A|²`.
pub fn mass(a: &Envelope) -> f64 {
    a.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * a.spacing
}

/// `∫ rho1 |A_ξ|² − rho2/2 |A|⁴` for real coefficients (conserved).
pub fn hamiltonian(a: &Envelope, rho1: f64, rho2: f64) -> f64 {
    let n = a.values.len();
    let fft = Spectral::new(n);
    let mut d = a.values.clone();
    fft.forward(&mut d);
    for (q, z) in d.iter_mut().enumerate() {
        *z *= Complex64::new(0.0, fft.wavenumber(q, a.spacing));
    }
    fft.inverse(&mut d);
    let kinetic: f64 = d.iter().map(|z| z.norm_sqr()).sum();
    let potential: f64 = a.values.iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum();
    (rho1 * kinetic - rho2 / 2.0 * potential) * a.spacing
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, spacing: f64, f: impl Fn(f64) -> Complex64) -> Envelope {
        let center = n as f64 * spacing / 2.0;
        Envelope { values: (0..n).map(|j| f(j as f64 * spacing - center)).collect(), spacing, slow_time: 0.0 }
    }

    fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn linear_flow_conserves_mass() {
        let env = grid(256, 0.2, |x| Complex64::new((-x * x).exp(), 0.0));
        let out = run_nls(Complex64::new(0.7, 0.0), Complex64::new(0.0, 0.0), &env, 2.0, 100).unwrap();
        assert!((mass(&out) - mass(&env)).abs() <= 1e-10 * mass(&env));
        let peak = |e: &Envelope| e.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(peak(&out) < 0.9 * peak(&env));
    }

    #[test]
    fn bright_soliton_keeps_its_shape() {
        // focusing needs rho1 rho2 > 0; then A = η sech(η ξ sqrt(rho2 / 2rho1)) e^{−iλτ}
        let (rho1, rho2): (f64, f64) = (0.4, 1.3);
        let eta: f64 = 1.0;
        let width = eta * (rho2 / (2.0 * rho1)).sqrt();
        let env = grid(512, 0.1, |x| Complex64::new(eta / (width * x).cosh(), 0.0));
        let out = run_nls(Complex64::new(rho1, 0.0), Complex64::new(rho2, 0.0), &env, 1.0, 400).unwrap();
        let a: Vec<Complex64> = out.values.iter().map(|z| Complex64::new(z.norm(), 0.0)).collect();
        assert!(rel_l2(&a, &env.values) < 1e-3, "{}", rel_l2(&a, &env.values));
        let h0 = hamiltonian(&env, rho1, rho2);
        assert!((hamiltonian(&out, rho1, rho2) - h0).abs() <= 1e-6 * h0.abs().max(1.0));
    }

    #[test]
    fn splitting_is_second_order() {
        let env = grid(256, 0.15, |x| Complex64::new(1.2 * (-x * x / 2.0).exp(), 0.3 * x.tanh()));
        let (r1, r2) = (Complex64::new(0.5, 0.0), Complex64::new(0.9, 0.0));
        let reference = run_nls(r1, r2, &env, 1.0, 3200).unwrap();
        let err = |steps| rel_l2(&run_nls(r1, r2, &env, 1.0, steps).unwrap().values, &reference.values);
        let order = (err(50) / err(100)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn complex_nonlinearity_flow_is_exact() {
        let rho2 = Complex64::new(0.3, -0.8);
        let mut a = vec![Complex64::new(0.6, 0.2)];
        let mut b = a.clone();
        nonlinear(&mut a, rho2, 0.5);
        for _ in 0..1000 {
            nonlinear(&mut b, rho2, 0.0005);
        }
        assert!((a[0] - b[0]).norm() < 1e-12);
    }

    #[test]
    fn fourier_shift_moves_samples() {
        let fft = Spectral::new(64);
        let v: Vec<Complex64> = (0..64).map(|j| Complex64::new((2.0 * PI * j as f64 / 64.0 * 3.0).sin(), 0.0)).collect();
        let s = fft.shifted(&v, 4.0, 1.0);
        for j in 0..64 {
            assert!((s[j] - v[(j + 60) % 64]).norm() < 1e-12);
        }
    }
}
