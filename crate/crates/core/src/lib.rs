//! Multiscale reduction of nonlinear lattice equations on Z² to a cubic
//! nonlinear Schrödinger normal form.
//!
//! The pipeline is: parse an equation ([`eqdsl`]), take its cubic Taylor jet,
//! solve the linear dispersion relation ([`dispersion`]), expand the jet in
//! the multiscale ansatz ([`series`]) and solve the order-by-order cascade
//! ([`reduction`]) for the coefficients `rho1`, `rho2` of
//!
//! ```text
//! i ∂_τ A = rho1 ∂²_ξ A + rho2 |A|² A
//! ```
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod catalog;
pub mod dispersion;
pub mod eqdsl;
pub mod oracle;
pub mod reduction;
pub mod series;
pub mod symbol;

pub use num_complex::Complex64;

/// Named real parameters of an equation.
pub type Params = alloc::collections::BTreeMap<alloc::string::String, f64>;

/// Whether the field `u` is real (negative harmonics are conjugates) or an
/// independent complex field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reality {
    RealField,
    ComplexField,
}

