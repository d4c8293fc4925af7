use alloc::string::String;

use super::{Expr, Shift};
use crate::{Complex64, Params};

/// Value domain an expression can be evaluated in.
pub trait Algebra {
    type V: Clone;
    fn constant(&self, c: Complex64) -> Self::V;
    fn field(&self, s: Shift) -> Self::V;
    fn time_deriv(&self, dn: i32) -> Self::V;
    fn add(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&self, a: &Self::V, b: &Self::V) -> Self::V;
    /// `None` when the denominator is zero (or has zero constant term).
    fn div(&self, a: &Self::V, b: &Self::V) -> Option<Self::V>;
    fn exp(&self, a: &Self::V) -> Self::V;
    fn neg(&self, a: &Self::V) -> Self::V {
        self.sub(&self.constant(Complex64::new(0.0, 0.0)), a)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("parameter `{0}` has no value")]
    MissingParameter(String),
    #[error("division by zero")]
    DivisionByZero,
}

/// Evaluates `e` in the algebra `alg`.
pub fn eval<A: Algebra>(e: &Expr, params: &Params, alg: &A) -> Result<A::V, EvalError> {
    Ok(match e {
        Expr::Num(x) => alg.constant(Complex64::new(*x, 0.0)),
        Expr::ImagUnit => alg.constant(Complex64::new(0.0, 1.0)),
        Expr::Param(p) => match params.get(p) {
            Some(v) => alg.constant(Complex64::new(*v, 0.0)),
            None => return Err(EvalError::MissingParameter(p.clone())),
        },
        Expr::Field(r) => alg.field(r.shift()),
        Expr::TimeDeriv(dn) => alg.time_deriv(*dn),
        Expr::Neg(a) => alg.neg(&eval(a, params, alg)?),
        Expr::Add(a, b) => alg.add(&eval(a, params, alg)?, &eval(b, params, alg)?),
        Expr::Sub(a, b) => alg.sub(&eval(a, params, alg)?, &eval(b, params, alg)?),
        Expr::Mul(a, b) => alg.mul(&eval(a, params, alg)?, &eval(b, params, alg)?),
        Expr::Div(a, b) => {
            let (a, b) = (eval(a, params, alg)?, eval(b, params, alg)?);
            alg.div(&a, &b).ok_or(EvalError::DivisionByZero)?
        }
        Expr::Exp(a) => alg.exp(&eval(a, params, alg)?),
        Expr::Pow(a, n) => {
            let base = eval(a, params, alg)?;
            let one = alg.constant(Complex64::new(1.0, 0.0));
            let mut acc = one.clone();
            for _ in 0..n.unsigned_abs() {
                acc = alg.mul(&acc, &base);
            }
            if *n < 0 { alg.div(&one, &acc).ok_or(EvalError::DivisionByZero)? } else { acc }
        }
    })
}

/// Pointwise complex evaluation with given field and time-derivative values.
pub struct ComplexAlgebra<F, D> {
    pub field: F,
    pub dt: D,
}

impl<F: Fn(Shift) -> Complex64, D: Fn(i32) -> Complex64> Algebra for ComplexAlgebra<F, D> {
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
        if *b == Complex64::new(0.0, 0.0) { None } else { Some(a / b) }
    }
    fn exp(&self, a: &Complex64) -> Complex64 {
        a.exp()
    }
    fn neg(&self, a: &Complex64) -> Complex64 {
        -a
    }
}
