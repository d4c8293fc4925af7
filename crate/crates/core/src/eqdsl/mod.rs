//! Equation DSL: parsing, printing, validation at the zero solution and the
//! cubic Taylor jet about it.
//!
//! Grammar:
//!
//! ```text
//! equation := expr ("=" expr)?
//! expr     := term (("+" | "-") term)*
//! term     := factor (("*" | "/") factor)*
//! factor   := base ("^" integer)?
//! base     := number | "i" | identifier | field | "exp" "(" expr ")"
//!           | "dt" "(" field ")" | "(" expr ")" | "-" base
//! field    := "u" "[" integer ("," integer)? "]"
//! ```
//!
//! `u[dn,dm]` is the field at `(n+dn, m+dm)` of a fully discrete equation and
//! `u[dn]` is the field at site `n+dn` of a differential-difference equation.
//! `lhs = rhs` is stored as `lhs - rhs`.

mod eval;
mod jet;
mod parse;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use eval::{Algebra, ComplexAlgebra, EvalError, eval};
pub use jet::{PolyEquation, SlotMonomial, taylor_jet};
pub use parse::{ParseError, ParseErrorKind, parse};

use crate::{Complex64, Params};

/// Lattice displacement of a field reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shift {
    pub dn: i32,
    pub dm: i32,
}

impl Shift {
    pub const fn new(dn: i32, dm: i32) -> Self {
        Shift { dn, dm }
    }
}

/// Discrete time `m` or continuous time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeKind {
    FullyDiscrete,
    DifferentialDifference,
}

/// A field reference as written: `u[dn]` has no time index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldRef {
    pub dn: i32,
    pub dm: Option<i32>,
}

impl FieldRef {
    pub fn shift(&self) -> Shift {
        Shift::new(self.dn, self.dm.unwrap_or(0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    ImagUnit,
    Param(String),
    Field(FieldRef),
    /// `dt(u[dn])`
    TimeDeriv(i32),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
}

/// Parsed equation `root = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquationIr {
    pub root: Expr,
    pub time_kind: TimeKind,
    /// Distinct field shifts, sorted.
    pub fields_used: Vec<Shift>,
    /// Distinct `dn` of `dt(u[dn])`, sorted.
    pub dt_fields: Vec<i32>,
    /// Distinct parameter names, sorted.
    pub params_used: Vec<String>,
}

impl EquationIr {
    pub(crate) fn from_root(root: Expr, time_kind: TimeKind) -> Self {
        let mut fields = Vec::new();
        let mut dts = Vec::new();
        let mut params = Vec::new();
        root.visit(&mut |e| match e {
            Expr::Field(f) => fields.push(f.shift()),
            Expr::TimeDeriv(dn) => dts.push(*dn),
            Expr::Param(p) => params.push(p.clone()),
            _ => {}
        });
        fields.sort();
        fields.dedup();
        dts.sort();
        dts.dedup();
        params.sort();
        params.dedup();
        EquationIr { root, time_kind, fields_used: fields, dt_fields: dts, params_used: params }
    }
}

impl Expr {
    fn visit<F: FnMut(&Expr)>(&self, f: &mut F) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_level: u8) -> fmt::Result {
        if self.level() < min_level {
            f.write_str("(")?;
            self.fmt_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::ImagUnit => f.write_str("i"),
            Expr::Param(p) => f.write_str(p),
            Expr::Field(r) => match r.dm {
                Some(dm) => write!(f, "u[{},{}]", r.dn, dm),
                None => write!(f, "u[{}]", r.dn),
            },
            Expr::TimeDeriv(dn) => write!(f, "dt(u[{dn}])"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.fmt_at(f, 3)
            }
            Expr::Add(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" + ")?;
                b.fmt_at(f, 2)
            }
            Expr::Sub(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" - ")?;
                b.fmt_at(f, 2)
            }
            Expr::Mul(a, b) => {
                a.fmt_at(f, 2)?;
                f.write_str("*")?;
                b.fmt_at(f, 3)
            }
            Expr::Div(a, b) => {
                a.fmt_at(f, 2)?;
                f.write_str("/")?;
                b.fmt_at(f, 3)
            }
            Expr::Pow(a, n) => {
                a.fmt_at(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::Exp(a) => {
                f.write_str("exp(")?;
                a.fmt_at(f, 0)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl fmt::Display for EquationIr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ValidateError {
    #[error("parameter `{0}` has no value")]
    MissingParameter(String),
    #[error("a denominator vanishes at u = 0")]
    ZeroDenominatorAtOrigin,
    #[error("u = 0 is not a solution (residual {0:e})")]
    NonzeroAtOrigin(f64),
    #[error("the linear part vanishes or has no time dependence")]
    DegenerateLinearPart,
    #[error("a time derivative appears in a nonlinear term")]
    NonlinearTimeDerivative,
    #[error("non-finite value while evaluating the equation")]
    NonFinite,
}

/// Summary of a validated equation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInfo {
    pub time_kind: TimeKind,
    pub slots: Vec<Shift>,
    pub dt_slots: Vec<i32>,
    /// Sum of the moduli of the linear coefficients.
    pub linear_scale: f64,
}

/// Checks that `u ≡ 0` solves the equation, every denominator is nonzero
/// there and the linearization is nontrivial.
pub fn validate(ir: &EquationIr, params: &Params) -> Result<ModelInfo, ValidateError> {
    for p in &ir.params_used {
        if !params.contains_key(p) {
            return Err(ValidateError::MissingParameter(p.clone()));
        }
    }
    let poly = taylor_jet(ir, params)?;
    let mut linear_scale = 0.0;
    for (mono, c) in &poly.terms {
        if mono.len() == 1 {
            linear_scale += c.norm();
        }
    }
    let dt_scale: f64 = poly.dt_terms.values().map(|c| c.norm()).sum();
    linear_scale += dt_scale;
    if linear_scale == 0.0 {
        return Err(ValidateError::DegenerateLinearPart);
    }
    Ok(ModelInfo {
        time_kind: ir.time_kind,
        slots: poly.slots.clone(),
        dt_slots: poly.dt_slots.clone(),
        linear_scale,
    })
}

/// Evaluates the equation residual at given field values.
pub fn residual(
    ir: &EquationIr,
    params: &Params,
    field: impl Fn(Shift) -> Complex64,
    dt: impl Fn(i32) -> Complex64,
) -> Result<Complex64, EvalError> {
    eval(&ir.root, params, &ComplexAlgebra { field, dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn prints_minimal_parentheses() {
        let ir = parse("exp(u[0,0] - u[0,1]) - a^2*(u[1,0] - -u[0,0])").unwrap();
        assert_eq!(ir.to_string(), "exp(u[0,0] - u[0,1]) - a^2*(u[1,0] - -u[0,0])");
        let ir = parse("a - (b - c) / (d*e)").unwrap();
        assert_eq!(ir.to_string(), "a - (b - c)/(d*e)");
    }

    #[test]
    fn equation_is_lhs_minus_rhs() {
        let ir = parse("u[0,1] = 2*u[0,0]").unwrap();
        assert_eq!(ir.to_string(), "u[0,1] - 2*u[0,0]");
        assert_eq!(ir.fields_used, [Shift::new(0, 0), Shift::new(0, 1)]);
    }

    #[test]
    fn validate_rejects_bad_origin() {
        let ir = parse("1/(u[0,0] - u[1,0]) - u[0,1]").unwrap();
        assert_eq!(validate(&ir, &Params::new()), Err(ValidateError::ZeroDenominatorAtOrigin));
        let ir = parse("exp(u[0,0]) - u[0,1]").unwrap();
        assert!(matches!(validate(&ir, &Params::new()), Err(ValidateError::NonzeroAtOrigin(_))));
        let ir = parse("u[0,0]^2 - u[0,1]^3").unwrap();
        assert_eq!(validate(&ir, &Params::new()), Err(ValidateError::DegenerateLinearPart));
        let ir = parse("dt(u[0])*u[1] - u[0]").unwrap();
        assert_eq!(validate(&ir, &Params::new()), Err(ValidateError::NonlinearTimeDerivative));
        let ir = parse("a*u[0,1] - u[0,0]").unwrap();
        assert_eq!(
            validate(&ir, &Params::new()),
            Err(ValidateError::MissingParameter("a".to_string()))
        );
    }

    #[test]
    fn burgers_with_zero_a_is_valid() {
        let ir = parse("i*a^2*dt(u[0]) - (1+a*u[0])*(u[1]-u[0]) - (u[-1]-u[0])/(1+a*u[-1])")
            .unwrap();
        let info = validate(&ir, &params(&[("a", 0.0)])).unwrap();
        assert_eq!(info.time_kind, TimeKind::DifferentialDifference);
        assert!(info.linear_scale > 0.0);
    }
}
