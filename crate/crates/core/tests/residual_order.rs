use latred_core::catalog::{CatalogEntry, lookup};
use latred_core::dispersion::{LinearSymbol, solve_dispersion};
use latred_core::eqdsl::{EquationIr, Shift, parse, residual, taylor_jet};
use latred_core::reduction::verify::{SechProfile, synthesized_residual};
use latred_core::reduction::{ReductionResult, Tolerances, analyze_at};
use latred_core::{Complex64, Params};

const EPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

fn reduce(e: &CatalogEntry, kappa: f64) -> (EquationIr, Params, ReductionResult) {
    let ir = parse(e.equation).unwrap();
    let params = e.params();
    let poly = taylor_jet(&ir, &params).unwrap();
    let sym = LinearSymbol::from_poly(&poly).unwrap();
    let branches = sym.branches(kappa).unwrap();
    let b = branches.iter().position(|w| *w > 0.0).unwrap_or(0);
    let point = solve_dispersion(&sym, kappa, b).unwrap();
    let r = analyze_at(&poly, &sym, point, e.reality, &Tolerances::default()).unwrap();
    (ir, params, r)
}

fn fitted_order(ir: &EquationIr, params: &Params, r: &ReductionResult) -> f64 {
    let res: Vec<f64> =
        EPS.iter().map(|&eps| synthesized_residual(ir, params, r, eps, SechProfile::default()).unwrap()).collect();
    (res[0] / res[2]).ln() / (EPS[0] / EPS[2]).ln()
}

#[test]
fn solved_cascades_leave_fourth_order_residuals() {
    for id in ["toda-hirota", "toda-naive", "kdv-sym", "kdv-asym", "burgers-fully-discrete", "hietarinta"] {
        let (ir, params, r) = reduce(lookup(id).unwrap(), 1.0);
        let p = fitted_order(&ir, &params, &r);
        assert!(p >= 3.7, "{id}: fitted order {p:.3}");
    }
}

#[test]
fn wrong_coefficients_are_detected() {
    for id in ["toda-hirota", "kdv-sym", "kdv-asym"] {
        let (ir, params, mut r) = reduce(lookup(id).unwrap(), 1.0);
        r.cascade.rho2 = r.cascade.rho2 * 1.25 + 0.05;
        let p = fitted_order(&ir, &params, &r);
        assert!(p < 3.7, "{id}: perturbed rho2 still gives order {p:.3}");

        let (ir, params, mut r) = reduce(lookup(id).unwrap(), 1.0);
        // over a 4x range of ε only O(1) errors are visible for the KdV models
        r.cascade.rho1 *= 2.0;
        let p = fitted_order(&ir, &params, &r);
        assert!(p < 3.7, "{id}: perturbed rho1 still gives order {p:.3}");
    }
}

#[test]
fn continuous_time_is_rejected() {
    let (ir, params, r) = reduce(lookup("burgers-dd").unwrap(), 1.0);
    assert!(synthesized_residual(&ir, &params, &r, 1e-2, SechProfile::default()).is_err());
}

/// The cubic jet reproduces the equation up to `O(δ⁴)` for amplitudes `δ`.
#[test]
fn jet_truncation_error_is_quartic() {
    let sample = |s: Shift| {
        let x = f64::from(s.dn) * 0.37 + f64::from(s.dm) * 0.91;
        Complex64::new(x.sin() + 0.3, (2.0 * x).cos() * 0.5)
    };
    // the KdV models are quadratic, so their jet is exact
    for id in ["toda-hirota", "toda-naive", "burgers-dd", "burgers-fully-discrete", "hietarinta"] {
        let e = lookup(id).unwrap();
        let ir = parse(e.equation).unwrap();
        let params = e.params();
        let poly = taylor_jet(&ir, &params).unwrap();
        let err = |d: f64| {
            let field: Vec<Complex64> = poly.slots.iter().map(|s| sample(*s) * d).collect();
            let dt: Vec<Complex64> = poly.dt_slots.iter().map(|dn| sample(Shift::new(*dn, 7)) * d).collect();
            let exact = residual(&ir, &params, |s| sample(s) * d, |dn| sample(Shift::new(dn, 7)) * d).unwrap();
            (exact - poly.eval(&field, &dt)).norm()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.2, "{id}: order {order:.3}");
    }
}
