//! Exact antiderivatives in `n2` of differential polynomials.

use alloc::vec::Vec;

use crate::Complex64;
use crate::series::{Deriv, FieldId, Monomial, SlowFactor, SlowPoly, SlowVar, diff_monomial, prune_poly};

fn rank(f: &SlowFactor) -> (u8, u8, FieldId, bool) {
    (f.deriv.n, f.deriv.m1 + f.deriv.m2, f.field, f.conj)
}

/// Finds `F` with `δ_{n2} F = p` up to terms below `tol`, or `None` when `p`
/// is not an exact derivative.
///
/// Repeatedly takes the highest-ranked atom `θ = δ ψ`. Each term
/// `c R ψ^k θ` is the leading part of `δ(c R ψ^{k+1} / (k+1))`; the
/// correction `c δR ψ^{k+1} / (k+1)` only involves lower-ranked atoms, so the
/// procedure terminates.
pub(super) fn integrate_n(p: &SlowPoly, tol: f64) -> Option<SlowPoly> {
    let mut rem = p.clone();
    let mut anti = SlowPoly::new();
    for _ in 0..256 {
        prune_poly(&mut rem, tol);
        let Some(theta) = rem.keys().flat_map(|m| m.iter()).max_by_key(|f| rank(f)).copied() else {
            return Some(anti);
        };
        if theta.deriv.n == 0 {
            return None;
        }
        let psi = theta.with_deriv(Deriv { n: theta.deriv.n - 1, ..theta.deriv });
        let hits: Vec<(Monomial, Complex64)> =
            rem.iter().filter(|(m, _)| m.contains(&theta)).map(|(m, c)| (m.clone(), *c)).collect();
        for (m, c) in hits {
            if m.iter().filter(|f| **f == theta).count() > 1 {
                return None;
            }
            let k = m.iter().filter(|f| **f == psi).count();
            let rest: Monomial = m.iter().filter(|f| **f != theta && **f != psi).copied().collect();
            let blocked = rest.iter().any(|f| {
                let d = f.with_deriv(Deriv { n: f.deriv.n + 1, ..f.deriv });
                rank(&d) >= rank(&theta)
            });
            if blocked {
                return None;
            }
            let mut piece = rest;
            piece.extend(core::iter::repeat_n(psi, k + 1));
            piece.sort_unstable();
            let coef = c / (k as f64 + 1.0);
            *anti.entry(piece.clone()).or_default() += coef;
            for (dm, dc) in diff_monomial(&piece, SlowVar::N) {
                *rem.entry(dm).or_default() -= coef * dc;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Reality;
    use crate::series::diff_poly;

    fn f(order: u8, h: i8, conj: bool, n: u8) -> SlowFactor {
        SlowFactor::new(FieldId::new(order, h), conj, Deriv::new(n, 0, 0), Reality::RealField)
    }

    fn poly(terms: &[(&[SlowFactor], f64)]) -> SlowPoly {
        let mut p = SlowPoly::new();
        for (m, c) in terms {
            let mut m = m.to_vec();
            m.sort_unstable();
            *p.entry(m).or_default() += Complex64::new(*c, 0.0);
        }
        p
    }

    #[test]
    fn integrates_exact_derivatives() {
        let a = f(0, 1, false, 0);
        let ab = f(0, 1, true, 0);
        // F = 2 δw + 3 |A|² + A² Ā δĀ
        let big_f = poly(&[(&[f(0, 0, false, 1)], 2.0), (&[a, ab], 3.0), (&[a, a, ab, f(0, 1, true, 1)], 1.0)]);
        let p = diff_poly(&big_f, SlowVar::N);
        let g = integrate_n(&p, 1e-12).unwrap();
        let mut diff = diff_poly(&g, SlowVar::N);
        for (m, c) in &p {
            *diff.entry(m.clone()).or_default() -= c;
        }
        prune_poly(&mut diff, 1e-12);
        assert!(diff.is_empty());
    }

    #[test]
    fn rejects_non_derivatives() {
        let a = f(0, 1, false, 0);
        let ab = f(0, 1, true, 0);
        assert!(integrate_n(&poly(&[(&[a, ab], 1.0)]), 1e-12).is_none());
        // A δĀ alone is not exact
        assert!(integrate_n(&poly(&[(&[a, f(0, 1, true, 1)], 1.0)]), 1e-12).is_none());
        assert!(integrate_n(&poly(&[(&[f(0, 1, false, 1), f(0, 1, true, 1)], 1.0)]), 1e-12).is_none());
        assert_eq!(integrate_n(&SlowPoly::new(), 1e-12), Some(SlowPoly::new()));
    }
}
