use latred_core::eqdsl::{Expr, FieldRef, TimeKind, parse};
use proptest::prelude::*;

fn leaf(discrete: bool) -> BoxedStrategy<Expr> {
    let field = (-3i32..=3, -2i32..=2).prop_map(move |(dn, dm)| Expr::Field(FieldRef { dn, dm: discrete.then_some(dm) }));
    let mut options = vec![
        (0u32..2000).prop_map(|k| Expr::Num(f64::from(k) / 8.0)).boxed(),
        (1e-3f64..1e3).prop_map(Expr::Num).boxed(),
        Just(Expr::ImagUnit).boxed(),
        prop::sample::select(vec!["a", "b", "c2", "alpha"]).prop_map(|p| Expr::Param(p.into())).boxed(),
        field.boxed(),
    ];
    if !discrete {
        options.push((-2i32..=2).prop_map(Expr::TimeDeriv).boxed());
    }
    prop::strategy::Union::new(options).boxed()
}

fn expr(discrete: bool) -> impl Strategy<Value = Expr> {
    leaf(discrete).prop_recursive(5, 40, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| Expr::Neg(b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Add(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Sub(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Mul(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Div(b(x), b(y))),
            (inner.clone(), -3i32..=4).prop_map(move |(x, n)| Expr::Pow(b(x), n)),
            inner.prop_map(move |a| Expr::Exp(b(a))),
        ]
    })
}

fn has_field(e: &Expr) -> bool {
    e.to_string().contains("u[")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_expressions_parse_back(e in expr(true)) {
        prop_assume!(has_field(&e));
        let ir = parse(&e.to_string()).unwrap();
        prop_assert_eq!(ir.time_kind, TimeKind::FullyDiscrete);
        prop_assert_eq!(ir.root, e);
    }

    #[test]
    fn continuous_time_round_trip(e in expr(false)) {
        prop_assume!(has_field(&e));
        let ir = parse(&e.to_string()).unwrap();
        prop_assert_eq!(ir.time_kind, TimeKind::DifferentialDifference);
        prop_assert_eq!(ir.root, e);
    }

    #[test]
    fn arbitrary_input_never_panics(s in "[ -~]{0,40}") {
        let _ = parse(&s);
    }

    #[test]
    fn operator_soup_never_panics(s in "[u\\[\\]0-9,+*/^()=\\-iaexpdt .]{0,30}") {
        let _ = parse(&s);
    }
}
