use freetrace::symcore::render::{from_json, to_json};
use freetrace::symcore::{Monomial, Poly, Rational, ScalarExpr, Term, Var};
use proptest::prelude::*;

fn vars() -> [Var; 3] {
    [Var::constant("x"), Var::constant("y"), Var::constant("z")]
}

fn poly_strategy() -> impl Strategy<Value = Poly> {
    prop::collection::vec((-6i64..=6, 0u32..3, 0u32..3, 0u32..2), 0..4).prop_map(|terms| {
        let [x, y, z] = vars();
        Poly::from_terms(
            terms
                .into_iter()
                .map(|(c, a, b, e)| Term {
                    mono: Monomial::from_pairs(vec![(x.clone(), a), (y.clone(), b), (z.clone(), e)]),
                    coeff: Rational::from_integer(c.into()),
                })
                .collect(),
        )
    })
}

fn expr_strategy() -> impl Strategy<Value = ScalarExpr> {
    (poly_strategy(), poly_strategy()).prop_map(|(n, d)| {
        let d = if d.is_zero() { Poly::one() } else { d };
        ScalarExpr::from_fraction(n, d).unwrap()
    })
}

fn at(e: &ScalarExpr, p: [f64; 3]) -> f64 {
    let [x, y, _] = vars();
    e.eval_f64(&|v| if *v == x { p[0] } else if *v == y { p[1] } else { p[2] })
}

fn close(a: f64, b: f64) -> bool {
    !a.is_finite() || !b.is_finite() || (a - b).abs() <= 1e-8 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn field_axioms(a in expr_strategy(), b in expr_strategy(), c in expr_strategy()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.sub(&a).is_zero());
        prop_assert_eq!(a.add(&ScalarExpr::zero()), a.clone());
        prop_assert_eq!(a.mul(&ScalarExpr::one()), a.clone());
        if !a.is_zero() {
            prop_assert!(a.mul(&a.inv().unwrap()).is_one());
            prop_assert_eq!(b.div(&a).unwrap().mul(&a), b.clone());
        } else {
            prop_assert!(a.inv().is_err());
        }
    }

    #[test]
    fn evaluation_is_a_homomorphism(a in expr_strategy(), b in expr_strategy(), p in prop::array::uniform3(-2.0f64..2.0)) {
        prop_assert!(close(at(&a.add(&b), p), at(&a, p) + at(&b, p)));
        prop_assert!(close(at(&a.mul(&b), p), at(&a, p) * at(&b, p)));
    }

    #[test]
    fn canonical_form_is_reduced(a in expr_strategy()) {
        let g = freetrace::symcore::gcd::gcd(a.num(), a.den());
        prop_assert!(g.is_constant());
        prop_assert!(a.den().leading_coeff() > Rational::from_integer(0.into()));
    }

    #[test]
    fn json_round_trip(a in expr_strategy()) {
        prop_assert_eq!(from_json(&to_json(&a)).unwrap(), a);
    }
}
