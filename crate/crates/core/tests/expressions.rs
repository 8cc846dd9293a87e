use std::path::Path;

use equivgroups::expr::{eval_numeric, rat, NumericPoint, Tree};
use equivgroups::jet::JetSystem;
use equivgroups::parse::{parse_expression, parse_tree, ParseContext};
use equivgroups::{Atom, Error, Expression};
use proptest::prelude::*;

fn atoms() -> Vec<Atom> {
    vec![
        Atom::independent("x"),
        Atom::jet("y", 0),
        Atom::jet("y", 1),
        Atom::jet("y", 2),
        Atom::function1("f", "x", 0),
        Atom::function1("f", "x", 1),
        Atom::parameter("k"),
    ]
}

fn leaf() -> impl Strategy<Value = Tree> {
    prop_oneof![
        (-5i64..=5, 1i64..=4).prop_map(|(p, q)| Tree::Number(rat(p) / rat(q))),
        (0..atoms().len()).prop_map(|i| Tree::Atom(atoms()[i].clone())),
    ]
}

/// Polynomial trees: no division, so normalization never fails.
fn poly_tree() -> impl Strategy<Value = Tree> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Mul(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Tree::Neg(Box::new(a))),
            (inner, 0i32..=3).prop_map(|(a, k)| Tree::Pow(Box::new(a), k)),
        ]
    })
}

/// Rational trees whose divisors are shifted atoms, nonzero at the sample points.
fn rational_tree() -> impl Strategy<Value = Tree> {
    (poly_tree(), 0..atoms().len(), poly_tree()).prop_map(|(a, i, b)| {
        let shifted = Tree::Add(Box::new(Tree::Atom(atoms()[i].clone())), Box::new(Tree::Number(rat(10))));
        Tree::Add(Box::new(a), Box::new(Tree::Div(Box::new(b), Box::new(shifted))))
    })
}

fn point(values: &[f64]) -> NumericPoint {
    atoms().into_iter().zip(values.iter().copied()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn addition_and_multiplication_commute(a in rational_tree(), b in rational_tree()) {
        let (a, b) = (a.normalize().unwrap(), b.normalize().unwrap());
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert!((&a - &a).is_zero());
    }

    #[test]
    fn total_derivative_product_rule(a in rational_tree(), b in poly_tree()) {
        let sys = JetSystem::new("x", &["y"], 8).unwrap();
        let (a, b) = (a.normalize().unwrap(), b.normalize().unwrap());
        let lhs = sys.total_derivative(&(&a * &b)).unwrap();
        let rhs = sys.total_derivative(&a).unwrap() * &b + &a * sys.total_derivative(&b).unwrap();
        prop_assert!((lhs - rhs).is_zero());
    }

    #[test]
    fn printed_form_reparses(t in rational_tree()) {
        let e = t.normalize().unwrap();
        let again = parse_expression(&e.to_string()).unwrap();
        prop_assert_eq!(again, e);
    }

    #[test]
    fn tree_and_normal_form_agree(t in rational_tree(), values in prop::collection::vec(-2.0f64..2.0, 7)) {
        let p = point(&values);
        let direct = t.eval(&p).unwrap();
        let normal = eval_numeric(&t.normalize().unwrap(), &p).unwrap();
        prop_assert!((direct - normal).abs() <= 1e-8 * direct.abs().max(1.0), "{} vs {}", direct, normal);
    }
}

fn grammar_fixtures() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/grammar");
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "expr"))
        .map(|p| (p.display().to_string(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn grammar_fixtures_round_trip() {
    let fixtures = grammar_fixtures();
    assert!(fixtures.len() >= 50);
    for (name, text) in fixtures {
        let e = parse_expression(text.trim()).unwrap_or_else(|err| panic!("{name}: {err}"));
        let printed = e.to_string();
        let again = parse_expression(&printed).unwrap_or_else(|err| panic!("{name}: `{printed}`: {err}"));
        assert_eq!(again, e, "{name}");
        assert_eq!(again.to_string(), printed, "{name}");
    }
}

#[test]
fn mutated_fixtures_never_panic() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let ctx = ParseContext::default();
    let noise = ['(', ')', '+', '*', '^', '/', '\'', ',', 'D', '#', ' ', '9', '-', '.'];
    let mut errors = 0;
    for (_, text) in grammar_fixtures() {
        for _ in 0..40 {
            let mut chars: Vec<char> = text.trim().chars().collect();
            for _ in 0..rng.gen_range(1..=3) {
                let i = rng.gen_range(0..=chars.len());
                match rng.gen_range(0..3) {
                    0 if i < chars.len() => {
                        chars.remove(i);
                    }
                    1 if i < chars.len() => chars[i] = noise[rng.gen_range(0..noise.len())],
                    _ => chars.insert(i, noise[rng.gen_range(0..noise.len())]),
                }
            }
            let s: String = chars.into_iter().collect();
            match parse_tree(&s, &ctx) {
                Ok(t) => {
                    let _ = t.normalize();
                }
                Err(Error::Syntax { line, column, .. }) | Err(Error::UnknownDerivative { line, column, .. }) => {
                    assert!(line >= 1 && column >= 1, "{s}");
                    errors += 1;
                }
                Err(_) => errors += 1,
            }
        }
    }
    assert!(errors > 0);
}

#[test]
fn exact_cancellation() {
    let e = parse_expression("(x^2 - 1)/(x - 1) - (x + 1)").unwrap();
    assert!(e.is_zero());
    let e = parse_expression("f'/f - f'/f").unwrap();
    assert_eq!(e, Expression::zero());
    assert!(parse_expression("1/(x - x)").is_err());
}
