use std::path::Path;

use equivgroups::expr::Bindings;
use equivgroups::family::generators::normal_form_generator;
use equivgroups::family::{
    check_symmetry, determining_system, lift_to_symmetry, transform_equation, verify_generator, OdeFamily,
    PointTransform,
};
use equivgroups::jet::bind_derivatives;
use equivgroups::parse::{parse_expression, parse_vector_field};
use equivgroups::{Atom, Expression};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)).unwrap()
}

fn transform(name: &str) -> PointTransform {
    PointTransform::parse(&fixture(name)).unwrap()
}

/// Coefficients `(a1, a0)` in `x` after pulling `y''' + a1 y' + a0 y = 0` back
/// through `t`, renaming `z` to `x`.
fn pull(t: &PointTransform, a1: &Expression, a0: &Expression) -> (Expression, Expression) {
    let fam = OdeFamily::normal_third_order();
    let r = transform_equation(&fam, t).unwrap();
    assert!(r.coefficients[&2].is_zero());
    let x = Atom::independent("x");
    let at = |c: &Expression| c.substitute(&Bindings::from([(x.clone(), t.x_of().clone())])).unwrap();
    let values = Bindings::from([(Atom::jet("a1", 0), at(a1)), (Atom::jet("a0", 0), at(a0))]);
    let rename = Bindings::from([(Atom::independent("z"), Expression::atom(x.clone()))]);
    let get = |k: i32| r.coefficients[&k].substitute(&values).unwrap().substitute(&rename).unwrap();
    (get(1), get(0))
}

#[test]
fn composed_transforms_match_the_composite() {
    let scaling = transform("scaling.tr");
    let moebius = transform("moebius.tr");
    let composite = PointTransform::parse("x = 2*z/(1 - z)\ny = 2*w/(1 - z)^2").unwrap();
    let a1 = parse_expression("x").unwrap();
    let a0 = parse_expression("x^2 + 1").unwrap();

    let (b1, b0) = pull(&scaling, &a1, &a0);
    let (c1, c0) = pull(&moebius, &b1, &b0);
    let (d1, d0) = pull(&composite, &a1, &a0);
    assert_eq!(c1, d1);
    assert_eq!(c0, d0);
}

#[test]
fn exponential_lift_in_closed_form() {
    // x = e^z, y = e^z w turns y''' + a1 y' + a0 y = 0 into
    // w''' + (a1 E^2 - 1) w' + (a1 E^2 + a0 E^3) w = 0 with E = e^z.
    let fam = OdeFamily::normal_third_order();
    let lifted = lift_to_symmetry(&fam, &transform("exp.tr")).unwrap();
    assert!(lifted.verified);
    let e = Expression::atom(Atom::parameter("E"));
    let bindings = bind_derivatives("f", "z", &vec![e.clone(); 6]);
    let a1 = Expression::atom(Atom::jet("a1", 0));
    let a0 = Expression::atom(Atom::jet("a0", 0));
    let g1 = lifted.gamma["a1"].substitute(&bindings).unwrap();
    let g0 = lifted.gamma["a0"].substitute(&bindings).unwrap();
    assert_eq!(g1, &a1 * e.pow(2) - Expression::one());
    assert_eq!(g0, &a1 * e.pow(2) + &a0 * e.pow(3));
}

#[test]
fn mutants_fail_both_checks() {
    let fam = OdeFamily::normal_third_order();
    let system = determining_system(&fam).unwrap();
    assert!(verify_generator(&parse_vector_field(&fixture("x3ode.vf")).unwrap(), &system));
    for m in ["c4-sign", "eta-double", "a1-factor", "drop-f4"] {
        let x = parse_vector_field(&fixture(&format!("mutants/{m}.vf"))).unwrap();
        assert!(!check_symmetry(&x, &fam).unwrap().holds, "{m}");
        assert!(!verify_generator(&x, &system), "{m}");
    }
}

#[test]
fn fixture_generator_matches_builder() {
    let x = parse_vector_field(&fixture("x3ode.vf")).unwrap();
    assert_eq!(x, normal_form_generator());
}

#[test]
fn family_files_match_builtins() {
    assert_eq!(
        OdeFamily::parse(&fixture("e3nor.fam")).unwrap().to_string(),
        OdeFamily::normal_third_order().to_string()
    );
    assert_eq!(
        OdeFamily::parse(&fixture("e3nh.fam")).unwrap().to_string(),
        OdeFamily::nonhomogeneous_third_order().to_string()
    );
}

#[test]
fn translation_keeps_the_form() {
    let fam = OdeFamily::nonhomogeneous_third_order();
    let r = transform_equation(&fam, &transform("translation.tr")).unwrap();
    assert!(r.coefficients[&2].is_zero());
    assert_eq!(r.coefficients[&1], Expression::atom(Atom::jet("a1", 0)));
    assert_eq!(r.certificate, Expression::one());
}
