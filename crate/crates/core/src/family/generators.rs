//! Generator fields of the third-order families, built from arbitrary
//! coefficient functions so the same code gives formal and concrete fields.

use crate::expr::{Atom, Expression};
use crate::jet::{JetSystem, VectorField};

use super::ode::{OdeFamily, INDEPENDENT};

fn x_system() -> JetSystem {
    JetSystem::new::<&str>(INDEPENDENT, &[], 0).unwrap()
}

/// `d^k e / dx^k`, chaining through function atoms of `x`.
pub fn dx(e: &Expression, k: u32) -> Expression {
    let sys = x_system();
    (0..k).fold(e.clone(), |acc, _| sys.coordinate_derivative(&acc, INDEPENDENT))
}

fn jet(s: &str) -> Expression {
    Atom::jet(s, 0).into()
}

fn int(n: i64) -> Expression {
    Expression::integer(n)
}

pub fn formal(name: &str) -> Expression {
    Atom::function1(name, INDEPENDENT, 0).into()
}

pub fn parameter(name: &str) -> Expression {
    Atom::parameter(name).into()
}

/// `-2 (a1 f' + f''')`.
pub fn a1_component(f: &Expression) -> Expression {
    int(-2) * (jet("a1") * dx(f, 1) + dx(f, 3))
}

/// `-(3 a0 f' + a1 f'' + f'''')`.
pub fn a0_component(f: &Expression) -> Expression {
    -(int(3) * jet("a0") * dx(f, 1) + jet("a1") * dx(f, 2) + dx(f, 4))
}

/// `X¹(f, k) = {f, (k + f') y, -2(a1 f' + f'''), -(3 a0 f' + a1 f'' + f'''')}`
/// on `(x; y, a1, a0)`.
pub fn x1_field(f: &Expression, k: &Expression) -> VectorField {
    let sys = OdeFamily::normal_third_order().jet_system();
    VectorField::new(
        sys,
        f.clone(),
        vec![(k + dx(f, 1)) * jet("y"), a1_component(f), a0_component(f)],
    )
    .unwrap()
}

/// `X²(g) = {0, g, 0, -(a0 g + a1 g' + g''')/y}` on `(x; y, a1, a0)`.
pub fn x2_field(g: &Expression) -> VectorField {
    let sys = OdeFamily::normal_third_order().jet_system();
    let c = (jet("a0") * g + jet("a1") * dx(g, 1) + dx(g, 3))
        .div_expr(&jet("y"))
        .unwrap();
    VectorField::new(sys, Expression::zero(), vec![g.clone(), Expression::zero(), -c]).unwrap()
}

/// Generic symmetry generator of `y''' + a1 y' + a0 y = 0` with formal
/// `f`, `g`, `k1`: `X¹(f, k1) + X²(g)`.
pub fn normal_form_generator() -> VectorField {
    x1_field(&formal("f"), &parameter("k1"))
        .add(&x2_field(&formal("g")))
        .unwrap()
}

/// Induced generator on the coefficients, `X⁰(f)` on `(x; a1, a0)`.
pub fn x0_field(f: &Expression) -> VectorField {
    let sys = OdeFamily::normal_third_order().coefficient_system();
    VectorField::new(sys, f.clone(), vec![a1_component(f), a0_component(f)]).unwrap()
}

/// Symmetry generator of `y''' + a1 y' + a0 y + r = 0` on `(x; y, a1, a0, r)`
/// with formal `J`, `P`, `k1` and `φ4(x, y, a1, a0, r)`.
pub fn nonhomogeneous_generator() -> VectorField {
    let j = formal("J");
    let p = formal("P");
    let k1 = parameter("k1");
    let phi4 = phi4();
    let r = jet("r");
    let inner = jet("a0") * &p + &phi4 + int(2) * &r * dx(&j, 1) - &r * &k1 + jet("a1") * dx(&p, 1) + dx(&p, 3);
    let c3 = -inner.div_expr(&jet("y")).unwrap() + a0_component(&j);
    let sys = OdeFamily::nonhomogeneous_third_order().jet_system();
    VectorField::new(
        sys,
        j.clone(),
        vec![(&k1 + dx(&j, 1)) * jet("y") + p, a1_component(&j), c3, phi4],
    )
    .unwrap()
}

pub fn phi4() -> Expression {
    Atom::function("phi4", &["x", "y", "a1", "a0", "r"], &[0, 0, 0, 0, 0]).into()
}
