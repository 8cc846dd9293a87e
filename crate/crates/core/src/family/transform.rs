use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{Atom, Bindings, Expression, Rational};
use crate::jet::{JetSystem, EXTRA_ORDERS};
use crate::parse::{parse_expression_with, ParseContext};

use super::ode::{OdeFamily, DEPENDENT};

pub const NEW_INDEPENDENT: &str = "z";
pub const NEW_DEPENDENT: &str = "w";

/// Point transformation `x = X(z)`, `y = Y(z, w)`, restricted to the linear
/// shape `y = h(z) w + g(z)` by [`PointTransform::shape`].
#[derive(Clone, Debug)]
pub struct PointTransform {
    x_of: Expression,
    y_of: Expression,
    params: BTreeMap<String, Rational>,
}

fn z_function(name: &str) -> Expression {
    Atom::function1(name, NEW_INDEPENDENT, 0).into()
}

/// Context for transform text: one-letter function names default to `(z)`.
pub fn transform_context() -> ParseContext {
    let mut ctx = ParseContext::default();
    for name in ["f", "g", "h", "F", "H", "J", "P"] {
        ctx = ctx.with_function(name, &[NEW_INDEPENDENT]);
    }
    ctx
}

impl PointTransform {
    pub fn new(x_of: Expression, y_of: Expression) -> PointTransform {
        PointTransform {
            x_of,
            y_of,
            params: BTreeMap::new(),
        }
    }

    /// `x = f`, `y = h w + g` for expressions in `z`.
    pub fn linear(f: Expression, h: Expression, g: Expression) -> PointTransform {
        let w: Expression = Atom::jet(NEW_DEPENDENT, 0).into();
        PointTransform::new(f, h * w + g)
    }

    /// `x = f(z)`, `y = h(z) w + g(z)` with formal `f`, `h`, `g`.
    pub fn generic() -> PointTransform {
        PointTransform::linear(z_function("f"), z_function("h"), z_function("g"))
    }

    pub fn identity() -> PointTransform {
        PointTransform::linear(Atom::independent(NEW_INDEPENDENT).into(), Expression::one(), Expression::zero())
    }

    pub fn with_param(mut self, name: &str, value: Rational) -> PointTransform {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn x_of(&self) -> &Expression {
        &self.x_of
    }

    pub fn y_of(&self) -> &Expression {
        &self.y_of
    }

    /// Line-based format: `x = <expr in z>`, `y = <expr in z, w>`, optional
    /// `param: name = <rational>` lines.
    pub fn parse(text: &str) -> Result<PointTransform> {
        let ctx = transform_context();
        let (mut x_of, mut y_of) = (None, None);
        let mut params = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('%').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Syntax {
                line: lineno + 1,
                column: 1,
                message: msg,
            };
            if let Some(rest) = line.strip_prefix("param:") {
                let (name, value) = rest
                    .split_once('=')
                    .ok_or_else(|| bad("expected `param: name = value`".into()))?;
                let value = parse_expression_with(value, &ctx)?
                    .as_constant()
                    .ok_or_else(|| bad("parameter value must be a rational constant".into()))?;
                params.insert(name.trim().to_string(), value);
                continue;
            }
            let (lhs, rhs) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `x = ...` or `y = ...`".into()))?;
            let e = parse_expression_with(rhs, &ctx)?;
            match lhs.trim() {
                "x" => x_of = Some(e),
                "y" => y_of = Some(e),
                other => return Err(bad(format!("unknown left-hand side `{other}`"))),
            }
        }
        let x_of = x_of.ok_or_else(|| Error::Invalid("transform has no `x = ...` line".into()))?;
        let y_of = y_of.ok_or_else(|| Error::Invalid("transform has no `y = ...` line".into()))?;
        Ok(PointTransform { x_of, y_of, params })
    }

    fn param_bindings(&self) -> Bindings {
        self.params
            .iter()
            .map(|(k, v)| (Atom::parameter(k), Expression::constant(v.clone())))
            .collect()
    }

    /// `(x(z), h(z), g(z))` after parameter substitution, validating the linear shape.
    pub fn shape(&self) -> Result<(Expression, Expression, Expression)> {
        let params = self.param_bindings();
        let x_of = self.x_of.substitute(&params)?;
        let y_of = self.y_of.substitute(&params)?;
        let w = Atom::jet(NEW_DEPENDENT, 0);
        if x_of.contains_atom(&w) {
            return Err(Error::SingularTransform("x must not depend on w".into()));
        }
        let h = y_of.differentiate(&w);
        if h.contains_atom(&w) {
            return Err(Error::SingularTransform("y is not linear in w".into()));
        }
        if h.is_zero() {
            return Err(Error::SingularTransform("y does not depend on w (h = 0)".into()));
        }
        let g = y_of.substitute(&Bindings::from([(w, Expression::zero())]))?;
        let zsys = z_system(3);
        if zsys.total_derivative(&x_of)?.is_zero() {
            return Err(Error::SingularTransform("dx/dz vanishes identically".into()));
        }
        Ok((x_of, h, g))
    }
}

impl fmt::Display for PointTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "x = {}", self.x_of)?;
        writeln!(f, "y = {}", self.y_of)?;
        for (k, v) in &self.params {
            writeln!(f, "param: {k} = {v}")?;
        }
        Ok(())
    }
}

fn z_system(order: u32) -> JetSystem {
    JetSystem::new(NEW_INDEPENDENT, &[NEW_DEPENDENT], order + EXTRA_ORDERS).unwrap()
}

/// Transformed equation `w^(n) + Σ B_k w^(k) + B_{-1} = 0`.
///
/// Coefficient atoms `a#0` in the result stand for the original coefficients
/// evaluated at `x = f(z)`.
#[derive(Clone, Debug)]
pub struct TransformResult {
    /// `B_k` by derivative order; key `-1` holds the free term.
    pub coefficients: BTreeMap<i32, Expression>,
    /// Leading coefficient of the pulled-back residual before division.
    pub certificate: Expression,
    /// Pulled-back residual before normalization.
    pub pulled_back: Expression,
}

/// Pulls `Δ` back through `x = f(z)`, `y = h w + g` using `d/dx = (1/f') d/dz`
/// and divides by the leading coefficient.
pub fn transform_equation(fam: &OdeFamily, t: &PointTransform) -> Result<TransformResult> {
    let n = fam.order();
    let (x_of, h, g) = t.shape()?;
    let zsys = z_system(n);
    let w = Expression::atom(Atom::jet(NEW_DEPENDENT, 0));
    let xz = zsys.total_derivative(&x_of)?;
    let mut bindings = Bindings::new();
    let mut yk = h * w + g;
    for k in 0..=n {
        bindings.insert(Atom::jet(DEPENDENT, k), yk.clone());
        if k < n {
            yk = zsys.total_derivative(&yk)?.div_expr(&xz)?;
        }
    }
    let pulled_back = fam.residual().substitute(&bindings)?;
    let leading = pulled_back.differentiate(&Atom::jet(NEW_DEPENDENT, n));
    if leading.is_zero() {
        return Err(Error::SingularTransform("leading coefficient vanishes".into()));
    }
    let mut coefficients = BTreeMap::new();
    let mut free = Bindings::new();
    for k in 0..n {
        let ck = pulled_back.differentiate(&Atom::jet(NEW_DEPENDENT, k));
        coefficients.insert(k as i32, ck.div_expr(&leading)?);
    }
    for k in 0..=n {
        free.insert(Atom::jet(NEW_DEPENDENT, k), Expression::zero());
    }
    let constant = pulled_back.substitute(&free)?;
    coefficients.insert(-1, constant.div_expr(&leading)?);
    Ok(TransformResult {
        coefficients,
        certificate: leading,
        pulled_back,
    })
}

/// Coefficient action induced on the family's arbitrary functions, plus the
/// transformed coefficients that must vanish for the image to stay in the family.
#[derive(Clone, Debug)]
pub struct InducedAction {
    pub coefficients: BTreeMap<String, Expression>,
    pub obstructions: Vec<(String, Expression)>,
    pub certificate: Expression,
}

pub fn induced_coefficient_action(fam: &OdeFamily, t: &PointTransform) -> Result<InducedAction> {
    let result = transform_equation(fam, t)?;
    let mut coefficients = BTreeMap::new();
    let mut obstructions = Vec::new();
    for (k, b) in &result.coefficients {
        let symbol = if *k < 0 {
            fam.nonhomogeneous().map(str::to_string)
        } else {
            fam.coefficients()
                .iter()
                .find(|(_, j)| *j as i32 == *k)
                .map(|(s, _)| s.clone())
        };
        match symbol {
            Some(s) => {
                coefficients.insert(s, b.clone());
            }
            None if !b.is_zero() => obstructions.push((format!("B{k}"), b.clone())),
            None => {}
        }
    }
    Ok(InducedAction {
        coefficients,
        obstructions,
        certificate: result.certificate,
    })
}

/// An equivalence transformation together with its induced coefficient action,
/// i.e. a point symmetry of the augmented equation.
#[derive(Clone, Debug)]
pub struct LiftedTransform {
    pub transform: PointTransform,
    pub gamma: BTreeMap<String, Expression>,
    pub certificate: Expression,
    /// The pulled-back residual equals `certificate ×` the residual in the new
    /// variables with coefficients `gamma`.
    pub verified: bool,
}

pub fn lift_to_symmetry(fam: &OdeFamily, t: &PointTransform) -> Result<LiftedTransform> {
    let result = transform_equation(fam, t)?;
    let action = induced_coefficient_action(fam, t)?;
    if !action.obstructions.is_empty() {
        let report: Vec<String> = action
            .obstructions
            .iter()
            .map(|(k, e)| format!("{k} = {e}"))
            .collect();
        return Err(Error::Obstruction(report.join("; ")));
    }
    let mut image = Expression::atom(Atom::jet(NEW_DEPENDENT, fam.order()));
    for (s, k) in fam.coefficients() {
        image = image + &action.coefficients[s] * Expression::atom(Atom::jet(NEW_DEPENDENT, *k));
    }
    if let Some(r) = fam.nonhomogeneous() {
        image = image + &action.coefficients[r];
    }
    let verified = (result.pulled_back - &result.certificate * image).is_zero() && !result.certificate.is_zero();
    Ok(LiftedTransform {
        transform: t.clone(),
        gamma: action.coefficients,
        certificate: result.certificate,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expression_with;

    fn zexpr(text: &str) -> Expression {
        parse_expression_with(text, &transform_context()).unwrap()
    }

    #[test]
    fn identity_keeps_coefficients() {
        let fam = OdeFamily::nonhomogeneous_third_order();
        let r = transform_equation(&fam, &PointTransform::identity()).unwrap();
        assert!(r.coefficients[&2].is_zero());
        assert_eq!(r.coefficients[&1], zexpr("a1"));
        assert_eq!(r.coefficients[&0], zexpr("a0"));
        assert_eq!(r.coefficients[&-1], zexpr("r"));
    }

    #[test]
    fn generic_b2() {
        let fam = OdeFamily::nonhomogeneous_third_order();
        let r = transform_equation(&fam, &PointTransform::generic()).unwrap();
        let expected = zexpr("3*(h'(z)/h(z) - f''(z)/f'(z))");
        assert_eq!(r.coefficients[&2], expected);
        assert_eq!(r.certificate, zexpr("h(z)/f'(z)^3"));
    }

    #[test]
    fn h_proportional_to_f_prime_kills_b2() {
        let fam = OdeFamily::nonhomogeneous_third_order();
        let t = PointTransform::linear(zexpr("f(z)"), zexpr("lambda*f'(z)"), zexpr("g(z)"));
        let r = transform_equation(&fam, &t).unwrap();
        assert!(r.coefficients[&2].is_zero());
        let lifted = lift_to_symmetry(&fam, &t).unwrap();
        assert!(lifted.verified);
    }

    #[test]
    fn obstruction_reported() {
        let fam = OdeFamily::nonhomogeneous_third_order();
        let err = lift_to_symmetry(&fam, &PointTransform::generic()).unwrap_err();
        assert!(matches!(err, Error::Obstruction(ref s) if s.contains("B2")));
    }

    #[test]
    fn translation_leaves_coefficients() {
        let fam = OdeFamily::normal_third_order();
        let t = PointTransform::linear(zexpr("z + c"), Expression::one(), Expression::zero());
        let action = induced_coefficient_action(&fam, &t).unwrap();
        assert_eq!(action.coefficients["a1"], zexpr("a1"));
        assert_eq!(action.coefficients["a0"], zexpr("a0"));
        assert!(action.obstructions.is_empty());
    }

    #[test]
    fn shape_validation() {
        let bad = PointTransform::new(zexpr("z"), zexpr("w^2"));
        assert!(matches!(bad.shape(), Err(Error::SingularTransform(_))));
        let flat = PointTransform::linear(zexpr("c"), Expression::one(), Expression::zero());
        assert!(matches!(flat.shape(), Err(Error::SingularTransform(_))));
    }

    #[test]
    fn file_format() {
        let t = PointTransform::parse("x = f(z)\ny = lambda*f'(z)*w + g(z)\nparam: lambda = 2\n").unwrap();
        let (_, h, _) = t.shape().unwrap();
        assert_eq!(h, zexpr("2*f'(z)"));
        assert!(PointTransform::parse("x = z\n").is_err());
    }
}
