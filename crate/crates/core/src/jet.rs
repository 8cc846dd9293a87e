//! Jet-space structure over one independent variable: total derivatives,
//! prolongation of point vector fields, and consistent binding of concrete
//! functions into derivative atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::expr::{Atom, AtomKind, Bindings, Expression, Rational};

/// Default number of orders tracked beyond the equation order.
pub const EXTRA_ORDERS: u32 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetSystem {
    independent: String,
    dependents: Vec<String>,
    max_order: Vec<u32>,
}

impl JetSystem {
    pub fn new<S: AsRef<str>>(independent: &str, dependents: &[S], max_order: u32) -> Result<JetSystem> {
        let dependents: Vec<String> = dependents.iter().map(|s| s.as_ref().to_string()).collect();
        let mut seen = BTreeSet::new();
        seen.insert(independent.to_string());
        for d in &dependents {
            if !seen.insert(d.clone()) {
                return Err(Error::DuplicateCoordinate(d.clone()));
            }
        }
        let max_order = vec![max_order; dependents.len()];
        Ok(JetSystem {
            independent: independent.to_string(),
            dependents,
            max_order,
        })
    }

    pub fn with_max_order(mut self, symbol: &str, order: u32) -> JetSystem {
        if let Some(i) = self.index_of(symbol) {
            self.max_order[i] = order;
        }
        self
    }

    pub fn independent(&self) -> &str {
        &self.independent
    }

    pub fn independent_atom(&self) -> Atom {
        Atom::independent(&self.independent)
    }

    pub fn dependents(&self) -> &[String] {
        &self.dependents
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.dependents.iter().position(|d| d == symbol)
    }

    pub fn max_order(&self, symbol: &str) -> Option<u32> {
        self.index_of(symbol).map(|i| self.max_order[i])
    }

    /// Coordinate names: the independent variable followed by the dependents.
    pub fn coordinates(&self) -> Vec<&str> {
        std::iter::once(self.independent.as_str())
            .chain(self.dependents.iter().map(|s| s.as_str()))
            .collect()
    }

    fn arg_total_derivative(&self, arg: &str) -> Option<Expression> {
        if arg == self.independent {
            Some(Expression::one())
        } else if self.index_of(arg).is_some() {
            Some(Atom::jet(arg, 1).into())
        } else {
            None
        }
    }

    fn check_orders(&self, e: &Expression) -> Result<()> {
        for a in e.atoms() {
            if let Some((s, k)) = a.as_jet() {
                if let Some(max) = self.max_order(s) {
                    if k >= max {
                        return Err(Error::OrderLimit {
                            symbol: s.to_string(),
                            order: k + 1,
                            max,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// `D_x e`: explicit x-derivative plus the jet shifts, with function atoms
    /// differentiated through their arguments by the chain rule.
    pub fn total_derivative(&self, e: &Expression) -> Result<Expression> {
        self.check_orders(e)?;
        Ok(e.derive(&|a: &Atom| match a.kind() {
            AtomKind::Independent(n) if *n == self.independent => Some(Expression::one()),
            AtomKind::Jet { symbol, order } if self.index_of(symbol).is_some() => {
                Some(Atom::jet(symbol, order + 1).into())
            }
            AtomKind::Function { args, .. } => {
                let mut acc = Expression::zero();
                for (slot, arg) in args.iter().enumerate() {
                    if let Some(d) = self.arg_total_derivative(arg) {
                        acc = acc + d * Expression::atom(a.function_raised(slot).unwrap());
                    }
                }
                (!acc.is_zero()).then_some(acc)
            }
            _ => None,
        }))
    }

    pub fn total_derivative_n(&self, e: &Expression, n: u32) -> Result<Expression> {
        let mut out = e.clone();
        for _ in 0..n {
            out = self.total_derivative(&out)?;
        }
        Ok(out)
    }

    /// Partial derivative with respect to a point coordinate (the independent
    /// variable or a zeroth-order dependent), including the chain through
    /// function atoms that take that coordinate as an argument.
    pub fn coordinate_derivative(&self, e: &Expression, coordinate: &str) -> Expression {
        let target = if coordinate == self.independent {
            Atom::independent(coordinate)
        } else {
            Atom::jet(coordinate, 0)
        };
        e.derive(&|a: &Atom| {
            if *a == target {
                return Some(Expression::one());
            }
            let (_, args, _) = a.as_function()?;
            let mut acc = Expression::zero();
            for (slot, arg) in args.iter().enumerate() {
                if arg == coordinate {
                    acc = acc + Expression::atom(a.function_raised(slot).unwrap());
                }
            }
            (!acc.is_zero()).then_some(acc)
        })
    }
}

/// Point vector field `ξ ∂x + Σ η_u ∂u` on a jet system, with a write-once
/// cache of prolonged coefficients.
pub struct VectorField {
    sys: JetSystem,
    xi: Expression,
    etas: Vec<Expression>,
    cache: Mutex<BTreeMap<(usize, u32), Expression>>,
}

impl Clone for VectorField {
    fn clone(&self) -> Self {
        VectorField {
            sys: self.sys.clone(),
            xi: self.xi.clone(),
            etas: self.etas.clone(),
            cache: Mutex::new(self.cache.lock().unwrap_or_else(|e| e.into_inner()).clone()),
        }
    }
}

/// Fields compare by coordinates and coefficients; tracked jet orders are ignored.
impl PartialEq for VectorField {
    fn eq(&self, other: &Self) -> bool {
        self.sys.independent == other.sys.independent
            && self.sys.dependents == other.sys.dependents
            && self.xi == other.xi && self.etas == other.etas
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField {{ {self} }}")
    }
}

impl VectorField {
    pub fn new(sys: JetSystem, xi: Expression, etas: Vec<Expression>) -> Result<VectorField> {
        if etas.len() != sys.dependents.len() {
            return Err(Error::CoordinateMismatch(format!(
                "{} coefficients for {} dependent symbols",
                etas.len(),
                sys.dependents.len()
            )));
        }
        Ok(VectorField {
            sys,
            xi,
            etas,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn zero(sys: JetSystem) -> VectorField {
        let n = sys.dependents.len();
        VectorField::new(sys, Expression::zero(), vec![Expression::zero(); n]).unwrap()
    }

    pub fn system(&self) -> &JetSystem {
        &self.sys
    }

    pub fn xi(&self) -> &Expression {
        &self.xi
    }

    pub fn etas(&self) -> &[Expression] {
        &self.etas
    }

    pub fn eta(&self, symbol: &str) -> Option<&Expression> {
        self.sys.index_of(symbol).map(|i| &self.etas[i])
    }

    /// Coefficient for a coordinate name (independent or dependent).
    pub fn component(&self, coordinate: &str) -> Option<&Expression> {
        if coordinate == self.sys.independent {
            Some(&self.xi)
        } else {
            self.eta(coordinate)
        }
    }

    /// Coefficients in coordinate order.
    pub fn components(&self) -> Vec<&Expression> {
        std::iter::once(&self.xi).chain(self.etas.iter()).collect()
    }

    pub fn map(&self, f: impl Fn(&Expression) -> Result<Expression>) -> Result<VectorField> {
        VectorField::new(
            self.sys.clone(),
            f(&self.xi)?,
            self.etas.iter().map(&f).collect::<Result<_>>()?,
        )
    }

    fn check_same_system(&self, other: &VectorField) -> Result<()> {
        if self.sys.independent != other.sys.independent || self.sys.dependents != other.sys.dependents {
            return Err(Error::CoordinateMismatch(format!(
                "{:?} vs {:?}",
                self.sys.coordinates(),
                other.sys.coordinates()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.check_same_system(other)?;
        VectorField::new(
            self.sys.clone(),
            &self.xi + &other.xi,
            self.etas.iter().zip(&other.etas).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.add(&other.scale(&Expression::integer(-1)))
    }

    pub fn scale(&self, c: &Expression) -> VectorField {
        VectorField::new(
            self.sys.clone(),
            &self.xi * c,
            self.etas.iter().map(|e| e * c).collect(),
        )
        .unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.xi.is_zero() && self.etas.iter().all(|e| e.is_zero())
    }

    /// Prolonged coefficient of `symbol` at jet order `order`, via
    /// `φ^(k+1) = D_x φ^(k) − u_{k+1} D_x ξ`.
    pub fn prolonged(&self, symbol: &str, order: u32) -> Result<Expression> {
        let idx = self
            .sys
            .index_of(symbol)
            .ok_or_else(|| Error::CoordinateMismatch(format!("no dependent symbol `{symbol}`")))?;
        self.prolonged_index(idx, order)
    }

    fn prolonged_index(&self, idx: usize, order: u32) -> Result<Expression> {
        if order == 0 {
            return Ok(self.etas[idx].clone());
        }
        if let Some(e) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(&(idx, order)) {
            return Ok(e.clone());
        }
        let prev = self.prolonged_index(idx, order - 1)?;
        let symbol = &self.sys.dependents[idx];
        let dxi = self.sys.total_derivative(&self.xi)?;
        let value = self.sys.total_derivative(&prev)? - Expression::atom(Atom::jet(symbol, order)) * dxi;
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(cache.entry((idx, order)).or_insert(value).clone())
    }

    /// Computes and attaches every prolonged coefficient up to the requested
    /// order per symbol (symbols not listed are left at order 0).
    pub fn prolong(&self, orders: &BTreeMap<String, u32>) -> Result<VectorField> {
        for (symbol, order) in orders {
            for k in 1..=*order {
                self.prolonged(symbol, k)?;
            }
        }
        Ok(self.clone())
    }

    /// Applies the (prolonged as needed) field to a function on the jet space.
    pub fn apply(&self, f: &Expression) -> Result<Expression> {
        let mut images: BTreeMap<Atom, Expression> = BTreeMap::new();
        let indep = self.sys.independent_atom();
        for a in f.atoms() {
            match a.kind() {
                AtomKind::Independent(_) if a == indep => {
                    images.insert(a.clone(), self.xi.clone());
                }
                AtomKind::Jet { symbol, order } => {
                    if let Some(i) = self.sys.index_of(symbol) {
                        images.insert(a.clone(), self.prolonged_index(i, *order)?);
                    }
                }
                AtomKind::Function { args, .. } => {
                    let mut acc = Expression::zero();
                    for (slot, arg) in args.iter().enumerate() {
                        if let Some(c) = self.component(arg) {
                            acc = acc + c * Expression::atom(a.function_raised(slot).unwrap());
                        }
                    }
                    if !acc.is_zero() {
                        images.insert(a.clone(), acc);
                    }
                }
                _ => {}
            }
        }
        Ok(f.derive(&|a: &Atom| images.get(a).cloned()))
    }

    /// Substitutes into every coefficient; the prolongation cache is dropped.
    pub fn substitute(&self, bindings: &Bindings) -> Result<VectorField> {
        self.map(|e| e.substitute(bindings))
    }
}

/// Bindings `name^(k)(var) ↦ d^k concrete / d var^k` for `k = 0..=max_order`.
pub fn bind_function(name: &str, var: &str, concrete: &Expression, max_order: u32) -> Result<Bindings> {
    let x = Atom::independent(var);
    for a in concrete.atoms() {
        match a.kind() {
            AtomKind::Independent(n) if n == var => {}
            AtomKind::Parameter(_) => {}
            _ => {
                return Err(Error::InvalidBinding(format!(
                    "`{a}` in the value bound to {name}; only `{var}` and parameters may occur"
                )))
            }
        }
    }
    let mut out = Bindings::new();
    let mut current = concrete.clone();
    for k in 0..=max_order {
        out.insert(Atom::function1(name, var, k), current.clone());
        current = current.differentiate(&x);
    }
    Ok(out)
}

/// Bindings `name^(k) ↦ d^k definition / dx^k` where the derivatives are total
/// derivatives on `sys` (for abbreviations such as `μ = −2a0 + a1'`).
pub fn bind_definition(name: &str, definition: &Expression, sys: &JetSystem, max_order: u32) -> Result<Bindings> {
    let mut out = Bindings::new();
    let mut current = definition.clone();
    for k in 0..=max_order {
        out.insert(Atom::function1(name, sys.independent(), k), current.clone());
        if k < max_order {
            current = sys.total_derivative(&current)?;
        }
    }
    Ok(out)
}

/// Bindings from an explicit list of derivative values `name^(k) ↦ values[k]`.
pub fn bind_derivatives(name: &str, var: &str, values: &[Expression]) -> Bindings {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| (Atom::function1(name, var, k as u32), v.clone()))
        .collect()
}

/// Constant multiple of a field by a rational.
pub fn scale_rational(field: &VectorField, c: &Rational) -> VectorField {
    field.scale(&Expression::constant(c.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ratio;

    fn sys() -> JetSystem {
        JetSystem::new("x", &["y", "a1", "a0"], 7).unwrap()
    }
    fn x() -> Expression {
        Atom::independent("x").into()
    }
    fn f(k: u32) -> Expression {
        Atom::function1("f", "x", k).into()
    }
    fn jet(s: &str, k: u32) -> Expression {
        Atom::jet(s, k).into()
    }

    #[test]
    fn total_derivative_basics() {
        let s = sys();
        assert_eq!(s.total_derivative(&jet("y", 0)).unwrap(), jet("y", 1));
        let d = s.total_derivative(&(f(0) * jet("y", 0))).unwrap();
        assert_eq!(d, f(1) * jet("y", 0) + f(0) * jet("y", 1));
        let mu = Expression::integer(-2) * jet("a0", 0) + jet("a1", 1);
        let dmu = s.total_derivative(&mu).unwrap();
        assert_eq!(dmu, Expression::integer(-2) * jet("a0", 1) + jet("a1", 2));
    }

    #[test]
    fn order_limit() {
        let s = JetSystem::new("x", &["y"], 3).unwrap();
        assert!(matches!(
            s.total_derivative(&jet("y", 3)),
            Err(Error::OrderLimit { .. })
        ));
    }

    #[test]
    fn multivariate_chain_rule() {
        let s = sys();
        let phi: Expression = Atom::function("F", &["x", "y"], &[0, 0]).into();
        let d = s.total_derivative(&phi).unwrap();
        let expected = Expression::atom(Atom::function("F", &["x", "y"], &[1, 0]))
            + jet("y", 1) * Expression::atom(Atom::function("F", &["x", "y"], &[0, 1]));
        assert_eq!(d, expected);
    }

    #[test]
    fn translation_prolongs_to_zero() {
        let s = JetSystem::new("x", &["y"], 7).unwrap();
        let v = VectorField::new(s, Expression::one(), vec![Expression::zero()]).unwrap();
        for k in 0..5 {
            assert!(v.prolonged("y", k).unwrap().is_zero());
        }
    }

    #[test]
    fn first_prolongation_of_projected_generator() {
        let s = JetSystem::new("x", &["y"], 7).unwrap();
        let k1: Expression = Atom::parameter("k1").into();
        let v = VectorField::new(s, f(0), vec![(&k1 + f(1)) * jet("y", 0)]).unwrap();
        let p1 = v.prolonged("y", 1).unwrap();
        assert_eq!(p1, k1 * jet("y", 1) + f(2) * jet("y", 0));
    }

    #[test]
    fn bind_function_derivatives() {
        let b = bind_function("f", "x", &x().pow(2), 3).unwrap();
        assert_eq!(b[&Atom::function1("f", "x", 1)], Expression::integer(2) * x());
        assert_eq!(b[&Atom::function1("f", "x", 2)], Expression::integer(2));
        assert!(b[&Atom::function1("f", "x", 3)].is_zero());

        let one = Expression::one();
        let inv = one.div_expr(&(&one - x())).unwrap();
        let b = bind_function("f", "x", &inv, 2).unwrap();
        let d1 = one.div_expr(&(&one - x()).pow(2)).unwrap();
        let d2 = Expression::integer(2).div_expr(&(&one - x()).pow(3)).unwrap();
        assert_eq!(b[&Atom::function1("f", "x", 1)], d1);
        assert_eq!(b[&Atom::function1("f", "x", 2)], d2);

        let b = bind_function("g", "x", &Expression::zero(), 4).unwrap();
        assert!(b.values().all(|e| e.is_zero()));
        assert!(bind_function("g", "x", &jet("y", 0), 2).is_err());
    }

    #[test]
    fn prolongation_is_linear() {
        let s = JetSystem::new("x", &["y"], 7).unwrap();
        let a = VectorField::new(s.clone(), f(0), vec![f(1) * jet("y", 0)]).unwrap();
        let g: Expression = Atom::function1("g", "x", 0).into();
        let b = VectorField::new(s, x() * &g, vec![g.clone()]).unwrap();
        let (ca, cb) = (Expression::constant(ratio(3, 2)), Expression::integer(-5));
        let sum = a.scale(&ca).add(&b.scale(&cb)).unwrap();
        for k in 0..4 {
            let lhs = sum.prolonged("y", k).unwrap();
            let rhs = &ca * a.prolonged("y", k).unwrap() + &cb * b.prolonged("y", k).unwrap();
            assert_eq!(lhs, rhs);
        }
    }
}
