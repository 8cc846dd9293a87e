use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use super::atom::Atom;
use super::poly::{rat, Monomial, Poly, Rational};
use crate::error::{Error, Result};

/// Rational function over atoms: an expanded numerator over a product of
/// monic polynomial factors with multiplicities.
///
/// Zero testing is exact: the expression is zero iff its numerator has no terms.
/// Common factors are cancelled only when a denominator factor divides the
/// numerator exactly; no polynomial gcd is computed.
#[derive(Clone, Debug)]
pub struct Expression {
    num: Poly,
    den: BTreeMap<Poly, u32>,
}

impl Default for Expression {
    fn default() -> Self {
        Expression::zero()
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        if self.den == other.den {
            return self.num == other.num;
        }
        (self - other).is_zero()
    }
}

impl From<Atom> for Expression {
    fn from(a: Atom) -> Self {
        Expression::atom(a)
    }
}

impl From<Poly> for Expression {
    fn from(p: Poly) -> Self {
        Expression::from_poly(p)
    }
}

impl From<i64> for Expression {
    fn from(n: i64) -> Self {
        Expression::integer(n)
    }
}

impl From<Rational> for Expression {
    fn from(c: Rational) -> Self {
        Expression::constant(c)
    }
}

impl Expression {
    pub fn zero() -> Expression {
        Expression::from_poly(Poly::zero())
    }

    pub fn one() -> Expression {
        Expression::integer(1)
    }

    pub fn integer(n: i64) -> Expression {
        Expression::constant(rat(n))
    }

    pub fn constant(c: Rational) -> Expression {
        Expression::from_poly(Poly::constant(c))
    }

    pub fn atom(a: Atom) -> Expression {
        Expression::from_poly(Poly::atom(a))
    }

    pub fn from_poly(num: Poly) -> Expression {
        Expression {
            num,
            den: BTreeMap::new(),
        }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator_factors(&self) -> &BTreeMap<Poly, u32> {
        &self.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_empty()
    }

    /// Expanded denominator.
    pub fn denominator(&self) -> Poly {
        self.den
            .iter()
            .fold(Poly::one(), |acc, (p, e)| acc.mul(&p.pow(*e)))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = self.num.atoms();
        for p in self.den.keys() {
            p.collect_atoms(&mut out);
        }
        out
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        self.num.contains_atom(a) || self.den.keys().any(|p| p.contains_atom(a))
    }

    fn build(num: Poly, den: BTreeMap<Poly, u32>) -> Expression {
        let mut e = Expression { num, den };
        e.den.retain(|_, k| *k > 0);
        e.cancel();
        e
    }

    fn cancel(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        let factors: Vec<Poly> = self.den.keys().cloned().collect();
        for p in factors {
            let mut e = self.den[&p];
            while e > 0 {
                match self.num.div_exact(&p) {
                    Some(q) => {
                        self.num = q;
                        e -= 1;
                    }
                    None => break,
                }
            }
            if e == 0 {
                self.den.remove(&p);
            } else {
                self.den.insert(p, e);
            }
        }
    }

    pub fn add_expr(&self, other: &Expression) -> Expression {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        if self.den == other.den {
            return Expression::build(self.num.add(&other.num), self.den.clone());
        }
        let mut lcd = self.den.clone();
        for (p, e) in &other.den {
            let slot = lcd.entry(p.clone()).or_insert(0);
            *slot = (*slot).max(*e);
        }
        let lift = |x: &Expression| -> Poly {
            let mut n = x.num.clone();
            for (p, e) in &lcd {
                let have = x.den.get(p).copied().unwrap_or(0);
                if *e > have {
                    n = n.mul(&p.pow(e - have));
                }
            }
            n
        };
        let num = lift(self).add(&lift(other));
        Expression::build(num, lcd)
    }

    pub fn mul_expr(&self, other: &Expression) -> Expression {
        if self.is_zero() || other.is_zero() {
            return Expression::zero();
        }
        let mut den = self.den.clone();
        let mut num = self.num.clone();
        let mut other_num = other.num.clone();
        for (p, e) in &other.den {
            *den.entry(p.clone()).or_insert(0) += e;
        }
        // Cancel factors that appear syntactically on both sides before expanding.
        for (p, e) in den.iter_mut() {
            while *e > 0 {
                if let Some(q) = other_num.div_exact(p) {
                    other_num = q;
                    *e -= 1;
                } else if let Some(q) = num.div_exact(p) {
                    num = q;
                    *e -= 1;
                } else {
                    break;
                }
            }
        }
        Expression::build(num.mul(&other_num), den)
    }

    pub fn scale(&self, c: &Rational) -> Expression {
        Expression {
            num: self.num.scale(c),
            den: if c.is_zero() {
                BTreeMap::new()
            } else {
                self.den.clone()
            },
        }
    }

    /// Divide by a polynomial, splitting off content and monomial factors so the
    /// remaining denominator factor is monic.
    fn div_poly(&self, q: &Poly) -> Result<Expression> {
        if q.is_zero() {
            return Err(Error::DegenerateDivision);
        }
        if let Some(c) = q.as_constant() {
            return Ok(self.scale(&c.recip()));
        }
        let mono = q.monomial_content();
        let rest = q.div_monomial(&mono);
        let lc = rest.leading_coefficient();
        let rest = rest.scale(&lc.recip());
        let mut num = self.num.scale(&lc.recip());
        let mut den = self.den.clone();
        for (a, p) in mono.factors() {
            *den.entry(Poly::atom(a.clone())).or_insert(0) += p;
        }
        if rest.as_constant().is_none() {
            if let Some(qq) = num.div_exact(&rest) {
                num = qq;
            } else {
                *den.entry(rest).or_insert(0) += 1;
            }
        }
        Ok(Expression::build(num, den))
    }

    pub fn div_expr(&self, other: &Expression) -> Result<Expression> {
        if other.is_zero() {
            return Err(Error::DegenerateDivision);
        }
        let mut num = self.num.clone();
        let mut den = self.den.clone();
        for (p, e) in &other.den {
            let have = den.get(p).copied().unwrap_or(0);
            let cancel = have.min(*e);
            if cancel > 0 {
                den.insert(p.clone(), have - cancel);
            }
            if *e > cancel {
                num = num.mul(&p.pow(e - cancel));
            }
        }
        Expression::build(num, den).div_poly(&other.num)
    }

    pub fn powi(&self, k: i32) -> Result<Expression> {
        if k < 0 {
            return Expression::one().div_expr(self)?.powi(-k);
        }
        let k = k as u32;
        if k == 0 {
            return Ok(Expression::one());
        }
        Ok(Expression {
            num: self.num.pow(k),
            den: self.den.iter().map(|(p, e)| (p.clone(), e * k)).collect(),
        })
    }

    pub fn pow(&self, k: u32) -> Expression {
        self.powi(k as i32).expect("non-negative power never divides")
    }

    /// Formal partial derivative; distinct atoms are independent.
    pub fn differentiate(&self, v: &Atom) -> Expression {
        self.derive(&|a: &Atom| (a == v).then(Expression::one))
    }

    /// Applies the derivation sending each atom `a` to `image(a)` (atoms without
    /// an image are constants).
    pub fn derive(&self, image: &dyn Fn(&Atom) -> Option<Expression>) -> Expression {
        let dnum = derive_poly(&self.num, image);
        if self.den.is_empty() {
            return dnum;
        }
        let mut affected: Vec<(Poly, u32, Expression)> = Vec::new();
        for (p, e) in &self.den {
            let dp = derive_poly(p, image);
            if !dp.is_zero() {
                affected.push((p.clone(), *e, dp));
            }
        }
        if affected.is_empty() {
            return dnum.mul_expr(&Expression {
                num: Poly::one(),
                den: self.den.clone(),
            });
        }
        let full: Poly = affected
            .iter()
            .fold(Poly::one(), |acc, (p, _, _)| acc.mul(p));
        let mut numer = dnum.mul_expr(&Expression::from_poly(full));
        let num_expr = Expression::from_poly(self.num.clone());
        for (i, (_, e, dp)) in affected.iter().enumerate() {
            let others = affected
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(Poly::one(), |acc, (_, (q, _, _))| acc.mul(q));
            let term = num_expr
                .mul_expr(dp)
                .mul_expr(&Expression::from_poly(others))
                .scale(&rat(*e as i64));
            numer = numer.sub_expr(&term);
        }
        let mut den = self.den.clone();
        for (p, _, _) in &affected {
            *den.get_mut(p).unwrap() += 1;
        }
        numer.mul_expr(&Expression {
            num: Poly::one(),
            den,
        })
    }

    pub fn sub_expr(&self, other: &Expression) -> Expression {
        self.add_expr(&other.neg_expr())
    }

    pub fn neg_expr(&self) -> Expression {
        Expression {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    /// Simultaneous substitution of atoms by expressions.
    ///
    /// Refuses a binding for a function atom when another derivative of the same
    /// function occurs in `self` unbound.
    pub fn substitute(&self, bindings: &BTreeMap<Atom, Expression>) -> Result<Expression> {
        let present = self.atoms();
        for (key, value) in bindings {
            if value.contains_atom(key) {
                return Err(Error::RecursiveBinding(key.to_string()));
            }
            if key.is_function() {
                if let Some(unbound) = present
                    .iter()
                    .find(|a| a.same_function(key) && !bindings.contains_key(a))
                {
                    return Err(Error::UnboundDerivative {
                        bound: key.to_string(),
                        unbound: unbound.to_string(),
                    });
                }
            }
        }
        self.substitute_unchecked(bindings)
    }

    /// Substitution without the derivative-coverage check; used internally where
    /// bindings are generated consistently.
    pub(crate) fn substitute_unchecked(
        &self,
        bindings: &BTreeMap<Atom, Expression>,
    ) -> Result<Expression> {
        if !self.atoms().iter().any(|a| bindings.contains_key(a)) {
            return Ok(self.clone());
        }
        let mut result = substitute_poly(&self.num, bindings);
        for (p, e) in &self.den {
            let sp = substitute_poly(p, bindings);
            if sp.is_zero() {
                return Err(Error::DegenerateDivision);
            }
            for _ in 0..*e {
                result = result.div_expr(&sp)?;
            }
        }
        Ok(result)
    }

    /// Exact value when every atom maps to a rational.
    pub fn eval_rational(&self, value: &impl Fn(&Atom) -> Option<Rational>) -> Result<Rational> {
        let n = self
            .num
            .eval_rational(value)
            .ok_or_else(|| Error::MissingBinding(first_unbound(&self.atoms(), value)))?;
        let mut d = Rational::one();
        for (p, e) in &self.den {
            let v = p
                .eval_rational(value)
                .ok_or_else(|| Error::MissingBinding(first_unbound(&self.atoms(), value)))?;
            d *= num_traits::pow(v, *e as usize);
        }
        if d.is_zero() {
            return Err(Error::DegenerateDivision);
        }
        Ok(n / d)
    }

    /// Coefficients of the numerator grouped by monomials in atoms matching
    /// `pred`, each divided by the full denominator.
    pub fn split_numerator(&self, pred: impl Fn(&Atom) -> bool) -> Vec<(Monomial, Expression)> {
        let den = Expression {
            num: Poly::one(),
            den: self.den.clone(),
        };
        self.num
            .split_by(pred)
            .into_iter()
            .map(|(m, p)| (m, Expression::from_poly(p).mul_expr(&den)))
            .collect()
    }

    /// Number of numerator terms plus denominator factor terms.
    pub fn size(&self) -> usize {
        self.num.len() + self.den.keys().map(|p| p.len()).sum::<usize>()
    }
}

fn first_unbound(atoms: &BTreeSet<Atom>, value: &impl Fn(&Atom) -> Option<Rational>) -> String {
    atoms
        .iter()
        .find(|a| value(a).is_none())
        .map(|a| a.to_string())
        .unwrap_or_default()
}

fn derive_poly(p: &Poly, image: &dyn Fn(&Atom) -> Option<Expression>) -> Expression {
    let mut poly_part = Poly::zero();
    let mut rational_part = Expression::zero();
    for a in p.atoms() {
        let Some(img) = image(&a) else { continue };
        if img.is_zero() {
            continue;
        }
        let partial = p.diff(&a);
        if img.is_polynomial() {
            poly_part.add_assign(&partial.mul(&img.num));
        } else {
            rational_part = rational_part.add_expr(&Expression::from_poly(partial).mul_expr(&img));
        }
    }
    Expression::from_poly(poly_part).add_expr(&rational_part)
}

fn substitute_poly(p: &Poly, bindings: &BTreeMap<Atom, Expression>) -> Expression {
    let bound = |a: &Atom| bindings.contains_key(a);
    let groups = p.split_by(bound);
    let all_poly = bindings.values().all(|e| e.is_polynomial());
    let mut power_cache: BTreeMap<(Atom, u32), Expression> = BTreeMap::new();
    let mut value_of = |m: &Monomial| -> Expression {
        let mut acc = Expression::one();
        for (a, k) in m.factors() {
            let v = power_cache
                .entry((a.clone(), *k))
                .or_insert_with(|| bindings[a].pow(*k))
                .clone();
            acc = acc.mul_expr(&v);
        }
        acc
    };
    if all_poly {
        let mut out = Poly::zero();
        for (m, rest) in groups {
            let v = value_of(&m);
            out.add_assign(&rest.mul(&v.num));
        }
        Expression::from_poly(out)
    } else {
        let mut out = Expression::zero();
        for (m, rest) in groups {
            let v = value_of(&m);
            out = out.add_expr(&Expression::from_poly(rest).mul_expr(&v));
        }
        out
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $inner:ident) => {
        impl $tr<&Expression> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                self.$inner(rhs)
            }
        }
        impl $tr<Expression> for Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                self.$inner(&rhs)
            }
        }
        impl $tr<&Expression> for Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                self.$inner(rhs)
            }
        }
        impl $tr<Expression> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                self.$inner(&rhs)
            }
        }
    };
}

binop!(Add, add, add_expr);
binop!(Sub, sub, sub_expr);
binop!(Mul, mul, mul_expr);

impl Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        self.neg_expr()
    }
}

impl Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        self.neg_expr()
    }
}

impl Zero for Expression {
    fn zero() -> Self {
        Expression::zero()
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

impl std::iter::Sum for Expression {
    fn sum<I: Iterator<Item = Expression>>(iter: I) -> Self {
        iter.fold(Expression::zero(), |a, b| a.add_expr(&b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expression {
        Atom::independent("x").into()
    }
    fn f() -> Expression {
        Atom::function1("f", "x", 0).into()
    }
    fn g() -> Expression {
        Atom::function1("g", "x", 0).into()
    }

    #[test]
    fn expansion_identity() {
        let one = Expression::one();
        let two = Expression::integer(2);
        let e = (&x() + &one).pow(2) - x().pow(2) - &two * &x() - one;
        assert!(e.is_zero());
    }

    #[test]
    fn identical_factors_cancel() {
        assert_eq!(x().div_expr(&x()).unwrap().as_constant(), Some(rat(1)));
        let e = (f() * g()).div_expr(&g()).unwrap() - f();
        assert!(e.is_zero());
    }

    #[test]
    fn divide_by_zero_rejected() {
        let z = x() - x();
        assert_eq!(x().div_expr(&z), Err(Error::DegenerateDivision));
    }

    #[test]
    fn partial_derivatives() {
        let d = x().pow(3).differentiate(&Atom::independent("x"));
        assert_eq!(d, Expression::integer(3) * x().pow(2));
        let fa = Atom::function1("f", "x", 0);
        let e = f().pow(2) * g() + g();
        assert_eq!(e.differentiate(&fa), Expression::integer(2) * f() * g());
    }

    #[test]
    fn quotient_rule() {
        let xa = Atom::independent("x");
        let e = Expression::one().div_expr(&(x() + Expression::one())).unwrap();
        let d = e.differentiate(&xa);
        let expected = Expression::integer(-1)
            .div_expr(&(x() + Expression::one()).pow(2))
            .unwrap();
        assert_eq!(d, expected);
    }

    #[test]
    fn substitution_rejects_partial_function_binding() {
        let fa = Atom::function1("f", "x", 0);
        let fp: Expression = Atom::function1("f", "x", 1).into();
        let e = f() + fp;
        let mut b = BTreeMap::new();
        b.insert(fa, x().pow(2));
        assert!(matches!(
            e.substitute(&b),
            Err(Error::UnboundDerivative { .. })
        ));
    }

    #[test]
    fn substitution_to_zero_denominator() {
        let xa = Atom::independent("x");
        let e = Expression::one().div_expr(&(x() - Expression::one())).unwrap();
        let mut b = BTreeMap::new();
        b.insert(xa, Expression::one());
        assert_eq!(e.substitute(&b), Err(Error::DegenerateDivision));
    }
}
