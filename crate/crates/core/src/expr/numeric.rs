use std::collections::HashMap;

use num_traits::ToPrimitive;

use super::atom::Atom;
use super::expression::Expression;
use super::poly::Poly;
use crate::error::{Error, Result};

/// Denominators closer to zero than this are rejected.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

pub type NumericPoint = HashMap<Atom, f64>;

/// IEEE double evaluation of the normalized form.
pub fn eval_numeric(e: &Expression, point: &NumericPoint) -> Result<f64> {
    let value = |a: &Atom| point.get(a).copied();
    let num = eval_poly(e.numerator(), &value)?;
    let mut den = 1.0;
    for (p, k) in e.denominator_factors() {
        den *= eval_poly(p, &value)?.powi(*k as i32);
    }
    if den.abs() < SINGULAR_THRESHOLD {
        return Err(Error::NearSingular { value: den });
    }
    Ok(num / den)
}

fn eval_poly(p: &Poly, value: &impl Fn(&Atom) -> Option<f64>) -> Result<f64> {
    let mut sum = 0.0;
    for (m, c) in p.terms() {
        let mut t = c.to_f64().unwrap_or(f64::NAN);
        for (a, k) in m.factors() {
            let v = value(a).ok_or_else(|| Error::MissingBinding(a.to_string()))?;
            t *= v.powi(*k as i32);
        }
        sum += t;
    }
    Ok(sum)
}

/// Expression lowered to a flat form for repeated evaluation against a fixed
/// variable order.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    num: CompiledPoly,
    den: Vec<(CompiledPoly, i32)>,
}

#[derive(Clone, Debug)]
struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    fn new(p: &Poly, index: &HashMap<Atom, usize>) -> Result<CompiledPoly> {
        let mut terms = Vec::with_capacity(p.len());
        for (m, c) in p.terms() {
            let mut vars = Vec::new();
            for (a, k) in m.factors() {
                let i = index
                    .get(a)
                    .ok_or_else(|| Error::MissingBinding(a.to_string()))?;
                vars.push((*i, *k as i32));
            }
            terms.push((c.to_f64().unwrap_or(f64::NAN), vars));
        }
        Ok(CompiledPoly { terms })
    }

    fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, vars)| {
                vars.iter()
                    .fold(*c, |acc, (i, k)| acc * values[*i].powi(*k))
            })
            .sum()
    }
}

impl CompiledExpr {
    /// `index` maps each atom to its slot in the value slice passed to [`eval`](Self::eval).
    pub fn new(e: &Expression, index: &HashMap<Atom, usize>) -> Result<CompiledExpr> {
        Ok(CompiledExpr {
            num: CompiledPoly::new(e.numerator(), index)?,
            den: e
                .denominator_factors()
                .iter()
                .map(|(p, k)| Ok((CompiledPoly::new(p, index)?, *k as i32)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64> {
        let mut den = 1.0;
        for (p, k) in &self.den {
            den *= p.eval(values).powi(*k);
        }
        if den.abs() < SINGULAR_THRESHOLD {
            return Err(Error::NearSingular { value: den });
        }
        Ok(self.num.eval(values) / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_value() {
        let xa = Atom::independent("x");
        let x: Expression = xa.clone().into();
        let e = x.pow(2) + Expression::one();
        let point = NumericPoint::from([(xa, 2.0)]);
        assert_eq!(eval_numeric(&e, &point).unwrap(), 5.0);
    }

    #[test]
    fn near_singular_and_missing() {
        let xa = Atom::independent("x");
        let x: Expression = xa.clone().into();
        let e = Expression::one().div_expr(&(x - Expression::one())).unwrap();
        let point = NumericPoint::from([(xa, 1.0)]);
        assert!(matches!(
            eval_numeric(&e, &point),
            Err(Error::NearSingular { .. })
        ));
        assert!(matches!(
            eval_numeric(&e, &NumericPoint::new()),
            Err(Error::MissingBinding(_))
        ));
    }
}
