//! Exact symbolic kernel.
//!
//! Expressions are rational functions with arbitrary-precision rational
//! coefficients over four kinds of atoms (independent variables, jet variables,
//! function atoms, parameters). Everything here treats atoms as formally
//! independent; chain rules through function arguments live in [`crate::jet`].

mod atom;
mod expression;
mod numeric;
mod poly;

use std::collections::BTreeMap;

pub use atom::{Atom, AtomKind};
pub use expression::Expression;
pub use numeric::{eval_numeric, CompiledExpr, NumericPoint, SINGULAR_THRESHOLD};
pub use poly::{rat, ratio, Monomial, Poly, Rational};

use crate::error::Result;

pub type Bindings = BTreeMap<Atom, Expression>;

/// Raw expression tree, as produced by the parser or built by hand.
#[derive(Clone, Debug, PartialEq)]
pub enum Tree {
    Number(Rational),
    Atom(Atom),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
    Neg(Box<Tree>),
    Pow(Box<Tree>, i32),
}

impl Tree {
    /// Canonical form. Divisors that are products or powers are divided out one
    /// factor at a time so printed denominators re-parse to the same factors.
    pub fn normalize(&self) -> Result<Expression> {
        Ok(match self {
            Tree::Number(c) => Expression::constant(c.clone()),
            Tree::Atom(a) => Expression::atom(a.clone()),
            Tree::Add(a, b) => a.normalize()? + b.normalize()?,
            Tree::Sub(a, b) => a.normalize()? - b.normalize()?,
            Tree::Mul(a, b) => a.normalize()? * b.normalize()?,
            Tree::Neg(a) => -a.normalize()?,
            Tree::Pow(a, k) => a.normalize()?.powi(*k)?,
            Tree::Div(a, b) => {
                let mut acc = a.normalize()?;
                for (factor, k) in b.divisor_factors() {
                    let f = factor.normalize()?;
                    if k >= 0 {
                        for _ in 0..k {
                            acc = acc.div_expr(&f)?;
                        }
                    } else {
                        acc = acc * f.pow((-k) as u32);
                    }
                }
                acc
            }
        })
    }

    fn divisor_factors(&self) -> Vec<(&Tree, i32)> {
        match self {
            Tree::Mul(a, b) => {
                let mut v = a.divisor_factors();
                v.extend(b.divisor_factors());
                v
            }
            Tree::Pow(a, k) => a
                .divisor_factors()
                .into_iter()
                .map(|(t, j)| (t, j * k))
                .collect(),
            other => vec![(other, 1)],
        }
    }

    /// Direct floating-point evaluation, bypassing normalization.
    pub fn eval(&self, point: &NumericPoint) -> Option<f64> {
        use num_traits::ToPrimitive;
        Some(match self {
            Tree::Number(c) => c.to_f64()?,
            Tree::Atom(a) => *point.get(a)?,
            Tree::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Tree::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Tree::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Tree::Div(a, b) => a.eval(point)? / b.eval(point)?,
            Tree::Neg(a) => -a.eval(point)?,
            Tree::Pow(a, k) => a.eval(point)?.powi(*k),
        })
    }
}
