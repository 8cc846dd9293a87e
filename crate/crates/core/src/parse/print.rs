use std::fmt;

use num_traits::{One, Signed};

use crate::expr::{Expression, Monomial, Poly, Rational};
use crate::jet::VectorField;

fn monomial_text(m: &Monomial) -> String {
    m.factors()
        .iter()
        .map(|(a, k)| {
            if *k == 1 {
                a.to_string()
            } else {
                format!("{a}^{k}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

fn rational_text(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn term_text(m: &Monomial, c: &Rational) -> String {
    if m.is_one() {
        return rational_text(c);
    }
    let body = monomial_text(m);
    if c.is_one() {
        body
    } else if (-c).is_one() {
        format!("-{body}")
    } else {
        format!("{}*{body}", rational_text(c))
    }
}

pub(crate) fn poly_text(p: &Poly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (m, c)) in p.terms().rev().enumerate() {
        if i == 0 {
            out.push_str(&term_text(m, c));
        } else if c.is_negative() {
            out.push_str(" - ");
            out.push_str(&term_text(m, &-c));
        } else {
            out.push_str(" + ");
            out.push_str(&term_text(m, c));
        }
    }
    out
}

fn is_bare(p: &Poly) -> bool {
    p.len() == 1 && {
        let (m, c) = p.terms().next().unwrap();
        c.is_one() && m.factors().len() == 1 && m.factors()[0].1 == 1
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&poly_text(self))
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = poly_text(self.numerator());
        if self.is_polynomial() {
            return f.write_str(&num);
        }
        let den: Vec<String> = self
            .denominator_factors()
            .iter()
            .map(|(p, e)| {
                let base = if is_bare(p) {
                    poly_text(p)
                } else {
                    format!("({})", poly_text(p))
                };
                if *e == 1 {
                    base
                } else {
                    format!("{base}^{e}")
                }
            })
            .collect();
        write!(f, "({num})/({})", den.join("*"))
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coords = self.system().coordinates();
        let parts: Vec<String> = coords
            .iter()
            .zip(self.components())
            .map(|(c, e)| format!("{c}: {e}"))
            .collect();
        f.write_str(&parts.join("; "))
    }
}
