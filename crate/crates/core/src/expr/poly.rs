use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;

use super::atom::Atom;

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Power product of atoms, stored sorted by atom with positive exponents.
///
/// Ordered lexicographically on exponent vectors with the smallest atom as the
/// most significant variable, which makes it a monomial order (needed for exact
/// division).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(Atom, u32); 4]>);

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut i = 0;
        loop {
            match (self.0.get(i), other.0.get(i)) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some((a, p)), Some((b, q))) => {
                    if a == b {
                        if p != q {
                            return p.cmp(q);
                        }
                    } else if a < b {
                        return Ordering::Greater;
                    } else {
                        return Ordering::Less;
                    }
                }
            }
            i += 1;
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(SmallVec::new())
    }

    pub fn atom(a: Atom, power: u32) -> Monomial {
        if power == 0 {
            return Monomial::one();
        }
        let mut v = SmallVec::new();
        v.push((a, power));
        Monomial(v)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.0
    }

    pub fn degree_in(&self, a: &Atom) -> u32 {
        self.0
            .iter()
            .find(|(b, _)| b == a)
            .map(|(_, p)| *p)
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, p)| p).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: SmallVec<[(Atom, u32); 4]> = SmallVec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, p) = &self.0[i];
            let (b, q) = &other.0[j];
            match a.cmp(b) {
                Ordering::Less => {
                    out.push((a.clone(), *p));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b.clone(), *q));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.clone(), p + q));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(self.0[i..].iter().cloned());
        out.extend(other.0[j..].iter().cloned());
        Monomial(out)
    }

    /// `self / other` if `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out: SmallVec<[(Atom, u32); 4]> = SmallVec::new();
        let mut j = 0;
        for (a, p) in &self.0 {
            if j < other.0.len() && &other.0[j].0 == a {
                let q = other.0[j].1;
                if q > *p {
                    return None;
                }
                if p - q > 0 {
                    out.push((a.clone(), p - q));
                }
                j += 1;
            } else if j < other.0.len() && other.0[j].0 < *a {
                return None;
            } else {
                out.push((a.clone(), *p));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Drops `a` from the monomial, returning the remainder and the power removed.
    pub fn without(&self, a: &Atom) -> (Monomial, u32) {
        let mut power = 0;
        let rest = self
            .0
            .iter()
            .filter(|(b, p)| {
                if b == a {
                    power = *p;
                    false
                } else {
                    true
                }
            })
            .cloned()
            .collect();
        (Monomial(rest), power)
    }

    /// Splits into the part made of atoms satisfying `pred` and the rest.
    pub fn split_by(&self, pred: impl Fn(&Atom) -> bool) -> (Monomial, Monomial) {
        let mut yes = SmallVec::new();
        let mut no = SmallVec::new();
        for (a, p) in &self.0 {
            if pred(a) {
                yes.push((a.clone(), *p));
            } else {
                no.push((a.clone(), *p));
            }
        }
        (Monomial(yes), Monomial(no))
    }

    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = SmallVec::new();
        for (a, p) in &self.0 {
            let q = other.degree_in(a);
            if q > 0 {
                out.push((a.clone(), (*p).min(q)));
            }
        }
        Monomial(out)
    }
}

/// Sparse multivariate polynomial with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn one() -> Poly {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn atom(a: Atom) -> Poly {
        Poly::term(Rational::one(), Monomial::atom(a, 1))
    }

    pub fn term(c: Rational, m: Monomial) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn from_terms(iter: impl IntoIterator<Item = (Monomial, Rational)>) -> Poly {
        let mut acc: HashMap<Monomial, Rational> = HashMap::new();
        for (m, c) in iter {
            *acc.entry(m).or_insert_with(Rational::zero) += c;
        }
        Poly {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    pub fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        for m in self.terms.keys() {
            for (a, _) in m.factors() {
                if !out.contains(a) {
                    out.insert(a.clone());
                }
            }
        }
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        self.terms.keys().any(|m| m.degree_in(a) > 0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut terms = big.terms.clone();
        for (m, c) in &small.terms {
            add_term(&mut terms, m.clone(), c.clone());
        }
        Poly { terms }
    }

    pub fn add_assign(&mut self, other: &Poly) {
        for (m, c) in &other.terms {
            add_term(&mut self.terms, m.clone(), c.clone());
        }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            add_term(&mut terms, m.clone(), -c);
        }
        Poly { terms }
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, d)| (m.clone(), d * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(n, d)| (n.mul(m), d * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if let Some(c) = self.as_constant() {
            return other.scale(&c);
        }
        if let Some(c) = other.as_constant() {
            return self.scale(&c);
        }
        let mut acc: HashMap<Monomial, Rational> = HashMap::with_capacity(self.len() * other.len());
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.mul(m2);
                let c = c1 * c2;
                match acc.get_mut(&m) {
                    Some(v) => *v += c,
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        Poly {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Formal partial derivative with respect to one atom.
    pub fn diff(&self, a: &Atom) -> Poly {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let (rest, p) = m.without(a);
            if p == 0 {
                continue;
            }
            let m2 = rest.mul(&Monomial::atom(a.clone(), p - 1));
            add_term(&mut terms, m2, c * rat(p as i64));
        }
        Poly { terms }
    }

    /// Exact quotient `self / divisor`, or `None` if the division leaves a remainder.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        let (lm, lc) = divisor.leading()?;
        if let Some(c) = divisor.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let mut rem = self.clone();
        let mut quotient = BTreeMap::new();
        while let Some((m, c)) = rem.leading() {
            let qm = m.div(lm)?;
            let qc = c / lc;
            let step = divisor.mul_monomial(&qm, &-qc.clone());
            rem.add_assign(&step);
            add_term(&mut quotient, qm, qc);
        }
        Some(Poly { terms: quotient })
    }

    /// Largest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut iter = self.terms.keys();
        let Some(first) = iter.next() else {
            return Monomial::one();
        };
        let mut g = first.clone();
        for m in iter {
            if g.is_one() {
                break;
            }
            g = g.gcd(m);
        }
        g
    }

    pub fn div_monomial(&self, m: &Monomial) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, c)| (n.div(m).expect("monomial divides every term"), c.clone()))
                .collect(),
        }
    }

    pub fn leading_coefficient(&self) -> Rational {
        self.leading()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn is_monic(&self) -> bool {
        self.leading().map(|(_, c)| c.is_one()).unwrap_or(false)
    }

    /// Evaluate with every atom mapped to an exact rational.
    pub fn eval_rational(&self, value: &impl Fn(&Atom) -> Option<Rational>) -> Option<Rational> {
        let mut sum = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (a, p) in m.factors() {
                let v = value(a)?;
                t *= num_traits::pow(v, *p as usize);
            }
            sum += t;
        }
        Some(sum)
    }

    /// Group terms by their part in atoms matching `pred`.
    pub fn split_by(&self, pred: impl Fn(&Atom) -> bool) -> BTreeMap<Monomial, Poly> {
        let mut out: BTreeMap<Monomial, BTreeMap<Monomial, Rational>> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (key, rest) = m.split_by(&pred);
            out.entry(key).or_default().insert(rest, c.clone());
        }
        out.into_iter()
            .map(|(k, terms)| (k, Poly { terms }))
            .collect()
    }

    pub fn max_abs_coefficient(&self) -> Rational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

fn add_term(terms: &mut BTreeMap<Monomial, Rational>, m: Monomial, c: Rational) {
    if c.is_zero() {
        return;
    }
    match terms.get_mut(&m) {
        Some(v) => {
            *v += c;
            if v.is_zero() {
                terms.remove(&m);
            }
        }
        None => {
            terms.insert(m, c);
        }
    }
}
