//! Seeded random sample points for probabilistic rank and closure tests.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{Atom, Expression, Rational};

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Rational `p/q` in `[-3, 3]` with `q ≤ 7`.
    pub fn rational(&mut self) -> Rational {
        let q: i64 = self.rng.gen_range(1..=7);
        let p: i64 = self.rng.gen_range(-3 * q..=3 * q);
        Rational::new(BigInt::from(p), BigInt::from(q))
    }

    pub fn nonzero_rational(&mut self) -> Rational {
        loop {
            let r = self.rational();
            if !r.is_zero() {
                return r;
            }
        }
    }

    pub fn float(&mut self) -> f64 {
        self.rng.gen_range(-3.0..3.0)
    }

    /// A nonzero rational for every atom, redrawn until every expression
    /// evaluates without hitting a zero denominator.
    pub fn point_for(&mut self, atoms: &[Atom], exprs: &[&Expression]) -> BTreeMap<Atom, Rational> {
        loop {
            let point: BTreeMap<Atom, Rational> = atoms.iter().map(|a| (a.clone(), self.nonzero_rational())).collect();
            let lookup = |a: &Atom| point.get(a).cloned();
            if exprs.iter().all(|e| e.eval_rational(&lookup).is_ok()) {
                return point;
            }
        }
    }
}
