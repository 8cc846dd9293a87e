use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{Atom, Bindings, Expression};
use crate::jet::{JetSystem, EXTRA_ORDERS};

/// Monic linear ODE family `y^(n) + Σ a^j y^(j) (+ r) = 0` whose coefficients
/// are functions of `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OdeFamily {
    order: u32,
    coefficients: Vec<(String, u32)>,
    nonhomogeneous: Option<String>,
}

pub const INDEPENDENT: &str = "x";
pub const DEPENDENT: &str = "y";

impl OdeFamily {
    pub fn new(order: u32, coefficients: Vec<(String, u32)>, nonhomogeneous: Option<String>) -> Result<OdeFamily> {
        if order < 3 {
            return Err(Error::Invalid(format!("family order must be at least 3, got {order}")));
        }
        let mut seen = BTreeSet::new();
        seen.insert(DEPENDENT.to_string());
        for (s, k) in &coefficients {
            if *k >= order {
                return Err(Error::Invalid(format!(
                    "coefficient `{s}` multiplies y^({k}) but the family is monic of order {order}"
                )));
            }
            if !seen.insert(s.clone()) {
                return Err(Error::DuplicateCoordinate(s.clone()));
            }
        }
        if let Some(r) = &nonhomogeneous {
            if !seen.insert(r.clone()) {
                return Err(Error::DuplicateCoordinate(r.clone()));
            }
        }
        Ok(OdeFamily {
            order,
            coefficients,
            nonhomogeneous,
        })
    }

    /// `y''' + a1 y' + a0 y = 0`.
    pub fn normal_third_order() -> OdeFamily {
        OdeFamily::new(3, vec![("a1".into(), 1), ("a0".into(), 0)], None).unwrap()
    }

    /// `y''' + a1 y' + a0 y + r = 0`.
    pub fn nonhomogeneous_third_order() -> OdeFamily {
        OdeFamily::new(3, vec![("a1".into(), 1), ("a0".into(), 0)], Some("r".into())).unwrap()
    }

    /// `y^(n) + a_{n-1} y^(n-1) + ... + a0 y = 0`.
    pub fn general_linear(n: u32) -> Result<OdeFamily> {
        let coefficients = (0..n).rev().map(|j| (format!("a{j}"), j)).collect();
        OdeFamily::new(n, coefficients, None)
    }

    /// `e3nor`, `e3nh` or `glinode:<n>`.
    pub fn builtin(name: &str) -> Result<OdeFamily> {
        match name {
            "e3nor" => Ok(OdeFamily::normal_third_order()),
            "e3nh" => Ok(OdeFamily::nonhomogeneous_third_order()),
            _ => {
                let n = name
                    .strip_prefix("glinode:")
                    .and_then(|n| n.parse::<u32>().ok())
                    .ok_or_else(|| Error::Invalid(format!("unknown family `{name}`")))?;
                OdeFamily::general_linear(n)
            }
        }
    }

    /// Line-based format: `order: 3`, `coeff: a1 @ 1`, `nonhomogeneous: r`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<OdeFamily> {
        let mut order = None;
        let mut coefficients = Vec::new();
        let mut nonhomogeneous = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Syntax {
                line: lineno + 1,
                column: 1,
                message: msg.to_string(),
            };
            let (key, value) = line.split_once(':').ok_or_else(|| bad("expected `key: value`"))?;
            let value = value.trim();
            match key.trim() {
                "order" => order = Some(value.parse::<u32>().map_err(|_| bad("order must be an integer"))?),
                "coeff" => {
                    let (sym, k) = value.split_once('@').ok_or_else(|| bad("expected `coeff: name @ k`"))?;
                    let k = k.trim().parse::<u32>().map_err(|_| bad("derivative order must be an integer"))?;
                    coefficients.push((sym.trim().to_string(), k));
                }
                "nonhomogeneous" => nonhomogeneous = Some(value.to_string()),
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let order = order.ok_or_else(|| Error::Invalid("family file has no `order:` line".into()))?;
        OdeFamily::new(order, coefficients, nonhomogeneous)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coefficients(&self) -> &[(String, u32)] {
        &self.coefficients
    }

    pub fn nonhomogeneous(&self) -> Option<&str> {
        self.nonhomogeneous.as_deref()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.nonhomogeneous.is_none()
    }

    /// Coefficient symbols followed by the nonhomogeneous symbol, if any.
    pub fn arbitrary_functions(&self) -> Vec<String> {
        self.coefficients
            .iter()
            .map(|(s, _)| s.clone())
            .chain(self.nonhomogeneous.clone())
            .collect()
    }

    /// Augmented jet system `(x; y, a..., r)` tracking `n + 4` orders.
    pub fn jet_system(&self) -> JetSystem {
        let mut deps = vec![DEPENDENT.to_string()];
        deps.extend(self.arbitrary_functions());
        JetSystem::new(INDEPENDENT, &deps, self.order + EXTRA_ORDERS).expect("family symbols are distinct")
    }

    /// Jet system of the coefficients alone, `(x; a...)`.
    pub fn coefficient_system(&self) -> JetSystem {
        JetSystem::new(INDEPENDENT, &self.arbitrary_functions(), self.order + EXTRA_ORDERS)
            .expect("family symbols are distinct")
    }

    /// `Δ = y^(n) + Σ a^j y^(j) (+ r)`.
    pub fn residual(&self) -> Expression {
        self.residual_in(DEPENDENT)
    }

    /// Residual with the dependent variable renamed.
    pub fn residual_in(&self, dependent: &str) -> Expression {
        let mut e = Expression::atom(Atom::jet(dependent, self.order));
        for (s, k) in &self.coefficients {
            e = e + Expression::atom(Atom::jet(s, 0)) * Expression::atom(Atom::jet(dependent, *k));
        }
        if let Some(r) = &self.nonhomogeneous {
            e = e + Expression::atom(Atom::jet(r, 0));
        }
        e
    }

    /// `y^(n) ↦ −(Σ a^j y^(j) + r)`.
    pub fn solution_substitution(&self) -> Bindings {
        let top = Atom::jet(DEPENDENT, self.order);
        let rest = self.residual() - Expression::atom(top.clone());
        Bindings::from([(top, -rest)])
    }
}

impl fmt::Display for OdeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "order: {}", self.order)?;
        for (s, k) in &self.coefficients {
            writeln!(f, "coeff: {s} @ {k}")?;
        }
        if let Some(r) = &self.nonhomogeneous {
            writeln!(f, "nonhomogeneous: {r}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expression;

    #[test]
    fn residuals() {
        assert_eq!(
            OdeFamily::normal_third_order().residual(),
            parse_expression("y#3 + a1*y#1 + a0*y").unwrap()
        );
        assert_eq!(
            OdeFamily::nonhomogeneous_third_order().residual(),
            parse_expression("y#3 + a1*y#1 + a0*y + r").unwrap()
        );
        assert_eq!(
            OdeFamily::builtin("glinode:5").unwrap().residual(),
            parse_expression("y#5 + a4*y#4 + a3*y#3 + a2*y#2 + a1*y#1 + a0*y").unwrap()
        );
    }

    #[test]
    fn file_format_round_trip() {
        let fam = OdeFamily::nonhomogeneous_third_order();
        assert_eq!(OdeFamily::parse(&fam.to_string()).unwrap(), fam);
        assert!(OdeFamily::parse("order: 2\n").is_err());
        assert!(OdeFamily::parse("order: 3\ncoeff: a1 @ 1\ncoeff: a1 @ 0\n").is_err());
        assert!(OdeFamily::builtin("e4").is_err());
    }

    #[test]
    fn solution_manifold() {
        let fam = OdeFamily::normal_third_order();
        let r = fam.residual().substitute(&fam.solution_substitution()).unwrap();
        assert!(r.is_zero());
    }
}
