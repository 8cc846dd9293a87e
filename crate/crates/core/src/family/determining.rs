use std::collections::BTreeSet;

use crate::error::Result;
use crate::expr::{Atom, Bindings, Expression, Rational};
use crate::jet::VectorField;

use super::ode::{OdeFamily, DEPENDENT, INDEPENDENT};
use super::on_family_system;

/// Linear equations that a point generator of the augmented equation must
/// satisfy, written in the unknown function atoms `xi(x,y)`, `eta(x,y)` and
/// `phi_<s>(x,y,A)`.
#[derive(Clone, Debug)]
pub struct DeterminingSystem {
    pub family: OdeFamily,
    pub equations: Vec<Expression>,
}

fn unknown_name(symbol: &str) -> String {
    if symbol == DEPENDENT {
        "eta".to_string()
    } else {
        format!("phi_{symbol}")
    }
}

impl DeterminingSystem {
    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    /// The generic field whose coefficients are the unknown atoms.
    pub fn generic_field(&self) -> VectorField {
        generic_field(&self.family)
    }
}

fn generic_field(fam: &OdeFamily) -> VectorField {
    let sys = fam.jet_system();
    let point = [INDEPENDENT, DEPENDENT];
    let mut full: Vec<&str> = point.to_vec();
    let arbitrary = fam.arbitrary_functions();
    full.extend(arbitrary.iter().map(String::as_str));
    let xi = Atom::function("xi", &point, &[0, 0]).into();
    let mut etas = vec![Expression::atom(Atom::function("eta", &point, &[0, 0]))];
    for s in &arbitrary {
        etas.push(Atom::function(&unknown_name(s), &full, &vec![0; full.len()]).into());
    }
    VectorField::new(sys, xi, etas).expect("one coefficient per dependent")
}

/// Applies the generic prolonged field to `Δ`, restricts to the solution
/// manifold and splits the numerator over monomials in `y#1..y#(n-1)` and the
/// coefficient jets of order at least one.
pub fn determining_system(fam: &OdeFamily) -> Result<DeterminingSystem> {
    let x = generic_field(fam);
    let n = fam.order();
    let arbitrary: BTreeSet<String> = fam.arbitrary_functions().into_iter().collect();
    let applied = x.apply(&fam.residual())?;
    let residue = applied.substitute(&fam.solution_substitution())?;
    let split = residue.split_numerator(|a| match a.as_jet() {
        Some((s, k)) if s == DEPENDENT => (1..n).contains(&k),
        Some((s, k)) => arbitrary.contains(s) && k >= 1,
        None => false,
    });
    let mut seen = BTreeSet::new();
    let mut equations = Vec::new();
    for (_, coefficient) in split {
        if coefficient.is_zero() {
            continue;
        }
        let lead = coefficient.numerator().leading_coefficient();
        let normalized = coefficient.scale(&(Rational::from_integer(1.into()) / lead));
        let key = normalized.to_string();
        if seen.insert(key) {
            equations.push(normalized);
        }
    }
    Ok(DeterminingSystem {
        family: fam.clone(),
        equations,
    })
}

/// Outcome of substituting a concrete generator into a determining system.
#[derive(Clone, Debug)]
pub struct GeneratorCheck {
    pub holds: bool,
    /// Indices and residues of the equations that do not vanish.
    pub failures: Vec<(usize, Expression)>,
}

/// Binds each unknown atom (with its partial-derivative multi-index) to the
/// matching partial derivative of the field's coefficient.
fn unknown_bindings(x: &VectorField, equations: &[Expression]) -> Bindings {
    let sys = x.system();
    let mut bindings = Bindings::new();
    for e in equations {
        for a in e.atoms() {
            let Some((name, args, derivative)) = a.as_function() else {
                continue;
            };
            let component = if name == "xi" {
                Some(x.xi())
            } else if name == "eta" {
                x.eta(DEPENDENT)
            } else {
                name.strip_prefix("phi_").and_then(|s| x.eta(s))
            };
            let Some(component) = component else {
                continue;
            };
            let mut value = component.clone();
            for (arg, k) in args.iter().zip(derivative) {
                for _ in 0..*k {
                    value = sys.coordinate_derivative(&value, arg);
                }
            }
            bindings.insert(a.clone(), value);
        }
    }
    bindings
}

pub fn verify_generator_report(x: &VectorField, system: &DeterminingSystem) -> Result<GeneratorCheck> {
    let x = on_family_system(x, &system.family)?;
    let bindings = unknown_bindings(&x, &system.equations);
    let mut failures = Vec::new();
    for (i, e) in system.equations.iter().enumerate() {
        let r = e.substitute(&bindings)?;
        if !r.is_zero() {
            failures.push((i, r));
        }
    }
    Ok(GeneratorCheck {
        holds: failures.is_empty(),
        failures,
    })
}

/// True iff every equation vanishes after substituting `x`; a field on the
/// wrong coordinates counts as not satisfying the system.
pub fn verify_generator(x: &VectorField, system: &DeterminingSystem) -> bool {
    verify_generator_report(x, system).map(|c| c.holds).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::super::generators::*;
    use super::*;

    #[test]
    fn normal_form_system() {
        let fam = OdeFamily::normal_third_order();
        let sys = determining_system(&fam).unwrap();
        assert!(!sys.is_empty());
        assert!(verify_generator(&normal_form_generator(), &sys));
        assert!(verify_generator(&VectorField::zero(fam.jet_system()), &sys));
        for e in &sys.equations {
            for a in e.atoms() {
                if let Some((s, k)) = a.as_jet() {
                    assert!(k == 0, "split variable {s}#{k} left in {e}");
                }
            }
        }
    }

    #[test]
    fn wrong_eta_fails() {
        let fam = OdeFamily::normal_third_order();
        let sys = determining_system(&fam).unwrap();
        let x = normal_form_generator();
        let f = formal("f");
        let y: Expression = Atom::jet("y", 0).into();
        let eta = (parameter("k1") + Expression::integer(2) * dx(&f, 1)) * y + formal("g");
        let etas = x.etas();
        let mutant = VectorField::new(x.system().clone(), x.xi().clone(), vec![eta, etas[1].clone(), etas[2].clone()])
            .unwrap();
        let report = verify_generator_report(&mutant, &sys).unwrap();
        assert!(!report.holds);
    }
}
