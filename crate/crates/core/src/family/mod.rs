//! ODE families, the symmetry condition, pullback through linear point
//! transformations, determining systems, generator splitting and the lift of
//! equivalence transformations to symmetries of the augmented equation.

mod determining;
pub mod generators;
mod ode;
mod transform;

use std::collections::BTreeSet;

pub use determining::{determining_system, verify_generator, verify_generator_report, DeterminingSystem, GeneratorCheck};
pub use ode::{OdeFamily, DEPENDENT, INDEPENDENT};
pub use transform::{
    induced_coefficient_action, lift_to_symmetry, transform_context, transform_equation, InducedAction, LiftedTransform,
    PointTransform, TransformResult, NEW_DEPENDENT, NEW_INDEPENDENT,
};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expression};
use crate::jet::VectorField;

#[derive(Clone, Debug)]
pub struct SymmetryCheck {
    pub holds: bool,
    pub residue: Expression,
}

/// Re-expresses `x` on the family's augmented jet system, matching coordinates
/// by name.
pub fn on_family_system(x: &VectorField, fam: &OdeFamily) -> Result<VectorField> {
    let sys = fam.jet_system();
    if x.system().independent() != sys.independent() {
        return Err(Error::CoordinateMismatch(format!(
            "independent variable `{}` but the family uses `{}`",
            x.system().independent(),
            sys.independent()
        )));
    }
    let expected: BTreeSet<&String> = sys.dependents().iter().collect();
    let found: BTreeSet<&String> = x.system().dependents().iter().collect();
    if expected != found {
        return Err(Error::CoordinateMismatch(format!(
            "field has coordinates {:?}, family needs {:?}",
            found, expected
        )));
    }
    let etas = sys
        .dependents()
        .iter()
        .map(|d| x.eta(d).unwrap().clone())
        .collect();
    VectorField::new(sys, x.xi().clone(), etas)
}

/// Applies the prolonged field to `Δ`, restricts to the solution manifold and
/// tests the result for zero with every function atom treated as free.
pub fn check_symmetry(x: &VectorField, fam: &OdeFamily) -> Result<SymmetryCheck> {
    let x = on_family_system(x, fam)?;
    let applied = x.apply(&fam.residual())?;
    let residue = applied.substitute(&fam.solution_substitution())?;
    Ok(SymmetryCheck {
        holds: residue.is_zero(),
        residue,
    })
}

#[derive(Clone, Debug)]
pub struct Split {
    pub x1: VectorField,
    pub x2: VectorField,
    pub warnings: Vec<String>,
}

/// `X¹ = X` with the named functions (and all their derivatives) set to zero,
/// `X² = X − X¹`.
pub fn split_generator(x: &VectorField, conditions: &[&str]) -> Result<Split> {
    let mut bindings = Bindings::new();
    let mut warnings = Vec::new();
    for name in conditions {
        let mut found = false;
        for c in x.components() {
            for a in c.atoms() {
                if a.as_function().map(|(n, _, _)| n == *name).unwrap_or(false) {
                    bindings.insert(a, Expression::zero());
                    found = true;
                }
            }
        }
        if !found {
            warnings.push(format!("`{name}` does not occur in the generator; split is the identity"));
        }
    }
    let x1 = x.substitute(&bindings)?;
    let x2 = x.sub(&x1)?;
    Ok(Split { x1, x2, warnings })
}

#[cfg(test)]
mod tests {
    use super::generators::*;
    use super::*;
    use crate::parse::parse_vector_field;

    #[test]
    fn normal_form_generator_is_a_symmetry() {
        let check = check_symmetry(&normal_form_generator(), &OdeFamily::normal_third_order()).unwrap();
        assert!(check.holds, "residue: {}", check.residue);
    }

    #[test]
    fn zero_field_is_a_symmetry() {
        for fam in [OdeFamily::normal_third_order(), OdeFamily::builtin("glinode:4").unwrap()] {
            let zero = VectorField::zero(fam.jet_system());
            assert!(check_symmetry(&zero, &fam).unwrap().holds);
        }
    }

    #[test]
    fn flipped_c4_fails() {
        let x = normal_form_generator();
        let etas = x.etas();
        let mutant = VectorField::new(
            x.system().clone(),
            x.xi().clone(),
            vec![etas[0].clone(), etas[1].clone(), -etas[2].clone()],
        )
        .unwrap();
        let check = check_symmetry(&mutant, &OdeFamily::normal_third_order()).unwrap();
        assert!(!check.holds);
    }

    #[test]
    fn coordinate_mismatch() {
        let v = parse_vector_field("x: 1; y: 0").unwrap();
        assert!(matches!(
            check_symmetry(&v, &OdeFamily::normal_third_order()),
            Err(Error::CoordinateMismatch(_))
        ));
    }

    #[test]
    fn split_normal_form_generator() {
        let x = normal_form_generator();
        let split = split_generator(&x, &["g"]).unwrap();
        assert!(split.warnings.is_empty());
        assert_eq!(split.x1, x1_field(&formal("f"), &parameter("k1")));
        assert_eq!(split.x2, x2_field(&formal("g")));
        assert_eq!(split.x1.add(&split.x2).unwrap(), x);

        let identity = split_generator(&x, &[]).unwrap();
        assert_eq!(identity.x1, x);
        assert!(identity.x2.is_zero());
    }

    #[test]
    fn split_nonhomogeneous_is_identity() {
        let x = nonhomogeneous_generator();
        let split = split_generator(&x, &["g"]).unwrap();
        assert_eq!(split.warnings.len(), 1);
        assert_eq!(split.x1, x);
        assert!(split.x2.is_zero());
    }
}
