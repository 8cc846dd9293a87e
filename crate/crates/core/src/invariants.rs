//! Differential invariants of `y''' + a1 y' + a0 y = 0`: the catalog, symbolic
//! annihilation by the prolonged generators, numeric orbit-rank counting and a
//! numeric check under finite equivalence transformations.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::expr::{eval_numeric, Atom, AtomKind, CompiledExpr, Expression, NumericPoint, Tree, SINGULAR_THRESHOLD};
use crate::family::generators::{formal, normal_form_generator, parameter, x0_field, x1_field, x2_field};
use crate::family::{induced_coefficient_action, OdeFamily, PointTransform, INDEPENDENT, NEW_INDEPENDENT};
use crate::jet::{bind_definition, JetSystem, VectorField};
use crate::parse::{parse_expression, parse_tree, ParseContext};
use crate::sample::Sampler;

pub const PSI_TEXT: &str = "-4*(9*a1*mu^2 + 7*mu'^2 - 6*mu*mu'')^3/mu^8";

/// Two natural readings of the printed order-four invariant, which has a
/// doubled `+ +` in front of the `μ² μ'''` term.
pub const PSI2_READINGS: [(&str, &str); 2] = [
    (
        "plus",
        "-1/(18*mu^4)*(216*a0^4 - 324*a0^3*a1' + 18*a0^2*(9*a1'^2 + 2*a1*mu') + 9*mu^2*mu''') \
         - 1/(18*mu^4)*(mu'*(28*mu'^2 + 9*a1'*(a1*a1' - 4*mu'')) - 9*a0*(3*a1'^3 + 4*a1*a1'*mu' - 8*mu'*mu''))",
    ),
    (
        "minus",
        "-1/(18*mu^4)*(216*a0^4 - 324*a0^3*a1' + 18*a0^2*(9*a1'^2 + 2*a1*mu') - 9*mu^2*mu''') \
         - 1/(18*mu^4)*(mu'*(28*mu'^2 + 9*a1'*(a1*a1' - 4*mu'')) - 9*a0*(3*a1'^3 + 4*a1*a1'*mu' - 8*mu'*mu''))",
    ),
];

#[derive(Clone, Debug)]
pub struct InvariantCandidate {
    pub name: String,
    pub expr: Expression,
    pub order: u32,
    /// How the candidate was obtained and whether it passed annihilation.
    pub note: String,
    pub verified: bool,
    /// Unexpanded form in `mu` and its derivatives, used for floating-point
    /// evaluation; the expanded rational function cancels badly in doubles.
    pub form: Option<Tree>,
}

impl InvariantCandidate {
    pub fn new(name: &str, expr: Expression, order: u32) -> Result<InvariantCandidate> {
        let actual = max_jet_order(&expr);
        if actual != order {
            return Err(Error::Invalid(format!(
                "`{name}` declared order {order} but contains jets of order {actual}"
            )));
        }
        Ok(InvariantCandidate {
            name: name.to_string(),
            expr,
            order,
            note: String::new(),
            verified: false,
            form: None,
        })
    }

    /// Candidate from text in `a1`, `a0`, `x` and `mu`.
    pub fn from_text(name: &str, text: &str, order: u32) -> Result<InvariantCandidate> {
        let mut c = InvariantCandidate::new(name, expand_mu(text)?, order)?;
        c.form = Some(parse_tree(text, &ParseContext::default())?);
        Ok(c)
    }

    /// Floating-point value at a point giving `x` and the coefficient jets.
    pub fn evaluate(&self, point: &NumericPoint) -> Result<f64> {
        let Some(form) = &self.form else {
            return eval_numeric(&self.expr, point);
        };
        let sys = family().coefficient_system();
        let mut extended = point.clone();
        for (atom, value) in bind_definition("mu", &mu(), &sys, 4)? {
            let Ok(v) = eval_numeric(&value, point) else {
                continue;
            };
            if atom.function_order() == Some(0) && v.abs() < SINGULAR_THRESHOLD {
                return Err(Error::NearSingular { value: v });
            }
            extended.insert(atom, v);
        }
        let v = form
            .eval(&extended)
            .ok_or_else(|| Error::MissingBinding(format!("an atom of `{}`", self.name)))?;
        if !v.is_finite() {
            return Err(Error::NearSingular { value: 0.0 });
        }
        Ok(v)
    }
}

fn max_jet_order(e: &Expression) -> u32 {
    e.atoms().iter().filter_map(|a| a.as_jet().map(|(_, k)| k)).max().unwrap_or(0)
}

fn family() -> OdeFamily {
    OdeFamily::normal_third_order()
}

/// `μ = −2 a0 + a1'`.
pub fn mu() -> Expression {
    parse_expression("-2*a0 + a1'").unwrap()
}

/// Parses text in `a1`, `a0`, `x` and `mu` (with primes) and expands `μ`.
pub fn expand_mu(text: &str) -> Result<Expression> {
    let sys = family().coefficient_system();
    let bindings = bind_definition("mu", &mu(), &sys, 4)?;
    parse_expression(text)?.substitute(&bindings)
}

/// `Ψ` (order 3) and the order-four invariant in the first reading that
/// passes annihilation; if none does, the first reading, flagged unverified.
pub fn psi_catalog() -> Result<Vec<InvariantCandidate>> {
    let mut psi = InvariantCandidate::from_text("Psi", PSI_TEXT, 3)?;
    psi.verified = annihilation_check(&psi, GeneratorFamily::Gc)?.holds;
    psi.note = "third-order invariant".into();
    let mut chosen = None;
    let mut residues = Vec::new();
    for (reading, text) in PSI2_READINGS {
        let cand = InvariantCandidate::from_text("Psi2", text, 4)?;
        let check = annihilation_check(&cand, GeneratorFamily::Gc)?;
        if check.holds {
            chosen = Some((reading, cand));
            break;
        }
        residues.push((reading, check.residue));
    }
    let psi2 = match chosen {
        Some((reading, mut cand)) => {
            cand.verified = true;
            cand.note = format!("reading `{reading}` of the doubled sign; annihilated at order 4");
            cand
        }
        None => {
            let mut cand = InvariantCandidate::from_text("Psi2", PSI2_READINGS[0].1, 4)?;
            let report: Vec<String> = residues.iter().map(|(r, e)| format!("{r}: {e}")).collect();
            cand.note = format!("no reading is annihilated; residues {}", report.join("; "));
            cand
        }
    };
    Ok(vec![psi, psi2])
}

/// Generator families used for annihilation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorFamily {
    /// `X⁰(f)` on `(x; a1, a0)`.
    Gc,
    /// `X¹(f, k1)` on `(x; y, a1, a0)`, i.e. with the `y`-scaling direction.
    GcWithK1,
    /// `X¹(f, k1) + X²(g)` on `(x; y, a1, a0)`.
    Gs,
}

impl GeneratorFamily {
    pub fn field(self) -> VectorField {
        match self {
            GeneratorFamily::Gc => x0_field(&formal("f")),
            GeneratorFamily::GcWithK1 => x1_field(&formal("f"), &parameter("k1")),
            GeneratorFamily::Gs => normal_form_generator(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnnihilationCheck {
    pub holds: bool,
    pub residue: Expression,
}

/// Applies the generator family, prolonged as far as the candidate needs, with
/// every `f`, `g` derivative atom free.
pub fn annihilation_check(inv: &InvariantCandidate, generators: GeneratorFamily) -> Result<AnnihilationCheck> {
    let actual = max_jet_order(&inv.expr);
    if actual != inv.order {
        return Err(Error::Invalid(format!(
            "`{}` declared order {} but contains jets of order {actual}",
            inv.name, inv.order
        )));
    }
    let x = generators.field();
    let residue = x.apply(&inv.expr)?;
    Ok(AnnihilationCheck {
        holds: residue.is_zero(),
        residue,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Gc,
    Gs,
}

impl Group {
    pub fn parse(s: &str) -> Result<Group> {
        match s.to_ascii_lowercase().as_str() {
            "gc" | "g_c" => Ok(Group::Gc),
            "gs" | "g_s" => Ok(Group::Gs),
            _ => Err(Error::Invalid(format!("unknown group `{s}`; expected Gc or Gs"))),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Gc => "Gc",
            Group::Gs => "Gs",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RankReport {
    pub group: Group,
    pub order: u32,
    pub dimension: usize,
    pub rank: usize,
    pub count: usize,
    pub trial_ranks: Vec<usize>,
    pub generators: usize,
}

impl fmt::Display for RankReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "group: {}", self.group)?;
        writeln!(f, "order: {}", self.order)?;
        writeln!(f, "dimension: {}", self.dimension)?;
        writeln!(f, "generators: {}", self.generators)?;
        writeln!(f, "trial ranks: {:?}", self.trial_ranks)?;
        writeln!(f, "rank: {}", self.rank)?;
        writeln!(f, "count: {}", self.count)
    }
}

pub const RANK_TOLERANCE: f64 = 1e-8;

/// Rank of a dense matrix with singular values below `RANK_TOLERANCE` times the
/// largest treated as zero. Rows are normalized first.
pub fn numeric_rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut m = DMatrix::<f64>::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (j, v) in r.iter().enumerate() {
            m[(i, j)] = if norm > 0.0 { v / norm } else { 0.0 };
        }
    }
    let sv = m.svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > RANK_TOLERANCE * max).count()
}

fn monomial(i: u32) -> Expression {
    Expression::atom(Atom::independent(INDEPENDENT)).pow(i)
}

/// Prolonged coefficient vectors on `(x, u#0..m for u in symbols)`.
fn orbit_rows(fields: &[VectorField], symbols: &[&str], order: u32) -> Result<(Vec<Atom>, Vec<Vec<Expression>>)> {
    let mut coords = vec![Atom::independent(INDEPENDENT)];
    for s in symbols {
        for k in 0..=order {
            coords.push(Atom::jet(s, k));
        }
    }
    let mut rows = Vec::new();
    for x in fields {
        let mut row = vec![x.xi().clone()];
        for s in symbols {
            for k in 0..=order {
                row.push(x.prolonged(s, k)?);
            }
        }
        rows.push(row);
    }
    Ok((coords, rows))
}

/// Number of functionally independent invariants at jet order `order`:
/// dimension minus the generic rank of the prolonged action.
pub fn invariant_count(group: Group, order: u32, trials: usize, seed: u64) -> Result<RankReport> {
    if order > 4 {
        return Err(Error::Invalid(format!("order {order} exceeds the supported maximum 4")));
    }
    if trials < 3 {
        return Err(Error::Invalid("at least 3 trials are required".into()));
    }
    let top = order + 4;
    let zero = Expression::zero();
    let (fields, symbols): (Vec<VectorField>, Vec<&str>) = match group {
        Group::Gc => ((0..=top).map(|i| x0_field(&monomial(i))).collect(), vec!["a1", "a0"]),
        Group::Gs => {
            let mut v: Vec<VectorField> = (0..=top).map(|i| x1_field(&monomial(i), &zero)).collect();
            v.extend((0..=top).map(|i| x2_field(&monomial(i))));
            v.push(x1_field(&zero, &Expression::one()));
            (v, vec!["y", "a1", "a0"])
        }
    };
    let (coords, rows) = orbit_rows(&fields, &symbols, order)?;
    let index: HashMap<Atom, usize> = coords.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    let compiled: Vec<Vec<CompiledExpr>> = rows
        .iter()
        .map(|r| r.iter().map(|e| CompiledExpr::new(e, &index)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut sampler = Sampler::new(seed);
    let mut trial_ranks = Vec::new();
    for _ in 0..trials {
        let matrix = loop {
            let point: Vec<f64> = coords
                .iter()
                .map(|_| sampler.nonzero_rational().to_f64().unwrap())
                .collect();
            let evaluated: Result<Vec<Vec<f64>>> = compiled
                .iter()
                .map(|r| r.iter().map(|c| c.eval(&point)).collect())
                .collect();
            if let Ok(m) = evaluated {
                break m;
            }
        };
        trial_ranks.push(numeric_rank(&matrix));
    }
    let mut distinct = trial_ranks.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() == trial_ranks.len() {
        return Err(Error::UnstableRank(trial_ranks));
    }
    let rank = *trial_ranks.iter().max().unwrap();
    Ok(RankReport {
        group,
        order,
        dimension: coords.len(),
        rank,
        count: coords.len() - rank,
        trial_ranks,
        generators: fields.len(),
    })
}

/// Numeric values of the transform's function atoms: `(name, derivative order, z)`.
pub type FunctionValues<'a> = &'a dyn Fn(&str, u32, f64) -> Option<f64>;

/// `f^(k)(z) = e^z` for every `k` and every function name.
pub fn exponential(_: &str, _: u32, z: f64) -> Option<f64> {
    Some(z.exp())
}

#[derive(Clone, Debug)]
pub struct PointResult {
    pub z: f64,
    pub transformed: Option<f64>,
    pub original: Option<f64>,
    /// `|transformed − original| / max(|original|, 1)`.
    pub deviation: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub name: String,
    pub points: Vec<PointResult>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl InvarianceReport {
    /// `name status deviation`.
    pub fn line(&self) -> String {
        format!(
            "{} {} {:e}",
            self.name,
            if self.passed { "pass" } else { "fail" },
            self.max_deviation
        )
    }
}

impl fmt::Display for InvarianceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.points {
            match (&p.skipped, p.deviation) {
                (Some(reason), _) => writeln!(f, "z={} skipped: {reason}", p.z)?,
                (None, Some(d)) => writeln!(
                    f,
                    "z={} transformed={:e} original={:e} deviation={d:e}",
                    p.z,
                    p.transformed.unwrap(),
                    p.original.unwrap()
                )?,
                _ => {}
            }
        }
        writeln!(f, "{}", self.line())
    }
}

/// `d/dz` of transformed coefficients whose `a#k` atoms stand for `a^(k)(x(z))`.
fn z_derivative(e: &Expression, xz: &Expression) -> Expression {
    let z = Atom::independent(NEW_INDEPENDENT);
    e.derive(&|a: &Atom| match a.kind() {
        AtomKind::Independent(_) if *a == z => Some(Expression::one()),
        AtomKind::Jet { symbol, order } => Some(Expression::atom(Atom::jet(symbol, order + 1)) * xz),
        AtomKind::Function { args, .. } if args.len() == 1 && args[0] == NEW_INDEPENDENT => {
            Some(Expression::atom(a.function_raised(0).unwrap()))
        }
        _ => None,
    })
}

fn function_point(exprs: &[&Expression], z: f64, functions: FunctionValues) -> Result<NumericPoint> {
    let mut point = NumericPoint::new();
    point.insert(Atom::independent(NEW_INDEPENDENT), z);
    for e in exprs {
        for a in e.atoms() {
            if let Some((name, _, _)) = a.as_function() {
                let k = a.function_order().unwrap_or(0);
                let v = functions(name, k, z)
                    .ok_or_else(|| Error::MissingBinding(a.to_string()))?;
                point.insert(a.clone(), v);
            }
        }
    }
    Ok(point)
}

/// Coefficient jets of the transformed equation as functions of `z`, next to
/// the original coefficient jets, for numeric comparison.
pub struct TransformedJets {
    x_of: Expression,
    b_jets: BTreeMap<Atom, Expression>,
    a_jets: BTreeMap<Atom, Expression>,
}

impl TransformedJets {
    /// `t` must be an equivalence transformation of the normal form; the
    /// concrete coefficients are expressions in `x`.
    pub fn new(t: &PointTransform, coefficients: &BTreeMap<String, Expression>, order: u32) -> Result<TransformedJets> {
        let fam = family();
        let action = induced_coefficient_action(&fam, t)?;
        if !action.obstructions.is_empty() {
            let names: Vec<&str> = action.obstructions.iter().map(|(k, _)| k.as_str()).collect();
            return Err(Error::Obstruction(names.join(", ")));
        }
        let (x_of, _, _) = t.shape()?;
        let zsys = JetSystem::new::<&str>(NEW_INDEPENDENT, &[], 0)?;
        let xz = zsys.total_derivative(&x_of)?;
        let xvar = Atom::independent(INDEPENDENT);
        let mut b_jets = BTreeMap::new();
        let mut a_jets = BTreeMap::new();
        for (s, _) in fam.coefficients() {
            let concrete = coefficients.get(s).ok_or_else(|| Error::MissingBinding(s.clone()))?;
            let mut b = action.coefficients[s].clone();
            let mut a = concrete.clone();
            for k in 0..=order {
                b_jets.insert(Atom::jet(s, k), b.clone());
                a_jets.insert(Atom::jet(s, k), a.clone());
                b = z_derivative(&b, &xz);
                a = a.differentiate(&xvar);
            }
        }
        Ok(TransformedJets { x_of, b_jets, a_jets })
    }

    /// `(original jets at x = f(z), transformed jets at z)`, each keyed by
    /// `x` and the coefficient jet atoms.
    pub fn evaluate(&self, z: f64, functions: FunctionValues) -> Result<(NumericPoint, NumericPoint)> {
        let xvar = Atom::independent(INDEPENDENT);
        let exprs: Vec<&Expression> = self.b_jets.values().chain([&self.x_of]).collect();
        let mut fpoint = function_point(&exprs, z, functions)?;
        let x = eval_numeric(&self.x_of, &fpoint)?;
        let mut original = NumericPoint::from([(xvar.clone(), x)]);
        for (atom, a) in &self.a_jets {
            original.insert(atom.clone(), eval_numeric(a, &original)?);
        }
        for (atom, v) in &original {
            fpoint.insert(atom.clone(), *v);
        }
        let mut transformed = NumericPoint::from([(xvar, z)]);
        for (atom, b) in &self.b_jets {
            transformed.insert(atom.clone(), eval_numeric(b, &fpoint)?);
        }
        Ok((original, transformed))
    }
}

/// Evaluates the candidate on the transformed coefficients at `z` and on the
/// original coefficients at `x = f(z)`.
pub fn numeric_invariance_check(
    inv: &InvariantCandidate,
    t: &PointTransform,
    functions: FunctionValues,
    coefficients: &BTreeMap<String, Expression>,
    points: &[f64],
    tolerance: f64,
) -> Result<InvarianceReport> {
    let jets = TransformedJets::new(t, coefficients, inv.order)?;
    let mut results = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for &z in points {
        let (original_point, transformed_point) = jets.evaluate(z, functions)?;
        let original = inv.evaluate(&original_point);
        let transformed = inv.evaluate(&transformed_point);
        match (original, transformed) {
            (Ok(o), Ok(tv)) => {
                let d = (tv - o).abs() / o.abs().max(1.0);
                max_deviation = max_deviation.max(d);
                results.push(PointResult {
                    z,
                    transformed: Some(tv),
                    original: Some(o),
                    deviation: Some(d),
                    skipped: None,
                });
            }
            (Err(e), _) | (_, Err(e)) => results.push(PointResult {
                z,
                transformed: None,
                original: None,
                deviation: None,
                skipped: Some(e.to_string()),
            }),
        }
    }
    let evaluated = results.iter().any(|p| p.deviation.is_some());
    Ok(InvarianceReport {
        name: inv.name.clone(),
        passed: evaluated && max_deviation <= tolerance,
        points: results,
        max_deviation,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::transform_context;
    use crate::parse::parse_expression_with;

    #[test]
    fn psi_is_annihilated() {
        let psi = InvariantCandidate::new("Psi", expand_mu(PSI_TEXT).unwrap(), 3).unwrap();
        assert!(annihilation_check(&psi, GeneratorFamily::Gc).unwrap().holds);
        assert!(annihilation_check(&psi, GeneratorFamily::GcWithK1).unwrap().holds);
        assert!(!annihilation_check(&psi, GeneratorFamily::Gs).unwrap().holds);
        let one = InvariantCandidate::new("one", Expression::one(), 0).unwrap();
        assert!(annihilation_check(&one, GeneratorFamily::Gs).unwrap().holds);
        let m = InvariantCandidate::new("mu", mu(), 1).unwrap();
        assert!(!annihilation_check(&m, GeneratorFamily::Gc).unwrap().holds);
    }

    #[test]
    fn only_one_psi2_reading_is_invariant() {
        let results: Vec<bool> = PSI2_READINGS
            .iter()
            .map(|(_, text)| {
                let c = InvariantCandidate::from_text("Psi2", text, 4).unwrap();
                annihilation_check(&c, GeneratorFamily::Gc).unwrap().holds
            })
            .collect();
        assert_eq!(results, vec![true, false]);
        let catalog = psi_catalog().unwrap();
        assert!(catalog.iter().all(|c| c.verified));
        assert_eq!(catalog[1].order, 4);
    }

    #[test]
    fn declared_order_checked() {
        assert!(InvariantCandidate::new("mu", mu(), 2).is_err());
    }

    #[test]
    fn psi_at_linear_coefficients() {
        let psi = expand_mu(PSI_TEXT).unwrap();
        let bindings = crate::expr::Bindings::from([
            (Atom::jet("a1", 0), parse_expression("x").unwrap()),
            (Atom::jet("a1", 1), Expression::one()),
            (Atom::jet("a1", 2), Expression::zero()),
            (Atom::jet("a1", 3), Expression::zero()),
            (Atom::jet("a0", 0), Expression::zero()),
            (Atom::jet("a0", 1), Expression::zero()),
            (Atom::jet("a0", 2), Expression::zero()),
        ]);
        assert_eq!(psi.substitute(&bindings).unwrap(), parse_expression("-2916*x^3").unwrap());
    }

    #[test]
    fn exponential_transform() {
        let catalog = psi_catalog().unwrap();
        let t = PointTransform::linear(
            parse_expression_with("f(z)", &transform_context()).unwrap(),
            parse_expression_with("f'(z)", &transform_context()).unwrap(),
            Expression::zero(),
        );
        let coefficients = BTreeMap::from([
            ("a1".to_string(), parse_expression("x").unwrap()),
            ("a0".to_string(), Expression::zero()),
        ]);
        let points = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let r = numeric_invariance_check(&catalog[0], &t, &exponential, &coefficients, &points, 1e-9).unwrap();
        assert!(r.passed, "{r}");
        let m = InvariantCandidate::new("mu", mu(), 1).unwrap();
        let r = numeric_invariance_check(&m, &t, &exponential, &coefficients, &points, 1e-9).unwrap();
        assert!(!r.passed);
    }
}
