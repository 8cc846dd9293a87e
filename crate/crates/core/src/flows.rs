//! Numeric flows of point vector fields (fixed-step RK4), the closed-form
//! one-parameter subgroups of `X¹(f, k1)`, and the consistency of augmented
//! flows with the induced coefficient action.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::expr::{Atom, Bindings, CompiledExpr, Expression, NumericPoint, Rational};
use crate::family::generators::x1_field;
use crate::family::{transform_context, PointTransform, INDEPENDENT};
use crate::invariants::{InvariantCandidate, TransformedJets};
use crate::jet::{JetSystem, VectorField};
use crate::parse::parse_expression_with;

pub const ESCAPE_THRESHOLD: f64 = 1e12;
pub const DEFAULT_STEPS_PER_UNIT: usize = 1000;
pub const MIN_STEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct FlowSpec {
    pub field: VectorField,
    /// Substituted into the field before integration.
    pub bindings: Bindings,
    /// Jet orders integrated per dependent symbol (missing symbols: order 0).
    pub orders: BTreeMap<String, u32>,
    pub initial: Vec<f64>,
    pub t_end: f64,
    pub steps_per_unit: usize,
    pub tolerance: f64,
}

impl FlowSpec {
    pub fn new(field: VectorField, initial: Vec<f64>, t_end: f64) -> FlowSpec {
        FlowSpec {
            field,
            bindings: Bindings::new(),
            orders: BTreeMap::new(),
            initial,
            t_end,
            steps_per_unit: DEFAULT_STEPS_PER_UNIT,
            tolerance: 1e-8,
        }
    }

    pub fn with_orders(mut self, orders: BTreeMap<String, u32>) -> FlowSpec {
        self.orders = orders;
        self
    }

    pub fn with_bindings(mut self, bindings: Bindings) -> FlowSpec {
        self.bindings = bindings;
        self
    }

    /// `x`, then each dependent symbol's jets `u#0..=order`.
    pub fn coordinates(&self) -> Vec<Atom> {
        let sys = self.field.system();
        let mut out = vec![sys.independent_atom()];
        for d in sys.dependents() {
            let order = self.orders.get(d).copied().unwrap_or(0);
            for k in 0..=order {
                out.push(Atom::jet(d, k));
            }
        }
        out
    }

    pub fn steps(&self) -> usize {
        ((self.t_end.abs() * self.steps_per_unit as f64).ceil() as usize).max(MIN_STEPS)
    }
}

/// Right-hand side compiled against the coordinate order of a spec.
pub struct CompiledField {
    coordinates: Vec<Atom>,
    rhs: Vec<CompiledExpr>,
}

impl CompiledField {
    pub fn new(spec: &FlowSpec) -> Result<CompiledField> {
        let field = spec.field.substitute(&spec.bindings)?;
        let coordinates = spec.coordinates();
        let index: HashMap<Atom, usize> = coordinates.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let mut rhs = vec![CompiledExpr::new(field.xi(), &index)?];
        for d in field.system().dependents() {
            let order = spec.orders.get(d).copied().unwrap_or(0);
            for k in 0..=order {
                rhs.push(CompiledExpr::new(&field.prolonged(d, k)?, &index)?);
            }
        }
        Ok(CompiledField { coordinates, rhs })
    }

    pub fn coordinates(&self) -> &[Atom] {
        &self.coordinates
    }

    pub fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.rhs.iter().map(|c| c.eval(state)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub coordinates: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Step-halving estimate of the endpoint error.
    pub error_estimate: f64,
}

impl Trajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial point")
    }

    /// `t,x,y,...` with one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in &self.coordinates {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(out, "{t}").unwrap();
            for v in s {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn rk4(field: &CompiledField, y0: &[f64], t_end: f64, n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let h = t_end / n as f64;
    let mut times = vec![0.0];
    let mut states = vec![y0.to_vec()];
    let mut y = y0.to_vec();
    let escape = |t: f64| Error::FiniteTimeEscape { t };
    let shifted = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    for i in 0..n {
        let t = i as f64 * h;
        let step = || -> Result<Vec<f64>> {
            let k1 = field.eval(&y)?;
            let k2 = field.eval(&shifted(&y, &k1, h / 2.0))?;
            let k3 = field.eval(&shifted(&y, &k2, h / 2.0))?;
            let k4 = field.eval(&shifted(&y, &k3, h))?;
            Ok((0..y.len())
                .map(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
                .collect())
        };
        let next = match step() {
            Ok(v) => v,
            Err(Error::NearSingular { .. }) => return Err(escape(t)),
            Err(e) => return Err(e),
        };
        if next.iter().any(|v| !v.is_finite() || v.abs() > ESCAPE_THRESHOLD) {
            return Err(escape(t + h));
        }
        y = next;
        times.push(t + h);
        states.push(y.clone());
    }
    Ok((times, states))
}

/// Classical fixed-step RK4; the endpoint is recomputed with half the step
/// and the difference must stay below the spec's tolerance.
pub fn integrate_flow(spec: &FlowSpec) -> Result<Trajectory> {
    if !(spec.tolerance > 0.0) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let field = CompiledField::new(spec)?;
    if spec.initial.len() != field.coordinates.len() {
        return Err(Error::CoordinateMismatch(format!(
            "{} initial values for {} coordinates",
            spec.initial.len(),
            field.coordinates.len()
        )));
    }
    let n = spec.steps();
    let (times, states) = rk4(&field, &spec.initial, spec.t_end, n)?;
    let (_, fine) = rk4(&field, &spec.initial, spec.t_end, 2 * n)?;
    let coarse = states.last().unwrap();
    let fine = fine.last().unwrap();
    let error_estimate = coarse
        .iter()
        .zip(fine)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    if error_estimate > spec.tolerance {
        return Err(Error::ToleranceExceeded {
            estimate: error_estimate,
            tolerance: spec.tolerance,
        });
    }
    Ok(Trajectory {
        coordinates: field.coordinates.iter().map(|a| a.to_string()).collect(),
        times,
        states,
        error_estimate,
    })
}

/// One-parameter subgroups of `X¹(f, k1)` with known closed forms `F_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowFixture {
    /// `f = 1`, `F_t(x) = x + t`.
    Translation,
    /// `f = x`, `F_t(x) = e^t x`.
    Scaling,
    /// `f = x²`, `F_t(x) = x / (1 − t x)`.
    Projective,
}

impl FlowFixture {
    pub const ALL: [FlowFixture; 3] = [FlowFixture::Translation, FlowFixture::Scaling, FlowFixture::Projective];

    pub fn parse(name: &str) -> Result<FlowFixture> {
        match name {
            "translation" => Ok(FlowFixture::Translation),
            "scaling" => Ok(FlowFixture::Scaling),
            "projective" => Ok(FlowFixture::Projective),
            _ => Err(Error::Invalid(format!(
                "unknown flow fixture `{name}`; expected translation, scaling or projective"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowFixture::Translation => "translation",
            FlowFixture::Scaling => "scaling",
            FlowFixture::Projective => "projective",
        }
    }

    /// `f` as an expression in `x`.
    pub fn f(self) -> Expression {
        let x = Expression::atom(Atom::independent(INDEPENDENT));
        match self {
            FlowFixture::Translation => Expression::one(),
            FlowFixture::Scaling => x,
            FlowFixture::Projective => x.pow(2),
        }
    }

    /// `d^k F_t / dx^k` at `x`, or `None` outside the domain of `F_t`.
    pub fn derivative(self, k: u32, t: f64, x: f64) -> Option<f64> {
        match self {
            FlowFixture::Translation => Some(match k {
                0 => x + t,
                1 => 1.0,
                _ => 0.0,
            }),
            FlowFixture::Scaling => Some(match k {
                0 => t.exp() * x,
                1 => t.exp(),
                _ => 0.0,
            }),
            FlowFixture::Projective => {
                let d = 1.0 - t * x;
                if d <= 0.0 {
                    return None;
                }
                if k == 0 {
                    return Some(x / d);
                }
                let factorial: f64 = (1..=k).map(f64::from).product();
                Some(factorial * t.powi(k as i32 - 1) / d.powi(k as i32 + 1))
            }
        }
    }

    /// `(F_t(x), e^{k1 t} F_t'(x) y)`.
    pub fn closed_form(self, k1: f64, t: f64, x: f64, y: f64) -> Option<(f64, f64)> {
        Some((self.derivative(0, t, x)?, (k1 * t).exp() * self.derivative(1, t, x)? * y))
    }

    /// `X¹(f, k1)` on `(x; y)`.
    pub fn point_field(self, k1: &Rational) -> VectorField {
        let sys = JetSystem::new(INDEPENDENT, &["y"], 4).unwrap();
        let full = x1_field(&self.f(), &Expression::constant(k1.clone()));
        VectorField::new(sys, full.xi().clone(), vec![full.eta("y").unwrap().clone()]).unwrap()
    }

    /// `X¹(f, k1)` on `(x; y, a1, a0)`.
    pub fn augmented_field(self, k1: &Rational) -> VectorField {
        x1_field(&self.f(), &Expression::constant(k1.clone()))
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub start: (f64, f64),
    pub numeric: Option<(f64, f64)>,
    pub closed: Option<(f64, f64)>,
    pub error: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug)]
pub struct FlowReport {
    pub name: String,
    pub results: Vec<GridResult>,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl FlowReport {
    pub fn skipped(&self) -> usize {
        self.results.iter().filter(|r| r.skipped.is_some()).count()
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} {:e} skipped={}",
            self.name,
            if self.passed { "pass" } else { "fail" },
            self.max_error,
            self.skipped()
        )
    }
}

impl std::fmt::Display for FlowReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in &self.results {
            match (&r.skipped, r.numeric, r.closed, r.error) {
                (Some(why), ..) => writeln!(f, "({}, {}) skipped: {why}", r.start.0, r.start.1)?,
                (None, Some(n), Some(c), Some(e)) => writeln!(
                    f,
                    "({}, {}) numeric=({:.12}, {:.12}) closed=({:.12}, {:.12}) error={e:e}",
                    r.start.0, r.start.1, n.0, n.1, c.0, c.1
                )?,
                _ => {}
            }
        }
        writeln!(f, "{}", self.line())
    }
}

/// Integrates `X¹(f, k1)` on `(x, y)` from every grid point and compares the
/// endpoint with `(F_t(x), e^{k1 t} F_t'(x) y)`.
pub fn verify_flow_formula(
    fixture: FlowFixture,
    k1: &Rational,
    t: f64,
    grid: &[(f64, f64)],
    tolerance: f64,
) -> Result<FlowReport> {
    let field = fixture.point_field(k1);
    let k1f = k1.to_f64().unwrap();
    let mut results = Vec::new();
    let mut max_error: f64 = 0.0;
    for &(x, y) in grid {
        let spec = FlowSpec::new(field.clone(), vec![x, y], t);
        let closed = fixture.closed_form(k1f, t, x, y);
        let numeric = integrate_flow(&spec);
        let result = match (numeric, closed) {
            (Ok(traj), Some(c)) => {
                let end = traj.endpoint();
                let e = relative(end[0], c.0).max(relative(end[1], c.1));
                max_error = max_error.max(e);
                GridResult {
                    start: (x, y),
                    numeric: Some((end[0], end[1])),
                    closed: Some(c),
                    error: Some(e),
                    skipped: None,
                }
            }
            (Err(e @ Error::FiniteTimeEscape { .. }), _) => GridResult {
                start: (x, y),
                numeric: None,
                closed,
                error: None,
                skipped: Some(e.to_string()),
            },
            (Err(e), _) => return Err(e),
            (Ok(_), None) => GridResult {
                start: (x, y),
                numeric: None,
                closed: None,
                error: None,
                skipped: Some("closed form undefined (t x >= 1)".into()),
            },
        };
        results.push(result);
    }
    let evaluated = results.iter().any(|r| r.error.is_some());
    Ok(FlowReport {
        name: format!("{}(k1={k1},t={t})", fixture.name()),
        results,
        max_error,
        tolerance,
        passed: evaluated && max_error <= tolerance,
    })
}

/// `max |flow(t1) ∘ flow(t2) − flow(t1 + t2)|`, relative.
pub fn group_property_error(field: &VectorField, start: &[f64], t1: f64, t2: f64) -> Result<f64> {
    let first = integrate_flow(&FlowSpec::new(field.clone(), start.to_vec(), t1))?;
    let composed = integrate_flow(&FlowSpec::new(field.clone(), first.endpoint().to_vec(), t2))?;
    let direct = integrate_flow(&FlowSpec::new(field.clone(), start.to_vec(), t1 + t2))?;
    Ok(composed
        .endpoint()
        .iter()
        .zip(direct.endpoint())
        .map(|(a, b)| relative(*a, *b))
        .fold(0.0, f64::max))
}

/// Central difference of the flow at `t = 0` against the field at `start`.
pub fn initial_derivative_error(field: &VectorField, start: &[f64], h: f64) -> Result<f64> {
    let spec = FlowSpec::new(field.clone(), start.to_vec(), h);
    let compiled = CompiledField::new(&spec)?;
    let forward = integrate_flow(&spec)?;
    let backward = integrate_flow(&FlowSpec::new(field.clone(), start.to_vec(), -h))?;
    let expected = compiled.eval(start)?;
    Ok(forward
        .endpoint()
        .iter()
        .zip(backward.endpoint())
        .zip(&expected)
        .map(|((p, m), e)| relative((p - m) / (2.0 * h), *e))
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct LemmaEntry {
    pub x0: f64,
    pub xt: f64,
    /// Coefficient jets carried by the augmented flow.
    pub flow: Vec<(String, f64)>,
    /// The same jets from the induced action of the inverse transformation.
    pub induced: Vec<(String, f64)>,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct LemmaReport {
    pub entries: Vec<LemmaEntry>,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl std::fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            writeln!(f, "x0={} xt={:.12} error={:e}", e.x0, e.xt, e.error)?;
            for ((name, a), (_, b)) in e.flow.iter().zip(&e.induced) {
                writeln!(f, "  {name}: flow={a:.12} induced={b:.12}")?;
            }
        }
        writeln!(f, "lemma {} {:e}", if self.passed { "pass" } else { "fail" }, self.max_error)
    }
}

/// Jet order of the coefficients carried along augmented flows.
pub const AUGMENTED_ORDER: u32 = 3;

/// Initial state `(x0, y0, a1#0..order, a0#0..order)` from concrete coefficients.
pub fn augmented_initial(
    coefficients: &BTreeMap<String, Expression>,
    x0: f64,
    y0: f64,
    order: u32,
) -> Result<Vec<f64>> {
    let xvar = Atom::independent(INDEPENDENT);
    let point = NumericPoint::from([(xvar.clone(), x0)]);
    let mut state = vec![x0, y0];
    for s in ["a1", "a0"] {
        let mut a = coefficients.get(s).cloned().ok_or_else(|| Error::MissingBinding(s.into()))?;
        for _ in 0..=order {
            state.push(crate::expr::eval_numeric(&a, &point)?);
            a = a.differentiate(&xvar);
        }
    }
    Ok(state)
}

fn augmented_orders(order: u32) -> BTreeMap<String, u32> {
    BTreeMap::from([("a1".to_string(), order), ("a0".to_string(), order)])
}

/// Augmented flow of `X¹(f, k1)` on `(x, y, a1#0..3, a0#0..3)` compared with
/// the coefficient jets that the inverse finite transformation
/// `x = F_{−t}(z)`, `y = e^{−k1 t} F_{−t}'(z) w` induces at `z = x(t)`.
pub fn lemma_consistency_check(
    fixture: FlowFixture,
    k1: &Rational,
    coefficients: &BTreeMap<String, Expression>,
    t: f64,
    samples: &[f64],
    tolerance: f64,
) -> Result<LemmaReport> {
    let field = fixture.augmented_field(k1);
    let ctx = transform_context();
    let transform = PointTransform::linear(
        parse_expression_with("f(z)", &ctx)?,
        parse_expression_with("f'(z)", &ctx)?,
        Expression::zero(),
    );
    let jets = TransformedJets::new(&transform, coefficients, AUGMENTED_ORDER)?;
    let inverse = move |_: &str, k: u32, z: f64| fixture.derivative(k, -t, z);
    let mut entries = Vec::new();
    let mut max_error: f64 = 0.0;
    for &x0 in samples {
        let initial = augmented_initial(coefficients, x0, 1.0, AUGMENTED_ORDER)?;
        let spec = FlowSpec::new(field.clone(), initial, t).with_orders(augmented_orders(AUGMENTED_ORDER));
        let traj = integrate_flow(&spec)?;
        let end = traj.endpoint();
        let xt = end[0];
        let (_, transformed) = jets.evaluate(xt, &inverse)?;
        let mut flow = Vec::new();
        let mut induced = Vec::new();
        let mut error: f64 = 0.0;
        let names = &traj.coordinates[2..];
        for (name, value) in names.iter().zip(&end[2..]) {
            let (symbol, order) = name.split_once('#').map(|(s, k)| (s, k.parse().unwrap())).unwrap_or((name, 0));
            let b = transformed[&Atom::jet(symbol, order)];
            error = error.max(relative(*value, b));
            flow.push((name.clone(), *value));
            induced.push((name.clone(), b));
        }
        max_error = max_error.max(error);
        entries.push(LemmaEntry {
            x0,
            xt,
            flow,
            induced,
            error,
        });
    }
    Ok(LemmaReport {
        passed: !entries.is_empty() && max_error <= tolerance,
        entries,
        max_error,
        tolerance,
    })
}

/// Largest relative change of the candidate along the augmented flow, sampled
/// at every step. Jets are carried to order `max(3, inv.order)`.
pub fn invariant_drift(
    inv: &InvariantCandidate,
    fixture: FlowFixture,
    k1: &Rational,
    coefficients: &BTreeMap<String, Expression>,
    x0: f64,
    t: f64,
) -> Result<f64> {
    let field = fixture.augmented_field(k1);
    let order = inv.order.max(AUGMENTED_ORDER);
    let initial = augmented_initial(coefficients, x0, 1.0, order)?;
    let spec = FlowSpec::new(field, initial, t).with_orders(augmented_orders(order));
    let traj = integrate_flow(&spec)?;
    let coords = CompiledField::new(&spec)?.coordinates;
    let value = |state: &[f64]| -> Result<f64> {
        let point: NumericPoint = coords.iter().cloned().zip(state.iter().copied()).collect();
        inv.evaluate(&point)
    };
    let start = value(&traj.states[0])?;
    let mut drift: f64 = 0.0;
    for s in &traj.states {
        drift = drift.max(relative(value(s)?, start));
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::rat;
    use crate::parse::parse_expression;

    #[test]
    fn translation_flow() {
        let field = FlowFixture::Translation.point_field(&rat(0));
        let traj = integrate_flow(&FlowSpec::new(field, vec![0.0, 1.0], 1.0)).unwrap();
        assert!((traj.endpoint()[0] - 1.0).abs() < 1e-12);
        assert!((traj.endpoint()[1] - 1.0).abs() < 1e-12);
        assert!(traj.to_csv().starts_with("t,x,y\n0,0,1\n"));
    }

    #[test]
    fn projective_escape() {
        let field = FlowFixture::Projective.point_field(&rat(0));
        let err = integrate_flow(&FlowSpec::new(field, vec![1.0, 1.0], 1.5)).unwrap_err();
        assert!(matches!(err, Error::FiniteTimeEscape { t } if (t - 1.0).abs() < 0.05));
    }

    #[test]
    fn closed_forms() {
        for fixture in FlowFixture::ALL {
            for k1 in [rat(0), rat(1)] {
                let grid = [(0.5, 1.0), (-0.7, 2.0), (1.2, -0.5)];
                let r = verify_flow_formula(fixture, &k1, 0.4, &grid, 1e-6).unwrap();
                assert!(r.passed, "{r}");
            }
        }
        let r = verify_flow_formula(FlowFixture::Projective, &rat(0), 1.0, &[(0.5, 1.0), (2.0, 1.0)], 1e-6).unwrap();
        assert_eq!(r.skipped(), 1);
        assert!(r.passed);
    }

    #[test]
    fn lemma_translation() {
        let coefficients = BTreeMap::from([
            ("a1".to_string(), parse_expression("x").unwrap()),
            ("a0".to_string(), parse_expression("1").unwrap()),
        ]);
        let r = lemma_consistency_check(FlowFixture::Translation, &rat(0), &coefficients, 0.5, &[0.0, 1.0], 1e-6)
            .unwrap();
        assert!(r.passed, "{r}");
        let r = lemma_consistency_check(FlowFixture::Scaling, &rat(1), &coefficients, 0.0, &[0.3], 1e-6).unwrap();
        assert_eq!(r.max_error, 0.0);
    }
}
