use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use equivgroups::algebra::{self, Relation, StructureConstants};
use equivgroups::expr::Rational;
use equivgroups::family::{
    self, determining_system, induced_coefficient_action, lift_to_symmetry, transform_equation, verify_generator_report,
    OdeFamily, PointTransform,
};
use equivgroups::flows::{self, FlowFixture, FlowSpec};
use equivgroups::invariants::{self, GeneratorFamily, Group, InvariantCandidate};
use equivgroups::parse::{parse_expression, parse_tree, parse_vector_field, ParseContext};
use equivgroups::{Error, Expression};

const FIXTURES: &[(&str, &str)] = &[
    ("e3nor", include_str!("../../../fixtures/e3nor.fam")),
    ("e3nh", include_str!("../../../fixtures/e3nh.fam")),
    ("x0", include_str!("../../../fixtures/x0.vf")),
    ("x1", include_str!("../../../fixtures/x1.vf")),
    ("x2", include_str!("../../../fixtures/x2.vf")),
    ("x3ode", include_str!("../../../fixtures/x3ode.vf")),
    ("x3nh", include_str!("../../../fixtures/x3nh.vf")),
    ("mutants/a1-factor", include_str!("../../../fixtures/mutants/a1-factor.vf")),
    ("mutants/c4-sign", include_str!("../../../fixtures/mutants/c4-sign.vf")),
    ("mutants/drop-f4", include_str!("../../../fixtures/mutants/drop-f4.vf")),
    ("mutants/eta-double", include_str!("../../../fixtures/mutants/eta-double.vf")),
    ("generic", include_str!("../../../fixtures/generic.tr")),
    ("equivalence", include_str!("../../../fixtures/equivalence.tr")),
    ("exp", include_str!("../../../fixtures/exp.tr")),
    ("identity", include_str!("../../../fixtures/identity.tr")),
    ("translation", include_str!("../../../fixtures/translation.tr")),
    ("scaling", include_str!("../../../fixtures/scaling.tr")),
    ("moebius", include_str!("../../../fixtures/moebius.tr")),
];

const SCHEMA: &str = "\
Machine output (--json): one JSON object per run, keys sorted.
  command   string   subcommand name
  passed    bool     true iff every check passed (exit 0)
  checks    array    [{name, passed, ...}] one entry per check
  plus command-specific keys: residue, equations, radical_dim,
  complement_dim, count, rank, max_deviation, max_error, trajectory.
Expressions are printed in the input grammar. Errors print
{\"command\", \"error\"} and exit 2.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or input error.

Fixtures are found by path first, then by embedded name:
  families e3nor e3nh glinode:<n>; generators x0 x1 x2 x3ode x3nh
  mutants/{a1-factor,c4-sign,drop-f4,eta-double};
  transforms generic equivalence exp identity translation scaling moebius";

#[derive(Parser)]
#[command(name = "equivgroups", version, about = "Symmetry and equivalence-group checks for linear ODE families")]
#[command(after_help = SCHEMA)]
struct Cli {
    /// Print one JSON document instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized rank and closure tests.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Numeric tolerance; each command has its own default.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a prolonged generator to a family and test the residue for zero.
    CheckSymmetry {
        #[arg(long)]
        family: String,
        #[arg(long)]
        generator: String,
    },
    /// Lie bracket of two vector fields.
    Bracket {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
    /// The three bracket identities of X1 and X2.
    VerifyRelations {
        /// x1-x1, x2-x2 or x1-x2; all three when omitted.
        #[arg(long)]
        relation: Vec<String>,
    },
    /// Radical and semisimple complement of a finite algebra.
    Levi {
        /// sl2, x2deg2, deg2 or deg3.
        #[arg(long, conflicts_with = "table", required_unless_present = "table")]
        snapshot: Option<String>,
        /// Structure constants file.
        #[arg(long)]
        table: Option<String>,
    },
    /// Pull a family back through a point transformation.
    Transform {
        #[arg(long)]
        family: String,
        #[arg(long)]
        transform: String,
        /// Also lift to a symmetry of the augmented equation.
        #[arg(long)]
        lift: bool,
    },
    /// Generate the determining system of a family.
    Determining {
        #[arg(long)]
        family: String,
        /// Print every equation.
        #[arg(long)]
        equations: bool,
    },
    /// Substitute a generator into the determining system.
    VerifyGenerator {
        #[arg(long)]
        family: String,
        #[arg(long)]
        generator: String,
    },
    /// Split a generator into X1 (named functions set to zero) and X2 = X - X1.
    Split {
        #[arg(long)]
        generator: String,
        #[arg(long, value_delimiter = ',', required = true)]
        zero: Vec<String>,
    },
    /// Differential invariants.
    Invariants {
        #[command(subcommand)]
        action: InvariantAction,
    },
    /// Same as `invariants count`.
    Rank(CountArgs),
    /// Numeric flows of X1(f, k1).
    Flow {
        #[command(subcommand)]
        action: FlowAction,
    },
    /// Parse an expression file and check that its printed form reparses to it.
    Parse { file: String },
}

#[derive(Subcommand)]
enum InvariantAction {
    /// Annihilation of the catalog invariants by prolonged generators.
    Verify {
        /// Gc, GcWithK1 or Gs.
        #[arg(long, default_value = "Gc")]
        generators: String,
    },
    Count(CountArgs),
    /// Compare an invariant before and after a transformation, with f^(k) = e^z.
    Numeric {
        /// psi, psi2 or mu.
        #[arg(long, default_value = "psi")]
        name: String,
        #[arg(long, default_value = "exp")]
        transform: String,
        #[arg(long, default_value = "x")]
        a1: String,
        #[arg(long, default_value = "0")]
        a0: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,-0.5,0,0.5,1")]
        points: Vec<f64>,
    },
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    group: String,
    #[arg(long)]
    order: u32,
    #[arg(long, default_value_t = 5)]
    trials: usize,
}

#[derive(Args)]
struct FixtureArgs {
    /// translation, scaling or projective.
    #[arg(long)]
    fixture: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    k1: String,
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    t: f64,
}

#[derive(Subcommand)]
enum FlowAction {
    /// Integrate from one point and print the trajectory endpoint.
    Integrate {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        y: f64,
        /// Print every step as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Compare numeric flows with the closed form on a grid.
    Verify {
        #[command(flatten)]
        fixture: FixtureArgs,
    },
    /// Compare the augmented flow with the induced coefficient action.
    Lemma {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[arg(long, default_value = "x^2")]
        a1: String,
        #[arg(long, default_value = "1")]
        a0: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.5,1")]
        samples: Vec<f64>,
    },
}

/// Text lines and the JSON document of one run.
struct Report {
    command: &'static str,
    text: Vec<String>,
    checks: Vec<Value>,
    extra: serde_json::Map<String, Value>,
}

impl Report {
    fn new(command: &'static str) -> Report {
        Report {
            command,
            text: Vec::new(),
            checks: Vec::new(),
            extra: serde_json::Map::new(),
        }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.text.push(s.into());
    }

    fn check(&mut self, name: &str, passed: bool, detail: Value) {
        let mut entry = json!({ "name": name, "passed": passed });
        if let (Value::Object(m), Value::Object(d)) = (&mut entry, detail) {
            m.extend(d);
        }
        self.checks.push(entry);
    }

    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.extra.insert(key.to_string(), value.into());
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c["passed"] == Value::Bool(true))
    }
}

fn fixture_text(name: &str) -> Result<String, Error> {
    if Path::new(name).is_file() {
        return std::fs::read_to_string(name).map_err(|e| Error::Invalid(format!("{name}: {e}")));
    }
    let key = name.trim_start_matches("fixtures/");
    let key = key.rsplit_once('.').map(|(k, _)| k).unwrap_or(key);
    FIXTURES
        .iter()
        .find(|(n, _)| *n == key)
        .map(|(_, t)| t.to_string())
        .ok_or_else(|| Error::Invalid(format!("no file or fixture named `{name}`")))
}

fn load_family(name: &str) -> Result<OdeFamily, Error> {
    if name.starts_with("glinode:") {
        return OdeFamily::builtin(name);
    }
    OdeFamily::parse(&fixture_text(name)?)
}

fn load_field(name: &str) -> Result<equivgroups::jet::VectorField, Error> {
    parse_vector_field(&fixture_text(name)?)
}

fn load_transform(name: &str) -> Result<PointTransform, Error> {
    PointTransform::parse(&fixture_text(name)?)
}

fn parse_rational(s: &str) -> Result<Rational, Error> {
    s.trim()
        .parse::<Rational>()
        .map_err(|_| Error::Invalid(format!("`{s}` is not a rational number")))
}

fn coefficients(a1: &str, a0: &str) -> Result<BTreeMap<String, Expression>, Error> {
    Ok(BTreeMap::from([
        ("a1".to_string(), parse_expression(a1)?),
        ("a0".to_string(), parse_expression(a0)?),
    ]))
}

fn status(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "fail"
    }
}

fn run(cli: &Cli) -> Result<Report, Error> {
    let tolerance = |default: f64| -> Result<f64, Error> {
        match cli.tolerance {
            Some(t) if !(t > 0.0 && t.is_finite()) => Err(Error::Invalid(format!("tolerance must be positive, got {t}"))),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    };
    match &cli.command {
        Command::CheckSymmetry { family, generator } => {
            let mut r = Report::new("check-symmetry");
            let check = family::check_symmetry(&load_field(generator)?, &load_family(family)?)?;
            r.line(format!("residue: {}", check.residue));
            r.line(format!("symmetry {}", status(check.holds)));
            r.set("residue", check.residue.to_string());
            r.check("symmetry", check.holds, json!({}));
            Ok(r)
        }
        Command::Bracket { left, right } => {
            let mut r = Report::new("bracket");
            let b = algebra::bracket(&load_field(left)?, &load_field(right)?)?;
            r.line(b.to_string());
            r.set("bracket", b.to_string());
            Ok(r)
        }
        Command::VerifyRelations { relation } => {
            let mut r = Report::new("verify-relations");
            let relations = if relation.is_empty() {
                Relation::ALL.to_vec()
            } else {
                relation.iter().map(|s| Relation::parse(s)).collect::<Result<_, _>>()?
            };
            for rel in relations {
                let c = algebra::verify_relation(rel)?;
                r.line(format!("{} {} {}", rel.id(), status(c.holds), rel.statement()));
                if !c.holds {
                    r.line(format!("  residue: {}", c.residue));
                }
                r.check(rel.id(), c.holds, json!({ "statement": rel.statement(), "residue": c.residue.to_string() }));
            }
            Ok(r)
        }
        Command::Levi { snapshot, table } => {
            let mut r = Report::new("levi");
            let sc = match (snapshot, table) {
                (Some(name), _) => {
                    let (generators, labels) = algebra::snapshot(name)?;
                    algebra::truncate(&generators, labels, cli.seed)?
                }
                (None, Some(file)) => StructureConstants::parse(&fixture_text(file)?)?,
                (None, None) => return Err(Error::Invalid("give --snapshot or --table".into())),
            };
            let report = algebra::levi_report(&sc)?;
            r.text.extend(sc.to_string().lines().map(str::to_string));
            r.text.extend(report.to_string().lines().map(str::to_string));
            let split = report.is_levi_split();
            r.line(format!("levi {}", status(split)));
            r.set("dim", report.dim);
            r.set("radical_dim", report.radical.len());
            r.set("complement_dim", report.complement.len());
            r.set("radical_derived_series", json!(report.radical_derived_series));
            r.set("complement", json!(report.complement));
            r.check("radical solvable", report.radical_solvable(), json!({}));
            r.check("radical ideal", report.radical_is_ideal, json!({}));
            r.check("complement subalgebra", report.complement_is_subalgebra, json!({}));
            r.check("complement nondegenerate", report.complement_nondegenerate(), json!({}));
            Ok(r)
        }
        Command::Transform { family, transform, lift } => {
            let mut r = Report::new("transform");
            let fam = load_family(family)?;
            let t = load_transform(transform)?;
            let result = transform_equation(&fam, &t)?;
            let mut coefficients = serde_json::Map::new();
            for (k, b) in result.coefficients.iter().rev() {
                let name = if *k < 0 { "free".to_string() } else { format!("B{k}") };
                r.line(format!("{name} = {b}"));
                coefficients.insert(name, b.to_string().into());
            }
            r.line(format!("certificate = {}", result.certificate));
            r.set("coefficients", coefficients);
            r.set("certificate", result.certificate.to_string());
            let action = induced_coefficient_action(&fam, &t)?;
            for (k, e) in &action.obstructions {
                r.line(format!("obstruction {k} = {e}"));
            }
            r.set(
                "obstructions",
                action.obstructions.iter().map(|(k, e)| json!({ "name": k, "value": e.to_string() })).collect::<Vec<_>>(),
            );
            if *lift {
                match lift_to_symmetry(&fam, &t) {
                    Ok(l) => {
                        for (s, g) in &l.gamma {
                            r.line(format!("{s} -> {g}"));
                        }
                        r.line(format!("lift {}", status(l.verified)));
                        r.check("lift", l.verified, json!({}));
                    }
                    Err(Error::Obstruction(why)) => {
                        r.line(format!("lift fail: {why}"));
                        r.check("lift", false, json!({ "obstruction": why }));
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(r)
        }
        Command::Determining { family, equations } => {
            let mut r = Report::new("determining");
            let sys = determining_system(&load_family(family)?)?;
            r.line(format!("equations: {}", sys.len()));
            if *equations {
                for (i, e) in sys.equations.iter().enumerate() {
                    r.line(format!("{i}: {e} = 0"));
                }
            }
            r.set("count", sys.len());
            r.set("equations", sys.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>());
            r.check("generated", !sys.is_empty(), json!({}));
            Ok(r)
        }
        Command::VerifyGenerator { family, generator } => {
            let mut r = Report::new("verify-generator");
            let sys = determining_system(&load_family(family)?)?;
            let check = verify_generator_report(&load_field(generator)?, &sys)?;
            for (i, e) in &check.failures {
                r.line(format!("equation {i}: {e}"));
            }
            r.line(format!("generator {} ({} of {} equations fail)", status(check.holds), check.failures.len(), sys.len()));
            r.set(
                "failures",
                check.failures.iter().map(|(i, e)| json!({ "index": i, "residue": e.to_string() })).collect::<Vec<_>>(),
            );
            r.check("generator", check.holds, json!({}));
            Ok(r)
        }
        Command::Split { generator, zero } => {
            let mut r = Report::new("split");
            let names: Vec<&str> = zero.iter().map(String::as_str).collect();
            let s = family::split_generator(&load_field(generator)?, &names)?;
            for w in &s.warnings {
                r.line(format!("warning: {w}"));
            }
            r.line("X1:");
            r.line(s.x1.to_string());
            r.line("X2:");
            r.line(s.x2.to_string());
            r.set("x1", s.x1.to_string());
            r.set("x2", s.x2.to_string());
            r.set("warnings", json!(s.warnings));
            Ok(r)
        }
        Command::Invariants { action } => run_invariants(action, cli.seed, tolerance),
        Command::Rank(args) => count(args, cli.seed),
        Command::Flow { action } => run_flow(action, tolerance),
        Command::Parse { file } => {
            let mut r = Report::new("parse");
            let text = fixture_text(file)?;
            let ctx = ParseContext::default();
            let tree = parse_tree(text.trim(), &ctx)?;
            let e = tree.normalize()?;
            let printed = e.to_string();
            let again = parse_expression(&printed)?;
            let same = again.sub_expr(&e).is_zero();
            r.line(printed.clone());
            r.line(format!("round-trip {}", status(same)));
            r.set("printed", printed);
            r.check("round-trip", same, json!({}));
            Ok(r)
        }
    }
}

fn count(args: &CountArgs, seed: u64) -> Result<Report, Error> {
    let mut r = Report::new("count");
    let report = invariants::invariant_count(Group::parse(&args.group)?, args.order, args.trials, seed)?;
    r.text.extend(report.to_string().lines().map(str::to_string));
    r.set("group", report.group.to_string());
    r.set("order", report.order);
    r.set("dimension", report.dimension);
    r.set("rank", report.rank);
    r.set("count", report.count);
    r.set("trial_ranks", json!(report.trial_ranks));
    Ok(r)
}

fn catalog_entry(name: &str) -> Result<InvariantCandidate, Error> {
    let catalog = invariants::psi_catalog()?;
    match name.to_ascii_lowercase().as_str() {
        "psi" => Ok(catalog[0].clone()),
        "psi2" => Ok(catalog[1].clone()),
        "mu" => InvariantCandidate::from_text("mu", "mu", 1),
        _ => Err(Error::Invalid(format!("unknown invariant `{name}`; expected psi, psi2 or mu"))),
    }
}

fn run_invariants(
    action: &InvariantAction,
    seed: u64,
    tolerance: impl Fn(f64) -> Result<f64, Error>,
) -> Result<Report, Error> {
    match action {
        InvariantAction::Verify { generators } => {
            let mut r = Report::new("invariants verify");
            let generators = match generators.to_ascii_lowercase().as_str() {
                "gc" => GeneratorFamily::Gc,
                "gcwithk1" => GeneratorFamily::GcWithK1,
                "gs" => GeneratorFamily::Gs,
                other => return Err(Error::Invalid(format!("unknown generators `{other}`"))),
            };
            for inv in invariants::psi_catalog()? {
                let c = invariants::annihilation_check(&inv, generators)?;
                r.line(format!("{} order {} {} ({})", inv.name, inv.order, status(c.holds), inv.note));
                if !c.holds {
                    r.line(format!("  residue: {}", c.residue));
                }
                r.check(
                    &inv.name,
                    c.holds,
                    json!({ "order": inv.order, "note": inv.note, "residue": c.residue.to_string() }),
                );
            }
            Ok(r)
        }
        InvariantAction::Count(args) => count(args, seed),
        InvariantAction::Numeric { name, transform, a1, a0, points } => {
            let mut r = Report::new("invariants numeric");
            let inv = catalog_entry(name)?;
            let t = load_transform(transform)?;
            let report = invariants::numeric_invariance_check(
                &inv,
                &t,
                &invariants::exponential,
                &coefficients(a1, a0)?,
                points,
                tolerance(1e-9)?,
            )?;
            r.text.extend(report.to_string().lines().map(str::to_string));
            r.set("max_deviation", report.max_deviation);
            r.check(&report.name, report.passed, json!({ "tolerance": report.tolerance }));
            Ok(r)
        }
    }
}

fn fixture_of(args: &FixtureArgs) -> Result<(FlowFixture, Rational), Error> {
    Ok((FlowFixture::parse(&args.fixture)?, parse_rational(&args.k1)?))
}

fn run_flow(action: &FlowAction, tolerance: impl Fn(f64) -> Result<f64, Error>) -> Result<Report, Error> {
    match action {
        FlowAction::Integrate { fixture, x, y, csv } => {
            let mut r = Report::new("flow integrate");
            let (fx, k1) = fixture_of(fixture)?;
            let mut spec = FlowSpec::new(fx.point_field(&k1), vec![*x, *y], fixture.t);
            spec.tolerance = tolerance(spec.tolerance)?;
            let traj = flows::integrate_flow(&spec)?;
            if *csv {
                r.text.extend(traj.to_csv().lines().map(str::to_string));
            }
            let end = traj.endpoint();
            r.line(format!("endpoint: x={:.12} y={:.12}", end[0], end[1]));
            r.line(format!("error estimate: {:e}", traj.error_estimate));
            r.set("endpoint", json!(end));
            r.set("error_estimate", traj.error_estimate);
            if *csv {
                r.set("trajectory", traj.to_csv());
            }
            Ok(r)
        }
        FlowAction::Verify { fixture } => {
            let mut r = Report::new("flow verify");
            let (fx, k1) = fixture_of(fixture)?;
            let grid = [(0.5, 1.0), (-0.7, 2.0), (1.2, -0.5), (2.0, 1.0)];
            let tol = tolerance(1e-6)?;
            let report = flows::verify_flow_formula(fx, &k1, fixture.t, &grid, tol)?;
            r.text.extend(report.to_string().lines().map(str::to_string));
            r.check(&report.name, report.passed, json!({ "max_error": report.max_error, "skipped": report.skipped() }));
            let field = fx.point_field(&k1);
            let group = flows::group_property_error(&field, &[0.5, 1.0], fixture.t / 2.0, fixture.t / 2.0)?;
            let derivative = flows::initial_derivative_error(&field, &[0.5, 1.0], 1e-4)?;
            r.line(format!("group property {} {group:e}", status(group <= tol)));
            r.line(format!("t=0 derivative {} {derivative:e}", status(derivative <= tol)));
            r.check("group property", group <= tol, json!({ "error": group }));
            r.check("t=0 derivative", derivative <= tol, json!({ "error": derivative }));
            Ok(r)
        }
        FlowAction::Lemma { fixture, a1, a0, samples } => {
            let mut r = Report::new("flow lemma");
            let (fx, k1) = fixture_of(fixture)?;
            let report =
                flows::lemma_consistency_check(fx, &k1, &coefficients(a1, a0)?, fixture.t, samples, tolerance(1e-6)?)?;
            r.text.extend(report.to_string().lines().map(str::to_string));
            r.set("max_error", report.max_error);
            r.check("lemma", report.passed, json!({ "tolerance": report.tolerance }));
            Ok(r)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(r) => {
            let passed = r.passed();
            if cli.json {
                let mut doc = r.extra.clone();
                doc.insert("command".into(), r.command.into());
                doc.insert("passed".into(), passed.into());
                doc.insert("checks".into(), Value::Array(r.checks));
                println!("{}", Value::Object(doc));
            } else {
                for l in &r.text {
                    println!("{l}");
                }
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if cli.json {
                println!("{}", json!({ "command": command_name(&cli.command), "error": e.to_string() }));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(2)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::CheckSymmetry { .. } => "check-symmetry",
        Command::Bracket { .. } => "bracket",
        Command::VerifyRelations { .. } => "verify-relations",
        Command::Levi { .. } => "levi",
        Command::Transform { .. } => "transform",
        Command::Determining { .. } => "determining",
        Command::VerifyGenerator { .. } => "verify-generator",
        Command::Split { .. } => "split",
        Command::Invariants { .. } => "invariants",
        Command::Rank(_) => "rank",
        Command::Flow { .. } => "flow",
        Command::Parse { .. } => "parse",
    }
}
