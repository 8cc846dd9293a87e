//! One line per acceptance criterion: status, measured values, runtime.
//! Run with `cargo test --test acceptance -- --nocapture` to see the table.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use equivgroups::algebra::{levi_report, snapshot, truncate, verify_relation, Relation};
use equivgroups::expr::rat;
use equivgroups::family::{
    check_symmetry, determining_system, transform_equation, verify_generator, OdeFamily, PointTransform,
};
use equivgroups::flows::{
    group_property_error, initial_derivative_error, lemma_consistency_check, verify_flow_formula, FlowFixture,
};
use equivgroups::invariants::{
    annihilation_check, exponential, invariant_count, numeric_invariance_check, psi_catalog, GeneratorFamily, Group,
    InvariantCandidate,
};
use equivgroups::parse::{parse_expression, parse_expression_with, parse_vector_field};
use equivgroups::{Expression, Result};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)).unwrap()
}

fn coefficients(a1: &str, a0: &str) -> BTreeMap<String, Expression> {
    BTreeMap::from([
        ("a1".to_string(), parse_expression(a1).unwrap()),
        ("a0".to_string(), parse_expression(a0).unwrap()),
    ])
}

fn c1() -> Result<(bool, String)> {
    let x = parse_vector_field(&fixture("x3ode.vf"))?;
    let c = check_symmetry(&x, &OdeFamily::normal_third_order())?;
    Ok((c.holds, format!("residue={}", c.residue)))
}

fn c2() -> Result<(bool, String)> {
    let x = parse_vector_field(&fixture("x3nh.vf"))?;
    let c = check_symmetry(&x, &OdeFamily::nonhomogeneous_third_order())?;
    Ok((c.holds, format!("residue={} phi4 unconstrained", c.residue)))
}

fn c3() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in Relation::ALL {
        let c = verify_relation(r)?;
        ok &= c.holds;
        parts.push(format!("{}={}", r.id(), if c.holds { "0" } else { "nonzero" }));
    }
    Ok((ok, parts.join(" ")))
}

fn c4() -> Result<(bool, String)> {
    let (generators, labels) = snapshot("deg2")?;
    let sc = truncate(&generators, labels, 0)?;
    let r = levi_report(&sc)?;
    let radical = r.radical_indices.clone().unwrap_or_default();
    let x2_directions = radical.len() == 3 && radical.iter().all(|&i| sc.labels()[i].starts_with("X2"));
    let abelian = r.radical_derived_series == vec![3, 0];
    let mut into_radical = true;
    for &i in &r.complement {
        for &j in &radical {
            let v = sc.get(i, j);
            into_radical &= r.complement.iter().all(|&k| v[k] == rat(0));
        }
    }
    let ok = x2_directions
        && abelian
        && r.complement.len() == 3
        && r.complement_nondegenerate()
        && into_radical
        && r.is_levi_split();
    Ok((
        ok,
        format!(
            "radical={radical:?} series={:?} complement_dim={} killing_rank={} [L0,L2]<L2={into_radical}",
            r.radical_derived_series,
            r.complement.len(),
            r.complement_killing_rank
        ),
    ))
}

fn c5() -> Result<(bool, String)> {
    let fam = OdeFamily::nonhomogeneous_third_order();
    let generic = transform_equation(&fam, &PointTransform::parse(&fixture("generic.tr"))?)?;
    let ctx = equivgroups::family::transform_context();
    let expected = parse_expression_with("3*(h'(z)/h(z) - f''(z)/f'(z))", &ctx)?;
    let difference = &generic.coefficients[&2] - &expected;
    let equivalence = transform_equation(&fam, &PointTransform::parse(&fixture("equivalence.tr"))?)?;
    let b2 = &equivalence.coefficients[&2];
    Ok((
        difference.is_zero() && b2.is_zero(),
        format!("B2-3(h'/h-f''/f')={difference} B2(h=lambda f')={b2}"),
    ))
}

fn c6() -> Result<(bool, String)> {
    let catalog = psi_catalog()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for inv in &catalog {
        let c = annihilation_check(inv, GeneratorFamily::Gc)?;
        ok &= c.holds && inv.verified;
        parts.push(format!("{}(order {})={}", inv.name, inv.order, if c.holds { "0" } else { "nonzero" }));
    }
    parts.push(format!("psi2: {}", catalog[1].note));
    Ok((ok, parts.join(" ")))
}

fn c7() -> Result<(bool, String)> {
    let expected = [(Group::Gc, 3, 1), (Group::Gc, 4, 2), (Group::Gs, 4, 0)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (group, order, count) in expected {
        let counts: Vec<usize> = (0..5)
            .map(|seed| invariant_count(group, order, 5, seed).map(|r| r.count))
            .collect::<Result<_>>()?;
        ok &= counts.iter().all(|&c| c == count);
        parts.push(format!("{group}/{order}={counts:?}"));
    }
    Ok((ok, parts.join(" ")))
}

fn c8() -> Result<(bool, String)> {
    let grid = [(0.5, 1.0), (-0.7, 2.0), (1.2, -0.5)];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let cases = [
        (FlowFixture::Translation, rat(0)),
        (FlowFixture::Scaling, rat(0)),
        (FlowFixture::Scaling, rat(1)),
        (FlowFixture::Projective, rat(0)),
        (FlowFixture::Projective, rat(1)),
    ];
    let mut side: f64 = 0.0;
    for (fixture, k1) in &cases {
        let r = verify_flow_formula(*fixture, k1, 0.4, &grid, 1e-6)?;
        ok &= r.passed;
        worst = worst.max(r.max_error);
        let field = fixture.point_field(k1);
        side = side.max(group_property_error(&field, &[0.5, 1.0], 0.2, 0.3)?);
        side = side.max(initial_derivative_error(&field, &[0.5, 1.0], 1e-4)?);
    }
    ok &= side <= 1e-6;
    let mut lemma: f64 = 0.0;
    for (a1, a0) in [("x^2", "1"), ("x", "x^2 - 1")] {
        let r = lemma_consistency_check(FlowFixture::Projective, &rat(0), &coefficients(a1, a0), 0.3, &[0.0, 0.5, 1.0], 1e-6)?;
        ok &= r.passed;
        lemma = lemma.max(r.max_error);
    }
    Ok((ok, format!("flow={worst:e} group/derivative={side:e} lemma={lemma:e}")))
}

fn c9() -> Result<(bool, String)> {
    let psi = &psi_catalog()?[0];
    let t = PointTransform::parse(&fixture("exp.tr"))?;
    let coefficients = coefficients("x", "0");
    let points = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let r = numeric_invariance_check(psi, &t, &exponential, &coefficients, &points, 1e-9)?;
    let evaluated = r.points.iter().filter(|p| p.deviation.is_some()).count();
    let mu = InvariantCandidate::from_text("mu", "mu", 1)?;
    let control = numeric_invariance_check(&mu, &t, &exponential, &coefficients, &points, 1e-9)?;
    Ok((
        r.passed && evaluated == 5 && !control.passed,
        format!("psi={:e} points={evaluated} mu={:e} (control fails)", r.max_deviation, control.max_deviation),
    ))
}

fn c10() -> Result<(bool, String)> {
    let system = determining_system(&OdeFamily::normal_third_order())?;
    let good = verify_generator(&parse_vector_field(&fixture("x3ode.vf"))?, &system);
    let mut failing = 0;
    for m in ["c4-sign", "eta-double", "drop-f4"] {
        if !verify_generator(&parse_vector_field(&fixture(&format!("mutants/{m}.vf")))?, &system) {
            failing += 1;
        }
    }
    let n4 = determining_system(&OdeFamily::general_linear(4)?)?.len();
    let n5 = determining_system(&OdeFamily::general_linear(5)?)?.len();
    Ok((
        good && failing == 3 && n4 > 0 && n5 > 0,
        format!("n3={} generator={good} mutants_failing={failing}/3 n4={n4} n5={n5}", system.len()),
    ))
}

#[test]
fn acceptance() {
    type Check = fn() -> Result<(bool, String)>;
    let criteria: [(&str, Check, u64); 10] = [
        ("symmetry e3nor", c1, 5),
        ("symmetry e3nh", c2, 10),
        ("bracket relations", c3, 5),
        ("levi deg2", c4, 2),
        ("pullback B2", c5, 10),
        ("annihilation", c6, 60),
        ("invariant count", c7, 30),
        ("flows", c8, 30),
        ("numeric invariance", c9, 5),
        ("determining systems", c10, 120),
    ];
    let mut failed = Vec::new();
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {:>2} {:<20} {} {detail} time={:.3}s/{limit}s",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !ok {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
