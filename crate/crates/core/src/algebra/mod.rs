//! Lie brackets of point vector fields, the commutation relations of the
//! normal-form generators, finite truncations with exact structure constants
//! and the Levi-decomposition report.

pub mod linalg;

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::expr::{Atom, Expression, Rational};
use crate::family::generators::{dx, formal, parameter, x1_field, x2_field};
use crate::jet::VectorField;
use crate::parse::{parse_expression, parse_expression_with, ParseContext};
use crate::sample::Sampler;

use linalg::{is_zero_vector, nullspace, rank, solve_in_span, span_basis, Vector};

fn same_coordinates(x: &VectorField, y: &VectorField) -> Result<()> {
    let (a, b) = (x.system(), y.system());
    if a.independent() != b.independent() || a.dependents() != b.dependents() {
        return Err(Error::CoordinateMismatch(format!(
            "fields live on ({}; {}) and ({}; {})",
            a.independent(),
            a.dependents().join(", "),
            b.independent(),
            b.dependents().join(", ")
        )));
    }
    Ok(())
}

/// `[X, Y]^i = X(Y^i) − Y(X^i)`.
pub fn bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    same_coordinates(x, y)?;
    let xi = x.apply(y.xi())? - y.apply(x.xi())?;
    let mut etas = Vec::new();
    for (ex, ey) in x.etas().iter().zip(y.etas()) {
        etas.push(x.apply(ey)? - y.apply(ex)?);
    }
    VectorField::new(x.system().clone(), xi, etas)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    X1X1,
    X2X2,
    X1X2,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::X1X1, Relation::X2X2, Relation::X1X2];

    pub fn parse(id: &str) -> Result<Relation> {
        match id {
            "x1-x1" => Ok(Relation::X1X1),
            "x2-x2" => Ok(Relation::X2X2),
            "x1-x2" => Ok(Relation::X1X2),
            _ => Err(Error::Invalid(format!("unknown relation `{id}`; expected x1-x1, x2-x2 or x1-x2"))),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Relation::X1X1 => "x1-x1",
            Relation::X2X2 => "x2-x2",
            Relation::X1X2 => "x1-x2",
        }
    }

    pub fn statement(self) -> &'static str {
        match self {
            Relation::X1X1 => "[X1(f1,k1), X1(f2,k2)] = X1(-f2*f1' + f1*f2', 0)",
            Relation::X2X2 => "[X2(g1), X2(g2)] = 0",
            Relation::X1X2 => "[X1(f1,k1), X2(g1)] = X2(f1*g1' - g1*(k1 + f1'))",
        }
    }

    /// `(lhs bracket, expected right-hand side)` with formal functions.
    pub fn sides(self) -> Result<(VectorField, VectorField)> {
        let (f1, f2, g1, g2) = (formal("f1"), formal("f2"), formal("g1"), formal("g2"));
        let (k1, k2) = (parameter("k1"), parameter("k2"));
        match self {
            Relation::X1X1 => {
                let lhs = bracket(&x1_field(&f1, &k1), &x1_field(&f2, &k2))?;
                let f = -(&f2 * dx(&f1, 1)) + &f1 * dx(&f2, 1);
                Ok((lhs, x1_field(&f, &Expression::zero())))
            }
            Relation::X2X2 => {
                let lhs = bracket(&x2_field(&g1), &x2_field(&g2))?;
                let zero = VectorField::zero(lhs.system().clone());
                Ok((lhs, zero))
            }
            Relation::X1X2 => {
                let lhs = bracket(&x1_field(&f1, &k1), &x2_field(&g1))?;
                let g = &f1 * dx(&g1, 1) - &g1 * (&k1 + dx(&f1, 1));
                Ok((lhs, x2_field(&g)))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RelationCheck {
    pub relation: Relation,
    pub holds: bool,
    pub residue: VectorField,
}

pub fn verify_relation(relation: Relation) -> Result<RelationCheck> {
    let (lhs, rhs) = relation.sides()?;
    let residue = lhs.sub(&rhs)?;
    Ok(RelationCheck {
        relation,
        holds: residue.is_zero(),
        residue,
    })
}

/// Structure constants `[e_i, e_j] = Σ_k c[i][j][k] e_k` over the rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureConstants {
    labels: Vec<String>,
    c: Vec<Vec<Vector>>,
}

impl StructureConstants {
    pub fn zero(labels: Vec<String>) -> StructureConstants {
        let n = labels.len();
        StructureConstants {
            labels,
            c: vec![vec![vec![Rational::zero(); n]; n]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Sets `[e_i, e_j]` and, by antisymmetry, `[e_j, e_i]`.
    pub fn set(&mut self, i: usize, j: usize, value: Vector) {
        self.c[j][i] = value.iter().map(|v| -v.clone()).collect();
        self.c[i][j] = value;
    }

    pub fn get(&self, i: usize, j: usize) -> &Vector {
        &self.c[i][j]
    }

    /// Bracket of two elements given in basis coordinates.
    pub fn bracket(&self, a: &Vector, b: &Vector) -> Vector {
        let n = self.dim();
        let mut out = vec![Rational::zero(); n];
        for i in 0..n {
            if a[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if b[j].is_zero() {
                    continue;
                }
                let s = &a[i] * &b[j];
                for k in 0..n {
                    if !self.c[i][j][k].is_zero() {
                        out[k] += &s * &self.c[i][j][k];
                    }
                }
            }
        }
        out
    }

    fn unit(&self, i: usize) -> Vector {
        let mut v = vec![Rational::zero(); self.dim()];
        v[i] = Rational::one();
        v
    }

    /// Antisymmetry and the Jacobi identity, checked exactly.
    pub fn check_jacobi(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.c[i][j][k] != -self.c[j][i][k].clone() {
                        return Err(Error::JacobiViolation(i, j, j));
                    }
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (ei, ej, ek) = (self.unit(i), self.unit(j), self.unit(k));
                    let t1 = self.bracket(&self.bracket(&ei, &ej), &ek);
                    let t2 = self.bracket(&self.bracket(&ej, &ek), &ei);
                    let t3 = self.bracket(&self.bracket(&ek, &ei), &ej);
                    let sum: Vector = (0..n).map(|m| &t1[m] + &t2[m] + &t3[m]).collect();
                    if !is_zero_vector(&sum) {
                        return Err(Error::JacobiViolation(i, j, k));
                    }
                }
            }
        }
        Ok(())
    }

    /// Matrix of `ad(a)` with rows indexed by output coordinate.
    fn ad(&self, a: &Vector) -> Vec<Vector> {
        let n = self.dim();
        let columns: Vec<Vector> = (0..n).map(|j| self.bracket(a, &self.unit(j))).collect();
        (0..n).map(|k| (0..n).map(|j| columns[j][k].clone()).collect()).collect()
    }

    /// Killing form `K(a, b) = tr(ad a ∘ ad b)` evaluated on the given vectors.
    pub fn killing_on(&self, vectors: &[Vector]) -> Vec<Vector> {
        let ads: Vec<Vec<Vector>> = vectors.iter().map(|v| self.ad(v)).collect();
        let n = self.dim();
        let trace = |a: &Vec<Vector>, b: &Vec<Vector>| {
            let mut t = Rational::zero();
            for i in 0..n {
                for k in 0..n {
                    t += &a[i][k] * &b[k][i];
                }
            }
            t
        };
        ads.iter().map(|a| ads.iter().map(|b| trace(a, b)).collect()).collect()
    }

    pub fn killing(&self) -> Vec<Vector> {
        let basis: Vec<Vector> = (0..self.dim()).map(|i| self.unit(i)).collect();
        self.killing_on(&basis)
    }

    /// Text table: a `basis:` line followed by `[i,j] -> {k: c, ...}` for each
    /// nonzero bracket with `i < j`.
    pub fn parse(text: &str) -> Result<StructureConstants> {
        let mut sc: Option<StructureConstants> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let bad = |m: &str| Error::Syntax {
                line: lineno + 1,
                column: 1,
                message: m.to_string(),
            };
            if let Some(rest) = line.strip_prefix("basis:") {
                let labels = rest.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                sc = Some(StructureConstants::zero(labels));
                continue;
            }
            let sc = sc.as_mut().ok_or_else(|| bad("table must start with a `basis:` line"))?;
            let (pair, value) = line.split_once("->").ok_or_else(|| bad("expected `[i,j] -> {...}`"))?;
            let pair = pair.trim().strip_prefix('[').and_then(|p| p.strip_suffix(']')).ok_or_else(|| bad("expected `[i,j]`"))?;
            let (i, j) = pair.split_once(',').ok_or_else(|| bad("expected `[i,j]`"))?;
            let index = |s: &str| -> Result<usize> {
                let k: usize = s.trim().parse().map_err(|_| bad("index must be a non-negative integer"))?;
                if k >= sc.dim() {
                    return Err(bad("index out of range"));
                }
                Ok(k)
            };
            let (i, j) = (index(i)?, index(j)?);
            let body = value.trim().strip_prefix('{').and_then(|v| v.strip_suffix('}')).ok_or_else(|| bad("expected `{k: c, ...}`"))?;
            let mut v = vec![Rational::zero(); sc.dim()];
            for entry in body.split(',').filter(|e| !e.trim().is_empty()) {
                let (k, c) = entry.split_once(':').ok_or_else(|| bad("expected `k: c`"))?;
                let c = parse_expression(c)?.as_constant().ok_or_else(|| bad("constant must be rational"))?;
                v[index(k)?] = c;
            }
            sc.set(i, j, v);
        }
        sc.ok_or_else(|| Error::Invalid("empty structure-constant table".into()))
    }
}

impl fmt::Display for StructureConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "basis: {}", self.labels.join(", "))?;
        for i in 0..self.dim() {
            for j in i + 1..self.dim() {
                let entries: Vec<String> = self.c[i][j]
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(k, c)| format!("{k}: {c}"))
                    .collect();
                if !entries.is_empty() {
                    writeln!(f, "[{i},{j}] -> {{{}}}", entries.join(", "))?;
                }
            }
        }
        Ok(())
    }
}

fn field_atoms(fields: &[&VectorField]) -> Vec<Atom> {
    let mut atoms = BTreeSet::new();
    for x in fields {
        for c in x.components() {
            atoms.extend(c.atoms());
        }
    }
    atoms.into_iter().collect()
}

/// Exact structure constants of the span of `generators`, found by solving at
/// random rational points and then confirmed symbolically.
pub fn truncate(generators: &[VectorField], labels: Vec<String>, seed: u64) -> Result<StructureConstants> {
    let m = generators.len();
    assert_eq!(labels.len(), m, "one label per generator");
    for g in generators.iter().skip(1) {
        same_coordinates(&generators[0], g)?;
    }
    let mut brackets = vec![vec![None; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            brackets[i][j] = Some(bracket(&generators[i], &generators[j])?);
        }
    }
    let mut all: Vec<&VectorField> = generators.iter().collect();
    all.extend(brackets.iter().flatten().flatten());
    let atoms = field_atoms(&all);
    let exprs: Vec<&Expression> = all.iter().flat_map(|x| x.components()).collect();
    let mut sampler = Sampler::new(seed);
    let points: Vec<_> = (0..2 * m + 4).map(|_| sampler.point_for(&atoms, &exprs)).collect();
    let feature = |x: &VectorField| -> Result<Vector> {
        let mut v = Vector::new();
        for p in &points {
            let lookup = |a: &Atom| p.get(a).cloned();
            for c in x.components() {
                v.push(c.eval_rational(&lookup)?);
            }
        }
        Ok(v)
    };
    let basis: Vec<Vector> = generators.iter().map(&feature).collect::<Result<_>>()?;
    let r = rank(&basis);
    if r < m {
        return Err(Error::Rank { rank: r, dim: m });
    }
    let mut sc = StructureConstants::zero(labels);
    for i in 0..m {
        for j in i + 1..m {
            let b = brackets[i][j].as_ref().unwrap();
            let coeffs = solve_in_span(&basis, &feature(b)?).ok_or(Error::ClosureViolation(i, j))?;
            let mut combination = VectorField::zero(b.system().clone());
            for (g, c) in generators.iter().zip(&coeffs) {
                if !c.is_zero() {
                    combination = combination.add(&g.scale(&Expression::constant(c.clone())))?;
                }
            }
            if !b.sub(&combination)?.is_zero() {
                return Err(Error::ClosureViolation(i, j));
            }
            sc.set(i, j, coeffs);
        }
    }
    Ok(sc)
}

/// Named finite snapshots of the normal-form algebra.
pub fn snapshot(name: &str) -> Result<(Vec<VectorField>, Vec<String>)> {
    let ctx = ParseContext::default();
    let monomials = |deg: u32| -> Vec<(String, Expression)> {
        (0..=deg)
            .map(|d| {
                let text = match d {
                    0 => "1".to_string(),
                    1 => "x".to_string(),
                    _ => format!("x^{d}"),
                };
                let e = parse_expression_with(&text, &ctx).unwrap();
                (text, e)
            })
            .collect()
    };
    let zero = Expression::zero();
    let x1 = |deg| -> Vec<(VectorField, String)> {
        monomials(deg)
            .into_iter()
            .map(|(t, f)| (x1_field(&f, &zero), format!("X1({t})")))
            .collect()
    };
    let x2 = |deg| -> Vec<(VectorField, String)> {
        monomials(deg)
            .into_iter()
            .map(|(t, g)| (x2_field(&g), format!("X2({t})")))
            .collect()
    };
    let parts = match name {
        "sl2" => x1(2),
        "x2deg2" => x2(2),
        "deg2" => x1(2).into_iter().chain(x2(2)).collect(),
        "deg3" => x1(3).into_iter().chain(x2(3)).collect(),
        _ => {
            return Err(Error::Invalid(format!(
                "unknown snapshot `{name}`; expected sl2, x2deg2, deg2 or deg3"
            )))
        }
    };
    Ok(parts.into_iter().unzip())
}

#[derive(Clone, Debug)]
pub struct LeviReport {
    pub dim: usize,
    /// Radical basis in basis coordinates (echelon form).
    pub radical: Vec<Vector>,
    /// Basis indices spanning the radical, when it is spanned by basis elements.
    pub radical_indices: Option<Vec<usize>>,
    /// Basis indices spanning a complement of the radical.
    pub complement: Vec<usize>,
    /// Dimensions along the derived series of the whole algebra.
    pub derived_series: Vec<usize>,
    /// Dimensions along the derived series of the radical; ends in 0.
    pub radical_derived_series: Vec<usize>,
    pub killing_rank: usize,
    /// Rank of the complement's own Killing form when it is a subalgebra,
    /// otherwise of the restricted Killing form.
    pub complement_killing_rank: usize,
    pub complement_is_subalgebra: bool,
    pub radical_is_ideal: bool,
}

impl LeviReport {
    pub fn complement_nondegenerate(&self) -> bool {
        self.complement_killing_rank == self.complement.len()
    }

    pub fn radical_solvable(&self) -> bool {
        self.radical_derived_series.last() == Some(&0)
    }

    pub fn is_levi_split(&self) -> bool {
        self.radical_solvable()
            && self.radical_is_ideal
            && self.complement_is_subalgebra
            && self.complement_nondegenerate()
            && self.radical.len() + self.complement.len() == self.dim
    }
}

impl fmt::Display for LeviReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension: {}", self.dim)?;
        writeln!(f, "radical dim: {}", self.radical.len())?;
        if let Some(idx) = &self.radical_indices {
            writeln!(f, "radical basis: {idx:?}")?;
        }
        writeln!(f, "radical derived series: {:?}", self.radical_derived_series)?;
        writeln!(f, "complement dim: {}", self.complement.len())?;
        writeln!(f, "complement basis: {:?}", self.complement)?;
        writeln!(f, "complement subalgebra: {}", self.complement_is_subalgebra)?;
        writeln!(f, "complement killing rank: {}", self.complement_killing_rank)?;
        writeln!(f, "radical ideal: {}", self.radical_is_ideal)?;
        writeln!(f, "derived series: {:?}", self.derived_series)?;
        writeln!(f, "killing rank: {}", self.killing_rank)
    }
}

fn derived_step(sc: &StructureConstants, space: &[Vector]) -> Vec<Vector> {
    let mut products = Vec::new();
    for (i, a) in space.iter().enumerate() {
        for b in &space[i + 1..] {
            let p = sc.bracket(a, b);
            if !is_zero_vector(&p) {
                products.push(p);
            }
        }
    }
    span_basis(&products)
}

fn derived_series(sc: &StructureConstants, space: Vec<Vector>) -> Vec<usize> {
    let mut dims = vec![space.len()];
    let mut current = space;
    while !current.is_empty() {
        let next = derived_step(sc, &current);
        if next.len() == current.len() {
            break;
        }
        dims.push(next.len());
        current = next;
    }
    dims
}

fn in_span(basis: &[Vector], v: &Vector) -> bool {
    basis.is_empty() && is_zero_vector(v) || solve_in_span(basis, v).is_some()
}

/// Radical as the Killing-orthogonal complement of the derived algebra, plus a
/// complement spanned by basis elements.
pub fn levi_report(sc: &StructureConstants) -> Result<LeviReport> {
    sc.check_jacobi()?;
    let n = sc.dim();
    let units: Vec<Vector> = (0..n).map(|i| sc.unit(i)).collect();
    let killing = sc.killing();
    let derived = derived_step(sc, &units);
    let constraints: Vec<Vector> = derived.iter().map(|d| linalg::mat_vec(&killing, d)).collect();
    let radical = if constraints.is_empty() {
        units.clone()
    } else {
        span_basis(&nullspace(&constraints, n))
    };
    let members: Vec<usize> = (0..n).filter(|&i| in_span(&radical, &units[i])).collect();
    let radical_indices = (members.len() == radical.len()).then_some(members);

    let mut complement = Vec::new();
    let mut spanned = radical.clone();
    for i in 0..n {
        if spanned.len() == n {
            break;
        }
        let mut candidate = spanned.clone();
        candidate.push(units[i].clone());
        if rank(&candidate) > spanned.len() {
            complement.push(i);
            spanned = span_basis(&candidate);
        }
    }
    let comp_vectors: Vec<Vector> = complement.iter().map(|&i| units[i].clone()).collect();
    let complement_is_subalgebra = complement.iter().all(|&i| {
        complement
            .iter()
            .all(|&j| in_span(&comp_vectors, &sc.get(i, j).clone()))
    });
    let complement_killing_rank = if complement_is_subalgebra && !complement.is_empty() {
        let mut sub = StructureConstants::zero(complement.iter().map(|&i| sc.labels[i].clone()).collect());
        for (a, &i) in complement.iter().enumerate() {
            for (b, &j) in complement.iter().enumerate().skip(a + 1) {
                sub.set(a, b, solve_in_span(&comp_vectors, sc.get(i, j)).unwrap());
            }
        }
        rank(&sub.killing())
    } else {
        rank(&sc.killing_on(&comp_vectors))
    };
    let radical_is_ideal = radical
        .iter()
        .all(|r| units.iter().all(|u| in_span(&radical, &sc.bracket(u, r))));
    Ok(LeviReport {
        dim: n,
        radical_indices,
        complement,
        derived_series: derived_series(sc, units),
        radical_derived_series: derived_series(sc, radical.clone()),
        killing_rank: rank(&killing),
        complement_killing_rank,
        complement_is_subalgebra,
        radical_is_ideal,
        radical,
    })
}
