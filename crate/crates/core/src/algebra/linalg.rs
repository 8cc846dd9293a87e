//! Small exact linear algebra over the rationals.

use num_traits::{One, Zero};

use crate::expr::Rational;

pub type Vector = Vec<Rational>;

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(rows: &mut Vec<Vector>) -> Vec<usize> {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = Rational::one() / &rows[r][c];
        for v in rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let factor = rows[i][c].clone();
                for j in c..ncols {
                    let d = &factor * &rows[r][j];
                    rows[i][j] = &rows[i][j] - d;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

pub fn rank(rows: &[Vector]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m).len()
}

/// Basis of `{v : M v = 0}`.
pub fn nullspace(rows: &[Vector], ncols: usize) -> Vec<Vector> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m);
    let mut out = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Rational::zero(); ncols];
        v[free] = Rational::one();
        for (row, &p) in m.iter().zip(&pivots) {
            v[p] = -row[free].clone();
        }
        out.push(v);
    }
    out
}

/// Linearly independent subset spanning the same space, in echelon form.
pub fn span_basis(vectors: &[Vector]) -> Vec<Vector> {
    let mut m = vectors.to_vec();
    rref(&mut m);
    m
}

/// Coefficients `c` with `Σ c_i basis_i = target`, if the target is in the span.
/// The basis must be linearly independent.
pub fn solve_in_span(basis: &[Vector], target: &Vector) -> Option<Vector> {
    let n = basis.len();
    let len = target.len();
    let mut rows: Vec<Vector> = (0..len)
        .map(|r| {
            let mut row: Vector = basis.iter().map(|b| b[r].clone()).collect();
            row.push(target[r].clone());
            row
        })
        .collect();
    let pivots = rref(&mut rows);
    if pivots.contains(&n) {
        return None;
    }
    let mut out = vec![Rational::zero(); n];
    for (row, &p) in rows.iter().zip(&pivots) {
        out[p] = row[n].clone();
    }
    Some(out)
}

pub fn mat_vec(m: &[Vector], v: &Vector) -> Vector {
    m.iter()
        .map(|row| row.iter().zip(v).fold(Rational::zero(), |acc, (a, b)| acc + a * b))
        .collect()
}

pub fn is_zero_vector(v: &Vector) -> bool {
    v.iter().all(Zero::is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::rat;

    fn v(xs: &[i64]) -> Vector {
        xs.iter().map(|&x| rat(x)).collect()
    }

    #[test]
    fn rank_and_nullspace() {
        let m = vec![v(&[1, 2, 3]), v(&[2, 4, 6]), v(&[0, 1, 1])];
        assert_eq!(rank(&m), 2);
        let ns = nullspace(&m, 3);
        assert_eq!(ns.len(), 1);
        assert!(is_zero_vector(&mat_vec(&m, &ns[0])));
    }

    #[test]
    fn span_solve() {
        let basis = vec![v(&[1, 0, 1]), v(&[0, 1, 1])];
        assert_eq!(solve_in_span(&basis, &v(&[2, 3, 5])), Some(v(&[2, 3])));
        assert_eq!(solve_in_span(&basis, &v(&[2, 3, 4])), None);
    }
}
