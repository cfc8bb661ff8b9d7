//! Inversion of small sparse matrices over the rational-function field.

use crate::symcore::ScalarExpr;

/// Dense square matrix of rational functions.
pub type SMatrix = Vec<Vec<ScalarExpr>>;

pub fn zeros(p: usize) -> SMatrix {
    vec![vec![ScalarExpr::zero(); p]; p]
}

pub fn identity(p: usize) -> SMatrix {
    let mut m = zeros(p);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ScalarExpr::one();
    }
    m
}

pub fn sub(a: &SMatrix, b: &SMatrix) -> SMatrix {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.sub(y)).collect())
        .collect()
}

pub fn mul(a: &SMatrix, b: &SMatrix) -> SMatrix {
    let (p, q, r) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![ScalarExpr::zero(); r]; p];
    for i in 0..p {
        for k in 0..q {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..r {
                if !b[k][j].is_zero() {
                    out[i][j] = out[i][j].add(&a[i][k].mul(&b[k][j]));
                }
            }
        }
    }
    out
}

fn weight(e: &ScalarExpr) -> (usize, u32) {
    (e.num().len() + e.den().len(), e.num().total_degree() + e.den().total_degree())
}

/// Gauss-Jordan inverse with Markowitz pivoting (fewest fill-ins first, then
/// the simplest pivot). `None` if the matrix is singular.
pub fn invert(a: &SMatrix) -> Option<SMatrix> {
    let p = a.len();
    let mut aug: Vec<Vec<ScalarExpr>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..p).map(|j| if i == j { ScalarExpr::one() } else { ScalarExpr::zero() }));
            r
        })
        .collect();
    let mut row_done = vec![false; p];
    let mut col_done = vec![false; p];
    let mut pivot_row = vec![0; p];
    for _ in 0..p {
        let row_nnz: Vec<usize> = (0..p)
            .map(|i| (0..p).filter(|&j| !col_done[j] && !aug[i][j].is_zero()).count())
            .collect();
        let col_nnz: Vec<usize> = (0..p)
            .map(|j| (0..p).filter(|&i| !row_done[i] && !aug[i][j].is_zero()).count())
            .collect();
        let mut best: Option<((usize, (usize, u32)), usize, usize)> = None;
        for i in (0..p).filter(|&i| !row_done[i]) {
            for j in (0..p).filter(|&j| !col_done[j]) {
                if aug[i][j].is_zero() {
                    continue;
                }
                let key = ((row_nnz[i] - 1) * (col_nnz[j] - 1), weight(&aug[i][j]));
                if best.as_ref().is_none_or(|(k, _, _)| key < *k) {
                    best = Some((key, i, j));
                }
            }
        }
        let (_, r, c) = best?;
        let inv = aug[r][c].inv().ok()?;
        for x in aug[r].iter_mut() {
            if !x.is_zero() {
                *x = x.mul(&inv);
            }
        }
        let pivot = aug[r].clone();
        for i in 0..p {
            if i == r || aug[i][c].is_zero() {
                continue;
            }
            let f = aug[i][c].clone();
            for (x, y) in aug[i].iter_mut().zip(&pivot) {
                if !y.is_zero() {
                    *x = x.sub(&f.mul(y));
                }
            }
        }
        row_done[r] = true;
        col_done[c] = true;
        pivot_row[c] = r;
    }
    Some((0..p).map(|c| aug[pivot_row[c]][p..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::Var;

    fn v(n: &str) -> ScalarExpr {
        ScalarExpr::var(Var::constant(n))
    }

    #[test]
    fn two_by_two_matches_adjugate() {
        let (a, b, c, d) = (v("a"), v("b"), v("c"), v("d"));
        let m = vec![vec![a.clone(), b.clone()], vec![c.clone(), d.clone()]];
        let inv = invert(&m).unwrap();
        let det = a.mul(&d).sub(&b.mul(&c));
        let want = vec![
            vec![d.div(&det).unwrap(), b.neg().div(&det).unwrap()],
            vec![c.neg().div(&det).unwrap(), a.div(&det).unwrap()],
        ];
        assert_eq!(inv, want);
    }

    #[test]
    fn singular_detected() {
        let a = v("a");
        let m = vec![vec![a.clone(), a.clone()], vec![a.clone(), a]];
        assert!(invert(&m).is_none());
    }

    #[test]
    fn product_is_identity() {
        let (x, y) = (v("x"), v("y"));
        let m = vec![
            vec![ScalarExpr::zero(), x.clone(), ScalarExpr::one()],
            vec![y.clone(), ScalarExpr::one(), ScalarExpr::zero()],
            vec![ScalarExpr::one(), ScalarExpr::zero(), x.mul(&y)],
        ];
        let inv = invert(&m).unwrap();
        assert_eq!(mul(&m, &inv), identity(3));
    }
}
