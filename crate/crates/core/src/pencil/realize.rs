//! Builds a (generally non-minimal) pencil for a matrix expression.

use num_traits::{One, Zero};

use super::block::{Block, Pencil, Selection, SymRef};
use crate::error::{Error, Result};
use crate::symcore::{DimSymbol, MatrixExpr, Rational, ScalarExpr};

struct Raw {
    dims: Vec<DimSymbol>,
    q: Vec<Vec<Block>>,
    u: Vec<Rational>,
    v: Vec<Rational>,
}

fn unit(p: usize, k: usize) -> Vec<Rational> {
    let mut e = vec![Rational::zero(); p];
    e[k] = Rational::one();
    e
}

fn zeros(p: usize) -> Vec<Vec<Block>> {
    vec![vec![Block::zero(); p]; p]
}

impl Raw {
    fn size(&self) -> usize {
        self.dims.len()
    }

    fn atom(s: SymRef) -> Raw {
        let (r, c) = s.shape();
        let mut q = zeros(2);
        q[0][0] = Block::identity();
        q[1][1] = Block::identity();
        q[0][1] = Block::sym(s, ScalarExpr::int(-1));
        Raw { dims: vec![r, c], q, u: unit(2, 0), v: unit(2, 1) }
    }

    fn identity(d: &DimSymbol) -> Raw {
        Raw { dims: vec![d.clone()], q: vec![vec![Block::identity()]], u: unit(1, 0), v: unit(1, 0) }
    }

    fn zero(r: &DimSymbol, c: &DimSymbol) -> Raw {
        let mut q = zeros(2);
        q[0][0] = Block::identity();
        q[1][1] = Block::identity();
        Raw { dims: vec![r.clone(), c.clone()], q, u: unit(2, 0), v: unit(2, 1) }
    }

    fn direct_sum(a: Raw, b: Raw) -> (Vec<DimSymbol>, Vec<Vec<Block>>, usize) {
        let (p1, p) = (a.size(), a.size() + b.size());
        let mut q = zeros(p);
        for (i, row) in a.q.into_iter().enumerate() {
            for (j, blk) in row.into_iter().enumerate() {
                q[i][j] = blk;
            }
        }
        for (i, row) in b.q.into_iter().enumerate() {
            for (j, blk) in row.into_iter().enumerate() {
                q[p1 + i][p1 + j] = blk;
            }
        }
        let mut dims = a.dims;
        dims.extend(b.dims);
        (dims, q, p1)
    }

    fn sum(a: Raw, b: Raw) -> Raw {
        let mut u = a.u.clone();
        u.extend(b.u.iter().cloned());
        let mut v = a.v.clone();
        v.extend(b.v.iter().cloned());
        let (dims, q, _) = Raw::direct_sum(a, b);
        Raw { dims, q, u, v }
    }

    fn product(a: Raw, b: Raw) -> Raw {
        let (p1, p2) = (a.size(), b.size());
        let mut u = a.u.clone();
        u.extend(std::iter::repeat(Rational::zero()).take(p2));
        let mut v = vec![Rational::zero(); p1];
        v.extend(b.v.iter().cloned());
        let (va, ub) = (a.v.clone(), b.u.clone());
        let (dims, mut q, off) = Raw::direct_sum(a, b);
        for (i, vi) in va.iter().enumerate() {
            for (j, uj) in ub.iter().enumerate() {
                if !vi.is_zero() && !uj.is_zero() {
                    q[i][off + j] = Block::scalar(ScalarExpr::rational(-(vi * uj)));
                }
            }
        }
        Raw { dims, q, u, v }
    }

    fn transpose(self) -> Raw {
        let p = self.size();
        let mut q = zeros(p);
        for (i, row) in self.q.iter().enumerate() {
            for (j, blk) in row.iter().enumerate() {
                q[j][i] = blk.transpose();
            }
        }
        Raw { dims: self.dims, q, u: self.v, v: self.u }
    }

    fn inverse(self) -> Raw {
        let p = self.size() + 1;
        let mut q = zeros(p);
        for (j, uj) in self.u.iter().enumerate() {
            if !uj.is_zero() {
                q[0][j + 1] = Block::scalar(ScalarExpr::rational(uj.clone()));
            }
        }
        for (i, vi) in self.v.iter().enumerate() {
            if !vi.is_zero() {
                q[i + 1][0] = Block::scalar(ScalarExpr::rational(-vi.clone()));
            }
        }
        for (i, row) in self.q.into_iter().enumerate() {
            for (j, blk) in row.into_iter().enumerate() {
                q[i + 1][j + 1] = blk;
            }
        }
        let mut dims = vec![self.dims[0].clone()];
        if let Some(k) = self.u.iter().position(|x| !x.is_zero()) {
            dims[0] = self.dims[k].clone();
        }
        dims.extend(self.dims);
        Raw { dims, q, u: unit(p, 0), v: unit(p, 0) }
    }

    fn scale(mut self, c: &ScalarExpr) -> Result<Raw> {
        if let Some(k) = c.constant_value() {
            for x in &mut self.v {
                *x = &*x * &k;
            }
            return Ok(self);
        }
        let inv = c.inv()?;
        for (i, vi) in self.v.iter().enumerate() {
            if !vi.is_zero() {
                for blk in &mut self.q[i] {
                    *blk = blk.scale(&inv);
                }
            }
        }
        Ok(self)
    }
}

fn build(e: &MatrixExpr) -> Result<Raw> {
    use MatrixExpr as M;
    Ok(match e {
        M::Symbol(s) => Raw::atom(SymRef::new(s, false)),
        M::Transpose(x) => match x.as_ref() {
            M::Symbol(s) => Raw::atom(SymRef::new(s, true)),
            other => build(other)?.transpose(),
        },
        M::Identity(d) => Raw::identity(d),
        M::Zero(r, c) => Raw::zero(r, c),
        M::Sum(xs) => {
            let mut it = xs.iter();
            let mut acc = build(it.next().ok_or(Error::SingularSubexpression)?)?;
            for x in it {
                acc = Raw::sum(acc, build(x)?);
            }
            acc
        }
        M::Product(xs) => {
            let mut it = xs.iter();
            let mut acc = build(it.next().ok_or(Error::SingularSubexpression)?)?;
            for x in it {
                acc = Raw::product(acc, build(x)?);
            }
            acc
        }
        M::ScalarMul(c, x) => {
            if c.is_zero() {
                let (r, cc) = x.shape()?;
                Raw::zero(&r, &cc)
            } else {
                build(x)?.scale(c)?
            }
        }
        M::Inverse(x) => {
            if x.simplify().is_zero() {
                return Err(Error::SingularSubexpression);
            }
            build(x)?.inverse()
        }
    })
}

fn finish(raw: Raw) -> Result<Pencil> {
    Pencil::new(raw.dims, raw.q, Selection::Vectors { u: raw.u, v: raw.v })
}

/// The direct compositional pencil, before any size reduction.
pub fn realize_unreduced(e: &MatrixExpr) -> Result<Pencil> {
    let (r, c) = e.shape()?;
    if r != c {
        return Err(Error::NonSquare);
    }
    finish(build(&e.simplify())?)
}

/// Pencil with `u^T Q^{-1} v = e`, reduced by [`eliminate`].
pub fn realize(e: &MatrixExpr) -> Result<Pencil> {
    Ok(eliminate(&realize_unreduced(e)?))
}

/// Result of removing block `k` by a Schur complement, if it stays affine with
/// at most one random symbol per block.
fn schur(q: &[Vec<Block>], k: usize) -> Option<Vec<Vec<Block>>> {
    let pivot = q[k][k].as_scalar()?;
    if pivot.is_zero() {
        return None;
    }
    let pinv = pivot.inv().ok()?;
    let p = q.len();
    let mut out = Vec::with_capacity(p - 1);
    for i in (0..p).filter(|&i| i != k) {
        let mut row = Vec::with_capacity(p - 1);
        for j in (0..p).filter(|&j| j != k) {
            let mut b = q[i][j].clone();
            if !q[i][k].is_zero() && !q[k][j].is_zero() {
                let fill = q[i][k].mul(&q[k][j])?.scale(&pinv);
                b = b.minus(&fill);
                if b.random_terms().count() > 1 {
                    return None;
                }
            }
            row.push(b);
        }
        out.push(row);
    }
    Some(out)
}

fn fill(q: &[Vec<Block>], k: usize) -> usize {
    let p = q.len();
    let rows = (0..p).filter(|&i| i != k && !q[i][k].is_zero()).count();
    let cols = (0..p).filter(|&j| j != k && !q[k][j].is_zero()).count();
    rows * cols
}

/// Repeatedly Schur-eliminates blocks outside the selection whose diagonal is a
/// non-zero multiple of the identity, cheapest fill first.
pub fn eliminate(q: &Pencil) -> Pencil {
    let (mut u, mut v) = q.uv();
    let mut dims = q.dims.clone();
    let mut blocks = q.blocks.clone();
    loop {
        let mut best: Option<(usize, usize, Vec<Vec<Block>>)> = None;
        for k in 0..dims.len() {
            if !u[k].is_zero() || !v[k].is_zero() {
                continue;
            }
            let cost = fill(&blocks, k);
            if best.as_ref().is_some_and(|(_, c, _)| *c <= cost) {
                continue;
            }
            if let Some(next) = schur(&blocks, k) {
                best = Some((k, cost, next));
            }
        }
        let Some((k, _, next)) = best else { break };
        blocks = next;
        dims.remove(k);
        u.remove(k);
        v.remove(k);
    }
    let selection = match &q.selection {
        Selection::Entry(..) if u.iter().filter(|x| !x.is_zero()).count() == 1
            && v.iter().filter(|x| !x.is_zero()).count() == 1
            && u.iter().chain(&v).all(|x| x.is_zero() || x.is_one()) =>
        {
            Selection::Entry(
                u.iter().position(|x| !x.is_zero()).unwrap(),
                v.iter().position(|x| !x.is_zero()).unwrap(),
            )
        }
        _ => Selection::Vectors { u, v },
    };
    Pencil { dims, blocks, selection }
}
