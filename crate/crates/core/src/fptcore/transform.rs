//! Scalarization, symmetrization and the Gaussian block R-transform.

use std::collections::BTreeMap;

use super::inverse::{zeros, SMatrix};
use crate::error::{Error, Result};
use crate::pencil::{Block, PencilSplit};
use crate::symcore::{DimSymbol, ScalarExpr, Var};

/// Entry variance of each random symbol, e.g. `Z -> 1/(n*lambda)`.
pub type VarianceSpec = BTreeMap<String, ScalarExpr>;

/// The pencil with every matrix symbol replaced by a commuting scalar.
#[derive(Clone, Debug)]
pub struct ScalarizedPencil {
    pub q: SMatrix,
    pub f: SMatrix,
    pub qx: SMatrix,
    /// Matrix symbol name to its scalar (`M` and `M'` share one).
    pub symbols: BTreeMap<String, Var>,
}

pub fn scalarize_block(b: &Block) -> ScalarExpr {
    b.terms.iter().fold(b.identity.clone(), |acc, (s, c)| {
        acc.add(&c.mul(&ScalarExpr::var(s.symbol.scalar_var())))
    })
}

fn scalarize_grid(g: &[Vec<Block>]) -> SMatrix {
    g.iter().map(|r| r.iter().map(scalarize_block).collect()).collect()
}

pub fn scalarize(split: &PencilSplit) -> ScalarizedPencil {
    let mut symbols = BTreeMap::new();
    for b in split.f.iter().chain(&split.qx).flatten() {
        for (s, _) in &b.terms {
            symbols.insert(s.symbol.name.clone(), s.symbol.scalar_var());
        }
    }
    let f = scalarize_grid(&split.f);
    let qx = scalarize_grid(&split.qx);
    let q = super::inverse::sub(&f, &qx);
    ScalarizedPencil { q, f, qx, symbols }
}

/// `[[0, M^T], [M, 0]]` at block level, transposing inside each block.
pub fn symmetrize<T: Clone>(m: &[Vec<T>], zero: &T, transpose: impl Fn(&T) -> T) -> Vec<Vec<T>> {
    let p = m.len();
    let mut out = vec![vec![zero.clone(); 2 * p]; 2 * p];
    for i in 0..p {
        for j in 0..p {
            out[p + i][j] = m[i][j].clone();
            out[j][p + i] = transpose(&m[i][j]);
        }
    }
    out
}

pub fn symmetrize_blocks(m: &[Vec<Block>]) -> Vec<Vec<Block>> {
    symmetrize(m, &Block::zero(), Block::transpose)
}

pub fn symmetrize_scalar(m: &SMatrix) -> SMatrix {
    symmetrize(m, &ScalarExpr::zero(), Clone::clone)
}

/// The single random term of a block, if any.
fn random_term(b: &Block, at: (usize, usize)) -> Result<Option<(&crate::pencil::SymRef, &ScalarExpr)>> {
    let mut it = b.random_terms();
    let first = it.next();
    if it.next().is_some() || !b.identity.is_zero() || b.terms.iter().any(|(s, _)| !s.is_random()) {
        return Err(Error::NonGaussianBlock(at.0, at.1));
    }
    Ok(first.map(|(s, c)| (s, c)))
}

/// `R_ij = sum_{k,l} sigma(i,k; l,j) alpha_k G_kl` over a symmetrized random
/// part. `sigma` is non-zero only when blocks `(i,k)` and `(l,j)` hold the same
/// random symbol with opposite orientation, and is then `c1 * c2 * var`.
pub fn r_transform(
    qx_sym: &[Vec<Block>],
    g: &SMatrix,
    var: &VarianceSpec,
    dims: &[DimSymbol],
) -> Result<SMatrix> {
    let p = qx_sym.len();
    let mut nz = Vec::new();
    for (i, row) in qx_sym.iter().enumerate() {
        for (k, b) in row.iter().enumerate() {
            if let Some((s, c)) = random_term(b, (i, k))? {
                if !var.contains_key(&s.symbol.name) {
                    return Err(Error::MissingVariance(s.symbol.name.clone()));
                }
                nz.push((i, k, s, c));
            }
        }
    }
    let mut r = zeros(p);
    for (i, k, s1, c1) in &nz {
        let alpha = dims[*k].scalar();
        for (l, j, s2, c2) in &nz {
            if s1.symbol != s2.symbol || s1.transposed == s2.transposed {
                continue;
            }
            let gkl = &g[*k][*l];
            if gkl.is_zero() {
                continue;
            }
            let sigma = c1.mul(c2).mul(&var[&s1.symbol.name]);
            r[*i][*j] = r[*i][*j].add(&sigma.mul(&alpha).mul(gkl));
        }
    }
    Ok(r)
}

/// Lower-left `p x p` quadrant of a symmetrized matrix.
pub fn desymmetrize(m: &SMatrix) -> SMatrix {
    let p = m.len() / 2;
    (0..p).map(|i| m[p + i][..p].to_vec()).collect()
}

/// Zeroes entries between blocks of different size.
pub fn embed(mut m: SMatrix, dims: &[DimSymbol]) -> SMatrix {
    for (i, row) in m.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            if dims[i] != dims[j] {
                *x = ScalarExpr::zero();
            }
        }
    }
    m
}

/// `[[0, G], [G^T, 0]]`.
pub fn symmetric_g(g: &SMatrix) -> SMatrix {
    let p = g.len();
    let mut out = zeros(2 * p);
    for i in 0..p {
        for j in 0..p {
            out[i][p + j] = g[i][j].clone();
            out[p + j][i] = g[i][j].clone();
        }
    }
    out
}

/// The full R-transform in the pencil's own indices: symmetrize, transform,
/// read off the lower-left quadrant and embed.
pub fn pencil_r(qx: &[Vec<Block>], g: &SMatrix, var: &VarianceSpec, dims: &[DimSymbol]) -> Result<SMatrix> {
    let sym = symmetrize_blocks(qx);
    let mut dims2 = dims.to_vec();
    dims2.extend(dims.iter().cloned());
    let r = r_transform(&sym, &symmetric_g(g), var, &dims2)?;
    Ok(embed(desymmetrize(&r), dims))
}
