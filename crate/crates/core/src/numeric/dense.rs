//! Dense numeric instances of matrix expressions and pencils.

use std::collections::{BTreeMap, HashMap};

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pencil::Block;
use crate::symcore::{DimSymbol, MatrixExpr, ScalarExpr, VarKind};

/// Concrete sizes, scalar values and matrices for numeric evaluation.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    pub sizes: BTreeMap<String, usize>,
    pub scalars: HashMap<String, f64>,
    pub matrices: BTreeMap<String, Mat<f64>>,
}

impl Instance {
    pub fn size(&self, d: &DimSymbol) -> Result<usize> {
        self.sizes.get(d.name()).copied().ok_or_else(|| Error::Unbound(d.name().to_string()))
    }

    /// Value of a constant or dimension-valued scalar.
    pub fn scalar(&self, e: &ScalarExpr) -> Result<f64> {
        for v in e.vars() {
            let ok = match v.kind() {
                VarKind::Dim => self.sizes.contains_key(v.name()) || self.scalars.contains_key(v.name()),
                _ => self.scalars.contains_key(v.name()),
            };
            if !ok {
                return Err(Error::Unbound(v.name().to_string()));
            }
        }
        Ok(e.eval_f64(&|v| match self.scalars.get(v.name()) {
            Some(x) => *x,
            None => self.sizes[v.name()] as f64,
        }))
    }

    pub fn matrix(&self, name: &str) -> Result<&Mat<f64>> {
        self.matrices.get(name).ok_or_else(|| Error::Unbound(name.to_string()))
    }

    pub fn eval(&self, e: &MatrixExpr) -> Result<Mat<f64>> {
        use MatrixExpr as M;
        Ok(match e {
            M::Symbol(s) => self.matrix(&s.name)?.clone(),
            M::Identity(d) => Mat::identity(self.size(d)?, self.size(d)?),
            M::Zero(r, c) => Mat::zeros(self.size(r)?, self.size(c)?),
            M::Transpose(x) => self.eval(x)?.transpose().to_owned(),
            M::Sum(xs) => {
                let mut acc = self.eval(&xs[0])?;
                for x in &xs[1..] {
                    acc = &acc + &self.eval(x)?;
                }
                acc
            }
            M::Product(xs) => {
                let mut acc = self.eval(&xs[0])?;
                for x in &xs[1..] {
                    acc = &acc * &self.eval(x)?;
                }
                acc
            }
            M::ScalarMul(c, x) => {
                let k = self.scalar(c)?;
                let mut m = self.eval(x)?;
                scale_in_place(&mut m, k);
                m
            }
            M::Inverse(x) => inverse(&self.eval(x)?).ok_or(Error::SingularSubexpression)?,
        })
    }

    pub fn block(&self, b: &Block, rows: &DimSymbol, cols: &DimSymbol) -> Result<Mat<f64>> {
        let (r, c) = (self.size(rows)?, self.size(cols)?);
        let mut m = Mat::<f64>::zeros(r, c);
        if !b.identity.is_zero() {
            let k = self.scalar(&b.identity)?;
            for i in 0..r.min(c) {
                m[(i, i)] = k;
            }
        }
        for (s, coeff) in &b.terms {
            let k = self.scalar(coeff)?;
            let a = self.matrix(&s.symbol.name)?;
            if s.transposed {
                m = &m + &(a.transpose() * faer::Scale(k));
            } else {
                m = &m + &(a * faer::Scale(k));
            }
        }
        Ok(m)
    }

    /// Dense matrix for a block grid, with the row offset of each block.
    pub fn assemble(&self, blocks: &[Vec<Block>], dims: &[DimSymbol]) -> Result<(Mat<f64>, Vec<usize>)> {
        let sizes: Vec<usize> = dims.iter().map(|d| self.size(d)).collect::<Result<_>>()?;
        let mut offsets = vec![0; sizes.len() + 1];
        for (k, s) in sizes.iter().enumerate() {
            offsets[k + 1] = offsets[k] + s;
        }
        let total = offsets[sizes.len()];
        let mut q = Mat::<f64>::zeros(total, total);
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let m = self.block(b, &dims[i], &dims[j])?;
                q.as_mut()
                    .submatrix_mut(offsets[i], offsets[j], sizes[i], sizes[j])
                    .copy_from(&m);
            }
        }
        Ok((q, offsets))
    }
}

pub fn scale_in_place(m: &mut Mat<f64>, k: f64) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= k;
        }
    }
}

/// Inverse by partial-pivot LU; `None` when the result is not finite or the
/// residual shows the matrix is numerically singular.
pub fn inverse(m: &Mat<f64>) -> Option<Mat<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return None;
    }
    if n == 0 {
        return Some(Mat::zeros(0, 0));
    }
    let inv = m.partial_piv_lu().inverse();
    if !inv.as_ref().is_all_finite() {
        return None;
    }
    let resid = &(m * &inv) - &Mat::<f64>::identity(n, n);
    if resid.norm_max() > 1e-6 {
        return None;
    }
    Some(inv)
}

/// IID Gaussian matrix with the given entry standard deviation.
pub fn gaussian<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

/// `M^T M / n + 1e-2 I` for a Gaussian `n x n` matrix `M`.
pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> Mat<f64> {
    let m = gaussian(n, n, 1.0, rng);
    let mut a = m.transpose() * &m;
    scale_in_place(&mut a, 1.0 / n as f64);
    for i in 0..n {
        a[(i, i)] += 1e-2;
    }
    a
}

/// Integer power of a square matrix.
pub fn matrix_power(m: &Mat<f64>, k: u32) -> Mat<f64> {
    let mut out = Mat::<f64>::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(7, &mut rng);
        let inv = inverse(&a).unwrap();
        let e = &(&a * &inv) - &Mat::<f64>::identity(7, 7);
        assert!(e.norm_max() < 1e-10);
        assert!(inverse(&Mat::<f64>::zeros(3, 3)).is_none());
    }
}
